#include "glyphda/cli.hpp"

int main(int argc, char** argv) { return glyphda::cli::run(argc, argv); }
