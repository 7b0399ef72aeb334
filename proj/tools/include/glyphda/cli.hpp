#pragma once

#include <string>
#include <vector>

namespace glyphda::cli {

// Exit-code contract of every subcommand.
enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kIo = 3,
    kNumeric = 4,
    kCheckpoint = 5,
};

/// Runs one command line (argv[0] is the program name). Machine-readable
/// key=value lines go to stdout, human tables and diagnostics to stderr.
int run(int argc, const char* const* argv);

// Convenience form; `args` excludes the program name.
int run(const std::vector<std::string>& args);

} // namespace glyphda::cli
