#include <doctest.h>

#include <fstream>

#include "glyphda/archive.hpp"
#include "glyphda/errors.hpp"
#include "test_support.hpp"

using namespace glyphda;

namespace {

Archive sample() {
    Archive a;
    a.metadata["format"] = "test";
    a.metadata["iteration"] = "12";
    a.add("w", torch::randn({3, 4}));
    a.add("d", torch::randn({2}, torch::kDouble));
    a.add("i", torch::arange(5, torch::kLong));
    a.add("b", torch::tensor({1, 2, 250}, torch::kUInt8));
    a.add("scalar", torch::tensor(3.5f));
    a.add("empty", torch::zeros({0, 7}));
    return a;
}

std::string what(const std::function<void()>& f) {
    try {
        f();
    } catch (const CheckpointError& e) {
        return e.what();
    }
    return "<no error>";
}

} // namespace

TEST_CASE("archives round-trip exactly") {
    const auto a = sample();
    const auto bytes = encode_archive(a);
    const auto b = decode_archive(bytes);
    CHECK(b.metadata == a.metadata);
    REQUIRE(b.arrays.size() == a.arrays.size());
    for (std::size_t i = 0; i < a.arrays.size(); ++i) {
        CHECK(b.arrays[i].first == a.arrays[i].first);
        CHECK(b.arrays[i].second.dtype() == a.arrays[i].second.dtype());
        CHECK(torch::equal(b.arrays[i].second, a.arrays[i].second));
    }
    CHECK(encode_archive(b) == bytes);

    test::TempDir dir;
    write_archive(dir / "a.gdar", a);
    CHECK(encode_archive(read_archive(dir / "a.gdar")) == bytes);
    CHECK_FALSE(std::filesystem::exists(dir / "a.gdar.tmp"));
}

TEST_CASE("corruption is detected") {
    const auto bytes = encode_archive(sample());
    for (std::size_t pos : {std::size_t{0}, std::size_t{6}, bytes.size() / 2, bytes.size() - 1}) {
        auto broken = bytes;
        broken[pos] = static_cast<char>(broken[pos] ^ 0x5a);
        CAPTURE(pos);
        CHECK_THROWS_AS(decode_archive(broken), CheckpointError);
    }
    CHECK_THROWS_AS(decode_archive(bytes.substr(0, bytes.size() - 40)), CheckpointError);
    CHECK_THROWS_AS(decode_archive(""), CheckpointError);
    CHECK(what([&] { decode_archive(bytes.substr(0, 10) + bytes.substr(11)); }).find("corrupt") != std::string::npos);

    test::TempDir dir;
    CHECK_THROWS_AS(read_archive(dir / "absent.gdar"), CheckpointError);
}

TEST_CASE("lookup and assignment name the offending array") {
    const auto a = sample();
    CHECK(what([&] { a.at("nope"); }).find("nope") != std::string::npos);
    CHECK(what([&] { a.meta("nope"); }).find("nope") != std::string::npos);
    CHECK(a.meta("iteration") == "12");

    auto w = torch::zeros({3, 4});
    assign_arrays(a, {{"w", w}});
    CHECK(torch::equal(w, a.at("w")));

    auto wrong = torch::zeros({4, 3});
    const auto msg = what([&] { assign_arrays(a, {{"w", wrong}}); });
    CHECK(msg.find("'w'") != std::string::npos);
    CHECK(msg.find("(3,4)") != std::string::npos);
    CHECK(what([&] { assign_arrays(a, {{"w", w}}, "net."); }).find("net.w") != std::string::npos);
}
