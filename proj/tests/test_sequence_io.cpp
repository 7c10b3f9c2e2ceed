#include "skelrefine/errors.hpp"
#include "skelrefine/sequence_io.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace skelrefine;

TEST_SUITE("sequence_io") {

TEST_CASE("jsonl round trip is exact") {
    std::mt19937_64 rng(9);
    auto seq = skelrefine::testing::random_sequence(rng, 17);
    seq.frame_rate_hz = 25.0;
    std::stringstream ss;
    write_sequence(ss, seq);
    const auto back = read_sequence(ss);
    REQUIRE(back.size() == seq.size());
    CHECK(back.frame_rate_hz == 25.0);
    CHECK(back.encoding() == Encoding::Absolute);
    for (std::size_t t = 0; t < seq.size(); ++t) CHECK(back.frames[t].coords == seq.frames[t].coords);
}

TEST_CASE("relative encoding survives a file round trip") {
    std::mt19937_64 rng(10);
    const auto seq = to_relative(skelrefine::testing::random_sequence(rng, 4));
    const auto path = std::filesystem::temp_directory_path() / "skelrefine_io_test.jsonl";
    save_sequence(path, seq);
    const auto back = load_sequence(path);
    std::filesystem::remove(path);
    CHECK(back.encoding() == Encoding::RelativeToParent);
    CHECK(back.frames[3].coords == seq.frames[3].coords);
}

TEST_CASE("malformed input is rejected") {
    auto read = [](const std::string& text) {
        std::istringstream is(text);
        return read_sequence(is);
    };
    const std::string header = "{\"frame_rate_hz\": 30, \"encoding\": \"absolute\"}\n";
    CHECK_THROWS_AS(read(""), ParseError);
    CHECK_THROWS_AS(read(header), InsufficientFramesError);
    CHECK_THROWS_AS(read(header + "{\"t\": 0, \"joints\": [1, 2, 3]}\n"), DimensionError);
    CHECK_THROWS_AS(read(header + "not json\n"), ParseError);
    CHECK_THROWS_AS(read("{\"frame_rate_hz\": 30, \"encoding\": \"polar\"}\n"), EncodingError);
    CHECK_THROWS_AS(load_sequence("/nonexistent/skelrefine.jsonl"), DataError);
}

TEST_CASE("csv export has a header and 49 columns") {
    std::mt19937_64 rng(12);
    const auto seq = skelrefine::testing::random_sequence(rng, 3);
    std::ostringstream os;
    write_sequence_csv(os, seq);
    std::istringstream is(os.str());
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 48);
        ++rows;
    }
    CHECK(rows == 4);
}

}
