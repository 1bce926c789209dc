#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "tokensel/common.hpp"

using namespace tokensel;

TEST_CASE("splitmix64 is deterministic and matches reference values") {
    SplitMix64 a(1234);
    SplitMix64 b(1234);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

    // Reference outputs of splitmix64 for seed 0 (first three draws).
    SplitMix64 r(0);
    CHECK(r.next() == 0xE220A8397B1DCDAFull);
    CHECK(r.next() == 0x6E789E6AA1B965F4ull);
    CHECK(r.next() == 0x06C45D188009454Full);
}

TEST_CASE("next_below stays in range and rejects zero") {
    SplitMix64 rng(7);
    for (int i = 0; i < 1000; ++i) CHECK(rng.next_below(17) < 17);
    CHECK_THROWS_AS(rng.next_below(0), ArgumentError);
}

TEST_CASE("next_double lies in [0, 1)") {
    SplitMix64 rng(42);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.next_double();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("sample_without_replacement draws distinct indices") {
    SplitMix64 rng(5);
    const auto picks = sample_without_replacement(10, 6, rng);
    CHECK(picks.size() == 6);
    CHECK(std::set<int>(picks.begin(), picks.end()).size() == 6);
    for (int p : picks) {
        CHECK(p >= 0);
        CHECK(p < 10);
    }
    CHECK_THROWS_AS(sample_without_replacement(3, 4, rng), ArgumentError);
}

TEST_CASE("parallel_tiles covers the range exactly once") {
    std::vector<int> hits(1000, 0);
    parallel_tiles(1000, 64, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) hits[static_cast<std::size_t>(i)] += 1;
    });
    for (int h : hits) CHECK(h == 1);
}

TEST_CASE("parallel_tiles propagates exceptions") {
    CHECK_THROWS_AS(parallel_tiles(100, 8,
                                   [](std::int64_t b, std::int64_t) {
                                       if (b >= 32) throw ValueError("boom");
                                   }),
                    ValueError);
}

TEST_CASE("gthf matrix round-trip") {
    Matrix m(2, 3);
    m << 1.0, 2.5, -3.25, 0.125, 4.0, -8.0;
    const std::string path = "test_gthf_roundtrip.bin";
    save_gthf_matrix(path, m);
    const Matrix back = load_gthf_matrix(path);
    CHECK(back.rows() == 2);
    CHECK(back.cols() == 3);
    CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);  // values chosen f32-exact
    std::remove(path.c_str());
}

TEST_CASE("gthf loader rejects malformed containers") {
    const std::string path = "test_gthf_bad.bin";
    SUBCASE("wrong magic") {
        std::ofstream(path, std::ios::binary) << "NOPE" << std::string(12, '\0');
        CHECK_THROWS_AS(load_gthf_matrix(path), FormatError);
    }
    SUBCASE("truncated payload") {
        Matrix m(4, 4);
        m.setOnes();
        save_gthf_matrix(path, m);
        std::error_code ec;
        std::filesystem::resize_file(path, 4 + 12 + 8, ec);
        REQUIRE_FALSE(ec);
        CHECK_THROWS_AS(load_gthf_matrix(path), FormatError);
    }
    std::remove(path.c_str());
}
