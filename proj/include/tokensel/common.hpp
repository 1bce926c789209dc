#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tokensel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base type for all engine errors. Subtypes distinguish how an input is bad.
class Error : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An argument is out of range or inconsistent with other arguments.
class ArgumentError : public Error {
    using Error::Error;
};

/// A value violates a domain invariant (NaN entry, zero row, bad rotation, ...).
class ValueError : public Error {
    using Error::Error;
};

/// A file or serialized blob does not match its declared format.
class FormatError : public Error {
    using Error::Error;
};

/// Shapes disagree (ragged rows, mismatched matrix sizes).
class DimensionError : public Error {
    using Error::Error;
};

/// Portable 64-bit PRNG (splitmix64). All seeded behavior in the engine is
/// defined in terms of this generator so results are reproducible across
/// platforms and languages. Update constants are documented in the README.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform draw from [0, n). Uses plain modulo; the bias is below 2^-50
    /// for any n this engine passes and the mapping stays portable.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw ArgumentError("next_below: n must be positive");
        return next() % n;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

private:
    std::uint64_t state_;
};

/// Draws m distinct indices from [0, n) by partial Fisher-Yates shuffle.
std::vector<int> sample_without_replacement(int n, int m, SplitMix64& rng);

/// Worker-thread cap: GTH_THREADS if set (>= 1), else hardware concurrency.
int thread_cap();

/// Runs body(begin, end) over fixed-size tiles of [0, n). Tile boundaries
/// depend only on n and tile, never on the thread count, so per-tile results
/// are bit-identical no matter how many workers run.
void parallel_tiles(std::int64_t n, std::int64_t tile,
                    const std::function<void(std::int64_t, std::int64_t)>& body);

/// Fixed decimal formatting for CSV reports ("%.12g").
std::string format_double(double v);

/// Strict numeric parse: the whole token must be a finite number.
/// `where` prefixes error messages (conventionally "file:line").
double parse_strict_double(const std::string& token, const std::string& where);

std::vector<std::string> split_csv_line(const std::string& line);

std::string strip_cr(std::string line);

/// Binary 2-D matrix container: magic "GTHF", u32 LE version (= 1),
/// u32 LE rows, u32 LE cols, then rows*cols f32 LE values row-major.
Matrix load_gthf_matrix(const std::string& path);
void save_gthf_matrix(const std::string& path, const Matrix& values);

}  // namespace tokensel
