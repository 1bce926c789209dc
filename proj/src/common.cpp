#include "tokensel/common.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace tokensel {

std::vector<int> sample_without_replacement(int n, int m, SplitMix64& rng) {
    if (n < 0 || m < 0 || m > n)
        throw ArgumentError("sample_without_replacement: need 0 <= m <= n");
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < m; ++i) {
        const int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(m);
    return pool;
}

int thread_cap() {
    static const int cap = [] {
        if (const char* s = std::getenv("GTH_THREADS")) {
            const int v = std::atoi(s);
            if (v >= 1) return v;
        }
        const unsigned hc = std::thread::hardware_concurrency();
        return hc ? static_cast<int>(hc) : 1;
    }();
    return cap;
}

void parallel_tiles(std::int64_t n, std::int64_t tile,
                    const std::function<void(std::int64_t, std::int64_t)>& body) {
    if (n <= 0) return;
    if (tile <= 0) throw ArgumentError("parallel_tiles: tile must be positive");
    const std::int64_t n_tiles = (n + tile - 1) / tile;
    const int workers = static_cast<int>(std::min<std::int64_t>(thread_cap(), n_tiles));
    if (workers <= 1) {
        for (std::int64_t t = 0; t < n_tiles; ++t)
            body(t * tile, std::min(n, (t + 1) * tile));
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run = [&] {
        for (;;) {
            const std::int64_t t = next.fetch_add(1);
            if (t >= n_tiles || failed.load()) return;
            try {
                body(t * tile, std::min(n, (t + 1) * tile));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

double parse_strict_double(const std::string& token, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        throw ValueError(where + ": not a number: '" + token + "'");
    }
    if (used != token.size())
        throw ValueError(where + ": trailing garbage in number: '" + token + "'");
    if (!std::isfinite(v)) throw ValueError(where + ": non-finite value: '" + token + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

namespace {

constexpr char kGthfMagic[4] = {'G', 'T', 'H', 'F'};
constexpr std::uint32_t kGthfVersion = 1;

std::uint32_t read_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Matrix load_gthf_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open file");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kGthfMagic, 4) != 0)
        throw FormatError(path + ": bad magic, expected GTHF");
    const std::uint32_t version = read_u32_le(in);
    if (!in || version != kGthfVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version));
    const std::uint32_t rows = read_u32_le(in);
    const std::uint32_t cols = read_u32_le(in);
    if (!in || rows == 0 || cols == 0) throw FormatError(path + ": empty matrix header");
    Matrix values(static_cast<int>(rows), static_cast<int>(cols));
    for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c) {
            const std::uint32_t bits = read_u32_le(in);
            if (!in) throw FormatError(path + ": truncated payload");
            float f;
            std::memcpy(&f, &bits, 4);
            values(static_cast<int>(r), static_cast<int>(c)) = static_cast<double>(f);
        }
    return values;
}

void save_gthf_matrix(const std::string& path, const Matrix& values) {
    if (values.rows() < 1 || values.cols() < 1)
        throw ArgumentError("save_gthf_matrix: matrix must be nonempty");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open file for writing");
    out.write(kGthfMagic, 4);
    write_u32_le(out, kGthfVersion);
    write_u32_le(out, static_cast<std::uint32_t>(values.rows()));
    write_u32_le(out, static_cast<std::uint32_t>(values.cols()));
    for (Eigen::Index r = 0; r < values.rows(); ++r)
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            const float f = static_cast<float>(values(r, c));
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            write_u32_le(out, bits);
        }
    if (!out) throw FormatError(path + ": write failed");
}

}  // namespace tokensel
