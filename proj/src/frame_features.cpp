#include "tokensel/frame_features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tokensel {

namespace {

constexpr double kMatrixTol = 1e-9;

FrameFeatureMatrix load_features_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open file");

    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ":1: empty file");
    const auto header = split_csv_line(strip_cr(line));
    if (header.size() < 2 || header[0] != "frame_id")
        throw FormatError(path + ":1: expected header 'frame_id,f0,...'");
    const int dim = static_cast<int>(header.size()) - 1;
    for (int c = 0; c < dim; ++c) {
        if (header[c + 1] != "f" + std::to_string(c))
            throw FormatError(path + ":1: expected column name 'f" + std::to_string(c) +
                              "', got '" + header[c + 1] + "'");
    }

    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        const auto cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != dim + 1)
            throw DimensionError(where + ": expected " + std::to_string(dim + 1) +
                                 " columns, got " + std::to_string(cells.size()));
        const double id = parse_strict_double(cells[0], where);
        if (id != static_cast<double>(rows.size()))
            throw FormatError(where + ": frame_id must be " + std::to_string(rows.size()) +
                              ", got '" + cells[0] + "'");
        std::vector<double> row(dim);
        for (int c = 0; c < dim; ++c) row[c] = parse_strict_double(cells[c + 1], where);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(path + ": no feature rows");

    Matrix values(static_cast<int>(rows.size()), dim);
    for (int r = 0; r < values.rows(); ++r)
        for (int c = 0; c < dim; ++c) values(r, c) = rows[r][c];
    return FrameFeatureMatrix::create(std::move(values));
}

}  // namespace

FrameFeatureMatrix FrameFeatureMatrix::create(Matrix values) {
    if (values.rows() < 1 || values.cols() < 1)
        throw DimensionError("feature matrix must have at least one row and column");
    for (int r = 0; r < values.rows(); ++r) {
        if (!values.row(r).allFinite())
            throw ValueError("feature row " + std::to_string(r) + " has a non-finite entry");
        if (values.row(r).norm() == 0.0)
            throw ValueError("feature row " + std::to_string(r) + " is all-zero");
    }
    return FrameFeatureMatrix{std::move(values)};
}

CovisibilityMatrix CovisibilityMatrix::create(Matrix values) {
    if (values.rows() != values.cols() || values.rows() < 1)
        throw DimensionError("covisibility matrix must be square and nonempty");
    for (int i = 0; i < values.rows(); ++i) {
        if (std::abs(values(i, i) - 1.0) > kMatrixTol)
            throw ValueError("covisibility diagonal entry " + std::to_string(i) + " is not 1");
        for (int j = 0; j < values.cols(); ++j) {
            const double v = values(i, j);
            if (!std::isfinite(v) || v < -1.0 || v > 1.0)
                throw ValueError("covisibility entry out of [-1, 1]");
            if (std::abs(v - values(j, i)) > kMatrixTol)
                throw ValueError("covisibility matrix is not symmetric");
        }
    }
    return CovisibilityMatrix{std::move(values)};
}

DistanceMatrix DistanceMatrix::create(Matrix values) {
    if (values.rows() != values.cols() || values.rows() < 1)
        throw DimensionError("distance matrix must be square and nonempty");
    for (int i = 0; i < values.rows(); ++i) {
        if (std::abs(values(i, i)) > kMatrixTol)
            throw ValueError("distance diagonal entry " + std::to_string(i) + " is not 0");
        for (int j = 0; j < values.cols(); ++j) {
            const double v = values(i, j);
            if (!std::isfinite(v) || v < -kMatrixTol || v > 2.0 + kMatrixTol)
                throw ValueError("distance entry out of [0, 2]");
            if (std::abs(v - values(j, i)) > kMatrixTol)
                throw ValueError("distance matrix is not symmetric");
        }
    }
    return DistanceMatrix{std::move(values)};
}

FrameFeatureMatrix load_features(const std::string& path, FeatureFormat format) {
    switch (format) {
        case FeatureFormat::csv: return load_features_csv(path);
        case FeatureFormat::binary: return FrameFeatureMatrix::create(load_gthf_matrix(path));
    }
    throw ArgumentError("unknown feature format");
}

void save_features_binary(const std::string& path, const FrameFeatureMatrix& features) {
    save_gthf_matrix(path, features.values);
}

FrameFeatureMatrix normalize_rows(const FrameFeatureMatrix& features) {
    Matrix out = features.values;
    for (int r = 0; r < out.rows(); ++r) {
        const double norm = out.row(r).norm();
        if (norm == 0.0)
            throw ValueError("cannot normalize all-zero feature row " + std::to_string(r));
        out.row(r) /= norm;
    }
    return FrameFeatureMatrix{std::move(out)};
}

double cosine_distance(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw DimensionError("cosine_distance: vectors have different dimensions");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw ValueError("cosine_distance: zero vector");
    const double cosine = a.dot(b) / (na * nb);
    return 1.0 - std::clamp(cosine, -1.0, 1.0);
}

CovisibilityMatrix covisibility_matrix(const FrameFeatureMatrix& features) {
    const FrameFeatureMatrix normalized = normalize_rows(features);
    const int n = normalized.n_frames();
    Matrix c(n, n);
    // Fill the upper triangle and mirror so symmetry is exact, not just
    // within rounding. Unit diagonal by construction of normalized rows.
    for (int i = 0; i < n; ++i) {
        c(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            const double dot = normalized.values.row(i).dot(normalized.values.row(j));
            const double clamped = std::clamp(dot, -1.0, 1.0);
            c(i, j) = clamped;
            c(j, i) = clamped;
        }
    }
    return CovisibilityMatrix{std::move(c)};
}

DistanceMatrix distance_from_covisibility(const CovisibilityMatrix& covisibility) {
    const double max_c = covisibility.values.maxCoeff();
    Matrix d = (max_c - covisibility.values.array()).matrix();
    return DistanceMatrix{std::move(d)};
}

FrameFeatureMatrix features_from_angles(const std::vector<double>& angles_deg) {
    if (angles_deg.empty()) throw ArgumentError("features_from_angles: need at least one angle");
    Matrix values(static_cast<int>(angles_deg.size()), 2);
    for (int i = 0; i < values.rows(); ++i) {
        const double rad = angles_deg[static_cast<std::size_t>(i)] * M_PI / 180.0;
        values(i, 0) = std::cos(rad);
        values(i, 1) = std::sin(rad);
    }
    return FrameFeatureMatrix{std::move(values)};
}

FrameFeatureMatrix random_unit_features(int n_frames, int dim, std::uint64_t seed) {
    if (n_frames < 1 || dim < 1)
        throw ArgumentError("random_unit_features: n_frames and dim must be positive");
    SplitMix64 rng(seed);
    Matrix values(n_frames, dim);
    for (int r = 0; r < n_frames; ++r) {
        double norm = 0.0;
        do {
            for (int c = 0; c < dim; ++c) values(r, c) = rng.next_uniform(-1.0, 1.0);
            norm = values.row(r).norm();
        } while (norm < 1e-6);
        values.row(r) /= norm;
    }
    return FrameFeatureMatrix{std::move(values)};
}

}  // namespace tokensel
