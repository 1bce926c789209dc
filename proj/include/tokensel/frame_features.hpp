#pragma once

#include <string>
#include <vector>

#include "tokensel/common.hpp"

namespace tokensel {

/// Per-frame descriptor matrix (one row per frame). Rows must be finite and
/// nonzero; they stand in for image-level place-recognition features.
struct FrameFeatureMatrix {
    Matrix values;  // n_frames x dim

    int n_frames() const { return static_cast<int>(values.rows()); }
    int dim() const { return static_cast<int>(values.cols()); }

    /// Validates the invariants (finite entries, no all-zero row) and wraps.
    static FrameFeatureMatrix create(Matrix values);
};

/// N x N cosine-similarity matrix between row-normalized frame features.
/// Symmetric, unit diagonal, entries in [-1, 1].
struct CovisibilityMatrix {
    Matrix values;

    int n_frames() const { return static_cast<int>(values.rows()); }

    static CovisibilityMatrix create(Matrix values);
};

/// N x N cosine-distance matrix. Symmetric, zero diagonal, entries in [0, 2].
struct DistanceMatrix {
    Matrix values;

    int n_frames() const { return static_cast<int>(values.rows()); }

    static DistanceMatrix create(Matrix values);
};

enum class FeatureFormat { csv, binary };

/// Reads frame features from disk.
///
/// CSV layout: header `frame_id,f0,...,f{d-1}`, then one row per frame with
/// frame_id running 0..N-1 in order.
/// Binary layout: magic "GTHF", u32 LE version (= 1), u32 LE n_frames,
/// u32 LE dim, then n_frames*dim f32 LE values row-major.
FrameFeatureMatrix load_features(const std::string& path, FeatureFormat format);

/// Writes the binary layout described above (f64 values narrowed to f32).
void save_features_binary(const std::string& path, const FrameFeatureMatrix& features);

/// Returns a copy with every row scaled to unit L2 norm.
/// Throws ValueError naming the frame index if a row has zero norm.
FrameFeatureMatrix normalize_rows(const FrameFeatureMatrix& features);

/// 1 - <a, b> / (|a| |b|), in [0, 2]. Throws ValueError on a zero vector.
double cosine_distance(const Vector& a, const Vector& b);

/// C = F~ F~^T with F~ the row-normalized features. The diagonal is set to
/// exactly 1 and off-diagonal entries are clamped to [-1, 1] against rounding.
CovisibilityMatrix covisibility_matrix(const FrameFeatureMatrix& features);

/// D[i][j] = max(C) - C[i][j]. With a unit diagonal this equals the cosine
/// distance of the normalized features, and the diagonal becomes exactly 0.
DistanceMatrix distance_from_covisibility(const CovisibilityMatrix& covisibility);

/// Deterministic 2-D test features: unit vectors at the given angles (degrees).
FrameFeatureMatrix features_from_angles(const std::vector<double>& angles_deg);

/// Seeded random unit vectors (uniform components, then normalized).
FrameFeatureMatrix random_unit_features(int n_frames, int dim, std::uint64_t seed);

}  // namespace tokensel
