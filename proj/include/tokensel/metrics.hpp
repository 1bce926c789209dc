#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tokensel/common.hpp"

namespace tokensel {

/// Camera-to-world pose: rotation must be orthonormal (1e-6) with det +1;
/// the camera center is the translation.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

struct Trajectory {
    std::vector<Pose> poses;

    int size() const { return static_cast<int>(poses.size()); }

    static Trajectory create(std::vector<Pose> poses);
};

struct PointCloud {
    std::vector<Eigen::Vector3d> points;
    std::optional<std::vector<Eigen::Vector3d>> normals;  // unit length (1e-6)

    static PointCloud create(std::vector<Eigen::Vector3d> points,
                             std::optional<std::vector<Eigen::Vector3d>> normals = std::nullopt);
};

/// Ground-truth/predicted depth grids with a validity mask; masked entries
/// must be positive and finite on both sides.
struct DepthPair {
    Matrix gt;
    Matrix pred;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid;

    static DepthPair create(Matrix gt, Matrix pred,
                            Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid);
    /// Convenience mask: pixels where gt is finite and positive.
    static DepthPair from_depths(Matrix gt, Matrix pred);
};

enum class AlignmentMode { similarity, rigid };

struct AlignmentResult {
    Trajectory aligned;          // estimate mapped onto the ground-truth frame
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    bool degenerate = false;     // collinear centers: rotation not unique
};

/// Closed-form least-squares fit of scale (similarity mode), rotation, and
/// translation mapping the estimated camera centers onto the ground truth.
/// Needs >= 3 poses; collinear centers are flagged, not rejected.
AlignmentResult align_trajectories(const Trajectory& gt, const Trajectory& est,
                                   AlignmentMode mode = AlignmentMode::similarity);

/// RMSE of camera-center distances (meters); inputs must be pre-aligned.
double ate(const Trajectory& gt, const Trajectory& est_aligned);

struct RpeResult {
    double rot_deg = 0.0;
    double trans = 0.0;
};

/// Mean relative-pose error over frame pairs (i, i+delta): rotation as the
/// geodesic angle in degrees, translation as the vector-difference norm.
RpeResult rpe(const Trajectory& gt, const Trajectory& est, int delta = 1);

struct CloudMetrics {
    double accuracy = 0.0;      // mean over pred of nearest-gt distance
    double completeness = 0.0;  // mean over gt of nearest-pred distance
    std::optional<double> nc_mean;
    std::optional<double> nc_median;
};

/// Exhaustive nearest-neighbor cloud comparison. Normal consistency is the
/// cosine between each predicted normal and its nearest ground-truth normal,
/// reported only when both clouds carry normals.
CloudMetrics cloud_metrics(const PointCloud& pred, const PointCloud& gt);

struct DepthMetrics {
    double abs_rel = 0.0;
    double sq_rel = 0.0;
    double rmse = 0.0;
    double log_rmse = 0.0;
    double delta_125 = 0.0;  // fraction with max(gt/pred, pred/gt) < 1.25
};

DepthMetrics depth_metrics(const DepthPair& pair);

/// Optional pre-step: rescales pred by median(gt) / median(pred) over the
/// valid pixels.
DepthPair median_scale(const DepthPair& pair);

/// CSV with header idx,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz and idx
/// running 0..N-1 in order.
Trajectory load_trajectory_csv(const std::string& path);

/// CSV with header x,y,z or x,y,z,nx,ny,nz.
PointCloud load_cloud_csv(const std::string& path);

enum class DepthFileFormat { csv, binary };

/// Headerless CSV grid of equal-width rows, or the GTHF binary container.
Matrix load_depth_grid(const std::string& path, DepthFileFormat format);

}  // namespace tokensel
