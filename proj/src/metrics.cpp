#include "tokensel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace tokensel {

namespace {

constexpr double kRotationTol = 1e-6;
constexpr double kRadToDeg = 180.0 / M_PI;

void check_rotation(const Eigen::Matrix3d& r, int index) {
    const Eigen::Matrix3d gram = r.transpose() * r;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > kRotationTol)
        throw ValueError("pose " + std::to_string(index) + ": rotation is not orthonormal");
    if (std::abs(r.determinant() - 1.0) > kRotationTol)
        throw ValueError("pose " + std::to_string(index) + ": rotation determinant is not +1");
}

void check_same_length(const Trajectory& a, const Trajectory& b, const char* who) {
    if (a.size() != b.size())
        throw ArgumentError(std::string(who) + ": trajectories have different lengths");
    if (a.size() == 0) throw ArgumentError(std::string(who) + ": empty trajectory");
}

/// Nearest-neighbor distance (and index) from each query to the target set.
/// Parallel over queries; each slot is written once, so the result does not
/// depend on the thread count.
void nearest_distances(const std::vector<Eigen::Vector3d>& queries,
                       const std::vector<Eigen::Vector3d>& targets, std::vector<double>& dist,
                       std::vector<int>* nearest_index) {
    dist.assign(queries.size(), 0.0);
    if (nearest_index) nearest_index->assign(queries.size(), 0);
    parallel_tiles(static_cast<std::int64_t>(queries.size()), 256,
                   [&](std::int64_t begin, std::int64_t end) {
                       for (std::int64_t i = begin; i < end; ++i) {
                           double best = std::numeric_limits<double>::infinity();
                           int best_j = 0;
                           for (std::size_t j = 0; j < targets.size(); ++j) {
                               const double d =
                                   (queries[static_cast<std::size_t>(i)] - targets[j]).norm();
                               if (d < best) {
                                   best = d;
                                   best_j = static_cast<int>(j);
                               }
                           }
                           dist[static_cast<std::size_t>(i)] = best;
                           if (nearest_index) (*nearest_index)[static_cast<std::size_t>(i)] = best_j;
                       }
                   });
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

Pose relative_pose(const Pose& a, const Pose& b) {
    Pose rel;
    rel.rotation = a.rotation.transpose() * b.rotation;
    rel.translation = a.rotation.transpose() * (b.translation - a.translation);
    return rel;
}

double rotation_angle_deg(const Eigen::Matrix3d& r) {
    const double cos_angle = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(cos_angle) * kRadToDeg;
}

}  // namespace

Trajectory Trajectory::create(std::vector<Pose> poses) {
    for (std::size_t i = 0; i < poses.size(); ++i) {
        if (!poses[i].rotation.allFinite() || !poses[i].translation.allFinite())
            throw ValueError("pose " + std::to_string(i) + ": non-finite entry");
        check_rotation(poses[i].rotation, static_cast<int>(i));
    }
    return Trajectory{std::move(poses)};
}

PointCloud PointCloud::create(std::vector<Eigen::Vector3d> points,
                              std::optional<std::vector<Eigen::Vector3d>> normals) {
    if (points.empty()) throw ArgumentError("point cloud must be nonempty");
    for (const auto& p : points)
        if (!p.allFinite()) throw ValueError("point cloud contains a non-finite point");
    if (normals) {
        if (normals->size() != points.size())
            throw DimensionError("point cloud: normals count does not match points");
        for (std::size_t i = 0; i < normals->size(); ++i) {
            if (!(*normals)[i].allFinite())
                throw ValueError("normal " + std::to_string(i) + ": non-finite entry");
            if (std::abs((*normals)[i].norm() - 1.0) > kRotationTol)
                throw ValueError("normal " + std::to_string(i) + ": not unit length");
        }
    }
    return PointCloud{std::move(points), std::move(normals)};
}

DepthPair DepthPair::create(Matrix gt, Matrix pred,
                            Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid) {
    if (gt.rows() != pred.rows() || gt.cols() != pred.cols() || gt.rows() != valid.rows() ||
        gt.cols() != valid.cols())
        throw DimensionError("depth pair: gt, pred, and mask shapes differ");
    if (gt.rows() < 1 || gt.cols() < 1) throw DimensionError("depth pair: empty grids");
    for (Eigen::Index r = 0; r < gt.rows(); ++r)
        for (Eigen::Index c = 0; c < gt.cols(); ++c) {
            if (!valid(r, c)) continue;
            for (const double v : {gt(r, c), pred(r, c)}) {
                if (!std::isfinite(v) || v <= 0.0)
                    throw ValueError("depth pair: masked entry at (" + std::to_string(r) + ", " +
                                     std::to_string(c) + ") is not positive and finite");
            }
        }
    return DepthPair{std::move(gt), std::move(pred), std::move(valid)};
}

DepthPair DepthPair::from_depths(Matrix gt, Matrix pred) {
    if (gt.rows() != pred.rows() || gt.cols() != pred.cols())
        throw DimensionError("depth pair: gt and pred shapes differ");
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid(gt.rows(), gt.cols());
    for (Eigen::Index r = 0; r < gt.rows(); ++r)
        for (Eigen::Index c = 0; c < gt.cols(); ++c)
            valid(r, c) = std::isfinite(gt(r, c)) && gt(r, c) > 0.0;
    return create(std::move(gt), std::move(pred), std::move(valid));
}

AlignmentResult align_trajectories(const Trajectory& gt, const Trajectory& est,
                                   AlignmentMode mode) {
    check_same_length(gt, est, "align_trajectories");
    const int n = gt.size();
    if (n < 3) throw ArgumentError("align_trajectories: need at least 3 poses");

    Eigen::Matrix3Xd src(3, n);
    Eigen::Matrix3Xd dst(3, n);
    for (int i = 0; i < n; ++i) {
        src.col(i) = est.poses[static_cast<std::size_t>(i)].translation;
        dst.col(i) = gt.poses[static_cast<std::size_t>(i)].translation;
    }

    const Eigen::Matrix4d transform =
        Eigen::umeyama(src, dst, mode == AlignmentMode::similarity);
    const Eigen::Matrix3d scaled_rotation = transform.topLeftCorner<3, 3>();
    const double scale = std::cbrt(scaled_rotation.determinant());

    AlignmentResult result;
    result.scale = scale;
    result.rotation = scaled_rotation / scale;
    result.translation = transform.topRightCorner<3, 1>();

    // Collinear centers leave the rotation about the line unconstrained; the
    // SVD inside the fit still picks one deterministically.
    const Eigen::Vector3d centroid = src.rowwise().mean();
    const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(src.colwise() - centroid);
    const auto& sv = svd.singularValues();
    result.degenerate = sv(1) <= 1e-12 * std::max(sv(0), 1e-300);

    std::vector<Pose> aligned;
    aligned.reserve(static_cast<std::size_t>(n));
    for (const Pose& p : est.poses) {
        Pose q;
        q.rotation = result.rotation * p.rotation;
        q.translation = scale * (result.rotation * p.translation) + result.translation;
        aligned.push_back(q);
    }
    result.aligned = Trajectory{std::move(aligned)};
    return result;
}

double ate(const Trajectory& gt, const Trajectory& est_aligned) {
    check_same_length(gt, est_aligned, "ate");
    double sum_sq = 0.0;
    for (int i = 0; i < gt.size(); ++i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        sum_sq += (gt.poses[ii].translation - est_aligned.poses[ii].translation).squaredNorm();
    }
    return std::sqrt(sum_sq / static_cast<double>(gt.size()));
}

RpeResult rpe(const Trajectory& gt, const Trajectory& est, int delta) {
    check_same_length(gt, est, "rpe");
    if (delta < 1) throw ArgumentError("rpe: delta must be >= 1");
    if (gt.size() < delta + 1)
        throw ArgumentError("rpe: trajectory too short for delta " + std::to_string(delta));

    const int pairs = gt.size() - delta;
    double rot_sum = 0.0;
    double trans_sum = 0.0;
    for (int i = 0; i < pairs; ++i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        const std::size_t jj = static_cast<std::size_t>(i + delta);
        const Pose rel_gt = relative_pose(gt.poses[ii], gt.poses[jj]);
        const Pose rel_est = relative_pose(est.poses[ii], est.poses[jj]);
        rot_sum += rotation_angle_deg(rel_gt.rotation.transpose() * rel_est.rotation);
        trans_sum += (rel_gt.translation - rel_est.translation).norm();
    }
    return RpeResult{rot_sum / pairs, trans_sum / pairs};
}

CloudMetrics cloud_metrics(const PointCloud& pred, const PointCloud& gt) {
    if (pred.points.empty() || gt.points.empty())
        throw ArgumentError("cloud_metrics: clouds must be nonempty");

    CloudMetrics out;
    std::vector<double> dist;
    std::vector<int> nearest;
    const bool want_nc = pred.normals.has_value() && gt.normals.has_value();

    nearest_distances(pred.points, gt.points, dist, want_nc ? &nearest : nullptr);
    out.accuracy = 0.0;
    for (double d : dist) out.accuracy += d;
    out.accuracy /= static_cast<double>(dist.size());

    if (want_nc) {
        std::vector<double> cosines(pred.points.size());
        for (std::size_t i = 0; i < pred.points.size(); ++i)
            cosines[i] =
                (*pred.normals)[i].dot((*gt.normals)[static_cast<std::size_t>(nearest[i])]);
        double sum = 0.0;
        for (double c : cosines) sum += c;
        out.nc_mean = sum / static_cast<double>(cosines.size());
        out.nc_median = median_of(std::move(cosines));
    }

    nearest_distances(gt.points, pred.points, dist, nullptr);
    out.completeness = 0.0;
    for (double d : dist) out.completeness += d;
    out.completeness /= static_cast<double>(dist.size());
    return out;
}

DepthMetrics depth_metrics(const DepthPair& pair) {
    double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0, log_sq = 0.0;
    std::int64_t n = 0, within = 0;
    for (Eigen::Index r = 0; r < pair.gt.rows(); ++r)
        for (Eigen::Index c = 0; c < pair.gt.cols(); ++c) {
            if (!pair.valid(r, c)) continue;
            const double gt = pair.gt(r, c);
            const double pred = pair.pred(r, c);
            const double diff = gt - pred;
            abs_rel += std::abs(diff) / gt;
            sq_rel += diff * diff / gt;
            sq += diff * diff;
            const double log_diff = std::log(gt) - std::log(pred);
            log_sq += log_diff * log_diff;
            if (std::max(gt / pred, pred / gt) < 1.25) ++within;
            ++n;
        }
    if (n == 0) throw ArgumentError("depth_metrics: no valid pixels");
    const double inv_n = 1.0 / static_cast<double>(n);
    DepthMetrics out;
    out.abs_rel = abs_rel * inv_n;
    out.sq_rel = sq_rel * inv_n;
    out.rmse = std::sqrt(sq * inv_n);
    out.log_rmse = std::sqrt(log_sq * inv_n);
    out.delta_125 = static_cast<double>(within) * inv_n;
    return out;
}

DepthPair median_scale(const DepthPair& pair) {
    std::vector<double> gt_vals, pred_vals;
    for (Eigen::Index r = 0; r < pair.gt.rows(); ++r)
        for (Eigen::Index c = 0; c < pair.gt.cols(); ++c) {
            if (!pair.valid(r, c)) continue;
            gt_vals.push_back(pair.gt(r, c));
            pred_vals.push_back(pair.pred(r, c));
        }
    if (gt_vals.empty()) throw ArgumentError("median_scale: no valid pixels");
    const double factor = median_of(std::move(gt_vals)) / median_of(std::move(pred_vals));
    return DepthPair::create(pair.gt, pair.pred * factor, pair.valid);
}

Trajectory load_trajectory_csv(const std::string& path) {
    static const std::vector<std::string> kHeader = {"idx", "r00", "r01", "r02", "r10", "r11",
                                                     "r12", "r20", "r21", "r22", "tx", "ty", "tz"};
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open file");
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ":1: empty file");
    if (split_csv_line(strip_cr(line)) != kHeader)
        throw FormatError(path + ":1: expected header 'idx,r00,...,r22,tx,ty,tz'");

    std::vector<Pose> poses;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        const auto cells = split_csv_line(line);
        if (cells.size() != kHeader.size())
            throw DimensionError(where + ": expected " + std::to_string(kHeader.size()) +
                                 " columns, got " + std::to_string(cells.size()));
        if (parse_strict_double(cells[0], where) != static_cast<double>(poses.size()))
            throw FormatError(where + ": idx must be " + std::to_string(poses.size()));
        Pose pose;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                pose.rotation(r, c) = parse_strict_double(cells[1 + 3 * r + c], where);
        for (int c = 0; c < 3; ++c)
            pose.translation(c) = parse_strict_double(cells[10 + c], where);
        poses.push_back(pose);
    }
    if (poses.empty()) throw FormatError(path + ": no pose rows");
    return Trajectory::create(std::move(poses));
}

PointCloud load_cloud_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open file");
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ":1: empty file");
    const auto header = split_csv_line(strip_cr(line));
    bool with_normals;
    if (header == std::vector<std::string>{"x", "y", "z"})
        with_normals = false;
    else if (header == std::vector<std::string>{"x", "y", "z", "nx", "ny", "nz"})
        with_normals = true;
    else
        throw FormatError(path + ":1: expected header 'x,y,z' or 'x,y,z,nx,ny,nz'");

    std::vector<Eigen::Vector3d> points;
    std::vector<Eigen::Vector3d> normals;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DimensionError(where + ": expected " + std::to_string(header.size()) +
                                 " columns, got " + std::to_string(cells.size()));
        Eigen::Vector3d p;
        for (int c = 0; c < 3; ++c)
            p(c) = parse_strict_double(cells[static_cast<std::size_t>(c)], where);
        points.push_back(p);
        if (with_normals) {
            Eigen::Vector3d nrm;
            for (int c = 0; c < 3; ++c)
                nrm(c) = parse_strict_double(cells[static_cast<std::size_t>(3 + c)], where);
            normals.push_back(nrm);
        }
    }
    if (points.empty()) throw FormatError(path + ": no point rows");
    return PointCloud::create(std::move(points),
                              with_normals ? std::optional(std::move(normals)) : std::nullopt);
}

Matrix load_depth_grid(const std::string& path, DepthFileFormat format) {
    if (format == DepthFileFormat::binary) return load_gthf_matrix(path);

    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open file");
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        const auto cells = split_csv_line(line);
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& cell : cells) row.push_back(parse_strict_double(cell, where));
        if (!rows.empty() && row.size() != rows.front().size())
            throw DimensionError(where + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(path + ": empty depth grid");
    Matrix out(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c)
            out(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return out;
}

}  // namespace tokensel
