#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tokensel/common.hpp"
#include "tokensel/frame_features.hpp"

namespace tokensel {

/// A selected set of anchor frames. `indices` records pick order for greedy
/// selection; entries are distinct and in [0, N).
struct FrameSelection {
    std::vector<int> indices;
    int k = 0;
    std::uint64_t seed = 0;
};

enum class StrategyId {
    temporal_nearest,
    covis_high,
    covis_low,
    attn_max,
    attn_mean,
    diversity,
};

const char* to_string(StrategyId strategy);
StrategyId strategy_from_string(const std::string& name);

/// Greedy farthest point sampling against the K-center objective.
///
/// The first pick is drawn uniformly from [0, N) with the seeded generator
/// (or taken from `forced_first` when provided, a hook for deterministic
/// tests). Every later pick maximizes the minimum distance to the already
/// selected set; argmax ties resolve to the lowest index.
FrameSelection select_diverse_frames(const DistanceMatrix& distances, int k, std::uint64_t seed,
                                     std::optional<int> forced_first = std::nullopt);

/// max over all frames of the distance to their nearest selected frame.
double kcenter_cost(const DistanceMatrix& distances, const FrameSelection& selection);

/// Exhaustive K-center optimum over all C(N, k) subsets. Testing oracle;
/// guarded to C(N, k) <= 1e6. Ties resolve to the lexicographically
/// smallest index list.
FrameSelection brute_force_kcenter(const DistanceMatrix& distances, int k);

/// The k frames closest to `query_frame` in sequence order (self included);
/// distance ties resolve to the lower index. Result sorted ascending.
FrameSelection select_temporal_nearest(int n_frames, int query_frame, int k);

/// Top-k (most = true) or bottom-k frames by covisibility with the query
/// frame; ties to the lower index. Result sorted ascending.
FrameSelection select_covis(const CovisibilityMatrix& covisibility, int query_frame, int k,
                            bool most_covisible);

/// Top-k frames by per-frame pooled attention score. `scores` holds one row
/// per frame of per-token scores; rows are max-pooled or mean-pooled into a
/// frame score. Ties to the lower index. Result sorted ascending.
FrameSelection select_by_attention(const Matrix& scores, int k, bool max_pool);

/// Inputs for select_baseline; only the fields a strategy needs must be set.
struct BaselineInputs {
    const CovisibilityMatrix* covisibility = nullptr;
    const Matrix* attn_scores = nullptr;
    int n_frames = 0;
};

FrameSelection select_baseline(StrategyId strategy, int query_frame, const BaselineInputs& inputs,
                               int k);

nlohmann::json selection_to_json(const FrameSelection& selection, StrategyId strategy);
FrameSelection selection_from_json(const nlohmann::json& j, StrategyId* strategy_out = nullptr);

}  // namespace tokensel
