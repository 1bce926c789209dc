#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tokensel/common.hpp"
#include "tokensel/inter_frame.hpp"

namespace tokensel {

/// Per-frame token layout: indices [0, n_special) are special tokens, then
/// spatial tokens row-major, so token (r, c) sits at n_special + r*width + c.
struct TokenGrid {
    int height = 0;
    int width = 0;
    int n_special = 0;

    int spatial_count() const { return height * width; }
    int tokens_per_frame() const { return spatial_count() + n_special; }

    static TokenGrid create(int height, int width, int n_special);
};

/// What a single global-attention layer does to the K/V token set.
struct LayerStrategy {
    enum class Kind { local, downsample, full_restricted, pool, activation };

    Kind kind = Kind::full_restricted;
    int sigma = 0;               // downsample only, >= 2
    double keep_fraction = 0.0;  // activation only, in (0, 1]

    static LayerStrategy local() { return {Kind::local, 0, 0.0}; }
    static LayerStrategy downsample(int sigma);
    static LayerStrategy full_restricted() { return {Kind::full_restricted, 0, 0.0}; }
    static LayerStrategy pool() { return {Kind::pool, 0, 0.0}; }
    static LayerStrategy activation(double keep_fraction);

    bool operator==(const LayerStrategy&) const = default;
};

const char* to_string(LayerStrategy::Kind kind);

enum class PlanProvenance { thresholds, entropy };

/// One strategy per global-attention layer, plus the parameters it was
/// derived from.
struct LayerPlan {
    std::vector<LayerStrategy> strategies;
    PlanProvenance provenance = PlanProvenance::thresholds;
    std::optional<int> l_local;
    std::optional<int> l_sample;
    std::optional<int> l_late;
    std::optional<int> sigma;
    std::optional<double> tau1;
    std::optional<double> tau2;

    int n_layers() const { return static_cast<int>(strategies.size()); }
};

/// The resolved K/V set for one layer: (frame, token-within-frame) pairs,
/// sorted ascending and distinct.
struct TokenIndexSet {
    std::vector<std::pair<int, int>> entries;

    bool empty() const { return entries.empty(); }
    int size() const { return static_cast<int>(entries.size()); }
};

/// Flattens (frame, token) pairs to global token ids frame*L + token.
std::vector<int> flatten_token_set(const TokenIndexSet& set, int tokens_per_frame);

/// Per-frame kept token indices under stride-sigma downsampling.
///
/// The stride grid is anchored at row 0, col 0, keeping ceil(h/sigma) rows
/// and ceil(w/sigma) cols; this stride count exceeds floor(h/sigma) whenever
/// sigma does not divide h. Special tokens are always kept. Result sorted
/// ascending. sigma must satisfy 1 <= sigma <= min(h, w).
std::vector<int> standard_downsample(const TokenGrid& grid, int sigma);

/// Keeps the ceil(keep_fraction * L) highest-scoring token indices, ties to
/// the lowest index. Result sorted ascending.
std::vector<int> activation_select(const std::vector<double>& attn_row_sums,
                                   double keep_fraction);

/// Threshold-partitioned plan: layers [0, l_local) local, [l_local,
/// l_sample) downsample(sigma), the rest full_restricted, except an optional
/// tail [l_late, n_layers) that downsamples again.
LayerPlan build_layer_plan(int n_layers, int l_local, int l_sample, int sigma,
                           std::optional<int> l_late = std::nullopt);

/// Entropy-driven plan: local until the first layer with entropy < tau1,
/// then downsample(sigma) until the first layer with entropy < tau2, then
/// full_restricted. Requires tau1 >= tau2 and entropies in [0, 1].
LayerPlan entropy_adaptive_plan(const std::vector<double>& per_layer_entropy, double tau1,
                                double tau2, int sigma);

/// Token-level diversity selection: FPS over-selects 2*budget candidate
/// tokens, each candidate is scored by its maximum cosine similarity to the
/// other-frame mean features, and the `budget` least redundant candidates
/// survive. Score ties resolve to the earlier FPS pick. Result sorted
/// ascending.
std::vector<int> tld_select(const Matrix& frame_tokens, int budget,
                            const std::vector<Vector>& other_frame_means, std::uint64_t seed,
                            std::optional<int> forced_first = std::nullopt);

/// Composes inter- and intra-frame selection for one layer. local yields an
/// empty cross-frame set (the attention engine falls back to frame-local
/// execution); pool and activation resolve to the full candidate set of the
/// selected frames, with activation thinning applied later from scores.
TokenIndexSet resolve_token_set(const FrameSelection& selection, const LayerPlan& plan, int layer,
                                const TokenGrid& grid);

nlohmann::json plan_to_json(const LayerPlan& plan);
LayerPlan plan_from_json(const nlohmann::json& j);

}  // namespace tokensel
