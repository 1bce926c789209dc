#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tokensel/attention.hpp"
#include "tokensel/common.hpp"
#include "tokensel/inter_frame.hpp"
#include "tokensel/intra_frame.hpp"

namespace tokensel {

/// Weights for one pre-norm attention block followed by a pre-norm
/// feed-forward: x += attn(LN1(x)); x += ffn(LN2(x)). The feed-forward
/// hidden width is 2 * model_dim with exact GELU.
struct BlockWeights {
    Matrix wq, wk, wv, wo;   // model_dim x model_dim
    Matrix ffn_in, ffn_out;  // model_dim x 2*model_dim, 2*model_dim x model_dim
    Vector ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
};

/// One frame-wise + one global attention block.
struct ToyLayer {
    BlockWeights frame_block;
    BlockWeights global_block;
};

/// Desk-scale stand-in for a multi-view geometry transformer: n_layers pairs
/// of frame-wise and global attention with seeded synthetic weights and no
/// positional encoding (the stack is frame-symmetric by construction).
struct ToyModel {
    int n_layers = 0;  // pairs; also the number of global-attention layers
    int model_dim = 0;
    int n_heads = 0;
    std::uint64_t seed = 0;
    std::vector<ToyLayer> layers;

    int head_dim() const { return model_dim / n_heads; }
};

/// Deterministic weights: every projection entry drawn row-major from
/// uniform[-1/sqrt(model_dim), 1/sqrt(model_dim)] in a fixed matrix order
/// (per layer: frame block then global block; per block: wq, wk, wv, wo,
/// ffn_in, ffn_out). Norm scales start at 1, offsets at 0.
ToyModel build_toy_model(int n_layers, int model_dim, int n_heads, std::uint64_t seed);

/// N frames of grid tokens with model_dim-wide embeddings (rows frame-major).
struct TokenBatch {
    int n_frames = 0;
    TokenGrid grid;
    Matrix embeddings;  // (n_frames * grid.tokens_per_frame()) x model_dim

    int total_tokens() const { return n_frames * grid.tokens_per_frame(); }
};

/// Seeded batch with embeddings uniform in [-1, 1].
TokenBatch random_token_batch(int n_frames, const TokenGrid& grid, int model_dim,
                              std::uint64_t seed);

/// Adds a seeded per-frame index vector (uniform in [-scale, scale], one
/// draw sequence per frame) to every token of that frame. Off by default:
/// it deliberately breaks frame-permutation equivariance, so it exists only
/// for realism experiments.
void apply_frame_index_embedding(TokenBatch& batch, std::uint64_t seed, double scale);

/// Sparsification settings for forward(). Without a plan, a shared selection
/// runs every global layer as full_restricted. per_frame_selections gives
/// each query frame its own anchor set; include_query_frame unions a query's
/// own frame into its set (ablation hook).
struct ForwardOptions {
    std::optional<FrameSelection> selection;
    std::optional<std::vector<FrameSelection>> per_frame_selections;
    std::optional<LayerPlan> plan;
    bool include_query_frame = false;
};

Matrix forward(const ToyModel& model, const TokenBatch& batch, const ForwardOptions& options = {});

/// Per-global-layer attention statistics collected during a forward pass.
/// Without a plan the statistics cover the full N*L key set; with one they
/// cover each layer's resolved key set (own frame for local layers; pool
/// layers report the uniform-attention fixed point).
struct LayerProfile {
    int layer = 0;
    LayerStrategy strategy;
    AttentionStats stats;
};

std::vector<LayerProfile> analyze_layers(const ToyModel& model, const TokenBatch& batch,
                                         int h_sample, int q_sample, std::uint64_t seed,
                                         const ForwardOptions& options = {});

/// Median wall-clock seconds of forward() over `repeats` runs.
double median_forward_seconds(const ToyModel& model, const TokenBatch& batch,
                              const ForwardOptions& options, int repeats);

struct ScalingRow {
    int n_frames = 0;
    std::string mode;  // "full" or "selected"
    double median_seconds = 0.0;
    std::int64_t multiplies = 0;
    std::optional<double> model_predicted_ratio;  // vs previous size, same mode
};

struct BenchParams {
    int k = 8;
    int sigma = 3;
    int l_local = 0;
    int l_sample = 0;
    std::optional<int> l_late;
    int repeats = 3;
    std::uint64_t seed = 0;
};

/// Times full and selected forwards over the given frame counts and pairs
/// the measurements with analytic cost-model multiplies. Batches and anchor
/// selections are derived deterministically from params.seed. repeats >= 3.
std::vector<ScalingRow> benchmark_scaling(const ToyModel& model, const TokenGrid& grid,
                                          const std::vector<int>& frame_counts,
                                          const BenchParams& params);

}  // namespace tokensel
