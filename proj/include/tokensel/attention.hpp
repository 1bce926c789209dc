#pragma once

#include <vector>

#include "tokensel/common.hpp"
#include "tokensel/intra_frame.hpp"

namespace tokensel {

/// Per-head query/key/value tensors for one attention layer over N frames of
/// L tokens each (row t belongs to frame t / L).
struct AttentionInputs {
    std::vector<Matrix> queries;  // one (N*L) x head_dim matrix per head
    std::vector<Matrix> keys;
    std::vector<Matrix> values;
    int n_frames = 0;
    int tokens_per_frame = 0;

    int n_heads() const { return static_cast<int>(queries.size()); }
    int head_dim() const { return static_cast<int>(queries.front().cols()); }
    int total_tokens() const { return n_frames * tokens_per_frame; }
    int frame_of(int token) const { return token / tokens_per_frame; }

    static AttentionInputs create(std::vector<Matrix> queries, std::vector<Matrix> keys,
                                  std::vector<Matrix> values, int n_frames, int tokens_per_frame);
};

/// Sampled attention-distribution summary for one layer (natural-log
/// entropies normalized by ln(n_keys)).
struct AttentionStats {
    double normalized_entropy = 0.0;
    double top1_weight = 0.0;
    int n_sampled_heads = 0;
    int n_sampled_queries = 0;
    int n_keys = 0;
};

/// Per-head softmax(Q K^T / sqrt(d)) V with row-max stabilization.
std::vector<Matrix> full_attention(const AttentionInputs& inp);

/// Full attention against only the gathered K/V rows of `token_set`
/// (gather-then-dense; the full score matrix is never formed).
std::vector<Matrix> restricted_attention(const AttentionInputs& inp, const TokenIndexSet& token_set);

/// Each query attends only to the keys of its own frame.
std::vector<Matrix> local_attention(const AttentionInputs& inp);

/// Queries of frame f attend to per_frame_sets[f]. Supports per-query-frame
/// selections and the include-own-frame ablation.
std::vector<Matrix> restricted_attention_per_frame(const AttentionInputs& inp,
                                                   const std::vector<TokenIndexSet>& per_frame_sets);

/// Every output row is the arithmetic mean of the selected value rows.
std::vector<Matrix> mean_pool_attention(const AttentionInputs& inp, const TokenIndexSet& token_set);

/// Samples h_sample heads then q_sample query rows (seeded, without
/// replacement) and summarizes the attention rows over the token_set keys.
/// Requires at least two keys so ln(n_keys) is a valid normalizer.
AttentionStats attention_entropy_stats(const AttentionInputs& inp, const TokenIndexSet& token_set,
                                       int h_sample, int q_sample, std::uint64_t seed);

struct LayerCostRow {
    int layer = 0;
    LayerStrategy strategy;
    std::int64_t n_keys = 0;           // keys attendable per query
    std::int64_t multiplies = 0;       // fused multiply-adds of both attention matmuls
    std::int64_t baseline_multiplies = 0;
    double reduction_pct = 0.0;
};

struct CostReport {
    std::vector<LayerCostRow> layers;
    std::int64_t total_multiplies = 0;
    std::int64_t baseline_multiplies = 0;
    double reduction_pct = 0.0;
};

/// Analytic multiply count of the two attention matrix products per layer,
/// against an all-full-attention baseline. Softmax and normalization are
/// excluded as sub-dominant. model_dim = head_dim * n_heads.
CostReport attention_flop_model(int n_frames, int tokens_per_frame, int k_frames,
                                const LayerPlan& plan, const TokenGrid& grid, int model_dim);

}  // namespace tokensel
