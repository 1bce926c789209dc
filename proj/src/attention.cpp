#include "tokensel/attention.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tokensel {

namespace {

constexpr std::int64_t kQueryTile = 64;

/// Rows [row_begin, row_end) of softmax(Q K^T / sqrt(d)) V into out.
void attend_rows(const Matrix& queries, const Matrix& keys, const Matrix& values,
                 std::int64_t row_begin, std::int64_t row_end, Matrix& out) {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
    const auto len = row_end - row_begin;
    Matrix scores = queries.middleRows(row_begin, len) * keys.transpose() * inv_sqrt_d;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        auto row = scores.row(r);
        row = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
    }
    out.middleRows(row_begin, len) = scores * values;
}

std::vector<Matrix> attend_all_rows(const AttentionInputs& inp, const std::vector<Matrix>& keys,
                                    const std::vector<Matrix>& values) {
    std::vector<Matrix> out(static_cast<std::size_t>(inp.n_heads()));
    for (int h = 0; h < inp.n_heads(); ++h) {
        const std::size_t hh = static_cast<std::size_t>(h);
        out[hh].resize(inp.total_tokens(), inp.head_dim());
        parallel_tiles(inp.total_tokens(), kQueryTile, [&](std::int64_t b, std::int64_t e) {
            attend_rows(inp.queries[hh], keys[hh], values[hh], b, e, out[hh]);
        });
    }
    return out;
}

std::vector<int> validated_flat_ids(const AttentionInputs& inp, const TokenIndexSet& token_set,
                                    const char* who) {
    if (token_set.empty()) throw ArgumentError(std::string(who) + ": empty token set");
    std::set<std::pair<int, int>> seen;
    for (const auto& [frame, token] : token_set.entries) {
        if (frame < 0 || frame >= inp.n_frames || token < 0 || token >= inp.tokens_per_frame)
            throw ArgumentError(std::string(who) + ": token set entry out of range");
        if (!seen.insert({frame, token}).second)
            throw ArgumentError(std::string(who) + ": duplicate token set entry");
    }
    return flatten_token_set(token_set, inp.tokens_per_frame);
}

std::vector<Matrix> gather_rows(const std::vector<Matrix>& heads, const std::vector<int>& ids) {
    std::vector<Matrix> out(heads.size());
    for (std::size_t h = 0; h < heads.size(); ++h) {
        out[h].resize(static_cast<Eigen::Index>(ids.size()), heads[h].cols());
        for (std::size_t i = 0; i < ids.size(); ++i) out[h].row(static_cast<Eigen::Index>(i)) = heads[h].row(ids[i]);
    }
    return out;
}

}  // namespace

AttentionInputs AttentionInputs::create(std::vector<Matrix> queries, std::vector<Matrix> keys,
                                        std::vector<Matrix> values, int n_frames,
                                        int tokens_per_frame) {
    if (queries.empty() || queries.size() != keys.size() || keys.size() != values.size())
        throw DimensionError("attention inputs: need matching non-empty Q/K/V head lists");
    if (n_frames < 1 || tokens_per_frame < 1)
        throw ArgumentError("attention inputs: need n_frames >= 1 and tokens_per_frame >= 1");
    const Eigen::Index total = static_cast<Eigen::Index>(n_frames) * tokens_per_frame;
    const Eigen::Index dim = queries.front().cols();
    if (dim < 1) throw DimensionError("attention inputs: head_dim must be >= 1");
    for (std::size_t h = 0; h < queries.size(); ++h) {
        for (const Matrix* m : {&queries[h], &keys[h], &values[h]}) {
            if (m->rows() != total || m->cols() != dim)
                throw DimensionError("attention inputs: head " + std::to_string(h) +
                                     " shape mismatch");
            if (!m->allFinite())
                throw ValueError("attention inputs: non-finite entry in head " + std::to_string(h));
        }
    }
    return AttentionInputs{std::move(queries), std::move(keys), std::move(values), n_frames,
                           tokens_per_frame};
}

std::vector<Matrix> full_attention(const AttentionInputs& inp) {
    return attend_all_rows(inp, inp.keys, inp.values);
}

std::vector<Matrix> restricted_attention(const AttentionInputs& inp,
                                         const TokenIndexSet& token_set) {
    const std::vector<int> ids = validated_flat_ids(inp, token_set, "restricted_attention");
    const std::vector<Matrix> keys = gather_rows(inp.keys, ids);
    const std::vector<Matrix> values = gather_rows(inp.values, ids);
    return attend_all_rows(inp, keys, values);
}

std::vector<Matrix> local_attention(const AttentionInputs& inp) {
    std::vector<Matrix> out(static_cast<std::size_t>(inp.n_heads()));
    const int l = inp.tokens_per_frame;
    for (int h = 0; h < inp.n_heads(); ++h) {
        const std::size_t hh = static_cast<std::size_t>(h);
        out[hh].resize(inp.total_tokens(), inp.head_dim());
        parallel_tiles(inp.n_frames, 1, [&](std::int64_t fb, std::int64_t fe) {
            for (std::int64_t f = fb; f < fe; ++f) {
                const Matrix keys = inp.keys[hh].middleRows(f * l, l);
                const Matrix values = inp.values[hh].middleRows(f * l, l);
                Matrix block(l, inp.head_dim());
                const Matrix queries = inp.queries[hh].middleRows(f * l, l);
                attend_rows(queries, keys, values, 0, l, block);
                out[hh].middleRows(f * l, l) = block;
            }
        });
    }
    return out;
}

std::vector<Matrix> restricted_attention_per_frame(
    const AttentionInputs& inp, const std::vector<TokenIndexSet>& per_frame_sets) {
    if (static_cast<int>(per_frame_sets.size()) != inp.n_frames)
        throw ArgumentError("restricted_attention_per_frame: need one token set per frame");
    std::vector<std::vector<int>> flat(per_frame_sets.size());
    for (std::size_t f = 0; f < per_frame_sets.size(); ++f)
        flat[f] = validated_flat_ids(inp, per_frame_sets[f], "restricted_attention_per_frame");

    const int l = inp.tokens_per_frame;
    std::vector<Matrix> out(static_cast<std::size_t>(inp.n_heads()));
    for (int h = 0; h < inp.n_heads(); ++h) {
        const std::size_t hh = static_cast<std::size_t>(h);
        out[hh].resize(inp.total_tokens(), inp.head_dim());
        parallel_tiles(inp.n_frames, 1, [&](std::int64_t fb, std::int64_t fe) {
            for (std::int64_t f = fb; f < fe; ++f) {
                const std::vector<int>& ids = flat[static_cast<std::size_t>(f)];
                Matrix keys(static_cast<Eigen::Index>(ids.size()), inp.head_dim());
                Matrix values(static_cast<Eigen::Index>(ids.size()), inp.head_dim());
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    keys.row(static_cast<Eigen::Index>(i)) = inp.keys[hh].row(ids[i]);
                    values.row(static_cast<Eigen::Index>(i)) = inp.values[hh].row(ids[i]);
                }
                Matrix block(l, inp.head_dim());
                const Matrix queries = inp.queries[hh].middleRows(f * l, l);
                attend_rows(queries, keys, values, 0, l, block);
                out[hh].middleRows(f * l, l) = block;
            }
        });
    }
    return out;
}

std::vector<Matrix> mean_pool_attention(const AttentionInputs& inp,
                                        const TokenIndexSet& token_set) {
    const std::vector<int> ids = validated_flat_ids(inp, token_set, "mean_pool_attention");
    std::vector<Matrix> out(static_cast<std::size_t>(inp.n_heads()));
    for (int h = 0; h < inp.n_heads(); ++h) {
        const std::size_t hh = static_cast<std::size_t>(h);
        Vector mean = Vector::Zero(inp.head_dim());
        for (int id : ids) mean += inp.values[hh].row(id).transpose();
        mean /= static_cast<double>(ids.size());
        out[hh] = mean.transpose().replicate(inp.total_tokens(), 1);
    }
    return out;
}

AttentionStats attention_entropy_stats(const AttentionInputs& inp, const TokenIndexSet& token_set,
                                       int h_sample, int q_sample, std::uint64_t seed) {
    const std::vector<int> ids = validated_flat_ids(inp, token_set, "attention_entropy_stats");
    const int n_keys = static_cast<int>(ids.size());
    if (n_keys < 2)
        throw ValueError("attention_entropy_stats: need at least two keys to normalize entropy");
    if (h_sample < 1 || h_sample > inp.n_heads())
        throw ArgumentError("attention_entropy_stats: h_sample out of range");
    if (q_sample < 1 || q_sample > inp.total_tokens())
        throw ArgumentError("attention_entropy_stats: q_sample out of range");

    SplitMix64 rng(seed);
    const std::vector<int> heads = sample_without_replacement(inp.n_heads(), h_sample, rng);
    const std::vector<int> queries = sample_without_replacement(inp.total_tokens(), q_sample, rng);

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(inp.head_dim()));
    double entropy_sum = 0.0;
    double top1_sum = 0.0;
    for (int h : heads) {
        const std::size_t hh = static_cast<std::size_t>(h);
        Matrix keys(n_keys, inp.head_dim());
        for (int i = 0; i < n_keys; ++i) keys.row(i) = inp.keys[hh].row(ids[static_cast<std::size_t>(i)]);
        for (int q : queries) {
            Vector scores = keys * inp.queries[hh].row(q).transpose() * inv_sqrt_d;
            scores = (scores.array() - scores.maxCoeff()).exp();
            scores /= scores.sum();
            double entropy = 0.0;
            for (int i = 0; i < n_keys; ++i) {
                const double p = scores(i);
                if (p > 0.0) entropy -= p * std::log(p);
            }
            entropy_sum += entropy;
            top1_sum += scores.maxCoeff();
        }
    }
    const double samples = static_cast<double>(h_sample) * static_cast<double>(q_sample);
    AttentionStats stats;
    stats.normalized_entropy = entropy_sum / (samples * std::log(static_cast<double>(n_keys)));
    stats.top1_weight = top1_sum / samples;
    stats.n_sampled_heads = h_sample;
    stats.n_sampled_queries = q_sample;
    stats.n_keys = n_keys;
    return stats;
}

CostReport attention_flop_model(int n_frames, int tokens_per_frame, int k_frames,
                                const LayerPlan& plan, const TokenGrid& grid, int model_dim) {
    if (n_frames < 1 || model_dim < 1)
        throw ArgumentError("attention_flop_model: need n_frames >= 1 and model_dim >= 1");
    if (tokens_per_frame != grid.tokens_per_frame())
        throw ArgumentError("attention_flop_model: tokens_per_frame does not match the grid");
    if (k_frames < 1 || k_frames > n_frames)
        throw ArgumentError("attention_flop_model: need 1 <= k_frames <= n_frames");

    const std::int64_t n = n_frames;
    const std::int64_t l = tokens_per_frame;
    const std::int64_t k = k_frames;
    const std::int64_t d = model_dim;
    const std::int64_t queries = n * l;
    const std::int64_t baseline_per_layer = queries * (n * l) * 2 * d;

    CostReport report;
    for (int layer = 0; layer < plan.n_layers(); ++layer) {
        const LayerStrategy& s = plan.strategies[static_cast<std::size_t>(layer)];
        LayerCostRow row;
        row.layer = layer;
        row.strategy = s;
        switch (s.kind) {
            case LayerStrategy::Kind::full_restricted:
                row.n_keys = k * l;
                row.multiplies = queries * row.n_keys * 2 * d;
                break;
            case LayerStrategy::Kind::downsample: {
                const std::int64_t kept_h = (grid.height + s.sigma - 1) / s.sigma;
                const std::int64_t kept_w = (grid.width + s.sigma - 1) / s.sigma;
                row.n_keys = k * (kept_h * kept_w + grid.n_special);
                row.multiplies = queries * row.n_keys * 2 * d;
                break;
            }
            case LayerStrategy::Kind::local:
                row.n_keys = l;
                row.multiplies = queries * l * 2 * d;
                break;
            case LayerStrategy::Kind::pool:
                // Value averaging only; no score matrix is formed.
                row.n_keys = k * l;
                row.multiplies = queries * d;
                break;
            case LayerStrategy::Kind::activation: {
                // Scores over the full candidate set are unavoidable; only
                // the weighted sum shrinks to the kept fraction.
                const std::int64_t candidates = k * l;
                row.n_keys = static_cast<std::int64_t>(
                    std::ceil(s.keep_fraction * static_cast<double>(candidates)));
                row.multiplies = queries * candidates * d + queries * row.n_keys * d;
                break;
            }
        }
        row.baseline_multiplies = baseline_per_layer;
        row.reduction_pct =
            100.0 * (1.0 - static_cast<double>(row.multiplies) /
                               static_cast<double>(baseline_per_layer));
        report.total_multiplies += row.multiplies;
        report.baseline_multiplies += baseline_per_layer;
        report.layers.push_back(row);
    }
    report.reduction_pct = 100.0 * (1.0 - static_cast<double>(report.total_multiplies) /
                                              static_cast<double>(report.baseline_multiplies));
    return report;
}

}  // namespace tokensel
