#include "tokensel/toy_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace tokensel {

namespace {

constexpr double kLayerNormEps = 1e-5;

Matrix draw_matrix(SplitMix64& rng, int rows, int cols, double bound) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.next_uniform(-bound, bound);
    return m;
}

BlockWeights draw_block(SplitMix64& rng, int dim) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    BlockWeights w;
    w.wq = draw_matrix(rng, dim, dim, bound);
    w.wk = draw_matrix(rng, dim, dim, bound);
    w.wv = draw_matrix(rng, dim, dim, bound);
    w.wo = draw_matrix(rng, dim, dim, bound);
    w.ffn_in = draw_matrix(rng, dim, 2 * dim, bound);
    w.ffn_out = draw_matrix(rng, 2 * dim, dim, bound);
    w.ln1_gamma = Vector::Ones(dim);
    w.ln1_beta = Vector::Zero(dim);
    w.ln2_gamma = Vector::Ones(dim);
    w.ln2_beta = Vector::Zero(dim);
    return w;
}

Matrix layer_norm(const Matrix& x, const Vector& gamma, const Vector& beta) {
    Matrix out(x.rows(), x.cols());
    const double inv_dim = 1.0 / static_cast<double>(x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().sum() * inv_dim;
        const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
        out.row(r) =
            ((x.row(r).array() - mean) * inv_std * gamma.transpose().array()) +
            beta.transpose().array();
    }
    return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

Matrix feed_forward(const Matrix& x, const BlockWeights& w) {
    Matrix hidden = x * w.ffn_in;
    for (Eigen::Index r = 0; r < hidden.rows(); ++r)
        for (Eigen::Index c = 0; c < hidden.cols(); ++c) hidden(r, c) = gelu(hidden(r, c));
    return hidden * w.ffn_out;
}

AttentionInputs project_heads(const Matrix& x, const BlockWeights& w, int n_heads, int n_frames,
                              int tokens_per_frame) {
    const int head_dim = static_cast<int>(x.cols()) / n_heads;
    const Matrix q = x * w.wq;
    const Matrix k = x * w.wk;
    const Matrix v = x * w.wv;
    std::vector<Matrix> qs, ks, vs;
    qs.reserve(static_cast<std::size_t>(n_heads));
    ks.reserve(static_cast<std::size_t>(n_heads));
    vs.reserve(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        qs.push_back(q.middleCols(h * head_dim, head_dim));
        ks.push_back(k.middleCols(h * head_dim, head_dim));
        vs.push_back(v.middleCols(h * head_dim, head_dim));
    }
    return AttentionInputs::create(std::move(qs), std::move(ks), std::move(vs), n_frames,
                                   tokens_per_frame);
}

Matrix concat_heads(const std::vector<Matrix>& heads) {
    const Eigen::Index rows = heads.front().rows();
    const Eigen::Index head_dim = heads.front().cols();
    Matrix out(rows, head_dim * static_cast<Eigen::Index>(heads.size()));
    for (std::size_t h = 0; h < heads.size(); ++h)
        out.middleCols(static_cast<Eigen::Index>(h) * head_dim, head_dim) = heads[h];
    return out;
}

TokenIndexSet all_tokens_set(int n_frames, int tokens_per_frame) {
    TokenIndexSet set;
    set.entries.reserve(static_cast<std::size_t>(n_frames) *
                        static_cast<std::size_t>(tokens_per_frame));
    for (int f = 0; f < n_frames; ++f)
        for (int t = 0; t < tokens_per_frame; ++t) set.entries.emplace_back(f, t);
    return set;
}

FrameSelection with_frame(const FrameSelection& selection, int frame) {
    for (int idx : selection.indices)
        if (idx == frame) return selection;
    FrameSelection out = selection;
    out.indices.push_back(frame);
    out.k = static_cast<int>(out.indices.size());
    return out;
}

/// Column sums of the attention weights over the candidate set, accumulated
/// across heads and queries: the per-token activation mass used by the
/// Activation strategy. Computed serially; this strategy exists to validate
/// score-aware selection, not to be fast.
std::vector<double> activation_mass(const AttentionInputs& inp, const std::vector<int>& ids) {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(inp.head_dim()));
    std::vector<double> mass(ids.size(), 0.0);
    for (int h = 0; h < inp.n_heads(); ++h) {
        const std::size_t hh = static_cast<std::size_t>(h);
        Matrix keys(static_cast<Eigen::Index>(ids.size()), inp.head_dim());
        for (std::size_t i = 0; i < ids.size(); ++i)
            keys.row(static_cast<Eigen::Index>(i)) = inp.keys[hh].row(ids[i]);
        for (int q = 0; q < inp.total_tokens(); ++q) {
            Vector scores = keys * inp.queries[hh].row(q).transpose() * inv_sqrt_d;
            scores = (scores.array() - scores.maxCoeff()).exp();
            scores /= scores.sum();
            for (std::size_t i = 0; i < ids.size(); ++i)
                mass[i] += scores(static_cast<Eigen::Index>(i));
        }
    }
    return mass;
}

struct LayerProbeState {
    int h_sample = 0;
    int q_sample = 0;
    std::uint64_t seed = 0;
    std::vector<LayerProfile> profiles;
};

/// Entropy/top-1 statistics for a local layer: each sampled query is scored
/// over its own frame's keys. Sampling matches attention_entropy_stats
/// (heads drawn first, then queries, same generator).
AttentionStats local_layer_stats(const AttentionInputs& inp, int h_sample, int q_sample,
                                 std::uint64_t seed) {
    const int l = inp.tokens_per_frame;
    if (l < 2) throw ValueError("local layer stats: need at least two tokens per frame");
    if (h_sample < 1 || h_sample > inp.n_heads())
        throw ArgumentError("local layer stats: h_sample out of range");
    if (q_sample < 1 || q_sample > inp.total_tokens())
        throw ArgumentError("local layer stats: q_sample out of range");
    SplitMix64 rng(seed);
    const std::vector<int> heads = sample_without_replacement(inp.n_heads(), h_sample, rng);
    const std::vector<int> queries = sample_without_replacement(inp.total_tokens(), q_sample, rng);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(inp.head_dim()));

    double entropy_sum = 0.0;
    double top1_sum = 0.0;
    for (int h : heads) {
        const std::size_t hh = static_cast<std::size_t>(h);
        for (int q : queries) {
            const int frame = inp.frame_of(q);
            const Matrix keys = inp.keys[hh].middleRows(static_cast<Eigen::Index>(frame) * l, l);
            Vector scores = keys * inp.queries[hh].row(q).transpose() * inv_sqrt_d;
            scores = (scores.array() - scores.maxCoeff()).exp();
            scores /= scores.sum();
            double entropy = 0.0;
            for (Eigen::Index i = 0; i < scores.size(); ++i) {
                const double p = scores(i);
                if (p > 0.0) entropy -= p * std::log(p);
            }
            entropy_sum += entropy;
            top1_sum += scores.maxCoeff();
        }
    }
    const double samples = static_cast<double>(h_sample) * static_cast<double>(q_sample);
    AttentionStats stats;
    stats.normalized_entropy = entropy_sum / (samples * std::log(static_cast<double>(l)));
    stats.top1_weight = top1_sum / samples;
    stats.n_sampled_heads = h_sample;
    stats.n_sampled_queries = q_sample;
    stats.n_keys = l;
    return stats;
}

Matrix run_forward(const ToyModel& model, const TokenBatch& batch, const ForwardOptions& options,
                   LayerProbeState* probe) {
    if (batch.embeddings.rows() != batch.total_tokens() ||
        batch.embeddings.cols() != model.model_dim)
        throw DimensionError("forward: batch embeddings do not match the model");
    if (!batch.embeddings.allFinite()) throw ValueError("forward: non-finite batch embedding");
    if (options.selection && options.per_frame_selections)
        throw ArgumentError("forward: pass either a shared or a per-frame selection, not both");

    const int n_frames = batch.n_frames;
    const int l = batch.grid.tokens_per_frame();

    LayerPlan plan;
    if (options.plan) {
        plan = *options.plan;
        if (plan.n_layers() != model.n_layers)
            throw ArgumentError("forward: plan length does not match the global layer count");
    } else if (options.selection || options.per_frame_selections) {
        plan = build_layer_plan(model.n_layers, 0, 0, 2);
    }
    const bool sparsified = options.plan || options.selection || options.per_frame_selections;

    const bool needs_frames = [&] {
        if (!sparsified) return false;
        for (const LayerStrategy& s : plan.strategies)
            if (s.kind != LayerStrategy::Kind::local) return true;
        return false;
    }();
    if (needs_frames && !options.selection && !options.per_frame_selections)
        throw ArgumentError("forward: this plan needs a frame selection");

    auto check_selection = [&](const FrameSelection& s) {
        if (s.indices.empty()) throw ArgumentError("forward: empty frame selection");
        for (int idx : s.indices)
            if (idx < 0 || idx >= n_frames)
                throw ArgumentError("forward: selection frame index out of range");
    };
    if (options.selection) check_selection(*options.selection);
    if (options.per_frame_selections) {
        if (static_cast<int>(options.per_frame_selections->size()) != n_frames)
            throw ArgumentError("forward: need one selection per query frame");
        for (const FrameSelection& s : *options.per_frame_selections) check_selection(s);
    }
    const bool per_frame_sets = options.per_frame_selections.has_value() ||
                                (options.selection && options.include_query_frame);

    Matrix x = batch.embeddings;
    for (int layer = 0; layer < model.n_layers; ++layer) {
        const ToyLayer& weights = model.layers[static_cast<std::size_t>(layer)];

        // Frame-wise block: attention never crosses frame boundaries.
        {
            const BlockWeights& w = weights.frame_block;
            const Matrix normed = layer_norm(x, w.ln1_gamma, w.ln1_beta);
            const AttentionInputs inp =
                project_heads(normed, w, model.n_heads, n_frames, l);
            x += concat_heads(local_attention(inp)) * w.wo;
            x += feed_forward(layer_norm(x, w.ln2_gamma, w.ln2_beta), w);
        }

        // Global block: full attention, or the planned strategy.
        {
            const BlockWeights& w = weights.global_block;
            const Matrix normed = layer_norm(x, w.ln1_gamma, w.ln1_beta);
            const AttentionInputs inp =
                project_heads(normed, w, model.n_heads, n_frames, l);

            const LayerStrategy strategy =
                sparsified ? plan.strategies[static_cast<std::size_t>(layer)]
                           : LayerStrategy::full_restricted();

            std::vector<Matrix> heads;
            TokenIndexSet shared_set;
            if (!sparsified) {
                heads = full_attention(inp);
            } else {
                switch (strategy.kind) {
                    case LayerStrategy::Kind::local:
                        heads = local_attention(inp);
                        break;
                    case LayerStrategy::Kind::pool:
                        if (per_frame_sets)
                            throw ArgumentError("forward: pool layers need a shared selection");
                        shared_set = resolve_token_set(*options.selection, plan, layer, batch.grid);
                        heads = mean_pool_attention(inp, shared_set);
                        break;
                    case LayerStrategy::Kind::activation: {
                        if (per_frame_sets)
                            throw ArgumentError(
                                "forward: activation layers need a shared selection");
                        shared_set = resolve_token_set(*options.selection, plan, layer, batch.grid);
                        const std::vector<int> ids = flatten_token_set(shared_set, l);
                        const std::vector<double> mass = activation_mass(inp, ids);
                        const std::vector<int> kept_pos =
                            activation_select(mass, strategy.keep_fraction);
                        TokenIndexSet kept;
                        kept.entries.reserve(kept_pos.size());
                        for (int pos : kept_pos)
                            kept.entries.push_back(shared_set.entries[static_cast<std::size_t>(pos)]);
                        heads = restricted_attention(inp, kept);
                        break;
                    }
                    case LayerStrategy::Kind::full_restricted:
                    case LayerStrategy::Kind::downsample: {
                        if (per_frame_sets) {
                            std::vector<TokenIndexSet> sets(static_cast<std::size_t>(n_frames));
                            for (int f = 0; f < n_frames; ++f) {
                                FrameSelection base = options.per_frame_selections
                                                          ? (*options.per_frame_selections)[static_cast<std::size_t>(f)]
                                                          : *options.selection;
                                if (options.include_query_frame) base = with_frame(base, f);
                                sets[static_cast<std::size_t>(f)] =
                                    resolve_token_set(base, plan, layer, batch.grid);
                            }
                            heads = restricted_attention_per_frame(inp, sets);
                        } else {
                            shared_set = resolve_token_set(*options.selection, plan, layer, batch.grid);
                            heads = restricted_attention(inp, shared_set);
                        }
                        break;
                    }
                }
            }

            if (probe) {
                LayerProfile profile;
                profile.layer = layer;
                profile.strategy = strategy;
                if (!sparsified) {
                    profile.stats = attention_entropy_stats(inp, all_tokens_set(n_frames, l),
                                                            probe->h_sample, probe->q_sample,
                                                            probe->seed);
                } else if (strategy.kind == LayerStrategy::Kind::local) {
                    profile.stats =
                        local_layer_stats(inp, probe->h_sample, probe->q_sample, probe->seed);
                } else if (strategy.kind == LayerStrategy::Kind::pool) {
                    // Mean pooling is the uniform-attention fixed point.
                    AttentionStats stats;
                    stats.normalized_entropy = 1.0;
                    stats.n_keys = shared_set.size();
                    stats.top1_weight = 1.0 / static_cast<double>(stats.n_keys);
                    stats.n_sampled_heads = probe->h_sample;
                    stats.n_sampled_queries = probe->q_sample;
                    profile.stats = stats;
                } else if (per_frame_sets) {
                    throw ArgumentError("analyze_layers: per-frame selections are not profiled");
                } else {
                    profile.stats = attention_entropy_stats(inp, shared_set, probe->h_sample,
                                                            probe->q_sample, probe->seed);
                }
                probe->profiles.push_back(std::move(profile));
            }

            x += concat_heads(heads) * w.wo;
            x += feed_forward(layer_norm(x, w.ln2_gamma, w.ln2_beta), w);
        }
    }
    return x;
}

}  // namespace

ToyModel build_toy_model(int n_layers, int model_dim, int n_heads, std::uint64_t seed) {
    if (n_layers < 1) throw ArgumentError("build_toy_model: n_layers must be >= 1");
    if (n_heads < 1) throw ArgumentError("build_toy_model: n_heads must be >= 1");
    if (model_dim < 1 || model_dim % n_heads != 0)
        throw ArgumentError("build_toy_model: model_dim must be divisible by n_heads");
    ToyModel model;
    model.n_layers = n_layers;
    model.model_dim = model_dim;
    model.n_heads = n_heads;
    model.seed = seed;
    SplitMix64 rng(seed);
    model.layers.reserve(static_cast<std::size_t>(n_layers));
    for (int i = 0; i < n_layers; ++i) {
        ToyLayer layer;
        layer.frame_block = draw_block(rng, model_dim);
        layer.global_block = draw_block(rng, model_dim);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

TokenBatch random_token_batch(int n_frames, const TokenGrid& grid, int model_dim,
                              std::uint64_t seed) {
    if (n_frames < 1) throw ArgumentError("random_token_batch: n_frames must be >= 1");
    if (model_dim < 1) throw ArgumentError("random_token_batch: model_dim must be >= 1");
    TokenBatch batch;
    batch.n_frames = n_frames;
    batch.grid = grid;
    SplitMix64 rng(seed);
    batch.embeddings.resize(static_cast<Eigen::Index>(n_frames) * grid.tokens_per_frame(),
                            model_dim);
    for (Eigen::Index r = 0; r < batch.embeddings.rows(); ++r)
        for (Eigen::Index c = 0; c < batch.embeddings.cols(); ++c)
            batch.embeddings(r, c) = rng.next_uniform(-1.0, 1.0);
    return batch;
}

void apply_frame_index_embedding(TokenBatch& batch, std::uint64_t seed, double scale) {
    if (scale < 0.0) throw ArgumentError("apply_frame_index_embedding: scale must be >= 0");
    const int l = batch.grid.tokens_per_frame();
    const int dim = static_cast<int>(batch.embeddings.cols());
    for (int f = 0; f < batch.n_frames; ++f) {
        SplitMix64 rng(seed + static_cast<std::uint64_t>(f));
        Vector embedding(dim);
        for (int c = 0; c < dim; ++c) embedding(c) = rng.next_uniform(-scale, scale);
        batch.embeddings.middleRows(static_cast<Eigen::Index>(f) * l, l).rowwise() +=
            embedding.transpose();
    }
}

Matrix forward(const ToyModel& model, const TokenBatch& batch, const ForwardOptions& options) {
    return run_forward(model, batch, options, nullptr);
}

std::vector<LayerProfile> analyze_layers(const ToyModel& model, const TokenBatch& batch,
                                         int h_sample, int q_sample, std::uint64_t seed,
                                         const ForwardOptions& options) {
    LayerProbeState probe;
    probe.h_sample = h_sample;
    probe.q_sample = q_sample;
    probe.seed = seed;
    run_forward(model, batch, options, &probe);
    return std::move(probe.profiles);
}

double median_forward_seconds(const ToyModel& model, const TokenBatch& batch,
                              const ForwardOptions& options, int repeats) {
    if (repeats < 3) throw ArgumentError("median_forward_seconds: repeats must be >= 3");
    std::vector<double> seconds;
    seconds.reserve(static_cast<std::size_t>(repeats));
    for (int i = 0; i < repeats; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const Matrix out = forward(model, batch, options);
        const auto stop = std::chrono::steady_clock::now();
        if (!out.allFinite()) throw ValueError("median_forward_seconds: non-finite output");
        seconds.push_back(std::chrono::duration<double>(stop - start).count());
    }
    std::sort(seconds.begin(), seconds.end());
    const std::size_t mid = seconds.size() / 2;
    return seconds.size() % 2 == 1 ? seconds[mid] : 0.5 * (seconds[mid - 1] + seconds[mid]);
}

std::vector<ScalingRow> benchmark_scaling(const ToyModel& model, const TokenGrid& grid,
                                          const std::vector<int>& frame_counts,
                                          const BenchParams& params) {
    if (params.repeats < 3) throw ArgumentError("benchmark_scaling: repeats must be >= 3");
    if (frame_counts.empty()) throw ArgumentError("benchmark_scaling: empty frame count list");
    for (int n : frame_counts) {
        if (n < 1) throw ArgumentError("benchmark_scaling: frame counts must be >= 1");
        if (params.k > n)
            throw ArgumentError("benchmark_scaling: k exceeds frame count " + std::to_string(n));
    }

    const int l = grid.tokens_per_frame();
    const LayerPlan plan = build_layer_plan(model.n_layers, params.l_local, params.l_sample,
                                            params.sigma, params.l_late);

    std::vector<ScalingRow> rows;
    for (const std::string mode : {"full", "selected"}) {
        std::optional<std::int64_t> prev_multiplies;
        for (int n : frame_counts) {
            const TokenBatch batch = random_token_batch(
                n, grid, model.model_dim, params.seed + static_cast<std::uint64_t>(n));

            ForwardOptions options;
            CostReport cost;
            if (mode == "selected") {
                const FrameFeatureMatrix features = random_unit_features(
                    n, 8, params.seed + static_cast<std::uint64_t>(n) + 1);
                const DistanceMatrix distances =
                    distance_from_covisibility(covisibility_matrix(features));
                options.selection = select_diverse_frames(distances, params.k, params.seed);
                options.plan = plan;
                cost = attention_flop_model(n, l, params.k, plan, grid, model.model_dim);
            } else {
                // Full attention is the k = N identity of the restricted path.
                cost = attention_flop_model(n, l, n, build_layer_plan(model.n_layers, 0, 0, 2),
                                            grid, model.model_dim);
            }

            ScalingRow row;
            row.n_frames = n;
            row.mode = mode;
            row.median_seconds = median_forward_seconds(model, batch, options, params.repeats);
            row.multiplies = cost.total_multiplies;
            if (prev_multiplies)
                row.model_predicted_ratio = static_cast<double>(row.multiplies) /
                                            static_cast<double>(*prev_multiplies);
            prev_multiplies = row.multiplies;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace tokensel
