#include "tokensel/inter_frame.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

namespace tokensel {

namespace {

void check_selection_args(int n, int k, const char* who) {
    if (k < 1 || k > n)
        throw ArgumentError(std::string(who) + ": k must be in [1, " + std::to_string(n) +
                            "], got " + std::to_string(k));
}

void check_indices(int n, const FrameSelection& s, const char* who) {
    if (s.indices.empty()) throw ArgumentError(std::string(who) + ": empty selection");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int idx : s.indices) {
        if (idx < 0 || idx >= n)
            throw ArgumentError(std::string(who) + ": frame index out of range");
        if (seen[static_cast<std::size_t>(idx)])
            throw ArgumentError(std::string(who) + ": duplicate frame index");
        seen[static_cast<std::size_t>(idx)] = 1;
    }
}

/// Sorts frame ids by (key ascending, index ascending) and keeps the first k.
FrameSelection top_k_by_key(const std::vector<double>& keys, int k) {
    std::vector<int> order(keys.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return keys[static_cast<std::size_t>(a)] <
                                                keys[static_cast<std::size_t>(b)]; });
    order.resize(static_cast<std::size_t>(k));
    std::sort(order.begin(), order.end());
    return FrameSelection{std::move(order), k, 0};
}

}  // namespace

const char* to_string(StrategyId strategy) {
    switch (strategy) {
        case StrategyId::temporal_nearest: return "temporal_nearest";
        case StrategyId::covis_high: return "covis_high";
        case StrategyId::covis_low: return "covis_low";
        case StrategyId::attn_max: return "attn_max";
        case StrategyId::attn_mean: return "attn_mean";
        case StrategyId::diversity: return "diversity";
    }
    throw ArgumentError("unknown strategy id");
}

StrategyId strategy_from_string(const std::string& name) {
    for (StrategyId s : {StrategyId::temporal_nearest, StrategyId::covis_high,
                         StrategyId::covis_low, StrategyId::attn_max, StrategyId::attn_mean,
                         StrategyId::diversity}) {
        if (name == to_string(s)) return s;
    }
    throw ArgumentError("unknown strategy '" + name + "'");
}

FrameSelection select_diverse_frames(const DistanceMatrix& distances, int k, std::uint64_t seed,
                                     std::optional<int> forced_first) {
    const int n = distances.n_frames();
    check_selection_args(n, k, "select_diverse_frames");

    int first;
    if (forced_first) {
        if (*forced_first < 0 || *forced_first >= n)
            throw ArgumentError("select_diverse_frames: forced first pick out of range");
        first = *forced_first;
    } else {
        SplitMix64 rng(seed);
        first = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    }

    std::vector<int> picked;
    picked.reserve(static_cast<std::size_t>(k));
    picked.push_back(first);

    // d_min[j] tracks the distance of frame j to the selected set; already
    // selected frames are parked at -inf so the argmax never revisits them.
    Vector d_min = distances.values.row(first);
    d_min(first) = -std::numeric_limits<double>::infinity();

    while (static_cast<int>(picked.size()) < k) {
        int best = 0;
        double best_d = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (d_min(j) > best_d) {
                best_d = d_min(j);
                best = j;
            }
        }
        picked.push_back(best);
        d_min(best) = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) d_min(j) = std::min(d_min(j), distances.values(best, j));
    }
    return FrameSelection{std::move(picked), k, seed};
}

double kcenter_cost(const DistanceMatrix& distances, const FrameSelection& selection) {
    const int n = distances.n_frames();
    check_indices(n, selection, "kcenter_cost");
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (int j : selection.indices) nearest = std::min(nearest, distances.values(i, j));
        worst = std::max(worst, nearest);
    }
    return worst;
}

FrameSelection brute_force_kcenter(const DistanceMatrix& distances, int k) {
    const int n = distances.n_frames();
    check_selection_args(n, k, "brute_force_kcenter");

    double combos = 1.0;
    for (int i = 0; i < k; ++i) combos = combos * (n - i) / (i + 1);
    if (combos > 1e6)
        throw ArgumentError("brute_force_kcenter: C(N, k) exceeds the 1e6 budget");

    std::vector<int> subset(static_cast<std::size_t>(k));
    std::iota(subset.begin(), subset.end(), 0);

    FrameSelection best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (;;) {
        FrameSelection candidate{subset, k, 0};
        const double cost = kcenter_cost(distances, candidate);
        // Strict < keeps the first-found subset; lexicographic enumeration
        // order then yields the smallest index list on ties.
        if (cost < best_cost) {
            best_cost = cost;
            best = std::move(candidate);
        }
        int i = k - 1;
        while (i >= 0 && subset[static_cast<std::size_t>(i)] == n - k + i) --i;
        if (i < 0) break;
        ++subset[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j)
            subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
    }
    return best;
}

FrameSelection select_temporal_nearest(int n_frames, int query_frame, int k) {
    check_selection_args(n_frames, k, "select_temporal_nearest");
    if (query_frame < 0 || query_frame >= n_frames)
        throw ArgumentError("select_temporal_nearest: query frame out of range");
    std::vector<double> keys(static_cast<std::size_t>(n_frames));
    for (int i = 0; i < n_frames; ++i)
        keys[static_cast<std::size_t>(i)] = std::abs(i - query_frame);
    return top_k_by_key(keys, k);
}

FrameSelection select_covis(const CovisibilityMatrix& covisibility, int query_frame, int k,
                            bool most_covisible) {
    const int n = covisibility.n_frames();
    check_selection_args(n, k, "select_covis");
    if (query_frame < 0 || query_frame >= n)
        throw ArgumentError("select_covis: query frame out of range");
    std::vector<double> keys(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double c = covisibility.values(query_frame, i);
        keys[static_cast<std::size_t>(i)] = most_covisible ? -c : c;
    }
    return top_k_by_key(keys, k);
}

FrameSelection select_by_attention(const Matrix& scores, int k, bool max_pool) {
    const int n = static_cast<int>(scores.rows());
    if (n < 1 || scores.cols() < 1)
        throw ArgumentError("select_by_attention: score matrix is empty");
    if (!scores.allFinite()) throw ValueError("select_by_attention: non-finite score");
    check_selection_args(n, k, "select_by_attention");
    std::vector<double> keys(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double pooled = max_pool ? scores.row(i).maxCoeff() : scores.row(i).mean();
        keys[static_cast<std::size_t>(i)] = -pooled;
    }
    return top_k_by_key(keys, k);
}

FrameSelection select_baseline(StrategyId strategy, int query_frame, const BaselineInputs& inputs,
                               int k) {
    switch (strategy) {
        case StrategyId::temporal_nearest:
            if (inputs.n_frames < 1)
                throw ArgumentError("select_baseline: temporal_nearest needs n_frames");
            return select_temporal_nearest(inputs.n_frames, query_frame, k);
        case StrategyId::covis_high:
        case StrategyId::covis_low:
            if (!inputs.covisibility)
                throw ArgumentError("select_baseline: covisibility matrix required");
            return select_covis(*inputs.covisibility, query_frame, k,
                                strategy == StrategyId::covis_high);
        case StrategyId::attn_max:
        case StrategyId::attn_mean:
            if (!inputs.attn_scores)
                throw ArgumentError("select_baseline: attention scores required");
            return select_by_attention(*inputs.attn_scores, k, strategy == StrategyId::attn_max);
        case StrategyId::diversity:
            throw ArgumentError("select_baseline: diversity uses select_diverse_frames");
    }
    throw ArgumentError("unknown strategy id");
}

nlohmann::json selection_to_json(const FrameSelection& selection, StrategyId strategy) {
    return nlohmann::json{{"k", selection.k},
                          {"seed", selection.seed},
                          {"strategy", to_string(strategy)},
                          {"indices", selection.indices}};
}

FrameSelection selection_from_json(const nlohmann::json& j, StrategyId* strategy_out) {
    if (!j.is_object() || !j.contains("k") || !j.contains("seed") || !j.contains("indices") ||
        !j.contains("strategy"))
        throw FormatError("selection JSON must contain k, seed, strategy, indices");
    FrameSelection s;
    s.k = j.at("k").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.indices = j.at("indices").get<std::vector<int>>();
    if (static_cast<int>(s.indices.size()) != s.k)
        throw FormatError("selection JSON: indices length does not match k");
    if (strategy_out) *strategy_out = strategy_from_string(j.at("strategy").get<std::string>());
    return s;
}

}  // namespace tokensel
