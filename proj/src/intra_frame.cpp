#include "tokensel/intra_frame.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

namespace tokensel {

TokenGrid TokenGrid::create(int height, int width, int n_special) {
    if (height < 1 || width < 1)
        throw ArgumentError("token grid needs height >= 1 and width >= 1");
    if (n_special < 0) throw ArgumentError("token grid needs n_special >= 0");
    return TokenGrid{height, width, n_special};
}

LayerStrategy LayerStrategy::downsample(int sigma) {
    if (sigma < 2) throw ArgumentError("downsample strategy needs sigma >= 2");
    return {Kind::downsample, sigma, 0.0};
}

LayerStrategy LayerStrategy::activation(double keep_fraction) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
        throw ArgumentError("activation strategy needs keep_fraction in (0, 1]");
    return {Kind::activation, 0, keep_fraction};
}

const char* to_string(LayerStrategy::Kind kind) {
    switch (kind) {
        case LayerStrategy::Kind::local: return "local";
        case LayerStrategy::Kind::downsample: return "downsample";
        case LayerStrategy::Kind::full_restricted: return "full_restricted";
        case LayerStrategy::Kind::pool: return "pool";
        case LayerStrategy::Kind::activation: return "activation";
    }
    throw ArgumentError("unknown layer strategy kind");
}

std::vector<int> flatten_token_set(const TokenIndexSet& set, int tokens_per_frame) {
    std::vector<int> flat;
    flat.reserve(set.entries.size());
    for (const auto& [frame, token] : set.entries) flat.push_back(frame * tokens_per_frame + token);
    return flat;
}

std::vector<int> standard_downsample(const TokenGrid& grid, int sigma) {
    if (sigma < 1) throw ArgumentError("standard_downsample: sigma must be >= 1");
    if (sigma > std::min(grid.height, grid.width))
        throw ArgumentError("standard_downsample: sigma exceeds min(height, width)");
    std::vector<int> kept;
    for (int s = 0; s < grid.n_special; ++s) kept.push_back(s);
    for (int r = 0; r < grid.height; r += sigma)
        for (int c = 0; c < grid.width; c += sigma)
            kept.push_back(grid.n_special + r * grid.width + c);
    return kept;
}

std::vector<int> activation_select(const std::vector<double>& attn_row_sums,
                                   double keep_fraction) {
    if (attn_row_sums.empty()) throw ArgumentError("activation_select: empty score list");
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
        throw ArgumentError("activation_select: keep_fraction must be in (0, 1]");
    for (double s : attn_row_sums)
        if (!std::isfinite(s)) throw ValueError("activation_select: non-finite score");

    const int total = static_cast<int>(attn_row_sums.size());
    const int keep = static_cast<int>(std::ceil(keep_fraction * total));
    std::vector<int> order(attn_row_sums.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return attn_row_sums[static_cast<std::size_t>(a)] >
               attn_row_sums[static_cast<std::size_t>(b)];
    });
    order.resize(static_cast<std::size_t>(keep));
    std::sort(order.begin(), order.end());
    return order;
}

LayerPlan build_layer_plan(int n_layers, int l_local, int l_sample, int sigma,
                           std::optional<int> l_late) {
    if (n_layers < 1) throw ArgumentError("build_layer_plan: n_layers must be >= 1");
    if (!(0 <= l_local && l_local <= l_sample && l_sample <= n_layers))
        throw ArgumentError("build_layer_plan: need 0 <= l_local <= l_sample <= n_layers");
    if (l_late && !(*l_late >= l_sample && *l_late <= n_layers))
        throw ArgumentError("build_layer_plan: need l_sample <= l_late <= n_layers");
    if (l_local < l_sample && sigma < 2)
        throw ArgumentError("build_layer_plan: downsample layers need sigma >= 2");
    if (l_late && *l_late < n_layers && sigma < 2)
        throw ArgumentError("build_layer_plan: late downsample layers need sigma >= 2");

    LayerPlan plan;
    plan.provenance = PlanProvenance::thresholds;
    plan.l_local = l_local;
    plan.l_sample = l_sample;
    plan.l_late = l_late;
    plan.sigma = sigma;
    plan.strategies.reserve(static_cast<std::size_t>(n_layers));
    for (int l = 0; l < n_layers; ++l) {
        if (l < l_local)
            plan.strategies.push_back(LayerStrategy::local());
        else if (l < l_sample)
            plan.strategies.push_back(LayerStrategy::downsample(sigma));
        else if (l_late && l >= *l_late)
            plan.strategies.push_back(LayerStrategy::downsample(sigma));
        else
            plan.strategies.push_back(LayerStrategy::full_restricted());
    }
    return plan;
}

LayerPlan entropy_adaptive_plan(const std::vector<double>& per_layer_entropy, double tau1,
                                double tau2, int sigma) {
    if (per_layer_entropy.empty())
        throw ArgumentError("entropy_adaptive_plan: need at least one layer entropy");
    if (tau1 < tau2) throw ArgumentError("entropy_adaptive_plan: need tau1 >= tau2");
    for (double h : per_layer_entropy)
        if (!(h >= 0.0 && h <= 1.0))
            throw ValueError("entropy_adaptive_plan: entropy outside [0, 1]");
    if (sigma < 2) throw ArgumentError("entropy_adaptive_plan: sigma must be >= 2");

    LayerPlan plan;
    plan.provenance = PlanProvenance::entropy;
    plan.tau1 = tau1;
    plan.tau2 = tau2;
    plan.sigma = sigma;
    // First-crossing scan: a layer that crosses both thresholds at once goes
    // straight to full_restricted.
    int phase = 0;  // 0 = local, 1 = downsample, 2 = full_restricted
    for (double h : per_layer_entropy) {
        if (phase == 0 && h < tau1) phase = 1;
        if (phase == 1 && h < tau2) phase = 2;
        if (phase == 0)
            plan.strategies.push_back(LayerStrategy::local());
        else if (phase == 1)
            plan.strategies.push_back(LayerStrategy::downsample(sigma));
        else
            plan.strategies.push_back(LayerStrategy::full_restricted());
    }
    return plan;
}

std::vector<int> tld_select(const Matrix& frame_tokens, int budget,
                            const std::vector<Vector>& other_frame_means, std::uint64_t seed,
                            std::optional<int> forced_first) {
    const int total = static_cast<int>(frame_tokens.rows());
    if (budget < 1) throw ArgumentError("tld_select: budget must be >= 1");
    if (2 * budget > total)
        throw ArgumentError("tld_select: need 2 * budget <= token count");

    // Over-select candidates with FPS on token-level cosine distances.
    const FrameFeatureMatrix tokens = FrameFeatureMatrix::create(frame_tokens);
    const DistanceMatrix distances = distance_from_covisibility(covisibility_matrix(tokens));
    const FrameSelection candidates =
        select_diverse_frames(distances, 2 * budget, seed, forced_first);

    const FrameFeatureMatrix normalized = normalize_rows(tokens);
    std::vector<Vector> unit_means;
    unit_means.reserve(other_frame_means.size());
    for (std::size_t m = 0; m < other_frame_means.size(); ++m) {
        const Vector& mean = other_frame_means[m];
        if (mean.size() != frame_tokens.cols())
            throw DimensionError("tld_select: mean feature dimension mismatch");
        const double norm = mean.norm();
        if (norm == 0.0)
            throw ValueError("tld_select: other-frame mean " + std::to_string(m) + " is zero");
        unit_means.push_back(mean / norm);
    }

    // Redundancy score: max cosine similarity to any other frame's mean.
    // Candidates stay in FPS pick order so score ties keep earlier picks.
    std::vector<double> scores;
    scores.reserve(candidates.indices.size());
    for (int token : candidates.indices) {
        double best = 0.0;
        bool first = true;
        for (const Vector& mean : unit_means) {
            const double sim = normalized.values.row(token).dot(mean);
            if (first || sim > best) best = sim;
            first = false;
        }
        scores.push_back(unit_means.empty() ? 0.0 : best);
    }

    std::vector<int> order(candidates.indices.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return scores[static_cast<std::size_t>(a)] < scores[static_cast<std::size_t>(b)];
    });

    std::vector<int> kept;
    kept.reserve(static_cast<std::size_t>(budget));
    for (int i = 0; i < budget; ++i)
        kept.push_back(candidates.indices[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    std::sort(kept.begin(), kept.end());
    return kept;
}

TokenIndexSet resolve_token_set(const FrameSelection& selection, const LayerPlan& plan, int layer,
                                const TokenGrid& grid) {
    if (layer < 0 || layer >= plan.n_layers())
        throw ArgumentError("resolve_token_set: layer index out of range");
    const LayerStrategy& strategy = plan.strategies[static_cast<std::size_t>(layer)];

    TokenIndexSet set;
    if (strategy.kind == LayerStrategy::Kind::local) return set;  // frame-local fallback

    std::vector<int> frames = selection.indices;
    std::sort(frames.begin(), frames.end());

    std::vector<int> per_frame_tokens;
    if (strategy.kind == LayerStrategy::Kind::downsample) {
        per_frame_tokens = standard_downsample(grid, strategy.sigma);
    } else {
        per_frame_tokens.resize(static_cast<std::size_t>(grid.tokens_per_frame()));
        std::iota(per_frame_tokens.begin(), per_frame_tokens.end(), 0);
    }

    set.entries.reserve(frames.size() * per_frame_tokens.size());
    for (int frame : frames)
        for (int token : per_frame_tokens) set.entries.emplace_back(frame, token);
    return set;
}

nlohmann::json plan_to_json(const LayerPlan& plan) {
    nlohmann::json j;
    j["n_layers"] = plan.n_layers();
    j["provenance"] = plan.provenance == PlanProvenance::thresholds ? "thresholds" : "entropy";
    j["l_local"] = plan.l_local ? nlohmann::json(*plan.l_local) : nlohmann::json(nullptr);
    j["l_sample"] = plan.l_sample ? nlohmann::json(*plan.l_sample) : nlohmann::json(nullptr);
    j["l_late"] = plan.l_late ? nlohmann::json(*plan.l_late) : nlohmann::json(nullptr);
    j["sigma"] = plan.sigma ? nlohmann::json(*plan.sigma) : nlohmann::json(nullptr);
    j["tau1"] = plan.tau1 ? nlohmann::json(*plan.tau1) : nlohmann::json(nullptr);
    j["tau2"] = plan.tau2 ? nlohmann::json(*plan.tau2) : nlohmann::json(nullptr);
    nlohmann::json strategies = nlohmann::json::array();
    for (const LayerStrategy& s : plan.strategies) {
        if (s.kind == LayerStrategy::Kind::activation) {
            strategies.push_back(
                nlohmann::json{{"tag", "activation"}, {"keep_fraction", s.keep_fraction}});
        } else {
            strategies.push_back(to_string(s.kind));
        }
    }
    j["strategies"] = std::move(strategies);
    return j;
}

LayerPlan plan_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("strategies") || !j.contains("provenance"))
        throw FormatError("plan JSON must contain provenance and strategies");
    LayerPlan plan;
    const std::string provenance = j.at("provenance").get<std::string>();
    if (provenance == "thresholds")
        plan.provenance = PlanProvenance::thresholds;
    else if (provenance == "entropy")
        plan.provenance = PlanProvenance::entropy;
    else
        throw FormatError("plan JSON: unknown provenance '" + provenance + "'");

    auto opt_int = [&](const char* key) -> std::optional<int> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<int>();
    };
    auto opt_double = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>();
    };
    plan.l_local = opt_int("l_local");
    plan.l_sample = opt_int("l_sample");
    plan.l_late = opt_int("l_late");
    plan.sigma = opt_int("sigma");
    plan.tau1 = opt_double("tau1");
    plan.tau2 = opt_double("tau2");

    for (const auto& entry : j.at("strategies")) {
        if (entry.is_string()) {
            const std::string tag = entry.get<std::string>();
            if (tag == "local")
                plan.strategies.push_back(LayerStrategy::local());
            else if (tag == "downsample") {
                if (!plan.sigma) throw FormatError("plan JSON: downsample needs top-level sigma");
                plan.strategies.push_back(LayerStrategy::downsample(*plan.sigma));
            } else if (tag == "full_restricted")
                plan.strategies.push_back(LayerStrategy::full_restricted());
            else if (tag == "pool")
                plan.strategies.push_back(LayerStrategy::pool());
            else
                throw FormatError("plan JSON: unknown strategy '" + tag + "'");
        } else if (entry.is_object() && entry.value("tag", "") == "activation") {
            plan.strategies.push_back(
                LayerStrategy::activation(entry.at("keep_fraction").get<double>()));
        } else {
            throw FormatError("plan JSON: malformed strategy entry");
        }
    }
    if (j.contains("n_layers") && j.at("n_layers").get<int>() != plan.n_layers())
        throw FormatError("plan JSON: n_layers does not match strategies length");
    return plan;
}

}  // namespace tokensel
