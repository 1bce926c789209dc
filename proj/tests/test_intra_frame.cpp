#include <doctest.h>

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "tokensel/intra_frame.hpp"

using namespace tokensel;

namespace {

std::set<int> as_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

std::vector<LayerStrategy::Kind> kinds(const LayerPlan& plan) {
    std::vector<LayerStrategy::Kind> out;
    for (const auto& s : plan.strategies) out.push_back(s.kind);
    return out;
}

}  // namespace

TEST_CASE("standard_downsample") {
    SUBCASE("4x4 grid, sigma 2") {
        const auto kept = standard_downsample(TokenGrid::create(4, 4, 0), 2);
        CHECK(kept == std::vector<int>{0, 2, 8, 10});
    }
    SUBCASE("sigma 1 keeps everything") {
        const auto kept = standard_downsample(TokenGrid::create(3, 5, 0), 1);
        CHECK(kept.size() == 15);
    }
    SUBCASE("4x4 grid, sigma 3 keeps the strided corners") {
        const auto kept = standard_downsample(TokenGrid::create(4, 4, 0), 3);
        CHECK(kept == std::vector<int>{0, 3, 12, 15});
    }
    SUBCASE("special tokens always kept, ahead of spatial ones") {
        const auto kept = standard_downsample(TokenGrid::create(4, 4, 2), 2);
        CHECK(kept == std::vector<int>{0, 1, 2, 4, 10, 12});
    }
    SUBCASE("stride count is ceil(h/sigma) * ceil(w/sigma)") {
        for (int h = 1; h <= 7; ++h)
            for (int w = 1; w <= 7; ++w)
                for (int sigma = 1; sigma <= std::min(h, w); ++sigma) {
                    const auto kept = standard_downsample(TokenGrid::create(h, w, 0), sigma);
                    const int rows = (h + sigma - 1) / sigma;
                    const int cols = (w + sigma - 1) / sigma;
                    CHECK(static_cast<int>(kept.size()) == rows * cols);
                }
    }
    SUBCASE("kept sets nest across sigma multiples") {
        const auto g = TokenGrid::create(9, 12, 1);
        const auto coarse = as_set(standard_downsample(g, 6));
        const auto fine = as_set(standard_downsample(g, 3));
        for (int t : coarse) CHECK(fine.count(t) == 1);
    }
    SUBCASE("sigma beyond the grid is rejected") {
        CHECK_THROWS_AS(standard_downsample(TokenGrid::create(4, 4, 0), 5), ArgumentError);
        CHECK_THROWS_AS(standard_downsample(TokenGrid::create(4, 4, 0), 0), ArgumentError);
    }
}

TEST_CASE("activation_select") {
    SUBCASE("keep everything at fraction 1") {
        CHECK(activation_select({0.1, 0.2, 0.3}, 1.0) == std::vector<int>{0, 1, 2});
    }
    SUBCASE("ties resolve to the lowest index") {
        CHECK(activation_select({0.9, 0.1, 0.5, 0.5}, 0.5) == std::vector<int>{0, 2});
    }
    SUBCASE("uniform scores keep the first ceil(f*L) indices") {
        const std::vector<double> uniform(16, 1.0);
        CHECK(activation_select(uniform, 0.25) == std::vector<int>{0, 1, 2, 3});
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(activation_select({}, 0.5), ArgumentError);
        CHECK_THROWS_AS(activation_select({1.0}, 0.0), ArgumentError);
        CHECK_THROWS_AS(activation_select({1.0}, 1.5), ArgumentError);
        CHECK_THROWS_AS(activation_select({std::nan("")}, 0.5), ValueError);
    }
}

TEST_CASE("build_layer_plan") {
    SUBCASE("default thresholds partition 24 layers") {
        const auto plan = build_layer_plan(24, 2, 9, 3);
        REQUIRE(plan.n_layers() == 24);
        for (int l = 0; l < 24; ++l) {
            const auto kind = plan.strategies[static_cast<std::size_t>(l)].kind;
            if (l < 2)
                CHECK(kind == LayerStrategy::Kind::local);
            else if (l < 9)
                CHECK(kind == LayerStrategy::Kind::downsample);
            else
                CHECK(kind == LayerStrategy::Kind::full_restricted);
        }
        CHECK(plan.strategies[2].sigma == 3);
    }
    SUBCASE("zero thresholds give all full_restricted") {
        const auto plan = build_layer_plan(6, 0, 0, 2);
        for (const auto& s : plan.strategies) CHECK(s.kind == LayerStrategy::Kind::full_restricted);
    }
    SUBCASE("late tail downsamples again") {
        const auto plan = build_layer_plan(24, 2, 9, 3, 20);
        for (int l = 20; l < 24; ++l)
            CHECK(plan.strategies[static_cast<std::size_t>(l)].kind ==
                  LayerStrategy::Kind::downsample);
        CHECK(plan.strategies[19].kind == LayerStrategy::Kind::full_restricted);
    }
    SUBCASE("regions are contiguous and exhaustive") {
        const auto plan = build_layer_plan(13, 4, 7, 2);
        const auto k = kinds(plan);
        CHECK(std::count(k.begin(), k.end(), LayerStrategy::Kind::local) == 4);
        CHECK(std::count(k.begin(), k.end(), LayerStrategy::Kind::downsample) == 3);
        CHECK(std::count(k.begin(), k.end(), LayerStrategy::Kind::full_restricted) == 6);
        CHECK(std::is_sorted(k.begin(), k.end(), [](auto a, auto b) {
            auto rank = [](LayerStrategy::Kind kk) {
                return kk == LayerStrategy::Kind::local ? 0
                       : kk == LayerStrategy::Kind::downsample ? 1 : 2;
            };
            return rank(a) < rank(b);
        }));
    }
    SUBCASE("ordering violations rejected") {
        CHECK_THROWS_AS(build_layer_plan(24, 10, 9, 3), ArgumentError);
        CHECK_THROWS_AS(build_layer_plan(24, 2, 25, 3), ArgumentError);
        CHECK_THROWS_AS(build_layer_plan(24, 2, 9, 3, 8), ArgumentError);
        CHECK_THROWS_AS(build_layer_plan(24, 2, 9, 1), ArgumentError);
    }
}

TEST_CASE("entropy_adaptive_plan") {
    SUBCASE("worked example") {
        const auto plan = entropy_adaptive_plan({0.99, 0.98, 0.95, 0.90, 0.80}, 0.97, 0.92, 2);
        CHECK(kinds(plan) == std::vector<LayerStrategy::Kind>{
                                 LayerStrategy::Kind::local, LayerStrategy::Kind::local,
                                 LayerStrategy::Kind::downsample,
                                 LayerStrategy::Kind::full_restricted,
                                 LayerStrategy::Kind::full_restricted});
    }
    SUBCASE("all below tau2 skips local and downsample") {
        const auto plan = entropy_adaptive_plan({0.5, 0.4, 0.3}, 0.97, 0.92, 2);
        for (const auto& s : plan.strategies)
            CHECK(s.kind == LayerStrategy::Kind::full_restricted);
    }
    SUBCASE("entropy never crossing keeps everything local") {
        const auto plan = entropy_adaptive_plan({1.0, 1.0, 1.0}, 0.97, 0.92, 2);
        for (const auto& s : plan.strategies) CHECK(s.kind == LayerStrategy::Kind::local);
    }
    SUBCASE("threshold ordering enforced") {
        CHECK_THROWS_AS(entropy_adaptive_plan({0.5}, 0.9, 0.95, 2), ArgumentError);
        CHECK_THROWS_AS(entropy_adaptive_plan({1.5}, 0.97, 0.92, 2), ValueError);
    }
    SUBCASE("monotone entropies reproduce a threshold plan") {
        const std::vector<double> entropies = {0.99, 0.96, 0.95, 0.91, 0.85, 0.70};
        const auto adaptive = entropy_adaptive_plan(entropies, 0.97, 0.92, 3);
        const auto thresholds = build_layer_plan(6, 1, 3, 3);
        CHECK(kinds(adaptive) == kinds(thresholds));
    }
}

TEST_CASE("tld_select") {
    SUBCASE("full coverage keeps the least redundant half") {
        Matrix tokens(4, 2);
        tokens << 1.0, 0.0,   // redundancy 1 against mean (1,0)
                  0.0, 1.0,   // redundancy 0
                  1.0, 1.0,   // redundancy 1/sqrt(2)
                  -1.0, 0.0;  // redundancy -1
        Vector mean(2);
        mean << 1.0, 0.0;
        const auto kept = tld_select(tokens, 2, {mean}, 0);
        CHECK(kept == std::vector<int>{1, 3});
    }
    SUBCASE("empty means keep the first FPS picks") {
        Matrix tokens(6, 2);
        tokens << 1.0, 0.0, 0.9, 0.1, 0.0, 1.0, -1.0, 0.2, 0.5, 0.5, -0.3, -0.9;
        const auto candidates = select_diverse_frames(
            distance_from_covisibility(covisibility_matrix(FrameFeatureMatrix::create(tokens))), 4,
            0, 0);
        const auto kept = tld_select(tokens, 2, {}, 0, 0);
        CHECK(as_set(kept) ==
              std::set<int>(candidates.indices.begin(), candidates.indices.begin() + 2));
    }
    SUBCASE("duplicate tokens tie and resolve by pick order") {
        Matrix tokens(4, 2);
        tokens << 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, -1.0;
        Vector mean(2);
        mean << 1.0, 0.0;
        const auto kept = tld_select(tokens, 2, {mean}, 0, 0);
        CHECK(kept.size() == 2);
        // Tokens 0 and 2 are duplicates with redundancy 1; both losers.
        CHECK(as_set(kept) == std::set<int>{1, 3});
    }
    SUBCASE("output is always budget-sized and inside the candidate set") {
        const auto tokens = random_unit_features(16, 4, 5);
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            const auto candidates = select_diverse_frames(
                distance_from_covisibility(covisibility_matrix(tokens)), 8, seed);
            Vector mean = tokens.values.colwise().mean();
            const auto kept = tld_select(tokens.values, 4, {mean}, seed);
            CHECK(kept.size() == 4);
            const auto candidate_set = as_set(candidates.indices);
            for (int t : kept) CHECK(candidate_set.count(t) == 1);
        }
    }
    SUBCASE("budget guards") {
        const auto tokens = random_unit_features(4, 2, 1);
        CHECK_THROWS_AS(tld_select(tokens.values, 0, {}, 0), ArgumentError);
        CHECK_THROWS_AS(tld_select(tokens.values, 3, {}, 0), ArgumentError);
    }
}

TEST_CASE("resolve_token_set") {
    const auto grid = TokenGrid::create(4, 4, 1);  // L = 17

    SUBCASE("full_restricted keeps every token of the selected frames") {
        const auto plan = build_layer_plan(1, 0, 0, 2);
        const FrameSelection all{{0, 1, 2, 3}, 4, 0};
        const auto set = resolve_token_set(all, plan, 0, grid);
        CHECK(set.size() == 4 * 17);
    }
    SUBCASE("downsample composes counts") {
        const auto plan = build_layer_plan(1, 0, 1, 2);
        const FrameSelection two{{2, 0}, 2, 0};
        const auto set = resolve_token_set(two, plan, 0, grid);
        CHECK(set.size() == 2 * (4 + 1));
        // Entries are sorted by frame and carry the special token.
        CHECK(set.entries.front() == std::pair<int, int>{0, 0});
        for (const auto& [frame, token] : set.entries) CHECK((frame == 0 || frame == 2));
    }
    SUBCASE("local layers resolve to the empty set") {
        const auto plan = build_layer_plan(2, 1, 1, 2);
        const FrameSelection s{{0}, 1, 0};
        CHECK(resolve_token_set(s, plan, 0, grid).empty());
        CHECK_FALSE(resolve_token_set(s, plan, 1, grid).empty());
    }
    SUBCASE("monotone in the selection") {
        const auto plan = build_layer_plan(1, 0, 1, 2);
        const FrameSelection small{{1}, 1, 0};
        const FrameSelection larger{{1, 3}, 2, 0};
        const auto a = resolve_token_set(small, plan, 0, grid);
        const auto b = resolve_token_set(larger, plan, 0, grid);
        const std::set<std::pair<int, int>> bs(b.entries.begin(), b.entries.end());
        for (const auto& e : a.entries) CHECK(bs.count(e) == 1);
    }
    SUBCASE("layer bounds checked") {
        const auto plan = build_layer_plan(1, 0, 0, 2);
        CHECK_THROWS_AS(resolve_token_set(FrameSelection{{0}, 1, 0}, plan, 1, grid),
                        ArgumentError);
    }
}

TEST_CASE("plan JSON round-trip") {
    SUBCASE("threshold provenance") {
        const auto plan = build_layer_plan(24, 2, 9, 3, 20);
        const auto back = plan_from_json(plan_to_json(plan));
        CHECK(back.strategies == plan.strategies);
        CHECK(back.provenance == PlanProvenance::thresholds);
        CHECK(back.l_late == 20);
    }
    SUBCASE("entropy provenance") {
        const auto plan = entropy_adaptive_plan({0.99, 0.95, 0.90}, 0.97, 0.92, 2);
        const auto back = plan_from_json(plan_to_json(plan));
        CHECK(back.strategies == plan.strategies);
        CHECK(back.provenance == PlanProvenance::entropy);
        CHECK(back.tau1 == 0.97);
        CHECK(back.l_local == std::nullopt);
    }
    SUBCASE("malformed JSON rejected") {
        CHECK_THROWS_AS(plan_from_json(nlohmann::json{{"provenance", "thresholds"}}), FormatError);
    }
}
