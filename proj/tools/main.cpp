// tokensel: two-stage K/V token selection for global attention, with an
// analytic cost model, a toy transformer for scaling runs, and pose, cloud,
// and depth evaluation metrics.
//
// Machine-readable output goes to stdout (or --out); logs go to stderr.
// Exit codes: 0 success, 1 internal or data error, 2 usage error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tokensel/attention.hpp"
#include "tokensel/frame_features.hpp"
#include "tokensel/inter_frame.hpp"
#include "tokensel/intra_frame.hpp"
#include "tokensel/metrics.hpp"
#include "tokensel/toy_model.hpp"

namespace ts = tokensel;

namespace {

/// Thrown after load/validation; maps to exit code 2.
struct UsageFailure {
    std::string message;
};

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error(out_path + ": cannot open output file");
    out << text;
    if (!out) throw std::runtime_error(out_path + ": write failed");
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& what) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(std::stoi(cell));
        } catch (const std::exception&) {
            throw UsageFailure{what + ": bad integer '" + cell + "'"};
        }
    }
    if (out.empty()) throw UsageFailure{what + ": empty list"};
    return out;
}

std::vector<double> parse_double_list(const std::string& csv, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(ts::parse_strict_double(cell, what));
        } catch (const ts::Error& e) {
            throw UsageFailure{e.what()};
        }
    }
    if (out.empty()) throw UsageFailure{what + ": empty list"};
    return out;
}

ts::TokenGrid parse_grid(const std::string& text, int n_special) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw UsageFailure{"--grid must look like HxW, got '" + text + "'"};
    try {
        return ts::TokenGrid::create(std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1)),
                                     n_special);
    } catch (const std::exception& e) {
        throw UsageFailure{std::string("--grid: ") + e.what()};
    }
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageFailure{path + ": cannot open file"};
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageFailure{path + ": " + e.what()};
    }
}

std::string profile_csv(const std::vector<ts::LayerProfile>& profiles, const ts::CostReport* cost,
                        const char* label_override = nullptr) {
    std::ostringstream out;
    out << "layer,strategy,n_keys,h_norm,top1,multiplies,reduction_pct\n";
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto& p = profiles[i];
        out << p.layer << ','
            << (label_override ? label_override : ts::to_string(p.strategy.kind)) << ','
            << p.stats.n_keys << ','
            << ts::format_double(p.stats.normalized_entropy) << ','
            << ts::format_double(p.stats.top1_weight) << ',';
        if (cost) {
            out << cost->layers[i].multiplies << ','
                << ts::format_double(cost->layers[i].reduction_pct);
        } else {
            out << "0,0";
        }
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------- select --

struct SelectConfig {
    std::string features_path;
    std::string input_format = "csv";
    std::string strategy = "diversity";
    std::string attn_scores_path;
    std::string format = "json";
    std::string out;
    int k = 25;
    int query = -1;
    std::uint64_t seed = 0;
};

int cmd_select(const SelectConfig& cfg) {
    ts::FrameFeatureMatrix features = [&] {
        try {
            return ts::load_features(cfg.features_path, cfg.input_format == "binary"
                                                            ? ts::FeatureFormat::binary
                                                            : ts::FeatureFormat::csv);
        } catch (const ts::Error& e) {
            throw UsageFailure{e.what()};
        }
    }();

    const ts::StrategyId strategy = ts::strategy_from_string(cfg.strategy);
    const ts::CovisibilityMatrix covis = ts::covisibility_matrix(features);
    const ts::DistanceMatrix distances = ts::distance_from_covisibility(covis);

    ts::FrameSelection selection;
    if (strategy == ts::StrategyId::diversity) {
        selection = ts::select_diverse_frames(distances, cfg.k, cfg.seed);
    } else {
        ts::BaselineInputs inputs;
        inputs.n_frames = features.n_frames();
        inputs.covisibility = &covis;
        ts::Matrix scores;
        if (strategy == ts::StrategyId::attn_max || strategy == ts::StrategyId::attn_mean) {
            if (cfg.attn_scores_path.empty())
                throw UsageFailure{"--attn-scores is required for attention strategies"};
            try {
                scores = ts::load_depth_grid(cfg.attn_scores_path, ts::DepthFileFormat::csv);
            } catch (const ts::Error& e) {
                throw UsageFailure{e.what()};
            }
            if (scores.rows() != features.n_frames())
                throw UsageFailure{cfg.attn_scores_path + ": expected one score row per frame (" +
                                   std::to_string(features.n_frames()) + "), got " +
                                   std::to_string(scores.rows())};
            inputs.attn_scores = &scores;
        } else if (cfg.query < 0) {
            throw UsageFailure{"--query is required for strategy " + cfg.strategy};
        }
        selection = ts::select_baseline(strategy, cfg.query, inputs, cfg.k);
        selection.seed = cfg.seed;
    }

    std::cerr << "k-center cost: " << ts::format_double(ts::kcenter_cost(distances, selection))
              << "\n";

    if (cfg.format == "csv") {
        std::ostringstream out;
        out << "index\n";
        for (int idx : selection.indices) out << idx << '\n';
        write_output(out.str(), cfg.out);
    } else {
        write_output(ts::selection_to_json(selection, strategy).dump(2) + "\n", cfg.out);
    }
    return 0;
}

// ------------------------------------------------------------------ plan --

struct PlanConfig {
    int n_layers = 24;
    int l_local = 2;
    int l_sample = 9;
    int sigma = 3;
    std::optional<int> l_late;
    std::optional<double> tau1, tau2;
    std::string entropies;
    std::string entropy_csv;
    std::string out;
};

std::vector<double> entropies_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageFailure{path + ": cannot open file"};
    std::string line;
    if (!std::getline(in, line) ||
        !ts::strip_cr(line).starts_with("layer,strategy,n_keys,h_norm,top1"))
        throw UsageFailure{path + ":1: expected an analyze CSV header"};
    std::vector<double> h;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = ts::strip_cr(line);
        if (line.empty()) continue;
        const auto cells = ts::split_csv_line(line);
        if (cells.size() < 4)
            throw UsageFailure{path + ":" + std::to_string(line_no) + ": too few columns"};
        try {
            h.push_back(ts::parse_strict_double(cells[3], path + ":" + std::to_string(line_no)));
        } catch (const ts::Error& e) {
            throw UsageFailure{e.what()};
        }
    }
    if (h.empty()) throw UsageFailure{path + ": no data rows"};
    return h;
}

int cmd_plan(const PlanConfig& cfg) {
    ts::LayerPlan plan;
    if (cfg.tau1 || cfg.tau2) {
        if (!cfg.tau1 || !cfg.tau2) throw UsageFailure{"--tau1 and --tau2 must be given together"};
        std::vector<double> entropies;
        if (!cfg.entropy_csv.empty())
            entropies = entropies_from_csv(cfg.entropy_csv);
        else if (!cfg.entropies.empty())
            entropies = parse_double_list(cfg.entropies, "--entropies");
        else
            throw UsageFailure{"entropy thresholds need --entropies or --entropy-csv"};
        plan = ts::entropy_adaptive_plan(entropies, *cfg.tau1, *cfg.tau2, cfg.sigma);
    } else {
        plan = ts::build_layer_plan(cfg.n_layers, cfg.l_local, cfg.l_sample, cfg.sigma,
                                    cfg.l_late);
    }
    write_output(ts::plan_to_json(plan).dump(2) + "\n", cfg.out);
    return 0;
}

// --------------------------------------------------------------- analyze --

struct AnalyzeConfig {
    std::string dump_path;
    std::string select_path;
    std::string plan_path;
    int n_layers = 24;
    int model_dim = 64;
    int n_heads = 4;
    int n_frames = 6;
    std::string grid = "5x5";
    int n_special = 1;
    int h_sample = 4;
    int q_sample = 50;
    std::uint64_t seed = 0;
    int sigma = 3;
    std::optional<double> tau1, tau2;
    std::string plan_out;
    std::string out;
};

int analyze_dump(const AnalyzeConfig& cfg) {
    std::ifstream in(cfg.dump_path);
    if (!in) throw UsageFailure{cfg.dump_path + ": cannot open file"};
    // Rows of "layer,w0,w1,...": softmaxed attention rows grouped by layer.
    std::map<int, std::vector<std::vector<double>>> rows_by_layer;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = ts::strip_cr(line);
        if (line.empty()) continue;
        const std::string where = cfg.dump_path + ":" + std::to_string(line_no);
        const auto cells = ts::split_csv_line(line);
        if (cells.size() < 3) throw UsageFailure{where + ": need a layer id and >= 2 weights"};
        try {
            const double layer_id = ts::parse_strict_double(cells[0], where);
            std::vector<double> weights;
            for (std::size_t i = 1; i < cells.size(); ++i)
                weights.push_back(ts::parse_strict_double(cells[i], where));
            auto& rows = rows_by_layer[static_cast<int>(layer_id)];
            if (!rows.empty() && rows.front().size() != weights.size())
                throw UsageFailure{where + ": row width differs within the layer"};
            rows.push_back(std::move(weights));
        } catch (const ts::Error& e) {
            throw UsageFailure{e.what()};
        }
    }
    if (rows_by_layer.empty()) throw UsageFailure{cfg.dump_path + ": no attention rows"};

    std::vector<ts::LayerProfile> profiles;
    for (const auto& [layer, rows] : rows_by_layer) {
        double entropy_sum = 0.0;
        double top1_sum = 0.0;
        for (const auto& w : rows) {
            double entropy = 0.0;
            double top1 = 0.0;
            for (double p : w) {
                if (p < 0.0) throw UsageFailure{cfg.dump_path + ": negative attention weight"};
                if (p > 0.0) entropy -= p * std::log(p);
                top1 = std::max(top1, p);
            }
            entropy_sum += entropy;
            top1_sum += top1;
        }
        ts::LayerProfile p;
        p.layer = layer;
        p.strategy = ts::LayerStrategy::full_restricted();
        p.stats.n_keys = static_cast<int>(rows.front().size());
        p.stats.n_sampled_heads = 1;
        p.stats.n_sampled_queries = static_cast<int>(rows.size());
        p.stats.normalized_entropy =
            entropy_sum / (static_cast<double>(rows.size()) *
                           std::log(static_cast<double>(p.stats.n_keys)));
        p.stats.top1_weight = top1_sum / static_cast<double>(rows.size());
        profiles.push_back(p);
    }
    write_output(profile_csv(profiles, nullptr, "dump"), cfg.out);
    return 0;
}

int cmd_analyze(const AnalyzeConfig& cfg) {
    if (!cfg.dump_path.empty()) return analyze_dump(cfg);

    const ts::TokenGrid grid = parse_grid(cfg.grid, cfg.n_special);
    const ts::ToyModel model =
        ts::build_toy_model(cfg.n_layers, cfg.model_dim, cfg.n_heads, cfg.seed);
    const ts::TokenBatch batch =
        ts::random_token_batch(cfg.n_frames, grid, cfg.model_dim, cfg.seed + 1);

    ts::ForwardOptions options;
    std::optional<ts::CostReport> cost;
    if (!cfg.plan_path.empty()) {
        try {
            options.plan = ts::plan_from_json(load_json_file(cfg.plan_path));
        } catch (const ts::Error& e) {
            throw UsageFailure{e.what()};
        }
        if (cfg.select_path.empty())
            throw UsageFailure{"--plan needs --select for the restricted profile"};
        try {
            options.selection = ts::selection_from_json(load_json_file(cfg.select_path));
        } catch (const ts::Error& e) {
            throw UsageFailure{e.what()};
        }
        cost = ts::attention_flop_model(cfg.n_frames, grid.tokens_per_frame(),
                                        options.selection->k, *options.plan, grid, cfg.model_dim);
    } else if (!cfg.select_path.empty()) {
        throw UsageFailure{"--select needs --plan"};
    } else {
        cost = ts::attention_flop_model(cfg.n_frames, grid.tokens_per_frame(), cfg.n_frames,
                                        ts::build_layer_plan(cfg.n_layers, 0, 0, 2), grid,
                                        cfg.model_dim);
    }

    const auto profiles =
        ts::analyze_layers(model, batch, cfg.h_sample, cfg.q_sample, cfg.seed, options);
    write_output(profile_csv(profiles, &*cost, options.plan ? nullptr : "full"), cfg.out);

    if (cfg.tau1 || cfg.tau2) {
        if (!cfg.tau1 || !cfg.tau2) throw UsageFailure{"--tau1 and --tau2 must be given together"};
        if (cfg.plan_out.empty()) throw UsageFailure{"--tau1/--tau2 need --plan-out"};
        std::vector<double> entropies;
        for (const auto& p : profiles) entropies.push_back(p.stats.normalized_entropy);
        const ts::LayerPlan derived =
            ts::entropy_adaptive_plan(entropies, *cfg.tau1, *cfg.tau2, cfg.sigma);
        write_output(ts::plan_to_json(derived).dump(2) + "\n", cfg.plan_out);
        std::cerr << "entropy-adaptive plan written to " << cfg.plan_out << "\n";
    }
    return 0;
}

// ----------------------------------------------------------------- bench --

struct BenchConfig {
    std::string frames = "64,128";
    int k = 8;
    int sigma = 3;
    int l_local = 0;
    int l_sample = 0;
    std::optional<int> l_late;
    int repeats = 3;
    int n_layers = 2;
    int model_dim = 64;
    int n_heads = 4;
    std::string grid = "8x8";
    int n_special = 0;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_bench(const BenchConfig& cfg) {
    const ts::TokenGrid grid = parse_grid(cfg.grid, cfg.n_special);
    const std::vector<int> frame_counts = parse_int_list(cfg.frames, "--frames");
    const ts::ToyModel model =
        ts::build_toy_model(cfg.n_layers, cfg.model_dim, cfg.n_heads, cfg.seed);

    ts::BenchParams params;
    params.k = cfg.k;
    params.sigma = cfg.sigma;
    params.l_local = cfg.l_local;
    params.l_sample = cfg.l_sample;
    params.l_late = cfg.l_late;
    params.repeats = cfg.repeats;
    params.seed = cfg.seed;

    std::cerr << "threads: " << ts::thread_cap() << "\n";
    const auto rows = ts::benchmark_scaling(model, grid, frame_counts, params);

    std::ostringstream out;
    out << "n_frames,mode,median_seconds,multiplies,model_predicted_ratio\n";
    for (const auto& row : rows) {
        out << row.n_frames << ',' << row.mode << ',' << ts::format_double(row.median_seconds)
            << ',' << row.multiplies << ',';
        if (row.model_predicted_ratio) out << ts::format_double(*row.model_predicted_ratio);
        out << '\n';
    }
    write_output(out.str(), cfg.out);

    // Measured ratios per mode, stderr only (wall clock is not deterministic).
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].mode != rows[i - 1].mode) continue;
        std::cerr << rows[i].mode << " " << rows[i - 1].n_frames << "->" << rows[i].n_frames
                  << ": measured ratio "
                  << ts::format_double(rows[i].median_seconds / rows[i - 1].median_seconds)
                  << ", model " << ts::format_double(*rows[i].model_predicted_ratio) << "\n";
    }
    return 0;
}

// --------------------------------------------------------------- metrics --

struct MetricsConfig {
    std::string gt_traj, est_traj;
    std::string pred_cloud, gt_cloud;
    std::string gt_depth, pred_depth;
    std::string depth_format = "csv";
    bool rigid = false;
    bool do_median_scale = false;
    int delta = 1;
    std::string format = "json";
    std::string out;
};

int cmd_metrics(const MetricsConfig& cfg) {
    const bool have_traj = !cfg.gt_traj.empty() || !cfg.est_traj.empty();
    const bool have_cloud = !cfg.pred_cloud.empty() || !cfg.gt_cloud.empty();
    const bool have_depth = !cfg.gt_depth.empty() || !cfg.pred_depth.empty();
    if (!have_traj && !have_cloud && !have_depth)
        throw UsageFailure{"nothing to do: give trajectory, cloud, or depth inputs"};

    nlohmann::json report;

    if (have_traj) {
        if (cfg.gt_traj.empty() || cfg.est_traj.empty())
            throw UsageFailure{"trajectories need both --gt-traj and --est-traj"};
        ts::Trajectory gt, est;
        try {
            gt = ts::load_trajectory_csv(cfg.gt_traj);
            est = ts::load_trajectory_csv(cfg.est_traj);
        } catch (const ts::Error& e) {
            throw UsageFailure{e.what()};
        }
        const auto alignment = ts::align_trajectories(
            gt, est, cfg.rigid ? ts::AlignmentMode::rigid : ts::AlignmentMode::similarity);
        const auto rpe_result = ts::rpe(gt, est, cfg.delta);
        report["pose"] = {{"ate", ts::ate(gt, alignment.aligned)},
                          {"rpe_rot_deg", rpe_result.rot_deg},
                          {"rpe_trans", rpe_result.trans},
                          {"delta", cfg.delta},
                          {"alignment", cfg.rigid ? "rigid" : "similarity"},
                          {"alignment_scale", alignment.scale},
                          {"alignment_degenerate", alignment.degenerate}};
    }

    if (have_cloud) {
        if (cfg.pred_cloud.empty() || cfg.gt_cloud.empty())
            throw UsageFailure{"clouds need both --pred-cloud and --gt-cloud"};
        ts::PointCloud pred, gt;
        try {
            pred = ts::load_cloud_csv(cfg.pred_cloud);
            gt = ts::load_cloud_csv(cfg.gt_cloud);
        } catch (const ts::Error& e) {
            throw UsageFailure{e.what()};
        }
        const auto m = ts::cloud_metrics(pred, gt);
        nlohmann::json cloud = {{"accuracy", m.accuracy}, {"completeness", m.completeness}};
        if (m.nc_mean) {
            cloud["nc_mean"] = *m.nc_mean;
            cloud["nc_median"] = *m.nc_median;
        }
        report["cloud"] = std::move(cloud);
    }

    if (have_depth) {
        if (cfg.gt_depth.empty() || cfg.pred_depth.empty())
            throw UsageFailure{"depth needs both --gt-depth and --pred-depth"};
        const auto format = cfg.depth_format == "binary" ? ts::DepthFileFormat::binary
                                                         : ts::DepthFileFormat::csv;
        ts::DepthPair pair = [&] {
            try {
                return ts::DepthPair::from_depths(ts::load_depth_grid(cfg.gt_depth, format),
                                                  ts::load_depth_grid(cfg.pred_depth, format));
            } catch (const ts::Error& e) {
                throw UsageFailure{e.what()};
            }
        }();
        if (cfg.do_median_scale) pair = ts::median_scale(pair);
        const auto m = ts::depth_metrics(pair);
        report["depth"] = {{"abs_rel", m.abs_rel},   {"sq_rel", m.sq_rel},
                           {"rmse", m.rmse},         {"log_rmse", m.log_rmse},
                           {"delta_125", m.delta_125},
                           {"median_scaled", cfg.do_median_scale}};
    }

    if (cfg.format == "csv") {
        std::ostringstream out;
        out << "group,metric,value\n";
        for (const auto& [group, values] : report.items())
            for (const auto& [key, value] : values.items())
                out << group << ',' << key << ',' << value.dump() << '\n';
        write_output(out.str(), cfg.out);
    } else {
        write_output(report.dump(2) + "\n", cfg.out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage K/V token selection engine for global attention"};
    app.require_subcommand(1);

    SelectConfig select_cfg;
    auto* select = app.add_subcommand("select", "Select anchor frames from features");
    select->add_option("features", select_cfg.features_path, "Feature file")->required();
    select->add_option("--input-format", select_cfg.input_format, "Feature file format")
        ->check(CLI::IsMember({"csv", "binary"}));
    select->add_option("--k", select_cfg.k, "Frame budget")->check(CLI::Range(1, 1000000000));
    select->add_option("--seed", select_cfg.seed, "RNG seed");
    select->add_option("--strategy", select_cfg.strategy, "Selection strategy")
        ->check(CLI::IsMember({"diversity", "temporal_nearest", "covis_high", "covis_low",
                               "attn_max", "attn_mean"}));
    select->add_option("--query", select_cfg.query, "Query frame for baseline strategies");
    select->add_option("--attn-scores", select_cfg.attn_scores_path,
                       "Per-frame token score grid (CSV) for attn_* strategies");
    select->add_option("--format", select_cfg.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}));
    select->add_option("--out", select_cfg.out, "Output path (default stdout)");

    PlanConfig plan_cfg;
    auto* plan = app.add_subcommand("plan", "Build a per-layer sparsification plan");
    plan->add_option("--n-layers", plan_cfg.n_layers, "Global attention layer count");
    plan->add_option("--l-local", plan_cfg.l_local, "Layers below this index run local attention");
    plan->add_option("--l-sample", plan_cfg.l_sample, "Layers below this index downsample");
    plan->add_option("--l-late", plan_cfg.l_late, "Optional late downsample tail start");
    plan->add_option("--sigma", plan_cfg.sigma, "Downsampling stride");
    plan->add_option("--tau1", plan_cfg.tau1, "Entropy threshold: local until H < tau1");
    plan->add_option("--tau2", plan_cfg.tau2, "Entropy threshold: downsample until H < tau2");
    plan->add_option("--entropies", plan_cfg.entropies, "Comma-separated per-layer entropies");
    plan->add_option("--entropy-csv", plan_cfg.entropy_csv, "Analyze CSV to read entropies from");
    plan->add_option("--out", plan_cfg.out, "Output path (default stdout)");

    AnalyzeConfig analyze_cfg;
    auto* analyze = app.add_subcommand("analyze", "Per-layer attention entropy profile");
    analyze->add_option("--dump", analyze_cfg.dump_path,
                        "Attention dump CSV (layer,w0,w1,...) instead of the toy model");
    analyze->add_option("--layers", analyze_cfg.n_layers, "Toy model layer pairs");
    analyze->add_option("--dim", analyze_cfg.model_dim, "Toy model width");
    analyze->add_option("--heads", analyze_cfg.n_heads, "Attention heads");
    analyze->add_option("--n-frames", analyze_cfg.n_frames, "Frames in the probe batch");
    analyze->add_option("--grid", analyze_cfg.grid, "Token grid HxW");
    analyze->add_option("--n-special", analyze_cfg.n_special, "Special tokens per frame");
    analyze->add_option("--h-sample", analyze_cfg.h_sample, "Sampled heads per layer");
    analyze->add_option("--q-sample", analyze_cfg.q_sample, "Sampled queries per layer");
    analyze->add_option("--seed", analyze_cfg.seed, "RNG seed");
    analyze->add_option("--select", analyze_cfg.select_path, "Selection JSON (with --plan)");
    analyze->add_option("--plan", analyze_cfg.plan_path, "Plan JSON for a restricted profile");
    analyze->add_option("--sigma", analyze_cfg.sigma, "Stride for --tau plan emission");
    analyze->add_option("--tau1", analyze_cfg.tau1, "Emit an entropy-adaptive plan: tau1");
    analyze->add_option("--tau2", analyze_cfg.tau2, "Emit an entropy-adaptive plan: tau2");
    analyze->add_option("--plan-out", analyze_cfg.plan_out, "Where to write the derived plan");
    analyze->add_option("--out", analyze_cfg.out, "Output path (default stdout)");

    BenchConfig bench_cfg;
    auto* bench = app.add_subcommand("bench", "Wall-clock scaling of full vs selected forward");
    bench->add_option("--frames", bench_cfg.frames, "Comma-separated frame counts");
    bench->add_option("--k", bench_cfg.k, "Frame budget for the selected mode")
        ->check(CLI::Range(1, 1000000000));
    bench->add_option("--sigma", bench_cfg.sigma, "Downsampling stride");
    bench->add_option("--l-local", bench_cfg.l_local, "Plan threshold l_local");
    bench->add_option("--l-sample", bench_cfg.l_sample, "Plan threshold l_sample");
    bench->add_option("--l-late", bench_cfg.l_late, "Plan threshold l_late");
    bench->add_option("--repeats", bench_cfg.repeats, "Timing repeats (median, min 3)")
        ->check(CLI::Range(3, 1000));
    bench->add_option("--layers", bench_cfg.n_layers, "Toy model layer pairs");
    bench->add_option("--dim", bench_cfg.model_dim, "Toy model width");
    bench->add_option("--heads", bench_cfg.n_heads, "Attention heads");
    bench->add_option("--grid", bench_cfg.grid, "Token grid HxW");
    bench->add_option("--n-special", bench_cfg.n_special, "Special tokens per frame");
    bench->add_option("--seed", bench_cfg.seed, "RNG seed");
    bench->add_option("--out", bench_cfg.out, "Output path (default stdout)");

    MetricsConfig metrics_cfg;
    auto* metrics = app.add_subcommand("metrics", "Pose, point cloud, and depth metrics");
    metrics->add_option("--gt-traj", metrics_cfg.gt_traj, "Ground-truth trajectory CSV");
    metrics->add_option("--est-traj", metrics_cfg.est_traj, "Estimated trajectory CSV");
    metrics->add_flag("--rigid", metrics_cfg.rigid, "Rigid alignment (no scale)");
    metrics->add_option("--delta", metrics_cfg.delta, "RPE frame interval")
        ->check(CLI::Range(1, 1000000000));
    metrics->add_option("--pred-cloud", metrics_cfg.pred_cloud, "Predicted cloud CSV");
    metrics->add_option("--gt-cloud", metrics_cfg.gt_cloud, "Ground-truth cloud CSV");
    metrics->add_option("--gt-depth", metrics_cfg.gt_depth, "Ground-truth depth grid");
    metrics->add_option("--pred-depth", metrics_cfg.pred_depth, "Predicted depth grid");
    metrics->add_option("--depth-format", metrics_cfg.depth_format, "Depth file format")
        ->check(CLI::IsMember({"csv", "binary"}));
    metrics->add_flag("--median-scale", metrics_cfg.do_median_scale,
                      "Median-scale predictions before computing depth metrics");
    metrics->add_option("--format", metrics_cfg.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}));
    metrics->add_option("--out", metrics_cfg.out, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*select) return cmd_select(select_cfg);
        if (*plan) return cmd_plan(plan_cfg);
        if (*analyze) return cmd_analyze(analyze_cfg);
        if (*bench) return cmd_bench(bench_cfg);
        if (*metrics) return cmd_metrics(metrics_cfg);
    } catch (const UsageFailure& e) {
        std::cerr << "error: " << e.message << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
