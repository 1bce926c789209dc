// End-to-end CLI tests: golden files pinned for fixed seeds, exit-code
// contract, and output schemas. Spawns the installed binary.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "tokensel/frame_features.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliResult run(const std::string& args) {
    static int counter = 0;
    const fs::path out = fs::path("cli_out_" + std::to_string(counter) + ".txt");
    const fs::path err = fs::path("cli_err_" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd =
        "\"" TOKENSEL_BIN "\" " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WEXITSTATUS(status);
    result.out = slurp(out);
    result.err = slurp(err);
    fs::remove(out);
    fs::remove(err);
    return result;
}

struct Fixture {
    fs::path dir;
    Fixture() {
        dir = "cli_fixtures";
        fs::create_directories(dir);
        std::ofstream f(dir / "features.csv");
        f << "frame_id,f0,f1\n";
        const double angles[] = {0, 10, 20, 90, 95, 180, 200, 270};
        for (int i = 0; i < 8; ++i) {
            const double rad = angles[i] * M_PI / 180.0;
            f << i << ',' << std::cos(rad) << ',' << std::sin(rad) << '\n';
        }
    }
    ~Fixture() { fs::remove_all(dir); }
    std::string features() const { return (dir / "features.csv").string(); }
};

}  // namespace

TEST_CASE("select emits the documented JSON schema") {
    Fixture fx;
    const auto r = run("select " + fx.features() + " --k 3 --seed 1");
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("k") == 3);
    CHECK(j.at("seed") == 1);
    CHECK(j.at("strategy") == "diversity");
    CHECK(j.at("indices").size() == 3);
    CHECK(r.err.find("k-center cost:") != std::string::npos);
}

TEST_CASE("select supports baseline strategies") {
    Fixture fx;
    const auto r = run("select " + fx.features() + " --k 3 --strategy temporal_nearest --query 4");
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("strategy") == "temporal_nearest");
    CHECK(j.at("indices") == nlohmann::json::array({3, 4, 5}));
}

TEST_CASE("select csv output lists one index per line") {
    Fixture fx;
    const auto r = run("select " + fx.features() + " --k 2 --seed 0 --format csv");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.rfind("index\n", 0) == 0);
}

TEST_CASE("select pools attention scores per frame") {
    Fixture fx;
    const fs::path scores = fx.dir / "scores.csv";
    {
        std::ofstream f(scores);
        // Frame 1 has the highest peak, frame 2 the highest mean.
        f << "0.5,0.5\n0.9,0.1\n0.6,0.55\n0.1,0.1\n0.1,0.1\n0.1,0.1\n0.1,0.1\n0.1,0.1\n";
    }
    const auto max_pick =
        run("select " + fx.features() + " --k 1 --strategy attn_max --attn-scores " +
            scores.string());
    REQUIRE(max_pick.exit_code == 0);
    CHECK(nlohmann::json::parse(max_pick.out).at("indices") == nlohmann::json::array({1}));
    const auto mean_pick =
        run("select " + fx.features() + " --k 1 --strategy attn_mean --attn-scores " +
            scores.string());
    REQUIRE(mean_pick.exit_code == 0);
    CHECK(nlohmann::json::parse(mean_pick.out).at("indices") == nlohmann::json::array({2}));
    CHECK(run("select " + fx.features() + " --k 1 --strategy attn_max").exit_code == 2);
}

TEST_CASE("plan derives thresholds from an analyze CSV") {
    const fs::path profile = "profile_for_plan.csv";
    REQUIRE(run("analyze --dump-placeholder-unused --layers 4 --dim 32 --heads 4 --n-frames 4 "
                "--grid 3x3 --q-sample 16 --seed 0 --out " +
                profile.string())
                .exit_code == 2);  // unknown flag
    REQUIRE(run("analyze --layers 4 --dim 32 --heads 4 --n-frames 4 --grid 3x3 "
                "--q-sample 16 --seed 0 --out " +
                profile.string())
                .exit_code == 0);
    const auto r = run("plan --tau1 0.999 --tau2 0.1 --sigma 2 --entropy-csv " + profile.string());
    fs::remove(profile);
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("provenance") == "entropy");
    CHECK(j.at("strategies").size() == 4);
    // Toy-model entropies sit near but below 1, so tau1 = 0.999 downsamples
    // everything from layer 0.
    CHECK(j.at("strategies")[0] == "downsample");
}

TEST_CASE("select reads binary features identically to CSV") {
    Fixture fx;
    const fs::path bin = fx.dir / "features.bin";
    tokensel::save_features_binary(bin.string(),
                                   tokensel::load_features(fx.features(),
                                                           tokensel::FeatureFormat::csv));
    const auto from_csv = run("select " + fx.features() + " --k 4 --seed 6");
    const auto from_bin =
        run("select " + bin.string() + " --input-format binary --k 4 --seed 6");
    REQUIRE(from_csv.exit_code == 0);
    REQUIRE(from_bin.exit_code == 0);
    // Angles in the fixture are f32-exact enough that picks agree.
    CHECK(nlohmann::json::parse(from_bin.out).at("indices") ==
          nlohmann::json::parse(from_csv.out).at("indices"));
}

TEST_CASE("plan matches the committed golden file") {
    const auto r = run("plan");
    REQUIRE(r.exit_code == 0);
    const std::string golden = slurp(fs::path(TOKENSEL_GOLDEN_DIR) / "plan_default.json");
    REQUIRE_FALSE(golden.empty());
    CHECK(r.out == golden);
}

TEST_CASE("analyze matches the committed golden file") {
    const auto r = run(
        "analyze --layers 6 --dim 32 --heads 4 --n-frames 4 --grid 4x4 --n-special 1 "
        "--q-sample 30 --seed 0");
    REQUIRE(r.exit_code == 0);
    const std::string golden = slurp(fs::path(TOKENSEL_GOLDEN_DIR) / "analyze_seed0.csv");
    REQUIRE_FALSE(golden.empty());
    CHECK(r.out == golden);
}

TEST_CASE("analyze dump mode computes uniform and one-hot entropies") {
    const fs::path dump = "dump_fixture.csv";
    {
        std::ofstream f(dump);
        f << "0,0.25,0.25,0.25,0.25\n0,0.25,0.25,0.25,0.25\n1,1,0,0,0\n";
    }
    const auto r = run("analyze --dump " + dump.string());
    fs::remove(dump);
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string header, layer0, layer1;
    std::getline(lines, header);
    std::getline(lines, layer0);
    std::getline(lines, layer1);
    CHECK(layer0.find("0,dump,4,1,0.25") == 0);
    CHECK(layer1.find("1,dump,4,0,1") == 0);
}

TEST_CASE("analyze can emit an entropy-adaptive plan") {
    const fs::path plan_path = "derived_plan.json";
    const auto r = run(
        "analyze --layers 3 --dim 32 --heads 4 --n-frames 3 --grid 3x3 --q-sample 16 --seed 0 "
        "--tau1 0.9 --tau2 0.5 --plan-out " +
        plan_path.string());
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(slurp(plan_path));
    fs::remove(plan_path);
    CHECK(j.at("provenance") == "entropy");
    CHECK(j.at("strategies").size() == 3);
}

TEST_CASE("select, plan, and analyze compose into a restricted profile") {
    Fixture fx;
    const fs::path sel = "pipeline_sel.json";
    const fs::path plan = "pipeline_plan.json";
    REQUIRE(run("select " + fx.features() + " --k 3 --seed 2 --out " + sel.string()).exit_code ==
            0);
    REQUIRE(run("plan --n-layers 3 --l-local 1 --l-sample 2 --sigma 2 --out " + plan.string())
                .exit_code == 0);
    const auto r = run("analyze --layers 3 --dim 32 --heads 4 --n-frames 8 --grid 4x4 "
                       "--n-special 0 --q-sample 20 --seed 0 --select " +
                       sel.string() + " --plan " + plan.string());
    fs::remove(sel);
    fs::remove(plan);
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string header, l0, l1, l2;
    std::getline(lines, header);
    std::getline(lines, l0);
    std::getline(lines, l1);
    std::getline(lines, l2);
    CHECK(l0.find("0,local,16,") == 0);        // own-frame keys
    CHECK(l1.find("1,downsample,12,") == 0);   // 3 frames x ceil(4/2)^2
    CHECK(l2.find("2,full_restricted,48,") == 0);
}

TEST_CASE("bench emits two modes per frame count") {
    const auto r = run("bench --frames 4,8,16 --k 2 --layers 1 --grid 2x2 --repeats 3");
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "n_frames,mode,median_seconds,multiplies,model_predicted_ratio");
    int rows = 0;
    while (std::getline(lines, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6);
    CHECK(r.err.find("threads:") != std::string::npos);
}

TEST_CASE("bench rejects too few repeats") {
    const auto r = run("bench --frames 4 --k 2 --repeats 1");
    CHECK(r.exit_code == 2);
}

TEST_CASE("metrics handles each input group independently") {
    Fixture fx;
    const fs::path traj = fx.dir / "t.csv";
    {
        std::ofstream f(traj);
        f << "idx,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz\n";
        for (int i = 0; i < 3; ++i) f << i << ",1,0,0,0,1,0,0,0,1," << i << ",0,0\n";
    }
    const auto r = run("metrics --gt-traj " + traj.string() + " --est-traj " + traj.string());
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("pose").at("ate") == 0.0);
    CHECK(j.at("pose").at("rpe_rot_deg") == 0.0);
    CHECK_FALSE(j.contains("cloud"));
    CHECK_FALSE(j.contains("depth"));
}

TEST_CASE("metrics omits normal consistency without normals") {
    Fixture fx;
    const fs::path pred = fx.dir / "p.csv";
    const fs::path gt = fx.dir / "g.csv";
    {
        std::ofstream f(pred);
        f << "x,y,z\n0,0,0\n";
    }
    {
        std::ofstream f(gt);
        f << "x,y,z\n1,0,0\n3,0,0\n";
    }
    const auto r = run("metrics --pred-cloud " + pred.string() + " --gt-cloud " + gt.string());
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("cloud").at("accuracy") == 1.0);
    CHECK(j.at("cloud").at("completeness") == 2.0);
    CHECK_FALSE(j.at("cloud").contains("nc_mean"));
}

TEST_CASE("metrics names the file and line on parse failures") {
    Fixture fx;
    const fs::path bad = fx.dir / "bad.csv";
    {
        std::ofstream f(bad);
        f << "idx,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz\n";
        f << "0,1,0,0,0,1,0,0,0,1,oops,0,0\n";
    }
    const auto r = run("metrics --gt-traj " + bad.string() + " --est-traj " + bad.string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("bad.csv:2") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
    Fixture fx;
    CHECK(run("select " + fx.features() + " --k 0").exit_code == 2);
    CHECK(run("select missing_file.csv --k 2").exit_code == 2);
    CHECK(run("nonsense-subcommand").exit_code == 2);
    CHECK(run("metrics").exit_code == 2);
    CHECK(run("select " + fx.features() + " --k 2 --strategy covis_high").exit_code == 2);
}

TEST_CASE("data errors beyond parsing exit with code 1") {
    Fixture fx;
    CHECK(run("select " + fx.features() + " --k 100").exit_code == 1);
}

TEST_CASE("--out writes the same bytes as stdout") {
    Fixture fx;
    const fs::path out_path = "select_out.json";
    const auto direct = run("select " + fx.features() + " --k 3 --seed 9");
    const auto filed =
        run("select " + fx.features() + " --k 3 --seed 9 --out " + out_path.string());
    REQUIRE(direct.exit_code == 0);
    REQUIRE(filed.exit_code == 0);
    CHECK(filed.out.empty());
    CHECK(slurp(out_path) == direct.out);
    fs::remove(out_path);
}
