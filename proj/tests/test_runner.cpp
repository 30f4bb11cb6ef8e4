#include "macroq/config.hpp"
#include "macroq/errors.hpp"
#include "macroq/runner.hpp"

#include "synthetic.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace macroq;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& stem) {
    static int counter = 0;
    auto dir = fs::temp_directory_path() / ("macroq_" + stem + "_" + std::to_string(++counter));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_panel_csv(const fs::path& path, const SeriesPanel& panel) {
    std::ofstream out(path);
    out << "date";
    for (const auto& name : panel.names) out << "," << name;
    out << "\n";
    char buf[40];
    for (int t = 0; t < panel.rows(); ++t) {
        out << panel.dates[t].str();
        for (int j = 0; j < panel.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), ",%.17g", panel.values(t, j));
            out << buf;
        }
        out << "\n";
    }
}

fs::path make_toy_panel(const fs::path& dir, std::uint64_t seed, double bump_after_t2 = 0.0) {
    Rng rng(seed);
    int n = 60;
    Eigen::MatrixXd predictors(n, 3);
    Eigen::VectorXd y(n);
    double state = 0.0;
    for (int t = 0; t < n; ++t) {
        predictors(t, 0) = state;
        predictors(t, 1) = rng.next_normal();
        predictors(t, 2) = rng.next_normal();
        state = 0.7 * state + rng.next_normal();
        y(t) = state;
    }
    if (bump_after_t2 != 0.0) {
        for (int t = 50; t < n; ++t) y(t) += bump_after_t2;
    }
    SeriesPanel panel = synthetic::cumsum_panel(predictors, {"P1", "P2", "P3"}, y);
    fs::path path = dir / "panel.csv";
    write_panel_csv(path, panel);
    return path;
}

std::string toy_config_text(const fs::path& panel_path, const fs::path& out_dir) {
    std::ostringstream s;
    s << R"({
  "data": {"path": ")" << panel_path.generic_string() << R"(", "format": "plain-csv"},
  "target": {"variable": "TARGET", "transform": "difference", "horizon": 1},
  "split": {"t1": "1962-07", "t2": "1963-10", "t3": "1964-12"},
  "grid": {"profile": "complexity", "depths": [0], "lambdas": [0, 0.01, 0.1, 1, 10, 100]},
  "train": {"epochs_initial": 80, "epochs_subsequent": 20, "learning_rate": 0.05,
            "lr_decay": "inv-sqrt"},
  "eval": {"quantiles": [0.25, 0.75]},
  "seed": 99,
  "output": ")" << out_dir.generic_string() << R"(",
  "jobs": 2
})";
    return s.str();
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("config parsing and cross-field validation") {
    auto dir = fresh_dir("cfg");
    auto panel = make_toy_panel(dir, 1);

    ExperimentConfig cfg = ExperimentConfig::from_json_text(toy_config_text(panel, dir / "out"));
    CHECK(cfg.profile == GridProfile::complexity);
    CHECK(cfg.quantiles == std::vector<double>{0.25, 0.75});
    CHECK(cfg.split.horizon == 1);
    CHECK(cfg.lambda_grid().size() == 6);
    CHECK(cfg.hash_hex().size() == 16);

    SUBCASE("same config hashes identically, seed changes it") {
        ExperimentConfig cfg2 = ExperimentConfig::from_json_text(toy_config_text(panel, dir / "other"));
        CHECK(cfg.hash_hex() == cfg2.hash_hex()); // output dir excluded
        cfg2.seed += 1;
        CHECK(cfg.hash_hex() != cfg2.hash_hex());
    }

    SUBCASE("invalid json") {
        CHECK_THROWS_AS(ExperimentConfig::from_json_text("{nope"), ConfigError);
    }
    SUBCASE("missing required field") {
        CHECK_THROWS_WITH_AS(ExperimentConfig::from_json_text("{}"), doctest::Contains("data"),
                             ConfigError);
    }
    SUBCASE("quantiles outside (0,1)") {
        std::string text = toy_config_text(panel, dir / "out");
        auto pos = text.find("[0.25, 0.75]");
        text.replace(pos, 12, "[0.0, 0.75]");
        CHECK_THROWS_AS(ExperimentConfig::from_json_text(text), ConfigError);
    }
    SUBCASE("degenerate split") {
        std::string text = toy_config_text(panel, dir / "out");
        auto pos = text.find("1963-10");
        text.replace(pos, 7, "1962-07"); // t2 == t1
        CHECK_THROWS_AS(ExperimentConfig::from_json_text(text), ConfigError);
    }
    SUBCASE("unknown enum values") {
        CHECK_THROWS_AS(parse_run_stage("paint"), ConfigError);
        CHECK_THROWS_AS(parse_report_kind("poem"), ConfigError);
        CHECK_THROWS_AS(parse_grid_profile("table9"), ConfigError);
    }
}

TEST_CASE("ingest summary, transforms emission and standardized dump") {
    auto dir = fresh_dir("ingest");
    auto panel = make_toy_panel(dir, 2);
    ExperimentConfig cfg = ExperimentConfig::from_json_text(toy_config_text(panel, dir / "out"));
    Runner runner(cfg);

    IngestSummary s = runner.ingest();
    CHECK(s.panel_rows == 60);
    CHECK(s.panel_cols == 4);
    CHECK(s.supervised_rows == 59);
    CHECK(s.validation_windows == 15);
    CHECK(s.test_windows == 14);
    CHECK(s.text().find("panel: 60 months x 4 predictors") != std::string::npos);
    CHECK(fs::exists(dir / "out" / "ingest_summary.json"));

    runner.dump_standardized(dir / "std.csv");
    std::string dump = slurp(dir / "std.csv");
    CHECK(dump.rfind("origin,target,", 0) == 0);

    // plain panel has no codes to emit
    CHECK_THROWS_AS(runner.emit_transforms(dir / "codes.json"), DataError);
}

TEST_CASE("split too close to the panel end fails at ingest") {
    auto dir = fresh_dir("shortsplit");
    auto panel = make_toy_panel(dir, 3);
    std::string text = toy_config_text(panel, dir / "out");
    auto pos = text.find("\"horizon\": 1");
    text.replace(pos, 12, "\"horizon\": 12");
    pos = text.find("1964-12");
    text.replace(pos, 7, "1965-06"); // origins through 1964-06 needed, panel ends 1964-12
    ExperimentConfig cfg = ExperimentConfig::from_json_text(text);
    Runner runner(cfg);
    CHECK_THROWS_AS(runner.ingest(), ConfigError);
}

TEST_CASE("full pipeline on a toy panel emits the documented artifacts") {
    auto dir = fresh_dir("full");
    auto panel = make_toy_panel(dir, 4);
    ExperimentConfig cfg = ExperimentConfig::from_json_text(toy_config_text(panel, dir / "out"));
    Runner runner(cfg);
    runner.run(RunStage::full);

    fs::path out = dir / "out";
    CHECK(fs::exists(out / "complexity" / "records_q0.25.csv"));
    CHECK(fs::exists(out / "complexity" / "records_q0.75.csv"));
    CHECK(fs::exists(out / "ledger.csv"));
    CHECK(fs::exists(out / "selection.json"));
    CHECK(fs::exists(out / "tables" / "table_validation.csv"));
    CHECK(fs::exists(out / "tables" / "table_test.json"));
    CHECK(fs::exists(out / "fanchart.csv"));
    CHECK(fs::exists(out / "manifest.json"));

    SUBCASE("ledger covers every grid point for every quantile") {
        std::string ledger = slurp(out / "ledger.csv");
        int lines = 0;
        for (char c : ledger) lines += c == '\n' ? 1 : 0;
        CHECK(lines == 1 + 2 * 11); // header + 2 quantiles x 11 grid points
        CHECK(ledger.rfind("loss,r,depth,widths,alpha,lambda,validation_score,test_score,status", 0) == 0);
    }

    SUBCASE("table row 0.0 cells are zero by definition") {
        std::string json = slurp(out / "tables" / "table_test.json");
        CHECK(json.find("\"complexity\":0,\"cells\":[{\"diff\":0,\"se\":0,\"tier\":\"light\"") !=
              std::string::npos);
    }

    SUBCASE("records csv carries the export schema") {
        std::string rec = slurp(out / "complexity" / "records_q0.25.csv");
        CHECK(rec.rfind("depth,widths,alpha,lambda,var0,r,grid_assignment", 0) == 0);
        CHECK(rec.find("1.0") != std::string::npos); // some grid assignment present
    }

    SUBCASE("reports re-render from artifacts") {
        runner.report(ReportKind::ledger);
        runner.report(ReportKind::table);
        runner.report(ReportKind::fanchart, true);
        CHECK(fs::exists(out / "fanchart_sorted.csv"));
        std::string fan = slurp(out / "fanchart_sorted.csv");
        std::istringstream lines(fan);
        std::string line;
        std::getline(lines, line); // header
        while (std::getline(lines, line)) {
            auto c1 = line.rfind(',');
            auto c0 = line.rfind(',', c1 - 1);
            double lo = std::stod(line.substr(c0 + 1, c1 - c0 - 1));
            double hi = std::stod(line.substr(c1 + 1));
            CHECK(lo <= hi);
        }
    }
}

TEST_CASE("test stage without validation artifacts fails with guidance") {
    auto dir = fresh_dir("deps");
    auto panel = make_toy_panel(dir, 5);
    ExperimentConfig cfg = ExperimentConfig::from_json_text(toy_config_text(panel, dir / "out"));
    Runner runner(cfg);
    CHECK_THROWS_WITH_AS(runner.run(RunStage::test), doctest::Contains("validate"), JobError);
}

TEST_CASE("reruns are resumable and recompute only missing jobs") {
    auto dir = fresh_dir("resume");
    auto panel = make_toy_panel(dir, 6);
    ExperimentConfig cfg = ExperimentConfig::from_json_text(toy_config_text(panel, dir / "out"));

    Runner first(cfg);
    first.run(RunStage::validate);
    auto executed_first = first.executed_jobs();
    CHECK(!executed_first.empty());

    Runner second(cfg);
    second.run(RunStage::validate);
    CHECK(second.executed_jobs().empty()); // everything cached

    // delete exactly one job artifact; only that job reruns
    std::string victim = executed_first.front();
    fs::remove(dir / "out" / "jobs" / victim / "forecasts.csv");
    Runner third(cfg);
    third.run(RunStage::validate);
    CHECK(third.executed_jobs() == std::vector<std::string>{victim});
}

TEST_CASE("artifacts from a different config hash are not reused") {
    auto dir = fresh_dir("hashmix");
    auto panel = make_toy_panel(dir, 7);
    ExperimentConfig cfg = ExperimentConfig::from_json_text(toy_config_text(panel, dir / "out"));
    Runner first(cfg);
    first.run(RunStage::validate);
    auto executed_first = first.executed_jobs();
    CHECK(!executed_first.empty());

    ExperimentConfig changed = cfg;
    changed.seed += 1; // different hash, same output dir
    Runner second(changed);
    second.run(RunStage::validate);
    CHECK(!second.executed_jobs().empty()); // nothing silently reused
    for (const auto& id : second.executed_jobs()) {
        CHECK(std::find(executed_first.begin(), executed_first.end(), id) == executed_first.end());
    }
}

TEST_CASE("same config and seed give byte-identical result files") {
    auto dir = fresh_dir("determinism");
    auto panel = make_toy_panel(dir, 8);

    ExperimentConfig a = ExperimentConfig::from_json_text(toy_config_text(panel, dir / "out_a"));
    ExperimentConfig b = ExperimentConfig::from_json_text(toy_config_text(panel, dir / "out_b"));
    Runner ra(a);
    ra.run(RunStage::full);
    Runner rb(b);
    rb.run(RunStage::full);

    for (const char* rel : {"ledger.csv", "selection.json", "fanchart.csv",
                            "tables/table_test.csv", "tables/table_validation.csv",
                            "complexity/records_q0.25.csv"}) {
        CHECK(slurp(dir / "out_a" / rel) == slurp(dir / "out_b" / rel));
    }
    // every job's forecasts as well
    for (const auto& id : ra.executed_jobs()) {
        CHECK(slurp(dir / "out_a" / "jobs" / id / "forecasts.csv") ==
              slurp(dir / "out_b" / "jobs" / id / "forecasts.csv"));
    }
}

TEST_CASE("per-origin checkpoints are written when enabled") {
    auto dir = fresh_dir("ckpts");
    auto panel = make_toy_panel(dir, 9);
    std::string text = toy_config_text(panel, dir / "out");
    text.insert(text.rfind('}'), R"(, "checkpoints": "all")");
    ExperimentConfig cfg = ExperimentConfig::from_json_text(text);
    cfg.lambdas = {0.0, 100.0}; // keep it small
    Runner runner(cfg);
    runner.run(RunStage::validate);
    REQUIRE(!runner.executed_jobs().empty());
    fs::path ck = dir / "out" / "jobs" / runner.executed_jobs().front() / "checkpoints";
    CHECK(fs::exists(ck));
    CHECK(fs::exists(ck / "1962-07.txt"));
    CHECK(fs::exists(dir / "out" / "jobs" / runner.executed_jobs().front() / "checkpoint_final.txt"));
}

TEST_CASE("table1 profile: raw grid, shared selection and seed dispersion") {
    auto dir = fresh_dir("table1");
    auto panel = make_toy_panel(dir, 12);
    std::ostringstream s;
    s << R"({
  "data": {"path": ")" << panel.generic_string() << R"(", "format": "plain-csv"},
  "target": {"variable": "TARGET", "transform": "difference", "horizon": 1},
  "split": {"t1": "1962-07", "t2": "1963-10", "t3": "1964-12"},
  "grid": {"profile": "table1", "depths": [0, 1], "widths": [2], "alphas": [0.5],
           "lambdas": [0.5, 5.0]},
  "train": {"epochs_initial": 60, "epochs_subsequent": 20},
  "eval": {"quantiles": [0.25, 0.75], "include_mse": true, "shared_architecture": true},
  "seed": 5,
  "output": ")" << (dir / "out").generic_string() << R"(",
  "jobs": 2
})";
    ExperimentConfig cfg = ExperimentConfig::from_json_text(s.str());
    Runner runner(cfg);
    runner.run(RunStage::full);

    fs::path out = dir / "out";
    std::string ledger = slurp(out / "ledger.csv");
    int lines = 0;
    for (char c : ledger) lines += c == '\n' ? 1 : 0;
    // 4 entries x (2 quantiles + mse) rows + header
    CHECK(lines == 1 + 4 * 3);

    std::string selection = slurp(out / "selection.json");
    CHECK(selection.find("\"shared\"") != std::string::npos);
    CHECK(selection.find("\"profile\": \"table1\"") != std::string::npos);
    CHECK(fs::exists(out / "selection_test.json"));
    CHECK(fs::exists(out / "fanchart.csv"));

    runner.run_seed_dispersion(3);
    std::string disp = slurp(out / "seed_dispersion.csv");
    CHECK(disp.rfind("loss,replicate,seed,validation_score,test_score", 0) == 0);
    CHECK(disp.find("q0.25,0,5,") != std::string::npos);
    CHECK(disp.find(",sd,") != std::string::npos);
}

TEST_CASE("cli exit codes") {
    auto dir = fresh_dir("cli");
    auto panel = make_toy_panel(dir, 10);
    fs::path cfg_path = dir / "config.json";
    {
        std::ofstream out(cfg_path);
        out << toy_config_text(panel, dir / "out");
    }

    auto run_cli = [&](const std::string& args) {
        std::string cmd = std::string(MACROQ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
        int rc = std::system(cmd.c_str());
        return WEXITSTATUS(rc);
    };

    CHECK(run_cli("ingest --config " + cfg_path.string()) == 0);
    CHECK(run_cli("ingest --config /nonexistent.json") == 1);

    // config pointing at a missing panel: data error
    fs::path bad_cfg = dir / "bad_data.json";
    {
        std::ofstream out(bad_cfg);
        out << toy_config_text(dir / "missing.csv", dir / "out2");
    }
    CHECK(run_cli("ingest --config " + bad_cfg.string()) == 2);

    // report before any run: job error
    CHECK(run_cli("report --kind ledger --config " + cfg_path.string() + " --output " +
                  (dir / "vacant").string()) == 3);

    // happy path end to end on the toy config
    CHECK(run_cli("run --stage full --config " + cfg_path.string()) == 0);
    CHECK(run_cli("report --kind table --config " + cfg_path.string()) == 0);
}
