#include "macroq/errors.hpp"
#include "macroq/runner.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

namespace {

macroq::ExperimentConfig load_config(const std::string& path, const std::string& output_override,
                                     std::uint64_t seed_override, bool have_seed, int jobs_override) {
    macroq::ExperimentConfig cfg = macroq::ExperimentConfig::load(path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    if (have_seed) cfg.seed = seed_override;
    if (jobs_override > 0) cfg.jobs = jobs_override;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"macroq: penalized quantile-network forecasting with recursive backtesting"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_override;
    std::uint64_t seed_override = 0;
    bool have_seed = false;
    int jobs_override = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
        cmd->add_option("--output", output_override, "Override the output directory");
        cmd->add_option("--seed", seed_override, "Override the master seed")
            ->each([&](const std::string&) { have_seed = true; });
        cmd->add_option("--jobs", jobs_override, "Worker threads for grid jobs");
    };

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Load the panel and report dataset diagnostics");
    add_common(ingest);
    std::string dump_path, emit_path;
    ingest->add_option("--dump-standardized", dump_path,
                       "Write the standardized dataset as CSV for audit");
    ingest->add_option("--emit-transforms", emit_path,
                       "Write the recorded FRED-MD transform codes as a config snippet");

    // run
    auto* run = app.add_subcommand("run", "Execute pipeline stages");
    add_common(run);
    std::string stage = "full";
    run->add_option("--stage", stage, "validate | test | complexity | full")
        ->check(CLI::IsMember({"validate", "test", "complexity", "full"}));
    int seed_replicates = 0;
    run->add_option("--seed-replicates", seed_replicates,
                    "After the stage, rerun the selected models under N seeds and report dispersion");

    // report
    auto* report = app.add_subcommand("report", "Render artifacts from a finished run");
    add_common(report);
    std::string kind = "table";
    report->add_option("--kind", kind, "table | fanchart | ledger")
        ->check(CLI::IsMember({"table", "fanchart", "ledger"}));
    bool sort_quantiles = false;
    report->add_flag("--sort-quantiles", sort_quantiles,
                     "Monotonize crossed quantiles in the fan chart (display only)");

    CLI11_PARSE(app, argc, argv);

    try {
        macroq::ExperimentConfig cfg =
            load_config(config_path, output_override, seed_override, have_seed, jobs_override);
        macroq::Runner runner(cfg);

        if (app.got_subcommand(ingest)) {
            macroq::IngestSummary summary = runner.ingest();
            std::cout << summary.text();
            if (!emit_path.empty()) {
                runner.emit_transforms(emit_path);
                std::cout << "transform codes written to " << emit_path << "\n";
            }
            if (!dump_path.empty()) {
                runner.dump_standardized(dump_path);
                std::cout << "standardized dataset written to " << dump_path << "\n";
            }
        } else if (app.got_subcommand(run)) {
            runner.run(macroq::parse_run_stage(stage));
            if (seed_replicates >= 2) runner.run_seed_dispersion(seed_replicates);
            std::cout << "stage " << stage << " complete; " << runner.executed_jobs().size()
                      << " job(s) trained, artifacts under " << runner.out_dir().string() << "\n";
        } else if (app.got_subcommand(report)) {
            runner.report(macroq::parse_report_kind(kind), sort_quantiles);
            std::cout << "report " << kind << " written under " << runner.out_dir().string() << "\n";
        }
    } catch (const macroq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const macroq::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const macroq::JobError& e) {
        std::cerr << "job error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
