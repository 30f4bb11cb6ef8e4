#pragma once

#include "macroq/dataset.hpp"
#include "macroq/select.hpp"
#include "macroq/train.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace macroq {

enum class GridProfile { table1, complexity };
enum class RunStage { validate, test, complexity, full };
enum class ReportKind { table, fanchart, ledger };

GridProfile parse_grid_profile(const std::string& name);
RunStage parse_run_stage(const std::string& name);
ReportKind parse_report_kind(const std::string& name);

/// Single-file experiment description. All randomness in a run flows from
/// `seed`; parallelism and output location never affect results.
struct ExperimentConfig {
    // data
    std::string data_path;
    PanelFormat data_format = PanelFormat::plain_csv;
    std::map<std::string, int> predictor_transforms; // explicit, never auto-applied

    TargetSpec target;
    SplitSpec split; // horizon copied from target at load time

    // grid
    GridProfile profile = GridProfile::complexity;
    std::vector<int> depths{0, 1, 2};
    std::vector<int> widths{2, 4, 8};
    std::vector<double> alphas{0.0, 0.5, 1.0};
    std::vector<double> lambdas; // empty -> per-profile default grid

    // training template; optimizer/batch resolved per depth when unset
    int epochs_initial = 500;
    int epochs_subsequent = 100;
    double learning_rate = 0.01;
    std::optional<int> batch_size;        // 0 = full
    std::optional<Optimizer> optimizer;
    LrDecay lr_decay = LrDecay::none;
    PenaltyMode penalty_mode = PenaltyMode::prox;
    bool penalize_biases = false;
    std::uint64_t seed = 20240101;

    // evaluation
    std::vector<double> quantiles{0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95};
    std::optional<int> hac_bandwidth; // unset -> horizon - 1; negative -> automatic rule
    bool hac_auto = false;
    double scale = 100.0;
    bool include_mse = false;
    bool shared_architecture = false;

    std::string output_dir = "out";
    int jobs = 1;
    bool checkpoint_every_origin = false;

    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text);

    /// Cross-field consistency; throws ConfigError before any job starts.
    void validate() const;

    TrainConfig train_config_for(int depth) const;
    std::vector<double> lambda_grid() const;
    int hac_lags(int series_length) const;

    /// Canonical serialization of everything that identifies results
    /// (excludes output_dir, jobs and checkpointing). Hashed into every
    /// artifact so artifacts from mismatched configs never silently mix.
    std::string canonical_text() const;
    std::string hash_hex() const;
};

} // namespace macroq
