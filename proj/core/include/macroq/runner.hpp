#pragma once

#include "macroq/config.hpp"
#include "macroq/eval.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace macroq {

struct IngestSummary {
    int panel_rows = 0;
    int panel_cols = 0;
    MonthDate first_date;
    MonthDate last_date;
    long missing_cells = 0;
    std::vector<std::pair<std::string, int>> most_missing; // top columns
    bool transform_codes_recorded = false;
    int supervised_rows = 0;
    int validation_windows = 0;
    int test_windows = 0;
    std::vector<std::pair<MonthDate, double>> target_preview;

    std::string text() const;
};

/// Drives the config-described experiment: ingest, complexity mapping,
/// validation selection, frozen-hyperparameter test evaluation, reports.
/// Artifacts are written atomically under the output directory and are
/// keyed by the config hash; a rerun skips jobs whose artifacts already
/// match.
class Runner {
public:
    explicit Runner(ExperimentConfig cfg);

    IngestSummary ingest();
    void dump_standardized(const std::filesystem::path& path);
    void emit_transforms(const std::filesystem::path& path);

    void run(RunStage stage);

    /// Optional robustness pass: reruns the selected configuration per
    /// quantile under `replicates` seeds and writes the across-seed score
    /// dispersion to seed_dispersion.csv. Requires validation artifacts.
    void run_seed_dispersion(int replicates);

    /// Renders reports from existing artifacts (no training); missing
    /// artifacts raise JobError listing what is absent.
    void report(ReportKind kind, bool sort_quantiles = false);

    /// Job ids trained in this process (skipped jobs excluded).
    const std::vector<std::string>& executed_jobs() const { return executed_; }

    const ExperimentConfig& config() const { return cfg_; }
    const SupervisedDataset& dataset();
    std::filesystem::path out_dir() const { return out_; }

private:
    struct RecJob {
        std::string id;
        std::string key;
        Architecture arch;
        double lambda = 0.0;
        LossSpec loss;
    };

    void ensure_loaded();
    std::filesystem::path job_dir(const std::string& id) const;
    RecJob make_job(const Architecture& arch, double lambda, const LossSpec& loss) const;
    const ForecastSeries* job_forecasts(const RecJob& job); // nullptr if absent on disk
    void execute_jobs(const std::vector<RecJob>& jobs);
    std::vector<ComplexityRecord> complexity_records(const LossSpec& loss, bool compute_if_missing);
    void run_complexity();
    void run_validate();
    void run_test();
    /// Re-derives the loss tables (complexity profile) and the ledger with
    /// test scores from existing job artifacts; pure aggregation.
    void render_tables_and_ledger();
    void write_manifest();
    void append_provenance(const std::vector<std::string>& lines);

    ExperimentConfig cfg_;
    std::filesystem::path out_;
    std::string config_hash_;

    bool loaded_ = false;
    SeriesPanel panel_;
    SupervisedDataset dataset_;

    std::map<std::string, ForecastSeries> forecast_cache_;
    std::map<std::string, RecJob> known_jobs_;
    std::vector<std::string> executed_;
};

/// Atomic file write (temp file + rename).
void atomic_write(const std::filesystem::path& path, const std::string& content);

void write_forecasts_csv(std::ostream& out, const ForecastSeries& fs);
ForecastSeries read_forecasts_csv(std::istream& in, int horizon);

} // namespace macroq
