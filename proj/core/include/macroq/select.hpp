#pragma once

#include "macroq/complexity.hpp"
#include "macroq/train.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace macroq {

/// Hyperparameter grid explored on the validation sample. Width and
/// activation are skipped when depth is 0 (the affine model has neither).
struct HyperGrid {
    std::vector<int> depths{0, 1, 2};
    std::vector<int> widths{2, 4, 8};
    std::vector<double> alphas{0.0, 0.5, 1.0};
    std::vector<double> lambdas; // default: table1_lambda_grid()
    std::vector<LossSpec> losses;

    static HyperGrid standard();
};

/// 40 log-spaced penalties from 0.2 to 10 inclusive.
std::vector<double> table1_lambda_grid();

/// The seven quantile levels reported throughout.
std::vector<double> standard_quantiles();

struct GridEntry {
    Architecture arch;
    double lambda = 0.0;

    std::string key() const; // stable id, e.g. "d1w4a0.5/l0.327"
};

std::vector<GridEntry> enumerate_grid(const HyperGrid& grid, int input_dim);

/// Mean loss over validation-segment forecasts.
double validation_score(const ForecastSeries& forecasts, const LossSpec& loss);

struct LedgerRow {
    GridEntry entry;
    std::string loss_label;
    double validation = 0.0;
    std::optional<double> test;
    std::string status = "ok";
};

struct Selection {
    GridEntry entry;
    double score = 0.0;
};

/// Argmin of validation score over the grid. `forecasts` must contain one
/// series per entry, keyed by GridEntry::key(); anything absent triggers an
/// incompleteness error listing every missing configuration. Ties break
/// simpler-first (fewer layers, then larger lambda).
Selection select_hyperparams(const std::vector<GridEntry>& entries,
                             const std::map<std::string, const ForecastSeries*>& forecasts,
                             const LossSpec& loss, std::vector<LedgerRow>* ledger = nullptr);

struct ComplexityChoice {
    double r_hat = 0.0;
    int assignment_index = -1; // into the grid assignments
    double score = 0.0;
};

/// Argmin of validation score across the complexity-grid representatives.
/// `forecasts[i]` belongs to assignments[i]; a null entry is reported as
/// missing. Ties prefer the smaller r.
ComplexityChoice select_complexity(const std::vector<GridAssignment>& assignments,
                                   const std::vector<ComplexityRecord>& records,
                                   const std::vector<const ForecastSeries*>& forecasts,
                                   const LossSpec& loss, std::vector<LedgerRow>* ledger = nullptr);

} // namespace macroq
