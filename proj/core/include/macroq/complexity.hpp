#pragma once

#include "macroq/train.hpp"

#include <span>
#include <vector>

namespace macroq {

/// Population variance (divide by count) of a fitted-forecast series.
double forecast_variance(std::span<const double> fitted);

struct CandidateSpec {
    Architecture arch;
    double lambda = 0.0;
};

struct ComplexityRecord {
    Architecture arch;
    double lambda = 0.0;
    double var0 = 0.0; // in-sample fitted-forecast variance
    double r = 0.0;    // var0 / var0_max, clamped to [0,1]
};

/// Penalties searched when mapping the complexity grid: {0} plus
/// 10^{-3..2} in steps of 0.1 in the exponent.
std::vector<double> complexity_lambda_grid();

/// Target grid R = {0.0, 0.1, ..., 1.0}.
std::vector<double> complexity_grid();

/// Trains every candidate on the initial window (through t1 only), computes
/// the in-sample fitted-forecast variance, and normalizes by Var0 of the
/// richest candidate architecture at lambda = 0 (the common denominator).
/// Per-architecture unpenalized variances are reported in `log` for the
/// 10%-agreement check; values of r above 1 + 1e-3 are logged as anomalies
/// before clamping. Candidates are processed with `jobs` worker threads.
std::vector<ComplexityRecord> complexity_index(const std::vector<CandidateSpec>& candidates,
                                               const SupervisedDataset& ds, const SplitSpec& split,
                                               const LossSpec& loss, const TrainConfig& config,
                                               int jobs = 1, std::vector<std::string>* log = nullptr);

struct GridAssignment {
    double r_target = 0.0;
    int record_index = -1;
};

/// Nearest candidate per grid point; ties broken by smaller depth, then
/// larger lambda (prefer the simpler model).
std::vector<GridAssignment> map_complexity_grid(const std::vector<ComplexityRecord>& records,
                                                const std::vector<double>& grid);

} // namespace macroq
