#pragma once

#include "macroq/dataset.hpp"
#include "macroq/train.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace macroq {

/// Type-1 (inverted CDF) empirical quantile: smallest sample value whose
/// CDF weight reaches tau.
double naive_quantile(std::span<const double> history, double tau);

/// Recursively estimated unconditional-quantile forecasts aligned with the
/// dataset's forecast windows: the forecast at origin T is the empirical
/// tau-quantile of all targets realized by T.
ForecastSeries naive_forecast(const SupervisedDataset& ds, const SplitSpec& split, double tau);

/// 100 * mean pinball / (tau (1 - tau)). `scale` is the presentation factor.
double normalized_mean_loss(std::span<const double> predictions, std::span<const double> realizations,
                            double tau, double scale = 100.0);

/// Per-origin normalized loss differential (model minus naive).
std::vector<double> loss_differential(std::span<const double> model, std::span<const double> naive,
                                      std::span<const double> realizations, double tau,
                                      double scale = 100.0);

/// Newey-West standard error of the series mean with Bartlett weights over
/// `lags` autocovariances. lags = 0 collapses to the classical sd/sqrt(n).
double hac_se(std::span<const double> series, int lags);

/// Rule-of-thumb automatic bandwidth: floor(4 (n/100)^{2/9}).
int newey_west_auto_bandwidth(int n);

/// Shading tiers keyed to |mean / se| with the 1.28 / 1.65 thresholds.
enum class Tier { light, medium, dark };
Tier tier_for(double mean_diff, double se);
std::string tier_name(Tier t);

struct EvalCell {
    double mean_diff = 0.0;
    double se = 0.0;
    Tier tier = Tier::light;
    bool outperform = false; // mean_diff < 0
    bool present = false;    // false marks a hole (missing job)
};

/// Loss summary with complexity rows by quantile columns. Row 0.0 is the
/// naive benchmark compared with itself, so its cells are identically zero
/// and naive_row carries the absolute normalized naive losses.
struct LossTable {
    std::string segment;
    std::vector<double> rows;      // complexity grid values, rows[0] == 0.0
    std::vector<double> quantiles; // tau per column
    std::vector<double> naive_row;
    std::vector<std::vector<EvalCell>> cells; // rows.size() x quantiles.size()
};

/// Forecasts per (row, column); a null pointer marks a hole (missing job).
/// Entries for row 0.0 are ignored.
using CellForecasts = std::vector<std::vector<const ForecastSeries*>>;

LossTable build_table(const SupervisedDataset& ds, const SplitSpec& split, Segment segment,
                      const std::vector<double>& complexity_rows, const std::vector<double>& quantiles,
                      const CellForecasts& forecasts, int hac_lags, double scale = 100.0);

void write_table_csv(std::ostream& out, const LossTable& table);
std::string table_to_json(const LossTable& table);

/// Fan-chart rows: per origin the realized value plus one predicted quantile
/// per column. sort_quantiles monotonizes crossed quantiles for display.
struct FanChart {
    std::vector<double> quantiles;
    std::vector<MonthDate> origins;
    std::vector<double> realized;
    std::vector<std::vector<double>> predictions; // origins x quantiles
    std::vector<Segment> segments;
};

FanChart build_fanchart(const std::vector<double>& quantiles,
                        const std::vector<const ForecastSeries*>& per_quantile, bool sort_quantiles);

void write_fanchart_csv(std::ostream& out, const FanChart& chart);

} // namespace macroq
