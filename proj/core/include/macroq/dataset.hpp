#pragma once

#include "macroq/panel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace macroq {

enum class TargetTransform { difference, yoy_difference, log_difference };

TargetTransform parse_target_transform(const std::string& name);
std::string target_transform_name(TargetTransform t);

struct TargetSpec {
    std::string variable;
    TargetTransform transform = TargetTransform::difference;
    int horizon = 1;

    void validate() const;
};

/// Transformed target aligned to the panel dates. values[t] holds the
/// transform evaluated at dates[t]; entries consumed by differencing are NaN.
struct TargetSeries {
    std::vector<MonthDate> dates;
    Eigen::VectorXd values;
};

/// difference:     v_d - v_{d-1}
/// yoy-difference: v_d - v_{d-12}
/// log-difference: 100 * (ln v_d - ln v_{d-1})
TargetSeries build_target(const SeriesPanel& panel, const TargetSpec& spec);

/// Supervised rows: row i pairs the predictors observed at origins[i] with the
/// target realized horizon months later. Rows whose target is missing are not
/// materialized; feature cells may still be NaN (imputed at standardization).
struct SupervisedDataset {
    std::vector<MonthDate> origins;
    Eigen::MatrixXd features; // n x k, NaN = missing
    Eigen::VectorXd targets;  // n, finite
    std::vector<std::string> feature_names;
    int horizon = 1;

    int rows() const { return static_cast<int>(origins.size()); }
    int cols() const { return static_cast<int>(feature_names.size()); }
    MonthDate target_date(int row) const { return origins[row].plus_months(horizon); }
    std::optional<int> row_for(MonthDate origin) const;
    /// Number of leading rows whose origin is <= end.
    int rows_through(MonthDate end) const;
};

SupervisedDataset make_supervised(const SeriesPanel& panel, const TargetSpec& spec);

/// Expanding-window sample split. All three dates are forecast-target dates;
/// the first evaluated forecast is for t1 + horizon, validation runs through
/// t2, test through t3.
struct SplitSpec {
    MonthDate t1;
    MonthDate t2;
    MonthDate t3;
    int horizon = 1;

    void validate() const;
    void validate_against(const SupervisedDataset& ds) const;
};

/// Per-column location/scale fitted on a training window. Columns whose
/// window standard deviation is zero are marked inactive; applying the scaler
/// maps them (and any missing cell) to exactly 0, which keeps parameter
/// shapes stable across the expanding recursion while carrying no signal.
struct Scaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    std::vector<std::uint8_t> active;

    int size() const { return static_cast<int>(active.size()); }
    int active_count() const;
    std::vector<int> inactive_columns() const;

    Eigen::VectorXd apply(const Eigen::VectorXd& raw) const;
    Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& raw) const;
};

/// Statistics use rows with origin <= window_end only (sample sd, n-1).
/// Missing cells are excluded from the statistics.
Scaler fit_scaler(const SupervisedDataset& ds, MonthDate window_end);

/// Audit-style standardization: returns the window rows scaled with
/// zero-variance columns dropped (kept_columns lists the survivors).
struct StandardizedWindow {
    Eigen::MatrixXd features; // window rows x kept columns
    std::vector<int> kept_columns;
    std::vector<std::string> dropped;
    Scaler scaler;
};

StandardizedWindow standardize(const SupervisedDataset& ds, MonthDate window_end);

/// One step of the expanding recursion: train on rows with origin <= origin-h
/// (`train_rows` leading rows), forecast at `origin`.
struct ForecastWindow {
    MonthDate origin;
    int train_rows = 0;
    bool is_validation = false;
};

/// Ordered windows for origins t1 .. t3-h. Training grows by one row per
/// step. Throws DataError when the dataset cannot support the split.
std::vector<ForecastWindow> expanding_windows(const SupervisedDataset& ds, const SplitSpec& split);

} // namespace macroq
