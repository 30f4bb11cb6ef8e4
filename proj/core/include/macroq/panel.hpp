#pragma once

#include "macroq/dates.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace macroq {

enum class PanelFormat { fredmd_csv, plain_csv };

PanelFormat parse_panel_format(const std::string& name);

/// Dated matrix of monthly predictor series. Missing observations are stored
/// as NaN and are always explicit; loaders never substitute zeros.
struct SeriesPanel {
    std::vector<MonthDate> dates;   // strictly increasing, no monthly gaps
    Eigen::MatrixXd values;         // T x k, NaN = missing
    std::vector<std::string> names; // k mnemonics, file order
    std::vector<int> transform_codes; // k entries when present, else empty

    int rows() const { return static_cast<int>(dates.size()); }
    int cols() const { return static_cast<int>(names.size()); }

    int column(const std::string& name) const; // -1 when absent

    /// Enforces the structural invariants (monotone gap-free dates, every
    /// column has at least one observation). Throws DataError.
    void validate() const;
};

/// Loads a comma-delimited monthly panel. First column must be named `date`
/// (case-insensitive) with YYYY-MM or M/D/YYYY values. For fredmd-csv the
/// second line carries per-column transform codes and is detected by a
/// non-date first cell.
SeriesPanel load_panel(const std::string& path, PanelFormat format);

/// Returns the per-column transform map recorded in the panel, in config
/// form. Codes are recorded by the loader but never auto-applied; callers
/// feed this (or an explicit hand-written map) to apply_transforms.
std::map<std::string, int> transforms_from_codes(const SeriesPanel& panel);

/// Applies FRED-MD style stationarity transforms column by column:
///   1 level, 2 first difference, 3 second difference, 4 log,
///   5 dlog, 6 d2log, 7 first difference of percent change.
/// Rows consumed by differencing become missing. Columns absent from the
/// map are left untouched.
SeriesPanel apply_transforms(const SeriesPanel& panel, const std::map<std::string, int>& transforms);

} // namespace macroq
