#include "macroq/dataset.hpp"

#include "macroq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace macroq {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

TargetTransform parse_target_transform(const std::string& name) {
    if (name == "difference") return TargetTransform::difference;
    if (name == "yoy-difference") return TargetTransform::yoy_difference;
    if (name == "log-difference") return TargetTransform::log_difference;
    throw ConfigError("unknown target transform '" + name + "'");
}

std::string target_transform_name(TargetTransform t) {
    switch (t) {
        case TargetTransform::difference: return "difference";
        case TargetTransform::yoy_difference: return "yoy-difference";
        case TargetTransform::log_difference: return "log-difference";
    }
    return "?";
}

void TargetSpec::validate() const {
    if (variable.empty()) throw ConfigError("target.variable must be set");
    if (horizon < 1) throw ConfigError("target.horizon must be a positive number of months");
}

TargetSeries build_target(const SeriesPanel& panel, const TargetSpec& spec) {
    spec.validate();
    int j = panel.column(spec.variable);
    if (j < 0) throw DataError("target variable '" + spec.variable + "' not found in panel");

    const int T = panel.rows();
    const int lag = spec.transform == TargetTransform::yoy_difference ? 12 : 1;

    TargetSeries out;
    out.dates = panel.dates;
    out.values.setConstant(T, kNaN);
    for (int t = 0; t < T; ++t) {
        double cur = panel.values(t, j);
        double prev = t - lag >= 0 ? panel.values(t - lag, j) : kNaN;
        if (!std::isfinite(cur) || !std::isfinite(prev)) continue;
        switch (spec.transform) {
            case TargetTransform::difference:
            case TargetTransform::yoy_difference:
                out.values(t) = cur - prev;
                break;
            case TargetTransform::log_difference:
                if (cur <= 0.0 || prev <= 0.0) {
                    throw DataError("log-difference target '" + spec.variable +
                                    "' has non-positive value at " + panel.dates[t].str());
                }
                out.values(t) = 100.0 * (std::log(cur) - std::log(prev));
                break;
        }
    }
    return out;
}

std::optional<int> SupervisedDataset::row_for(MonthDate origin) const {
    auto it = std::lower_bound(origins.begin(), origins.end(), origin);
    if (it == origins.end() || !(*it == origin)) return std::nullopt;
    return static_cast<int>(it - origins.begin());
}

int SupervisedDataset::rows_through(MonthDate end) const {
    auto it = std::upper_bound(origins.begin(), origins.end(), end);
    return static_cast<int>(it - origins.begin());
}

SupervisedDataset make_supervised(const SeriesPanel& panel, const TargetSpec& spec) {
    TargetSeries target = build_target(panel, spec);
    const int T = panel.rows();
    const int h = spec.horizon;

    SupervisedDataset ds;
    ds.feature_names = panel.names;
    ds.horizon = h;

    std::vector<int> keep;
    for (int t = 0; t + h < T; ++t) {
        if (std::isfinite(target.values(t + h))) keep.push_back(t);
    }
    if (keep.empty()) throw DataError("no supervised rows: target never observed at horizon " + std::to_string(h));

    ds.origins.reserve(keep.size());
    ds.features.resize(static_cast<int>(keep.size()), panel.cols());
    ds.targets.resize(static_cast<int>(keep.size()));
    for (size_t i = 0; i < keep.size(); ++i) {
        int t = keep[i];
        ds.origins.push_back(panel.dates[t]);
        ds.features.row(static_cast<int>(i)) = panel.values.row(t);
        ds.targets(static_cast<int>(i)) = target.values(t + h);
    }
    return ds;
}

void SplitSpec::validate() const {
    if (horizon < 1) throw ConfigError("split horizon must be positive");
    if (!(t1 < t2)) throw ConfigError("split requires t1 < t2 (validation segment would be empty)");
    if (!(t2 < t3)) throw ConfigError("split requires t2 < t3 (test segment would be empty)");
}

void SplitSpec::validate_against(const SupervisedDataset& ds) const {
    validate();
    if (horizon != ds.horizon) throw ConfigError("split horizon does not match dataset horizon");
    if (ds.rows() == 0) throw DataError("dataset is empty");
    if (t1 < ds.origins.front()) {
        throw ConfigError("t1 " + t1.str() + " precedes first supervised origin " + ds.origins.front().str());
    }
    MonthDate last_origin = t3.plus_months(-horizon);
    if (ds.origins.back() < last_origin) {
        throw ConfigError("t3 " + t3.str() + " requires origins through " + last_origin.str() +
                          " but data ends at origin " + ds.origins.back().str());
    }
    if (ds.rows_through(t1.plus_months(-horizon)) < 2) {
        throw DataError("initial training window before " + t1.str() + " has fewer than 2 rows");
    }
}

int Scaler::active_count() const {
    int n = 0;
    for (auto a : active) n += a ? 1 : 0;
    return n;
}

std::vector<int> Scaler::inactive_columns() const {
    std::vector<int> out;
    for (int j = 0; j < size(); ++j)
        if (!active[j]) out.push_back(j);
    return out;
}

Eigen::VectorXd Scaler::apply(const Eigen::VectorXd& raw) const {
    if (raw.size() != size()) throw DataError("scaler/feature dimension mismatch");
    Eigen::VectorXd out(size());
    for (int j = 0; j < size(); ++j) {
        double v = raw(j);
        out(j) = (active[j] && std::isfinite(v)) ? (v - mean(j)) / sd(j) : 0.0;
    }
    return out;
}

Eigen::MatrixXd Scaler::apply_rows(const Eigen::MatrixXd& raw) const {
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (int i = 0; i < raw.rows(); ++i) out.row(i) = apply(raw.row(i).transpose()).transpose();
    return out;
}

Scaler fit_scaler(const SupervisedDataset& ds, MonthDate window_end) {
    int n = ds.rows_through(window_end);
    if (n < 1) throw DataError("scaler window ending " + window_end.str() + " contains no rows");

    const int k = ds.cols();
    Scaler s;
    s.mean.setZero(k);
    s.sd.setOnes(k);
    s.active.assign(k, 1);

    for (int j = 0; j < k; ++j) {
        double sum = 0.0;
        int count = 0;
        for (int i = 0; i < n; ++i) {
            double v = ds.features(i, j);
            if (std::isfinite(v)) {
                sum += v;
                ++count;
            }
        }
        if (count < 2) {
            s.active[j] = 0;
            continue;
        }
        double mean = sum / count;
        double ss = 0.0;
        for (int i = 0; i < n; ++i) {
            double v = ds.features(i, j);
            if (std::isfinite(v)) ss += (v - mean) * (v - mean);
        }
        double sd = std::sqrt(ss / (count - 1));
        if (!(sd > 0.0)) {
            s.active[j] = 0;
            continue;
        }
        s.mean(j) = mean;
        s.sd(j) = sd;
    }
    return s;
}

StandardizedWindow standardize(const SupervisedDataset& ds, MonthDate window_end) {
    StandardizedWindow out;
    out.scaler = fit_scaler(ds, window_end);
    int n = ds.rows_through(window_end);

    for (int j = 0; j < ds.cols(); ++j) {
        if (out.scaler.active[j]) {
            out.kept_columns.push_back(j);
        } else {
            out.dropped.push_back(ds.feature_names[j]);
        }
    }

    Eigen::MatrixXd scaled = out.scaler.apply_rows(ds.features.topRows(n));
    out.features.resize(n, static_cast<int>(out.kept_columns.size()));
    for (size_t c = 0; c < out.kept_columns.size(); ++c) {
        out.features.col(static_cast<int>(c)) = scaled.col(out.kept_columns[c]);
    }
    return out;
}

std::vector<ForecastWindow> expanding_windows(const SupervisedDataset& ds, const SplitSpec& split) {
    split.validate_against(ds);
    const int h = split.horizon;

    std::vector<ForecastWindow> out;
    MonthDate last_origin = split.t3.plus_months(-h);
    for (MonthDate origin = split.t1; origin <= last_origin; origin = origin.plus_months(1)) {
        auto row = ds.row_for(origin);
        if (!row) continue; // target for this origin never observed
        ForecastWindow w;
        w.origin = origin;
        w.train_rows = ds.rows_through(origin.plus_months(-h));
        w.is_validation = !(split.t2 < origin.plus_months(h));
        if (w.train_rows < 2) {
            throw DataError("training window at origin " + origin.str() + " has fewer than 2 rows");
        }
        out.push_back(w);
    }
    if (out.empty()) throw DataError("dataset too short for even one forecast window");
    return out;
}

} // namespace macroq
