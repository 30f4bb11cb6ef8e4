#pragma once

// Shared synthetic fixtures for unit and acceptance tests.

#include "macroq/dataset.hpp"
#include "macroq/rng.hpp"

#include <string>
#include <vector>

namespace synthetic {

inline macroq::MonthDate start_date() { return macroq::MonthDate{1960, 1}; }

/// Wraps raw (X, y) as a supervised dataset with consecutive monthly origins.
inline macroq::SupervisedDataset make_dataset(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                              int horizon = 1) {
    macroq::SupervisedDataset ds;
    ds.features = X;
    ds.targets = y;
    ds.horizon = horizon;
    for (int i = 0; i < X.rows(); ++i) ds.origins.push_back(start_date().plus_months(i));
    for (int j = 0; j < X.cols(); ++j) ds.feature_names.push_back("x" + std::to_string(j + 1));
    return ds;
}

/// Split with the requested number of training rows and validation/test
/// forecasts, expressed in the forecast-date convention used throughout.
inline macroq::SplitSpec make_split(int n_train, int n_validation, int n_test, int horizon = 1) {
    macroq::SplitSpec split;
    split.horizon = horizon;
    split.t1 = start_date().plus_months(n_train - 1 + horizon);
    split.t2 = split.t1.plus_months(n_validation + horizon - 1);
    split.t3 = split.t2.plus_months(n_test);
    return split;
}

/// Panel whose TARGET column is the running sum of y, so a `difference`
/// target spec recovers y exactly; predictor columns are passed through.
inline macroq::SeriesPanel cumsum_panel(const Eigen::MatrixXd& predictors,
                                        const std::vector<std::string>& names,
                                        const Eigen::VectorXd& y) {
    macroq::SeriesPanel panel;
    const int T = static_cast<int>(predictors.rows());
    panel.names = names;
    panel.names.insert(panel.names.begin(), "TARGET");
    panel.values.resize(T, predictors.cols() + 1);
    double level = 0.0;
    for (int t = 0; t < T; ++t) {
        level += y(t);
        panel.values(t, 0) = level;
        for (int j = 0; j < predictors.cols(); ++j) panel.values(t, j + 1) = predictors(t, j);
        panel.dates.push_back(start_date().plus_months(t));
    }
    return panel;
}

/// Heteroskedastic location-scale process: the target one month ahead is
///   y_{t+1} = x1_t + (1 + |x2_t|) e_{t+1},    e ~ N(0,1),
/// with `noise_predictors` additional pure-noise columns. The conditional
/// median is exactly linear in x1; upper quantiles bend with |x2|.
struct LocationScaleData {
    macroq::SupervisedDataset dataset;
    int signal_column = 0;
};

inline LocationScaleData location_scale_dgp(int n, int noise_predictors, std::uint64_t seed) {
    macroq::Rng rng(seed);
    const int k = 2 + noise_predictors;
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) {
        for (int j = 0; j < k; ++j) X(t, j) = rng.next_normal();
        double eps = rng.next_normal();
        y(t) = X(t, 0) + (1.0 + std::abs(X(t, 1))) * eps;
    }
    LocationScaleData out;
    out.dataset = make_dataset(X, y);
    return out;
}

/// Plain linear DGP: y_{t+1} = x1_t - 0.5 x2_t + e with homoskedastic noise
/// and `noise_predictors` uninformative columns.
inline macroq::SupervisedDataset linear_dgp(int n, int noise_predictors, std::uint64_t seed) {
    macroq::Rng rng(seed);
    const int k = 2 + noise_predictors;
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) {
        for (int j = 0; j < k; ++j) X(t, j) = rng.next_normal();
        y(t) = X(t, 0) - 0.5 * X(t, 1) + rng.next_normal();
    }
    return make_dataset(X, y);
}

/// AR(1)-driven supervised set: y_{t+1} = rho * y_t + e, with y_t itself the
/// only informative predictor plus optional noise columns.
inline macroq::SupervisedDataset ar1_dgp(int n, double rho, int noise_predictors, std::uint64_t seed) {
    macroq::Rng rng(seed);
    const int k = 1 + noise_predictors;
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n);
    double state = 0.0;
    for (int t = 0; t < n; ++t) {
        X(t, 0) = state;
        for (int j = 1; j < k; ++j) X(t, j) = rng.next_normal();
        state = rho * state + rng.next_normal();
        y(t) = state; // y_{t+1} seen from origin t
    }
    return make_dataset(X, y);
}

/// Targets drawn from a small set of atoms (multiples of 0.1); quantile
/// intervals are then almost always single points, which pins the
/// full-shrinkage forecasts to the naive quantile exactly.
inline macroq::SupervisedDataset discrete_noise_dgp(int n, int predictors, std::uint64_t seed) {
    macroq::Rng rng(seed);
    static const double atoms[] = {-0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3};
    static const double cdf[] = {0.08, 0.20, 0.38, 0.62, 0.80, 0.92, 1.0};
    Eigen::MatrixXd X(n, predictors);
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) {
        for (int j = 0; j < predictors; ++j) X(t, j) = rng.next_normal();
        double u = rng.next_double();
        int pick = 0;
        while (u > cdf[pick]) ++pick;
        y(t) = atoms[pick];
    }
    return make_dataset(X, y);
}

} // namespace synthetic
