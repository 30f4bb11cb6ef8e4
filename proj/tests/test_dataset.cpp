#include "macroq/dataset.hpp"
#include "macroq/errors.hpp"

#include "synthetic.hpp"

#include <doctest.h>

#include <cmath>

using namespace macroq;

namespace {

SeriesPanel tiny_panel(std::vector<double> target_values) {
    SeriesPanel p;
    int T = static_cast<int>(target_values.size());
    p.names = {"U"};
    p.values.resize(T, 1);
    for (int t = 0; t < T; ++t) {
        p.values(t, 0) = target_values[t];
        p.dates.push_back(MonthDate{1990, 1}.plus_months(t));
    }
    return p;
}

} // namespace

TEST_CASE("build_target difference") {
    auto panel = tiny_panel({5.0, 5.2, 5.1});
    TargetSpec spec{"U", TargetTransform::difference, 1};
    TargetSeries y = build_target(panel, spec);
    CHECK(std::isnan(y.values(0)));
    CHECK(y.values(1) == doctest::Approx(0.2));
    CHECK(y.values(2) == doctest::Approx(-0.1));
}

TEST_CASE("build_target on a constant series is zero after burn-in") {
    auto panel = tiny_panel(std::vector<double>(20, 3.25));
    for (auto transform : {TargetTransform::difference, TargetTransform::yoy_difference,
                           TargetTransform::log_difference}) {
        TargetSpec spec{"U", transform, 1};
        TargetSeries y = build_target(panel, spec);
        int burn = transform == TargetTransform::yoy_difference ? 12 : 1;
        for (int t = 0; t < burn; ++t) CHECK(std::isnan(y.values(t)));
        for (int t = burn; t < panel.rows(); ++t) CHECK(y.values(t) == doctest::Approx(0.0));
    }
}

TEST_CASE("build_target log-difference") {
    auto panel = tiny_panel({std::exp(1.0), std::exp(2.0)});
    TargetSpec spec{"U", TargetTransform::log_difference, 1};
    TargetSeries y = build_target(panel, spec);
    CHECK(std::isnan(y.values(0)));
    CHECK(y.values(1) == doctest::Approx(100.0));
}

TEST_CASE("build_target error paths") {
    auto panel = tiny_panel({1.0, 2.0});
    CHECK_THROWS_AS(build_target(panel, TargetSpec{"NOPE", TargetTransform::difference, 1}), DataError);
    auto nonpos = tiny_panel({1.0, -2.0});
    CHECK_THROWS_AS(build_target(nonpos, TargetSpec{"U", TargetTransform::log_difference, 1}), DataError);
}

TEST_CASE("yoy difference aligns 12 months back") {
    std::vector<double> vals;
    for (int t = 0; t < 30; ++t) vals.push_back(t * 1.0);
    auto panel = tiny_panel(vals);
    TargetSeries y = build_target(panel, TargetSpec{"U", TargetTransform::yoy_difference, 12});
    for (int t = 0; t < 12; ++t) CHECK(std::isnan(y.values(t)));
    CHECK(y.values(12) == doctest::Approx(12.0));
    CHECK(y.values(29) == doctest::Approx(12.0));
}

TEST_CASE("supervised rows pair x_t with y at t+h") {
    Eigen::MatrixXd predictors(6, 2);
    Eigen::VectorXd y(6);
    for (int t = 0; t < 6; ++t) {
        predictors(t, 0) = 10.0 + t;
        predictors(t, 1) = -t;
        y(t) = 0.1 * t;
    }
    SeriesPanel panel = synthetic::cumsum_panel(predictors, {"P1", "P2"}, y);
    SupervisedDataset ds = make_supervised(panel, TargetSpec{"TARGET", TargetTransform::difference, 1});
    // first target (difference at date 1) pairs with origin 0... but the
    // difference at the first date is undefined, so origins start at date 0
    // with target y(1).
    CHECK(ds.rows() == 5);
    CHECK(ds.horizon == 1);
    for (int i = 0; i < ds.rows(); ++i) {
        CHECK(months_between(ds.origins[i], ds.target_date(i)) == 1);
        CHECK(ds.targets(i) == doctest::Approx(y(i + 1)));
        CHECK(ds.features(i, 1) == doctest::Approx(10.0 + i)); // TARGET col is 0
    }
}

TEST_CASE("standardize basics") {
    Eigen::MatrixXd X(3, 1);
    X << 1, 2, 3;
    Eigen::VectorXd y(3);
    y << 0, 0, 0;
    auto ds = synthetic::make_dataset(X, y);
    StandardizedWindow sw = standardize(ds, ds.origins.back());
    CHECK(sw.scaler.mean(0) == doctest::Approx(2.0));
    CHECK(sw.scaler.sd(0) == doctest::Approx(1.0));
    CHECK(sw.features(0, 0) == doctest::Approx(-1.0));
    CHECK(sw.features(1, 0) == doctest::Approx(0.0));
    CHECK(sw.features(2, 0) == doctest::Approx(1.0));
    CHECK(sw.dropped.empty());
}

TEST_CASE("standardization statistics ignore rows after window_end") {
    Eigen::MatrixXd X(5, 1);
    X << 1, 2, 3, 100, -50;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(5);
    auto ds = synthetic::make_dataset(X, y);
    MonthDate end = ds.origins[2];
    Scaler before = fit_scaler(ds, end);

    ds.features(3, 0) = 1e6; // future rows altered
    ds.features(4, 0) = -1e6;
    Scaler after = fit_scaler(ds, end);
    CHECK(before.mean(0) == after.mean(0));
    CHECK(before.sd(0) == after.sd(0));
}

TEST_CASE("constant column is dropped with k decremented") {
    Eigen::MatrixXd X(4, 2);
    X << 1, 7, 2, 7, 3, 7, 4, 7;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
    auto ds = synthetic::make_dataset(X, y);
    StandardizedWindow sw = standardize(ds, ds.origins.back());
    CHECK(sw.features.cols() == 1);
    CHECK(sw.kept_columns == std::vector<int>{0});
    CHECK(sw.dropped == std::vector<std::string>{"x2"});
    // zeroing semantics keep the full width for the recursion
    Eigen::VectorXd row = sw.scaler.apply(ds.features.row(0).transpose());
    CHECK(row.size() == 2);
    CHECK(row(1) == 0.0);
}

TEST_CASE("missing cells standardize to zero (window-mean imputation)") {
    Eigen::MatrixXd X(3, 1);
    X << 1, std::nan(""), 3;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
    auto ds = synthetic::make_dataset(X, y);
    Scaler s = fit_scaler(ds, ds.origins.back());
    Eigen::VectorXd row = s.apply(ds.features.row(1).transpose());
    CHECK(row(0) == 0.0);
}

TEST_CASE("expanding windows follow the paper's dating convention") {
    // origins 1960-01 .. 2010-12
    int n = months_between(MonthDate{1960, 1}, MonthDate{2010, 12}) + 1;
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
    for (int i = 0; i < n; ++i) X(i, 0) = i;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    auto ds = synthetic::make_dataset(X, y);

    SplitSpec split;
    split.t1 = MonthDate{1980, 1};
    split.t2 = MonthDate{2000, 1};
    split.t3 = MonthDate{2010, 12};
    split.horizon = 1;

    auto windows = expanding_windows(ds, split);
    CHECK(windows.front().origin == MonthDate{1980, 1}); // forecasts 1980-02
    CHECK(windows.front().is_validation);
    // last validation forecast is dated 2000-01, made at 1999-12
    int val_count = 0;
    MonthDate last_val{0, 1};
    for (const auto& w : windows) {
        if (w.is_validation) {
            ++val_count;
            last_val = w.origin;
        }
    }
    CHECK(last_val == MonthDate{1999, 12});
    CHECK(val_count == 240);
    CHECK(windows.back().origin == MonthDate{2010, 11}); // forecasts t3

    SUBCASE("window monotonicity") {
        for (size_t i = 1; i < windows.size(); ++i) {
            CHECK(windows[i].train_rows == windows[i - 1].train_rows + 1);
        }
    }
}

TEST_CASE("h=12 windows end at t3 minus 12 months") {
    int n = 400;
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(n, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    auto ds = synthetic::make_dataset(X, y, 12);

    SplitSpec split;
    split.t1 = synthetic::start_date().plus_months(120);
    split.t2 = synthetic::start_date().plus_months(240);
    split.t3 = ds.origins.back().plus_months(12);
    split.horizon = 12;

    auto windows = expanding_windows(ds, split);
    CHECK(windows.back().origin == split.t3.plus_months(-12));
    CHECK(windows.front().origin == split.t1);
}

TEST_CASE("degenerate splits are rejected") {
    SplitSpec split;
    split.t1 = MonthDate{1980, 1};
    split.t2 = MonthDate{1980, 1};
    split.t3 = MonthDate{1990, 1};
    split.horizon = 1;
    CHECK_THROWS_AS(split.validate(), ConfigError);

    split.t2 = MonthDate{1985, 1};
    split.t3 = MonthDate{1985, 1};
    CHECK_THROWS_AS(split.validate(), ConfigError);
}

TEST_CASE("split must fit inside the dataset") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(50, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(50);
    auto ds = synthetic::make_dataset(X, y);
    SplitSpec split = synthetic::make_split(20, 10, 10);
    CHECK_NOTHROW(split.validate_against(ds));

    SplitSpec beyond = split;
    beyond.t3 = ds.origins.back().plus_months(24);
    CHECK_THROWS_AS(beyond.validate_against(ds), ConfigError);
}

TEST_CASE("alignment invariant holds for every supervised row") {
    auto data = synthetic::location_scale_dgp(40, 2, 99);
    for (int i = 0; i < data.dataset.rows(); ++i) {
        CHECK(months_between(data.dataset.origins[i], data.dataset.target_date(i)) ==
              data.dataset.horizon);
    }
}
