#include "macroq/eval.hpp"
#include "macroq/errors.hpp"
#include "macroq/loss.hpp"
#include "macroq/rng.hpp"

#include "oracles.hpp"
#include "synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace macroq;

TEST_CASE("naive quantile uses the inverted-CDF rule") {
    std::vector<double> ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(naive_quantile(ten, 0.5) == 5.0);

    std::vector<double> one{42.0};
    for (double tau : {0.05, 0.5, 0.95}) CHECK(naive_quantile(one, tau) == 42.0);

    std::vector<double> hundred;
    for (int i = 1; i <= 100; ++i) hundred.push_back(i * 1.0);
    CHECK(naive_quantile(hundred, 0.05) == 5.0);

    SUBCASE("agrees with the sort oracle on random samples") {
        Rng rng(64);
        for (int trial = 0; trial < 100; ++trial) {
            int n = 1 + static_cast<int>(rng.next_index(200));
            std::vector<double> v(n);
            for (double& x : v) x = rng.next_normal();
            double tau = 0.05 + 0.9 * rng.next_double();
            CHECK(naive_quantile(v, tau) == oracle::sorted_quantile(v, tau));
        }
    }
    CHECK_THROWS_AS(naive_quantile(std::span<const double>{}, 0.5), JobError);
}

TEST_CASE("naive forecasts are recursive") {
    auto ds = synthetic::ar1_dgp(40, 0.5, 1, 12);
    SplitSpec split = synthetic::make_split(20, 10, 9);
    ForecastSeries nf = naive_forecast(ds, split, 0.25);
    REQUIRE(!nf.points.empty());
    // each origin's forecast equals the quantile of targets realized by then
    auto windows = expanding_windows(ds, split);
    for (size_t i = 0; i < windows.size(); ++i) {
        std::vector<double> hist(ds.targets.data(), ds.targets.data() + windows[i].train_rows);
        CHECK(nf.points[i].prediction == oracle::sorted_quantile(hist, 0.25));
    }
}

TEST_CASE("normalized mean loss") {
    std::vector<double> preds{1.0, 2.0};
    std::vector<double> reals{1.0, 2.0};
    CHECK(normalized_mean_loss(preds, reals, 0.5) == 0.0);

    // tau = 0.5 divisor is 0.25: one miss of 1.0 -> pinball 0.5, mean 0.25,
    // normalized 100 * 0.25 / 0.25 = 100
    std::vector<double> off{1.0, 3.0};
    CHECK(normalized_mean_loss(off, reals, 0.5) == doctest::Approx(100.0));

    CHECK_THROWS_AS(normalized_mean_loss(preds, std::vector<double>{1.0}, 0.5), JobError);
}

TEST_CASE("loss differential") {
    std::vector<double> reals{0.0, 1.0, -1.0};
    std::vector<double> naive{0.5, 0.5, 0.5};

    SUBCASE("model equal to naive gives zeros") {
        auto d = loss_differential(naive, naive, reals, 0.25);
        for (double v : d) CHECK(v == 0.0);
    }

    SUBCASE("a strictly closer model is negative everywhere") {
        std::vector<double> model{0.1, 0.9, -0.7};
        auto d = loss_differential(model, naive, reals, 0.25);
        for (double v : d) CHECK(v < 0.0);
    }

    SUBCASE("three-point fixture matches hand-computed values") {
        std::vector<double> model{1.0, 0.0, 0.0};
        double tau = 0.5, norm = 100.0 / 0.25;
        auto d = loss_differential(model, naive, reals, tau);
        // row 0: L(0,1)=0.5 vs L(0,0.5)=0.25 -> +0.25*norm
        CHECK(d[0] == doctest::Approx(0.25 * norm));
        // row 1: L(1,0)=0.5 vs L(1,0.5)=0.25 -> +0.25*norm
        CHECK(d[1] == doctest::Approx(0.25 * norm));
        // row 2: L(-1,0)=0.5 vs L(-1,0.5)=0.75 -> -0.25*norm
        CHECK(d[2] == doctest::Approx(-0.25 * norm));
    }

    SUBCASE("antisymmetry") {
        std::vector<double> model{0.3, 1.4, -0.2};
        auto d1 = loss_differential(model, naive, reals, 0.1);
        auto d2 = loss_differential(naive, model, reals, 0.1);
        for (size_t i = 0; i < d1.size(); ++i) CHECK(d1[i] == doctest::Approx(-d2[i]));
    }
}

TEST_CASE("hac standard errors") {
    SUBCASE("bandwidth zero collapses to the classical formula") {
        Rng rng(4);
        std::vector<double> v(37);
        for (double& x : v) x = rng.next_normal();
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= v.size();
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        double classical = std::sqrt(ss / v.size() / v.size());
        CHECK(hac_se(v, 0) == doctest::Approx(classical).epsilon(1e-14));
    }

    SUBCASE("iid noise: L=4 estimate close to sd/sqrt(n) on average") {
        Rng rng(5150);
        int n = 200;
        double acc = 0.0;
        int reps = 1000;
        for (int r = 0; r < reps; ++r) {
            std::vector<double> v(n);
            for (double& x : v) x = rng.next_normal();
            acc += hac_se(v, 4);
        }
        double truth = 1.0 / std::sqrt(static_cast<double>(n));
        CHECK(acc / reps == doctest::Approx(truth).epsilon(0.10));
    }

    SUBCASE("MA(1) long-run variance within 5% of the closed form") {
        double theta = 0.3;
        int n = 10000, L = 12;
        Rng rng(2718);
        std::vector<double> eps(n + 1), v(n);
        for (double& e : eps) e = rng.next_normal();
        for (int t = 0; t < n; ++t) v[t] = eps[t + 1] + theta * eps[t];
        double lrv_true = (1.0 + theta) * (1.0 + theta);
        double se_true = std::sqrt(lrv_true / n);
        CHECK(hac_se(v, L) == doctest::Approx(se_true).epsilon(0.05));
    }

    SUBCASE("series must be longer than the lag count") {
        std::vector<double> v{1.0, 2.0};
        CHECK_THROWS_AS(hac_se(v, 2), JobError);
        CHECK_THROWS_AS(hac_se(v, -1), ConfigError);
    }

    SUBCASE("automatic bandwidth rule") {
        CHECK(newey_west_auto_bandwidth(100) == 4);
        CHECK(newey_west_auto_bandwidth(288) == 5);
    }
}

TEST_CASE("tier thresholds") {
    CHECK(tier_for(0.0, 1.0) == Tier::light);
    CHECK(tier_for(1.27, 1.0) == Tier::light);
    CHECK(tier_for(1.28, 1.0) == Tier::medium);
    CHECK(tier_for(1.5, 1.0) == Tier::medium);
    CHECK(tier_for(-1.5, 1.0) == Tier::medium);
    CHECK(tier_for(1.65, 1.0) == Tier::dark);
    CHECK(tier_for(-9.0, 1.0) == Tier::dark);
    CHECK(tier_for(0.0, 0.0) == Tier::light); // 0/0 treated as no evidence
    CHECK(tier_for(1.0, 0.0) == Tier::dark);
}

namespace {

ForecastSeries shifted_naive(const SupervisedDataset& ds, const SplitSpec& split, double tau,
                             double shift) {
    ForecastSeries fs = naive_forecast(ds, split, tau);
    for (auto& p : fs.points) p.prediction += shift;
    return fs;
}

} // namespace

TEST_CASE("loss tables") {
    auto ds = synthetic::ar1_dgp(60, 0.6, 1, 2024);
    SplitSpec split = synthetic::make_split(30, 15, 14);
    std::vector<double> rows{0.0, 0.5, 1.0};
    std::vector<double> taus{0.25, 0.75};

    ForecastSeries good25 = shifted_naive(ds, split, 0.25, 0.0);
    ForecastSeries good75 = shifted_naive(ds, split, 0.75, 0.0);
    ForecastSeries bad25 = shifted_naive(ds, split, 0.25, 2.5);
    ForecastSeries bad75 = shifted_naive(ds, split, 0.75, 2.5);

    CellForecasts cells(rows.size(), std::vector<const ForecastSeries*>(taus.size(), nullptr));
    cells[1][0] = &good25;
    cells[1][1] = &good75;
    cells[2][0] = &bad25; // row 1.0, hole at [2][1]

    LossTable table = build_table(ds, split, Segment::test, rows, taus, cells, 0);

    SUBCASE("row 0.0 cells are identically zero") {
        for (const auto& cell : table.cells[0]) {
            CHECK(cell.present);
            CHECK(cell.mean_diff == 0.0);
            CHECK(cell.se == 0.0);
            CHECK(cell.tier == Tier::light);
        }
    }

    SUBCASE("model identical to naive scores zero; worse model positive") {
        CHECK(table.cells[1][0].mean_diff == doctest::Approx(0.0));
        CHECK(table.cells[2][0].mean_diff > 0.0);
        CHECK_FALSE(table.cells[2][0].outperform);
    }

    SUBCASE("holes are marked, table still emitted") {
        CHECK_FALSE(table.cells[2][1].present);
        std::ostringstream csv;
        write_table_csv(csv, table);
        CHECK(csv.str().find("hole") != std::string::npos);
        std::string json = table_to_json(table);
        CHECK(json.find("null") != std::string::npos);
        CHECK(json.find("\"segment\":\"test\"") != std::string::npos);
    }

    SUBCASE("naive row is invariant to the model set") {
        CellForecasts other(rows.size(), std::vector<const ForecastSeries*>(taus.size(), nullptr));
        other[1][0] = &bad25;
        other[1][1] = &bad75;
        other[2][0] = &good25;
        LossTable table2 = build_table(ds, split, Segment::test, rows, taus, other, 0);
        for (size_t c = 0; c < taus.size(); ++c) {
            CHECK(table.naive_row[c] == table2.naive_row[c]);
        }
        LossTable val = build_table(ds, split, Segment::validation, rows, taus, cells, 0);
        CHECK(val.naive_row[0] != table.naive_row[0]); // different segment, different losses
    }
}

TEST_CASE("fan chart assembly and monotonization") {
    auto ds = synthetic::ar1_dgp(40, 0.5, 1, 7);
    SplitSpec split = synthetic::make_split(20, 10, 9);
    ForecastSeries lo = shifted_naive(ds, split, 0.25, 1.0);  // deliberately crossed
    ForecastSeries hi = shifted_naive(ds, split, 0.75, -1.0);

    std::vector<const ForecastSeries*> per_q{&lo, &hi};
    FanChart raw = build_fanchart({0.25, 0.75}, per_q, false);
    bool crossed = false;
    for (const auto& row : raw.predictions) crossed = crossed || row[0] > row[1];
    CHECK(crossed);

    FanChart sorted = build_fanchart({0.25, 0.75}, per_q, true);
    for (const auto& row : sorted.predictions) CHECK(row[0] <= row[1]);

    std::ostringstream csv;
    write_fanchart_csv(csv, sorted);
    CHECK(csv.str().find("origin,segment,realized,q0.25,q0.75") == 0);
}
