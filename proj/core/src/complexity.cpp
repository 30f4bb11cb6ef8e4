#include "macroq/complexity.hpp"

#include "macroq/errors.hpp"
#include "macroq/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

namespace macroq {

double forecast_variance(std::span<const double> fitted) {
    if (fitted.empty()) throw JobError("forecast_variance: empty series");
    auto [lo, hi] = std::minmax_element(fitted.begin(), fitted.end());
    if (*lo == *hi) return 0.0; // constant series, exactly
    double mean = 0.0;
    for (double v : fitted) mean += v;
    mean /= static_cast<double>(fitted.size());
    double ss = 0.0;
    for (double v : fitted) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(fitted.size());
}

std::vector<double> complexity_lambda_grid() {
    std::vector<double> out{0.0};
    for (int i = 0; i <= 50; ++i) out.push_back(std::pow(10.0, -3.0 + 0.1 * i));
    return out;
}

std::vector<double> complexity_grid() {
    std::vector<double> out;
    for (int i = 0; i <= 10; ++i) out.push_back(0.1 * i);
    return out;
}

namespace {

int richest_candidate(const std::vector<CandidateSpec>& candidates) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
        if (candidates[i].lambda != 0.0) continue;
        if (best < 0) {
            best = i;
            continue;
        }
        const auto& a = candidates[i].arch;
        const auto& b = candidates[best].arch;
        if (a.param_count() > b.param_count() ||
            (a.param_count() == b.param_count() && a.depth > b.depth)) {
            best = i;
        }
    }
    return best;
}

} // namespace

std::vector<ComplexityRecord> complexity_index(const std::vector<CandidateSpec>& candidates,
                                               const SupervisedDataset& ds, const SplitSpec& split,
                                               const LossSpec& loss, const TrainConfig& config,
                                               int jobs, std::vector<std::string>* log) {
    if (candidates.empty()) throw ConfigError("complexity_index: empty candidate set");
    split.validate_against(ds);

    MonthDate train_end = split.t1.plus_months(-split.horizon);
    int n = ds.rows_through(train_end);
    if (n < 2) throw DataError("complexity_index: initial window through " + split.t1.str() + " too short");

    Scaler scaler = fit_scaler(ds, train_end);
    Eigen::MatrixXd X = scaler.apply_rows(ds.features.topRows(n));
    Eigen::VectorXd y = ds.targets.head(n);

    std::vector<ComplexityRecord> records(candidates.size());
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (true) {
            int i = next.fetch_add(1);
            if (i >= static_cast<int>(candidates.size()) || failed.load()) break;
            const auto& cand = candidates[i];
            try {
                std::string key = "cpx/" + cand.arch.label() + "/" + std::to_string(cand.lambda) + "/" +
                                  loss.label();
                std::uint64_t stream = derive_stream(config.seed, fnv1a(key));
                Checkpoint ck = fit(X, y, cand.arch, cand.lambda, loss, config,
                                    derive_stream(stream, static_cast<std::uint64_t>(split.t1.index())),
                                    nullptr);
                ck.origin = split.t1;
                ck.scaler = scaler;
                ForecastSeries fitted = fitted_insample(ck, ds);
                auto preds = fitted.predictions(Segment::insample);
                records[i] = ComplexityRecord{cand.arch, cand.lambda, forecast_variance(preds), 0.0};
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> guard(error_mutex);
                if (!failed.exchange(true)) first_error = e.what();
            }
        }
    };

    int workers = std::max(1, std::min<int>(jobs, static_cast<int>(candidates.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw JobError("complexity_index: " + first_error);

    int ref = richest_candidate(candidates);
    if (ref < 0) throw ConfigError("complexity_index: candidate set lacks an unpenalized (lambda=0) entry");
    double var0_max = records[ref].var0;
    if (!(var0_max > 0.0)) {
        throw ConfigError("complexity_index: Var0 of the reference architecture is zero (degenerate target)");
    }

    if (log) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "complexity reference %s var0_max=%.6g",
                      candidates[ref].arch.label().c_str(), var0_max);
        log->push_back(buf);
        for (size_t i = 0; i < candidates.size(); ++i) {
            if (candidates[i].lambda != 0.0 || static_cast<int>(i) == ref) continue;
            double rel = records[i].var0 / var0_max;
            std::snprintf(buf, sizeof(buf), "unpenalized var0 agreement %s: %.4f of reference%s",
                          candidates[i].arch.label().c_str(), rel,
                          std::abs(rel - 1.0) > 0.10 ? " (outside 10%)" : "");
            log->push_back(buf);
        }
    }

    for (auto& rec : records) {
        double r = rec.var0 / var0_max;
        if (r > 1.0 + 1e-3 && log) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "anomaly: %s lambda=%g has pre-clamp r=%.4f > 1",
                          rec.arch.label().c_str(), rec.lambda, r);
            log->push_back(buf);
        }
        rec.r = std::clamp(r, 0.0, 1.0);
    }
    return records;
}

std::vector<GridAssignment> map_complexity_grid(const std::vector<ComplexityRecord>& records,
                                                const std::vector<double>& grid) {
    if (records.empty()) throw ConfigError("map_complexity_grid: empty record set");

    std::vector<GridAssignment> out;
    out.reserve(grid.size());
    for (double target : grid) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(records.size()); ++i) {
            double di = std::abs(target - records[i].r);
            double db = std::abs(target - records[best].r);
            if (di < db) {
                best = i;
            } else if (di == db) {
                const auto& a = records[i];
                const auto& b = records[best];
                if (a.arch.depth < b.arch.depth ||
                    (a.arch.depth == b.arch.depth && a.lambda > b.lambda)) {
                    best = i;
                }
            }
        }
        out.push_back(GridAssignment{target, best});
    }
    return out;
}

} // namespace macroq
