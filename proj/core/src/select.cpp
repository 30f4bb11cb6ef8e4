#include "macroq/select.hpp"

#include "macroq/errors.hpp"

#include <cmath>
#include <cstdio>

namespace macroq {

std::vector<double> table1_lambda_grid() {
    std::vector<double> out;
    double lo = std::log10(0.2), hi = std::log10(10.0);
    for (int i = 0; i < 40; ++i) out.push_back(std::pow(10.0, lo + (hi - lo) * i / 39.0));
    return out;
}

std::vector<double> standard_quantiles() { return {0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95}; }

HyperGrid HyperGrid::standard() {
    HyperGrid g;
    g.lambdas = table1_lambda_grid();
    g.losses.push_back(LossSpec::mse());
    for (double tau : standard_quantiles()) g.losses.push_back(LossSpec::pinball(tau));
    return g;
}

std::string GridEntry::key() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s/l%.6g", arch.label().c_str(), lambda);
    return buf;
}

std::vector<GridEntry> enumerate_grid(const HyperGrid& grid, int input_dim) {
    std::vector<GridEntry> out;
    const std::vector<double>& lambdas = grid.lambdas;
    for (int depth : grid.depths) {
        if (depth == 0) {
            for (double l : lambdas) out.push_back(GridEntry{Architecture::affine(input_dim), l});
            continue;
        }
        for (int width : grid.widths) {
            for (double alpha : grid.alphas) {
                Architecture arch = Architecture::hidden(input_dim, std::vector<int>(depth, width), alpha);
                for (double l : lambdas) out.push_back(GridEntry{arch, l});
            }
        }
    }
    return out;
}

double validation_score(const ForecastSeries& forecasts, const LossSpec& loss) {
    double total = 0.0;
    int n = 0;
    for (const auto& p : forecasts.points) {
        if (p.segment != Segment::validation) continue;
        total += loss_value(loss, p.realization, p.prediction);
        ++n;
    }
    if (n == 0) throw JobError("validation_score: empty validation segment");
    return total / n;
}

namespace {

bool simpler_than(const GridEntry& a, const GridEntry& b) {
    if (a.arch.depth != b.arch.depth) return a.arch.depth < b.arch.depth;
    return a.lambda > b.lambda;
}

} // namespace

Selection select_hyperparams(const std::vector<GridEntry>& entries,
                             const std::map<std::string, const ForecastSeries*>& forecasts,
                             const LossSpec& loss, std::vector<LedgerRow>* ledger) {
    if (entries.empty()) throw ConfigError("select_hyperparams: empty grid");

    std::string missing;
    int missing_count = 0;
    for (const auto& e : entries) {
        auto it = forecasts.find(e.key());
        if (it == forecasts.end() || it->second == nullptr) {
            missing += (missing_count == 0 ? "" : ", ") + e.key();
            ++missing_count;
        }
    }
    if (missing_count > 0) {
        throw JobError("select_hyperparams: missing results for " + std::to_string(missing_count) +
                       " configuration(s): " + missing);
    }

    bool have_best = false;
    Selection best;
    for (const auto& e : entries) {
        double score = validation_score(*forecasts.at(e.key()), loss);
        if (ledger) ledger->push_back(LedgerRow{e, loss.label(), score, std::nullopt, "ok"});
        if (!have_best || score < best.score ||
            (score == best.score && simpler_than(e, best.entry))) {
            best = Selection{e, score};
            have_best = true;
        }
    }
    return best;
}

ComplexityChoice select_complexity(const std::vector<GridAssignment>& assignments,
                                   const std::vector<ComplexityRecord>& records,
                                   const std::vector<const ForecastSeries*>& forecasts,
                                   const LossSpec& loss, std::vector<LedgerRow>* ledger) {
    if (assignments.empty()) throw ConfigError("select_complexity: empty complexity grid");
    if (forecasts.size() != assignments.size()) {
        throw JobError("select_complexity: expected one forecast series per grid point");
    }

    std::string missing;
    int missing_count = 0;
    for (size_t i = 0; i < assignments.size(); ++i) {
        if (forecasts[i] == nullptr) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "r=%.1f", assignments[i].r_target);
            missing += (missing_count == 0 ? "" : ", ") + std::string(buf);
            ++missing_count;
        }
    }
    if (missing_count > 0) {
        throw JobError("select_complexity: missing results for grid point(s): " + missing);
    }

    bool have_best = false;
    ComplexityChoice best;
    for (size_t i = 0; i < assignments.size(); ++i) {
        const auto& rec = records[assignments[i].record_index];
        double score = validation_score(*forecasts[i], loss);
        if (ledger) {
            ledger->push_back(LedgerRow{GridEntry{rec.arch, rec.lambda}, loss.label(), score,
                                        std::nullopt, "ok"});
        }
        if (!have_best || score < best.score ||
            (score == best.score && assignments[i].r_target < best.r_hat)) {
            best = ComplexityChoice{assignments[i].r_target, static_cast<int>(i), score};
            have_best = true;
        }
    }
    return best;
}

} // namespace macroq
