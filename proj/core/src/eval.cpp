#include "macroq/eval.hpp"

#include "macroq/errors.hpp"
#include "macroq/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace macroq {

double naive_quantile(std::span<const double> history, double tau) {
    if (history.empty()) throw JobError("naive_quantile: empty history");
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("naive_quantile: tau outside (0,1)");
    std::vector<double> sorted(history.begin(), history.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    auto k = static_cast<std::size_t>(std::ceil(tau * n - 1e-9));
    if (k < 1) k = 1;
    if (k > sorted.size()) k = sorted.size();
    return sorted[k - 1];
}

ForecastSeries naive_forecast(const SupervisedDataset& ds, const SplitSpec& split, double tau) {
    auto windows = expanding_windows(ds, split);
    ForecastSeries out;
    out.horizon = split.horizon;
    out.points.reserve(windows.size());
    for (const auto& w : windows) {
        std::span<const double> history(ds.targets.data(), static_cast<std::size_t>(w.train_rows));
        int row = *ds.row_for(w.origin);
        ForecastPoint p;
        p.origin = w.origin;
        p.prediction = naive_quantile(history, tau);
        p.realization = ds.targets(row);
        p.segment = w.is_validation ? Segment::validation : Segment::test;
        out.points.push_back(p);
    }
    return out;
}

double normalized_mean_loss(std::span<const double> predictions, std::span<const double> realizations,
                            double tau, double scale) {
    if (predictions.size() != realizations.size()) throw JobError("normalized_mean_loss: length mismatch");
    if (predictions.empty()) throw JobError("normalized_mean_loss: empty series");
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        total += pinball(realizations[i], predictions[i], tau);
    }
    return scale * (total / static_cast<double>(predictions.size())) / (tau * (1.0 - tau));
}

std::vector<double> loss_differential(std::span<const double> model, std::span<const double> naive,
                                      std::span<const double> realizations, double tau, double scale) {
    if (model.size() != naive.size() || model.size() != realizations.size()) {
        throw JobError("loss_differential: series are not aligned");
    }
    std::vector<double> out(model.size());
    double norm = scale / (tau * (1.0 - tau));
    for (std::size_t i = 0; i < model.size(); ++i) {
        out[i] = (pinball(realizations[i], model[i], tau) - pinball(realizations[i], naive[i], tau)) * norm;
    }
    return out;
}

double hac_se(std::span<const double> series, int lags) {
    const int n = static_cast<int>(series.size());
    if (lags < 0) throw ConfigError("hac_se: negative lag count");
    if (n <= lags) throw JobError("hac_se: series length must exceed the lag count");

    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= n;

    auto gamma = [&](int lag) {
        double acc = 0.0;
        for (int t = lag; t < n; ++t) acc += (series[t] - mean) * (series[t - lag] - mean);
        return acc / n;
    };

    double lrv = gamma(0);
    for (int l = 1; l <= lags; ++l) {
        double w = 1.0 - static_cast<double>(l) / (lags + 1);
        lrv += 2.0 * w * gamma(l);
    }
    if (lrv < 0.0) lrv = 0.0; // cannot happen with Bartlett weights; guarded anyway
    return std::sqrt(lrv / n);
}

int newey_west_auto_bandwidth(int n) {
    if (n <= 0) return 0;
    return static_cast<int>(std::floor(4.0 * std::pow(n / 100.0, 2.0 / 9.0)));
}

Tier tier_for(double mean_diff, double se) {
    double ratio;
    if (se > 0.0) {
        ratio = std::abs(mean_diff) / se;
    } else {
        ratio = mean_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    if (ratio < 1.28) return Tier::light;
    if (ratio < 1.65) return Tier::medium;
    return Tier::dark;
}

std::string tier_name(Tier t) {
    switch (t) {
        case Tier::light: return "light";
        case Tier::medium: return "medium";
        case Tier::dark: return "dark";
    }
    return "?";
}

namespace {

struct SegmentSlice {
    std::vector<double> predictions;
    std::vector<double> realizations;
};

SegmentSlice slice(const ForecastSeries& fs, Segment seg) {
    SegmentSlice s;
    for (const auto& p : fs.points) {
        if (p.segment != seg) continue;
        s.predictions.push_back(p.prediction);
        s.realizations.push_back(p.realization);
    }
    return s;
}

} // namespace

LossTable build_table(const SupervisedDataset& ds, const SplitSpec& split, Segment segment,
                      const std::vector<double>& complexity_rows, const std::vector<double>& quantiles,
                      const CellForecasts& forecasts, int hac_lags, double scale) {
    if (complexity_rows.empty() || complexity_rows.front() != 0.0) {
        throw ConfigError("build_table: complexity rows must start at 0.0 (the naive row)");
    }
    if (forecasts.size() != complexity_rows.size()) {
        throw JobError("build_table: expected one forecast row per complexity row");
    }

    LossTable table;
    table.segment = segment_name(segment);
    table.rows = complexity_rows;
    table.quantiles = quantiles;

    std::vector<SegmentSlice> naive_slices;
    for (double tau : quantiles) {
        ForecastSeries nf = naive_forecast(ds, split, tau);
        SegmentSlice s = slice(nf, segment);
        if (s.predictions.empty()) throw JobError("build_table: naive forecasts empty for segment");
        table.naive_row.push_back(normalized_mean_loss(s.predictions, s.realizations, tau, scale));
        naive_slices.push_back(std::move(s));
    }

    for (std::size_t r = 0; r < complexity_rows.size(); ++r) {
        std::vector<EvalCell> row;
        for (std::size_t c = 0; c < quantiles.size(); ++c) {
            EvalCell cell;
            if (r == 0) {
                // naive compared with itself, identically zero by definition
                cell = EvalCell{0.0, 0.0, Tier::light, false, true};
            } else if (const ForecastSeries* fs = forecasts[r][c]; fs != nullptr) {
                const auto& naive = naive_slices[c];
                SegmentSlice m = slice(*fs, segment);
                if (m.predictions.size() != naive.predictions.size()) {
                    throw JobError("build_table: model/naive forecast misalignment");
                }
                auto d = loss_differential(m.predictions, naive.predictions, naive.realizations,
                                           quantiles[c], scale);
                double mean = 0.0;
                for (double v : d) mean += v;
                mean /= static_cast<double>(d.size());
                double se = hac_se(d, std::min<int>(hac_lags, static_cast<int>(d.size()) - 1));
                cell = EvalCell{mean, se, tier_for(mean, se), mean < 0.0, true};
            }
            row.push_back(cell);
        }
        table.cells.push_back(std::move(row));
    }
    return table;
}

void write_table_csv(std::ostream& out, const LossTable& table) {
    out << "complexity";
    char buf[64];
    for (double tau : table.quantiles) {
        std::snprintf(buf, sizeof(buf), ",q%.2f_diff,q%.2f_se,q%.2f_tier", tau, tau, tau);
        out << buf;
    }
    out << "\n";

    out << "0";
    for (std::size_t c = 0; c < table.quantiles.size(); ++c) {
        std::snprintf(buf, sizeof(buf), ",%.17g,,naive", table.naive_row[c]);
        out << buf;
    }
    out << "\n";

    for (std::size_t r = 1; r < table.rows.size(); ++r) {
        std::snprintf(buf, sizeof(buf), "%.1f", table.rows[r]);
        out << buf;
        for (const auto& cell : table.cells[r]) {
            if (!cell.present) {
                out << ",,,hole";
                continue;
            }
            std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%s", cell.mean_diff, cell.se,
                          tier_name(cell.tier).c_str());
            out << buf;
        }
        out << "\n";
    }
}

std::string table_to_json(const LossTable& table) {
    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "{\"segment\":\"" << table.segment << "\",\"quantiles\":[";
    for (std::size_t i = 0; i < table.quantiles.size(); ++i)
        out << (i ? "," : "") << num(table.quantiles[i]);
    out << "],\"naive_row\":[";
    for (std::size_t i = 0; i < table.naive_row.size(); ++i)
        out << (i ? "," : "") << num(table.naive_row[i]);
    out << "],\"rows\":[";
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        out << (r ? "," : "") << "{\"complexity\":" << num(table.rows[r]) << ",\"cells\":[";
        for (std::size_t c = 0; c < table.cells[r].size(); ++c) {
            const auto& cell = table.cells[r][c];
            out << (c ? "," : "");
            if (!cell.present) {
                out << "null";
            } else {
                out << "{\"diff\":" << num(cell.mean_diff) << ",\"se\":" << num(cell.se)
                    << ",\"tier\":\"" << tier_name(cell.tier) << "\",\"sign\":\""
                    << (cell.outperform ? "outperform" : "underperform") << "\"}";
            }
        }
        out << "]}";
    }
    out << "]}";
    return out.str();
}

FanChart build_fanchart(const std::vector<double>& quantiles,
                        const std::vector<const ForecastSeries*>& per_quantile, bool sort_quantiles) {
    if (quantiles.size() != per_quantile.size()) throw JobError("build_fanchart: quantile/forecast mismatch");
    if (quantiles.empty()) throw ConfigError("build_fanchart: no quantiles");
    for (const auto* fs : per_quantile)
        if (!fs) throw JobError("build_fanchart: missing forecast series");

    const auto& base = per_quantile.front()->points;
    FanChart chart;
    chart.quantiles = quantiles;
    for (std::size_t i = 0; i < base.size(); ++i) {
        std::vector<double> row;
        for (const auto* fs : per_quantile) {
            if (fs->points.size() != base.size() || !(fs->points[i].origin == base[i].origin)) {
                throw JobError("build_fanchart: forecast series are not aligned by origin");
            }
            row.push_back(fs->points[i].prediction);
        }
        if (sort_quantiles) std::sort(row.begin(), row.end());
        chart.origins.push_back(base[i].origin);
        chart.realized.push_back(base[i].realization);
        chart.segments.push_back(base[i].segment);
        chart.predictions.push_back(std::move(row));
    }
    return chart;
}

void write_fanchart_csv(std::ostream& out, const FanChart& chart) {
    out << "origin,segment,realized";
    char buf[64];
    for (double tau : chart.quantiles) {
        std::snprintf(buf, sizeof(buf), ",q%.2f", tau);
        out << buf;
    }
    out << "\n";
    for (std::size_t i = 0; i < chart.origins.size(); ++i) {
        out << chart.origins[i].str() << "," << segment_name(chart.segments[i]);
        std::snprintf(buf, sizeof(buf), ",%.17g", chart.realized[i]);
        out << buf;
        for (double v : chart.predictions[i]) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            out << buf;
        }
        out << "\n";
    }
}

} // namespace macroq
