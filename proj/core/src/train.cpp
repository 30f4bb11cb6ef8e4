#include "macroq/train.hpp"

#include "macroq/errors.hpp"
#include "macroq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace macroq {

Optimizer parse_optimizer(const std::string& name) {
    if (name == "sgd") return Optimizer::sgd;
    if (name == "sgd-momentum") return Optimizer::sgd_momentum;
    if (name == "adam-like") return Optimizer::adam_like;
    throw ConfigError("unknown optimizer '" + name + "'");
}

std::string optimizer_name(Optimizer o) {
    switch (o) {
        case Optimizer::sgd: return "sgd";
        case Optimizer::sgd_momentum: return "sgd-momentum";
        case Optimizer::adam_like: return "adam-like";
    }
    return "?";
}

TrainConfig TrainConfig::defaults_for(int depth) {
    TrainConfig c;
    if (depth >= 1) {
        c.optimizer = Optimizer::adam_like;
        c.batch_size = 64;
    }
    return c;
}

void TrainConfig::validate() const {
    if (epochs_initial <= 0 || epochs_subsequent <= 0) throw ConfigError("epoch counts must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size < 0) throw ConfigError("batch size must be positive (or 0 for full batch)");
}

std::string segment_name(Segment s) {
    switch (s) {
        case Segment::validation: return "validation";
        case Segment::test: return "test";
        case Segment::insample: return "insample";
    }
    return "?";
}

std::vector<double> ForecastSeries::predictions(Segment s) const {
    std::vector<double> out;
    for (const auto& p : points)
        if (p.segment == s) out.push_back(p.prediction);
    return out;
}

std::vector<double> ForecastSeries::realizations(Segment s) const {
    std::vector<double> out;
    for (const auto& p : points)
        if (p.segment == s) out.push_back(p.realization);
    return out;
}

int ForecastSeries::count(Segment s) const {
    int n = 0;
    for (const auto& p : points) n += p.segment == s ? 1 : 0;
    return n;
}

namespace {

struct MomentState {
    ParamSet m;
    ParamSet v;
    long steps = 0;
};

struct StepContext {
    const TrainConfig* cfg;
    double lambda = 0.0;
    double lr = 0.0;
    MomentState* moments = nullptr;
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kMomentum = 0.9;

/// One optimizer step from the accumulated data gradient. The quadratic
/// penalty enters either through the gradient or as the exact proximal
/// shrinkage factor applied after the data move.
void apply_step(ParamSet& params, ParamSet& grad, StepContext& ctx) {
    const TrainConfig& cfg = *ctx.cfg;
    const double lr = ctx.lr;

    if (cfg.penalty_mode == PenaltyMode::gradient && ctx.lambda > 0.0) {
        double two_lambda = 2.0 * ctx.lambda;
        auto add_penalty = [&](double* g, const double* p, std::size_t n, bool penalized) {
            if (!penalized) return;
            for (std::size_t i = 0; i < n; ++i) g[i] += two_lambda * p[i];
        };
        for (size_t i = 0; i < grad.weights.size(); ++i)
            add_penalty(grad.weights[i].data(), params.weights[i].data(),
                        static_cast<std::size_t>(grad.weights[i].size()), true);
        add_penalty(grad.output_weights.data(), params.output_weights.data(),
                    static_cast<std::size_t>(grad.output_weights.size()), true);
        if (cfg.penalize_biases) {
            for (size_t i = 0; i < grad.biases.size(); ++i)
                add_penalty(grad.biases[i].data(), params.biases[i].data(),
                            static_cast<std::size_t>(grad.biases[i].size()), true);
        }
    }

    auto walk = [&](auto&& fn) {
        for (size_t i = 0; i < params.weights.size(); ++i)
            fn(params.weights[i].data(), grad.weights[i].data(),
               ctx.moments ? ctx.moments->m.weights[i].data() : nullptr,
               ctx.moments ? ctx.moments->v.weights[i].data() : nullptr,
               static_cast<std::size_t>(params.weights[i].size()));
        for (size_t i = 0; i < params.biases.size(); ++i)
            fn(params.biases[i].data(), grad.biases[i].data(),
               ctx.moments ? ctx.moments->m.biases[i].data() : nullptr,
               ctx.moments ? ctx.moments->v.biases[i].data() : nullptr,
               static_cast<std::size_t>(params.biases[i].size()));
        fn(params.output_weights.data(), grad.output_weights.data(),
           ctx.moments ? ctx.moments->m.output_weights.data() : nullptr,
           ctx.moments ? ctx.moments->v.output_weights.data() : nullptr,
           static_cast<std::size_t>(params.output_weights.size()));
        fn(&params.intercept, &grad.intercept,
           ctx.moments ? &ctx.moments->m.intercept : nullptr,
           ctx.moments ? &ctx.moments->v.intercept : nullptr, std::size_t{1});
    };

    switch (cfg.optimizer) {
        case Optimizer::sgd:
            walk([&](double* p, const double* g, double*, double*, std::size_t n) {
                for (std::size_t i = 0; i < n; ++i) p[i] -= lr * g[i];
            });
            break;
        case Optimizer::sgd_momentum:
            walk([&](double* p, const double* g, double* m, double*, std::size_t n) {
                for (std::size_t i = 0; i < n; ++i) {
                    m[i] = kMomentum * m[i] + g[i];
                    p[i] -= lr * m[i];
                }
            });
            break;
        case Optimizer::adam_like: {
            ctx.moments->steps += 1;
            double b1t = 1.0 - std::pow(kAdamBeta1, static_cast<double>(ctx.moments->steps));
            double b2t = 1.0 - std::pow(kAdamBeta2, static_cast<double>(ctx.moments->steps));
            walk([&](double* p, const double* g, double* m, double* v, std::size_t n) {
                for (std::size_t i = 0; i < n; ++i) {
                    m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
                    v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
                    p[i] -= lr * (m[i] / b1t) / (std::sqrt(v[i] / b2t) + kAdamEps);
                }
            });
            break;
        }
    }

    if (cfg.penalty_mode == PenaltyMode::prox && ctx.lambda > 0.0) {
        double factor = 1.0 / (1.0 + 2.0 * lr * ctx.lambda);
        for (auto& w : params.weights) w *= factor;
        params.output_weights *= factor;
        if (cfg.penalize_biases) {
            for (auto& b : params.biases) b *= factor;
        }
    }
}

} // namespace

Checkpoint fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
               const Architecture& arch, double lambda, const LossSpec& loss,
               const TrainConfig& config, std::uint64_t shuffle_stream,
               const Checkpoint* warm_start) {
    config.validate();
    loss.validate();
    arch.validate();
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    const int n = static_cast<int>(features.rows());
    if (n == 0) throw JobError("fit: empty training window");
    if (features.cols() != arch.input_dim) throw JobError("fit: feature width does not match architecture");
    if (warm_start && !warm_start->params.shape_matches(arch)) {
        throw JobError("fit: warm start parameters do not match architecture");
    }

    const int epochs = warm_start ? config.epochs_subsequent : config.epochs_initial;
    const int batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);

    ParamSet start = warm_start ? warm_start->params
                                : init_params(arch, derive_stream(shuffle_stream, 0x1217));

    auto objective_of = [&](const ParamSet& p) {
        return objective(features, targets, arch, p, loss, lambda, config.penalize_biases);
    };

    double lr0 = config.learning_rate;
    int retries = 0;
    Checkpoint out;
    out.arch = arch;
    out.lambda = lambda;
    out.loss = loss;

    while (true) {
        ParamSet params = start;
        ParamSet grad = ParamSet::zeros(arch);
        MomentState moments;
        if (config.optimizer != Optimizer::sgd) {
            moments.m = ParamSet::zeros(arch);
            moments.v = ParamSet::zeros(arch);
        }
        StepContext ctx{&config, lambda, lr0, config.optimizer == Optimizer::sgd ? nullptr : &moments};

        double initial = objective_of(params);
        if (!std::isfinite(initial)) throw JobError("fit: objective non-finite at initialization");
        double best = initial;
        ParamSet best_params = params;
        double guard = 10.0 * std::max(initial, 1e-8);

        Rng shuffle_rng(derive_stream(shuffle_stream, 0x51AF + static_cast<std::uint64_t>(retries)));
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);

        ForwardWorkspace ws;
        bool diverged = false;
        for (int epoch = 0; epoch < epochs && !diverged; ++epoch) {
            double lr = lr0;
            if (config.lr_decay == LrDecay::inv_sqrt) lr = lr0 / std::sqrt(1.0 + epoch);
            ctx.lr = lr;

            if (batch < n) shuffle_rng.shuffle(order);
            for (int begin = 0; begin < n; begin += batch) {
                int end = std::min(begin + batch, n);
                grad.set_zero();
                for (int idx = begin; idx < end; ++idx) {
                    int row = order[idx];
                    double pred = forward(arch, params, features.row(row).transpose(), ws);
                    double up = loss_grad(loss, targets(row), pred);
                    backward_accumulate(arch, params, features.row(row).transpose(), ws, up, grad);
                }
                double inv = 1.0 / static_cast<double>(end - begin);
                for (auto& w : grad.weights) w *= inv;
                for (auto& b : grad.biases) b *= inv;
                grad.output_weights *= inv;
                grad.intercept *= inv;
                apply_step(params, grad, ctx);
            }

            double obj = objective_of(params);
            if (!std::isfinite(obj) || obj > guard) {
                diverged = true;
                break;
            }
            if (obj < best) {
                best = obj;
                best_params = params;
            }
        }

        if (!diverged) {
            out.params = std::move(best_params);
            out.final_objective = best;
            out.epoch_count = epochs;
            return out;
        }
        if (++retries > 3) {
            throw JobError("fit: objective diverged after 3 learning-rate halvings (lr reached " +
                           std::to_string(lr0) + "); learning rate too high");
        }
        lr0 *= 0.5;
    }
}

ForecastSeries recursive_forecast(const SupervisedDataset& ds, const SplitSpec& split,
                                  const Architecture& arch, double lambda, const LossSpec& loss,
                                  const TrainConfig& config, const std::string& job_key,
                                  const CheckpointHook& hook) {
    auto windows = expanding_windows(ds, split);
    std::uint64_t job_stream = derive_stream(config.seed, fnv1a(job_key));

    ForecastSeries out;
    out.horizon = split.horizon;
    out.points.reserve(windows.size());

    Checkpoint previous;
    bool have_previous = false;

    for (const auto& w : windows) {
        MonthDate train_end = w.origin.plus_months(-split.horizon);
        Scaler scaler = fit_scaler(ds, train_end);
        Eigen::MatrixXd X = scaler.apply_rows(ds.features.topRows(w.train_rows));
        Eigen::VectorXd y = ds.targets.head(w.train_rows);

        std::uint64_t origin_stream =
            derive_stream(job_stream, static_cast<std::uint64_t>(w.origin.index()));

        Checkpoint ck;
        try {
            ck = fit(X, y, arch, lambda, loss, config, origin_stream,
                     have_previous ? &previous : nullptr);
        } catch (const JobError& e) {
            throw JobError("origin " + w.origin.str() + ": " + e.what());
        }
        ck.origin = w.origin;
        ck.scaler = scaler;

        int row = *ds.row_for(w.origin);
        Eigen::VectorXd x = scaler.apply(ds.features.row(row).transpose());
        ForecastPoint p;
        p.origin = w.origin;
        p.prediction = forward(arch, ck.params, x);
        p.realization = ds.targets(row);
        p.segment = w.is_validation ? Segment::validation : Segment::test;
        out.points.push_back(p);

        if (hook) hook(ck);
        previous = std::move(ck);
        have_previous = true;
    }
    return out;
}

ForecastSeries fitted_insample(const Checkpoint& ck, const SupervisedDataset& ds) {
    MonthDate train_end = ck.origin.plus_months(-ds.horizon);
    int n = ds.rows_through(train_end);
    if (n == 0) throw JobError("fitted_insample: checkpoint window has no rows");

    ForecastSeries out;
    out.horizon = ds.horizon;
    out.points.reserve(n);
    ForwardWorkspace ws;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd x = ck.scaler.apply(ds.features.row(i).transpose());
        ForecastPoint p;
        p.origin = ds.origins[i];
        p.prediction = forward(ck.arch, ck.params, x, ws);
        p.realization = ds.targets(i);
        p.segment = Segment::insample;
        out.points.push_back(p);
    }
    return out;
}

namespace {

void write_doubles_line(std::ostream& out, const char* tag, const double* data, std::size_t n) {
    out << tag << " " << n << "\n";
    char buf[40];
    for (std::size_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", data[i]);
        out << buf << (i + 1 == n ? "" : " ");
    }
    out << "\n";
}

} // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ck) {
    out << "checkpoint v1\n";
    out << "origin " << ck.origin.str() << "\n";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", ck.lambda);
    out << "lambda " << buf << "\n";
    out << "loss " << (ck.loss.kind == LossKind::mse ? "mse" : "pinball") << " ";
    std::snprintf(buf, sizeof(buf), "%.17g", ck.loss.tau);
    out << buf << "\n";
    out << "epochs " << ck.epoch_count << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", ck.final_objective);
    out << "objective " << buf << "\n";
    write_doubles_line(out, "scaler_mean", ck.scaler.mean.data(), static_cast<std::size_t>(ck.scaler.mean.size()));
    write_doubles_line(out, "scaler_sd", ck.scaler.sd.data(), static_cast<std::size_t>(ck.scaler.sd.size()));
    out << "scaler_active " << ck.scaler.active.size() << "\n";
    for (std::size_t i = 0; i < ck.scaler.active.size(); ++i) {
        out << int(ck.scaler.active[i]) << (i + 1 == ck.scaler.active.size() ? "" : " ");
    }
    out << "\n";
    save_params(out, ck.arch, ck.params);
}

Checkpoint load_checkpoint(std::istream& in) {
    auto expect = [&](const std::string& want) {
        std::string got;
        if (!(in >> got) || got != want) {
            throw DataError("checkpoint parse: expected '" + want + "', got '" + got + "'");
        }
    };
    Checkpoint ck;
    expect("checkpoint");
    expect("v1");
    expect("origin");
    std::string date;
    in >> date;
    ck.origin = parse_month(date);
    expect("lambda");
    in >> ck.lambda;
    expect("loss");
    std::string kind;
    in >> kind >> ck.loss.tau;
    ck.loss.kind = kind == "mse" ? LossKind::mse : LossKind::pinball;
    expect("epochs");
    in >> ck.epoch_count;
    expect("objective");
    in >> ck.final_objective;

    auto read_vec = [&](const std::string& tag, Eigen::VectorXd& v) {
        expect(tag);
        std::size_t n = 0;
        in >> n;
        v.resize(static_cast<int>(n));
        for (std::size_t i = 0; i < n; ++i)
            if (!(in >> v(static_cast<int>(i)))) throw DataError("checkpoint parse: truncated " + tag);
    };
    read_vec("scaler_mean", ck.scaler.mean);
    read_vec("scaler_sd", ck.scaler.sd);
    expect("scaler_active");
    std::size_t n = 0;
    in >> n;
    ck.scaler.active.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        int a = 0;
        if (!(in >> a)) throw DataError("checkpoint parse: truncated scaler_active");
        ck.scaler.active[i] = static_cast<std::uint8_t>(a);
    }
    load_params(in, ck.arch, ck.params);
    if (!in) throw DataError("checkpoint parse: truncated file");
    return ck;
}

} // namespace macroq
