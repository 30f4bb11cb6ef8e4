#pragma once

#include "macroq/dataset.hpp"
#include "macroq/loss.hpp"
#include "macroq/net.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace macroq {

enum class Optimizer { sgd, sgd_momentum, adam_like };
enum class LrDecay { none, inv_sqrt };
enum class PenaltyMode { prox, gradient };

Optimizer parse_optimizer(const std::string& name);
std::string optimizer_name(Optimizer o);

struct TrainConfig {
    int epochs_initial = 500;
    int epochs_subsequent = 100;
    double learning_rate = 0.01;
    int batch_size = 0; // 0 = full batch
    std::uint64_t seed = 20240101;
    Optimizer optimizer = Optimizer::sgd;
    LrDecay lr_decay = LrDecay::none;
    // Under prox mode the quadratic penalty is applied as an implicit
    // shrinkage step w <- w / (1 + 2 lr lambda), stable for any lambda;
    // gradient mode folds 2*lambda*w into the step instead.
    PenaltyMode penalty_mode = PenaltyMode::prox;
    bool penalize_biases = false;

    /// Baseline choices: plain full-batch descent for the affine model,
    /// minibatch adaptive-moment updates once hidden layers are present.
    static TrainConfig defaults_for(int depth);
    void validate() const;
};

struct Checkpoint {
    ParamSet params;
    Architecture arch;
    double lambda = 0.0;
    LossSpec loss;
    MonthDate origin;
    int epoch_count = 0;
    double final_objective = 0.0;
    Scaler scaler;
};

void save_checkpoint(std::ostream& out, const Checkpoint& ck);
Checkpoint load_checkpoint(std::istream& in);

/// Trains theta on a standardized window by (proximal) stochastic gradient
/// descent. Runs epochs_initial epochs from a fresh seeded init, or
/// epochs_subsequent when warm-started. The returned parameters are the best
/// full-objective iterate seen, so a warm start can never end worse than it
/// began. If the objective explodes past 10x its initial value the step is
/// restarted with a halved learning rate (3 retries, then JobError).
Checkpoint fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
               const Architecture& arch, double lambda, const LossSpec& loss,
               const TrainConfig& config, std::uint64_t shuffle_stream,
               const Checkpoint* warm_start);

enum class Segment { validation, test, insample };
std::string segment_name(Segment s);

struct ForecastPoint {
    MonthDate origin;
    double prediction = 0.0;
    double realization = 0.0;
    Segment segment = Segment::validation;
};

struct ForecastSeries {
    int horizon = 1;
    std::vector<ForecastPoint> points;

    std::vector<double> predictions(Segment s) const;
    std::vector<double> realizations(Segment s) const;
    int count(Segment s) const;
};

/// Called after each origin's refit; used for per-origin checkpoint files.
using CheckpointHook = std::function<void(const Checkpoint&)>;

/// Expanding-window recursion: one re-standardized, warm-started refit and
/// one out-of-sample prediction per origin from t1 through t3-h. The
/// shuffle stream for each origin is derived from (config.seed, job key,
/// origin), so results are independent of scheduling order.
ForecastSeries recursive_forecast(const SupervisedDataset& ds, const SplitSpec& split,
                                  const Architecture& arch, double lambda, const LossSpec& loss,
                                  const TrainConfig& config, const std::string& job_key = "",
                                  const CheckpointHook& hook = {});

/// In-sample fitted values of a checkpoint over its own training window:
/// forward passes at every origin with target date <= checkpoint origin.
ForecastSeries fitted_insample(const Checkpoint& ck, const SupervisedDataset& ds);

} // namespace macroq
