#include "macroq/loss.hpp"

#include "macroq/errors.hpp"

#include <cmath>
#include <cstdio>

namespace macroq {

LossSpec LossSpec::pinball(double tau) {
    LossSpec s;
    s.kind = LossKind::pinball;
    s.tau = tau;
    s.validate();
    return s;
}

LossSpec LossSpec::mse() {
    LossSpec s;
    s.kind = LossKind::mse;
    return s;
}

void LossSpec::validate() const {
    if (kind == LossKind::pinball && !(tau > 0.0 && tau < 1.0)) {
        throw ConfigError("pinball tau must lie strictly inside (0,1)");
    }
}

std::string LossSpec::label() const {
    if (kind == LossKind::mse) return "mse";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "q%.2f", tau);
    return buf;
}

double pinball(double y, double q, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("pinball tau must lie strictly inside (0,1)");
    double under = y - q;
    return under >= 0.0 ? tau * under : (tau - 1.0) * under;
}

double pinball_grad(double y, double q, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("pinball tau must lie strictly inside (0,1)");
    if (q > y) return 1.0 - tau;
    if (q < y) return -tau;
    return 0.0;
}

double mse(double y, double q) {
    double d = y - q;
    return d * d;
}

double mse_grad(double y, double q) { return 2.0 * (q - y); }

double loss_value(const LossSpec& spec, double y, double q) {
    return spec.kind == LossKind::pinball ? pinball(y, q, spec.tau) : mse(y, q);
}

double loss_grad(const LossSpec& spec, double y, double q) {
    return spec.kind == LossKind::pinball ? pinball_grad(y, q, spec.tau) : mse_grad(y, q);
}

double l2_penalty(const ParamSet& params, double lambda, bool penalize_biases) {
    if (lambda < 0.0) throw ConfigError("l2 penalty lambda must be non-negative");
    double ss = 0.0;
    params.for_each_block([&](const double* data, std::size_t n, bool penalized) {
        if (!penalized && !penalize_biases) return;
        if (!penalized && penalize_biases && n == 1) return; // intercept stays free
        for (std::size_t i = 0; i < n; ++i) ss += data[i] * data[i];
    });
    return lambda * ss;
}

ParamSet l2_penalty_grad(const Architecture& arch, const ParamSet& params, double lambda,
                         bool penalize_biases) {
    if (lambda < 0.0) throw ConfigError("l2 penalty lambda must be non-negative");
    ParamSet grad = ParamSet::zeros(arch);
    for (size_t i = 0; i < params.weights.size(); ++i) grad.weights[i] = 2.0 * lambda * params.weights[i];
    grad.output_weights = 2.0 * lambda * params.output_weights;
    if (penalize_biases) {
        for (size_t i = 0; i < params.biases.size(); ++i) grad.biases[i] = 2.0 * lambda * params.biases[i];
    }
    return grad;
}

double objective(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                 const Architecture& arch, const ParamSet& params, const LossSpec& spec,
                 double lambda, bool penalize_biases) {
    if (features.rows() == 0) throw JobError("objective: empty training window");
    if (features.rows() != targets.size()) throw JobError("objective: feature/target row mismatch");

    ForwardWorkspace ws;
    double total = 0.0;
    for (int i = 0; i < features.rows(); ++i) {
        double pred = forward(arch, params, features.row(i).transpose(), ws);
        total += loss_value(spec, targets(i), pred);
    }
    return total / static_cast<double>(features.rows()) + l2_penalty(params, lambda, penalize_biases);
}

} // namespace macroq
