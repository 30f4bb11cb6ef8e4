#pragma once

#include "macroq/net.hpp"

#include <string>

namespace macroq {

enum class LossKind { pinball, mse };

struct LossSpec {
    LossKind kind = LossKind::pinball;
    double tau = 0.5; // meaningful only for pinball

    static LossSpec pinball(double tau);
    static LossSpec mse();

    void validate() const;
    std::string label() const; // "q0.50" / "mse"
};

/// tau * max(y - q, 0) + (1 - tau) * max(q - y, 0)
double pinball(double y, double q, double tau);

/// Subgradient in q: (1 - tau) above y, -tau below, 0 at q = y.
double pinball_grad(double y, double q, double tau);

double mse(double y, double q);
double mse_grad(double y, double q); // 2 (q - y)

double loss_value(const LossSpec& spec, double y, double q);
double loss_grad(const LossSpec& spec, double y, double q);

/// lambda * (sum_i ||W_i||_F^2 + ||gamma||^2); biases and intercept are
/// unpenalized unless penalize_biases is set.
double l2_penalty(const ParamSet& params, double lambda, bool penalize_biases = false);

/// Companion gradient: 2*lambda on penalized entries, 0 elsewhere.
ParamSet l2_penalty_grad(const Architecture& arch, const ParamSet& params, double lambda,
                         bool penalize_biases = false);

/// Mean data loss over the window plus the penalty. The data term is a mean
/// (not the raw sum) so lambda is comparable across expanding windows.
double objective(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                 const Architecture& arch, const ParamSet& params, const LossSpec& spec,
                 double lambda, bool penalize_biases = false);

} // namespace macroq
