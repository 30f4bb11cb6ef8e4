#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace macroq {

/// z for z >= 0, alpha*z otherwise. alpha = 1 is linear, alpha = 0 is ReLU.
inline double leaky_relu(double z, double alpha) {
    return z >= 0.0 ? z : alpha * z;
}

/// Derivative, with the kink at z = 0 assigned slope 1.
inline double leaky_relu_deriv(double z, double alpha) {
    return z >= 0.0 ? 1.0 : alpha;
}

/// Network family: input of dimension k, `depth` hidden leaky-ReLU layers of
/// the given widths/negative slopes, linear scalar output. depth 0 is plain
/// affine regression on the inputs.
struct Architecture {
    int depth = 0;
    std::vector<int> widths;
    std::vector<double> alphas;
    int input_dim = 0;

    static Architecture affine(int input_dim);
    static Architecture hidden(int input_dim, std::vector<int> widths, double alpha);

    void validate() const;
    int layer_input_dim(int layer) const { return layer == 0 ? input_dim : widths[layer - 1]; }
    int output_input_dim() const { return depth == 0 ? input_dim : widths.back(); }
    int param_count() const;
    std::string label() const; // e.g. "d2w8a0.5", "d0"
};

/// Trainable parameters for one Architecture: hidden weights/biases, output
/// weights gamma and intercept c.
struct ParamSet {
    std::vector<Eigen::MatrixXd> weights; // weights[i]: widths[i] x layer_input_dim(i)
    std::vector<Eigen::VectorXd> biases;  // biases[i]: widths[i]
    Eigen::VectorXd output_weights;       // output_input_dim
    double intercept = 0.0;

    static ParamSet zeros(const Architecture& arch);

    bool shape_matches(const Architecture& arch) const;
    bool all_finite() const;
    void set_zero();

    /// Applies fn to every parameter block; `penalized` is true for hidden
    /// weights and output weights (biases and intercept carry no penalty).
    template <typename Fn>
    void for_each_block(Fn&& fn) {
        for (auto& w : weights) fn(w.data(), static_cast<std::size_t>(w.size()), true);
        for (auto& b : biases) fn(b.data(), static_cast<std::size_t>(b.size()), false);
        fn(output_weights.data(), static_cast<std::size_t>(output_weights.size()), true);
        fn(&intercept, std::size_t{1}, false);
    }
    template <typename Fn>
    void for_each_block(Fn&& fn) const {
        for (const auto& w : weights) fn(w.data(), static_cast<std::size_t>(w.size()), true);
        for (const auto& b : biases) fn(b.data(), static_cast<std::size_t>(b.size()), false);
        fn(output_weights.data(), static_cast<std::size_t>(output_weights.size()), true);
        fn(&intercept, std::size_t{1}, false);
    }
};

/// Weights ~ Normal(0, 1/fan_in), biases and intercept zero. Deterministic
/// in (arch, seed).
ParamSet init_params(const Architecture& arch, std::uint64_t seed);

/// Per-layer activations cached by forward() for reuse in backward().
struct ForwardWorkspace {
    std::vector<Eigen::VectorXd> pre;  // pre-activation per hidden layer
    std::vector<Eigen::VectorXd> post; // activation per hidden layer
};

double forward(const Architecture& arch, const ParamSet& params, const Eigen::VectorXd& x);
double forward(const Architecture& arch, const ParamSet& params, const Eigen::VectorXd& x,
               ForwardWorkspace& ws);

/// Accumulates dLoss/dtheta into grad. Requires the workspace of a forward
/// pass at the same (params, x).
void backward_accumulate(const Architecture& arch, const ParamSet& params, const Eigen::VectorXd& x,
                         const ForwardWorkspace& ws, double dloss_dpred, ParamSet& grad);

ParamSet backward(const Architecture& arch, const ParamSet& params, const Eigen::VectorXd& x,
                  double dloss_dpred);

/// Checkpoint-format parameter block: versioned structured text with field
/// names, shapes and row-major number lists (diffable, round-trips exactly).
void save_params(std::ostream& out, const Architecture& arch, const ParamSet& params);
void load_params(std::istream& in, Architecture& arch, ParamSet& params);

} // namespace macroq
