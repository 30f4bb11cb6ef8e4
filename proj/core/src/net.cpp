#include "macroq/net.hpp"

#include "macroq/errors.hpp"
#include "macroq/rng.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace macroq {

Architecture Architecture::affine(int input_dim) {
    Architecture a;
    a.input_dim = input_dim;
    return a;
}

Architecture Architecture::hidden(int input_dim, std::vector<int> widths, double alpha) {
    Architecture a;
    a.input_dim = input_dim;
    a.depth = static_cast<int>(widths.size());
    a.widths = std::move(widths);
    a.alphas.assign(a.depth, alpha);
    return a;
}

void Architecture::validate() const {
    if (input_dim <= 0) throw ConfigError("architecture input_dim must be positive");
    if (depth < 0) throw ConfigError("architecture depth must be >= 0");
    if (static_cast<int>(widths.size()) != depth || static_cast<int>(alphas.size()) != depth) {
        throw ConfigError("architecture widths/alphas must have exactly depth entries");
    }
    for (int w : widths)
        if (w <= 0) throw ConfigError("architecture widths must be positive");
    for (double a : alphas)
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("leaky-ReLU slope must lie in [0,1]");
}

int Architecture::param_count() const {
    int n = 0;
    for (int i = 0; i < depth; ++i) n += widths[i] * layer_input_dim(i) + widths[i];
    n += output_input_dim() + 1;
    return n;
}

std::string Architecture::label() const {
    if (depth == 0) return "d0";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "d%dw%da%g", depth, widths[0], alphas[0]);
    return buf;
}

ParamSet ParamSet::zeros(const Architecture& arch) {
    ParamSet p;
    p.weights.reserve(arch.depth);
    p.biases.reserve(arch.depth);
    for (int i = 0; i < arch.depth; ++i) {
        p.weights.emplace_back(Eigen::MatrixXd::Zero(arch.widths[i], arch.layer_input_dim(i)));
        p.biases.emplace_back(Eigen::VectorXd::Zero(arch.widths[i]));
    }
    p.output_weights = Eigen::VectorXd::Zero(arch.output_input_dim());
    p.intercept = 0.0;
    return p;
}

bool ParamSet::shape_matches(const Architecture& arch) const {
    if (static_cast<int>(weights.size()) != arch.depth) return false;
    if (static_cast<int>(biases.size()) != arch.depth) return false;
    for (int i = 0; i < arch.depth; ++i) {
        if (weights[i].rows() != arch.widths[i] || weights[i].cols() != arch.layer_input_dim(i)) return false;
        if (biases[i].size() != arch.widths[i]) return false;
    }
    return output_weights.size() == arch.output_input_dim();
}

bool ParamSet::all_finite() const {
    bool ok = true;
    for_each_block([&](const double* data, std::size_t n, bool) {
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(data[i])) ok = false;
    });
    return ok;
}

void ParamSet::set_zero() {
    for_each_block([](double* data, std::size_t n, bool) {
        for (std::size_t i = 0; i < n; ++i) data[i] = 0.0;
    });
}

ParamSet init_params(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    Rng rng(seed);
    ParamSet p = ParamSet::zeros(arch);
    for (int i = 0; i < arch.depth; ++i) {
        double scale = 1.0 / std::sqrt(static_cast<double>(arch.layer_input_dim(i)));
        for (int r = 0; r < p.weights[i].rows(); ++r)
            for (int c = 0; c < p.weights[i].cols(); ++c) p.weights[i](r, c) = scale * rng.next_normal();
    }
    double out_scale = 1.0 / std::sqrt(static_cast<double>(arch.output_input_dim()));
    for (int j = 0; j < p.output_weights.size(); ++j) p.output_weights(j) = out_scale * rng.next_normal();
    return p;
}

double forward(const Architecture& arch, const ParamSet& params, const Eigen::VectorXd& x,
               ForwardWorkspace& ws) {
    if (x.size() != arch.input_dim) throw JobError("forward: feature vector has wrong dimension");
    if (!params.shape_matches(arch)) throw JobError("forward: parameter shapes do not match architecture");

    ws.pre.resize(arch.depth);
    ws.post.resize(arch.depth);
    const Eigen::VectorXd* cur = &x;
    for (int i = 0; i < arch.depth; ++i) {
        ws.pre[i].noalias() = params.weights[i] * (*cur);
        ws.pre[i] += params.biases[i];
        ws.post[i].resize(ws.pre[i].size());
        for (int j = 0; j < ws.pre[i].size(); ++j) ws.post[i](j) = leaky_relu(ws.pre[i](j), arch.alphas[i]);
        cur = &ws.post[i];
    }
    return params.output_weights.dot(*cur) + params.intercept;
}

double forward(const Architecture& arch, const ParamSet& params, const Eigen::VectorXd& x) {
    ForwardWorkspace ws;
    return forward(arch, params, x, ws);
}

void backward_accumulate(const Architecture& arch, const ParamSet& params, const Eigen::VectorXd& x,
                         const ForwardWorkspace& ws, double dloss_dpred, ParamSet& grad) {
    if (!std::isfinite(dloss_dpred)) throw JobError("backward: non-finite upstream gradient");

    const Eigen::VectorXd& top = arch.depth == 0 ? x : ws.post[arch.depth - 1];
    grad.output_weights += dloss_dpred * top;
    grad.intercept += dloss_dpred;
    if (arch.depth == 0) return;

    // delta = dLoss/d(pre-activation of layer i)
    Eigen::VectorXd delta = dloss_dpred * params.output_weights;
    for (int i = arch.depth - 1; i >= 0; --i) {
        for (int j = 0; j < delta.size(); ++j) delta(j) *= leaky_relu_deriv(ws.pre[i](j), arch.alphas[i]);
        const Eigen::VectorXd& below = i == 0 ? x : ws.post[i - 1];
        grad.weights[i].noalias() += delta * below.transpose();
        grad.biases[i] += delta;
        if (i > 0) delta = params.weights[i].transpose() * delta;
    }
}

ParamSet backward(const Architecture& arch, const ParamSet& params, const Eigen::VectorXd& x,
                  double dloss_dpred) {
    ForwardWorkspace ws;
    forward(arch, params, x, ws);
    ParamSet grad = ParamSet::zeros(arch);
    backward_accumulate(arch, params, x, ws, dloss_dpred, grad);
    return grad;
}

namespace {

void write_numbers(std::ostream& out, const double* data, std::size_t n) {
    char buf[40];
    for (std::size_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", data[i]);
        out << buf << (i + 1 == n ? "" : " ");
    }
    out << "\n";
}

void expect_token(std::istream& in, const std::string& want) {
    std::string got;
    if (!(in >> got) || got != want) {
        throw DataError("checkpoint parse: expected '" + want + "', got '" + got + "'");
    }
}

void read_numbers(std::istream& in, double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!(in >> data[i])) throw DataError("checkpoint parse: truncated number list");
    }
}

} // namespace

void save_params(std::ostream& out, const Architecture& arch, const ParamSet& params) {
    out << "params v1\n";
    out << "depth " << arch.depth << "\n";
    out << "input_dim " << arch.input_dim << "\n";
    out << "widths";
    for (int w : arch.widths) out << " " << w;
    out << "\n";
    out << "alphas";
    char buf[40];
    for (double a : arch.alphas) {
        std::snprintf(buf, sizeof(buf), "%.17g", a);
        out << " " << buf;
    }
    out << "\n";
    for (int i = 0; i < arch.depth; ++i) {
        out << "W" << i + 1 << " " << params.weights[i].rows() << " " << params.weights[i].cols() << "\n";
        // Eigen is column-major; emit row-major for readability.
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = params.weights[i];
        write_numbers(out, rm.data(), static_cast<std::size_t>(rm.size()));
        out << "b" << i + 1 << " " << params.biases[i].size() << "\n";
        write_numbers(out, params.biases[i].data(), static_cast<std::size_t>(params.biases[i].size()));
    }
    out << "gamma " << params.output_weights.size() << "\n";
    write_numbers(out, params.output_weights.data(), static_cast<std::size_t>(params.output_weights.size()));
    out << "c\n";
    write_numbers(out, &params.intercept, 1);
}

void load_params(std::istream& in, Architecture& arch, ParamSet& params) {
    expect_token(in, "params");
    expect_token(in, "v1");
    expect_token(in, "depth");
    if (!(in >> arch.depth)) throw DataError("checkpoint parse: bad depth");
    expect_token(in, "input_dim");
    if (!(in >> arch.input_dim)) throw DataError("checkpoint parse: bad input_dim");
    expect_token(in, "widths");
    arch.widths.resize(arch.depth);
    for (int& w : arch.widths)
        if (!(in >> w)) throw DataError("checkpoint parse: bad widths");
    expect_token(in, "alphas");
    arch.alphas.resize(arch.depth);
    for (double& a : arch.alphas)
        if (!(in >> a)) throw DataError("checkpoint parse: bad alphas");
    arch.validate();

    params = ParamSet::zeros(arch);
    for (int i = 0; i < arch.depth; ++i) {
        expect_token(in, "W" + std::to_string(i + 1));
        int r = 0, c = 0;
        if (!(in >> r >> c)) throw DataError("checkpoint parse: bad weight shape");
        if (r != arch.widths[i] || c != arch.layer_input_dim(i)) {
            throw DataError("checkpoint parse: weight shape does not match architecture");
        }
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(r, c);
        read_numbers(in, rm.data(), static_cast<std::size_t>(rm.size()));
        params.weights[i] = rm;
        expect_token(in, "b" + std::to_string(i + 1));
        int bl = 0;
        if (!(in >> bl) || bl != arch.widths[i]) throw DataError("checkpoint parse: bad bias length");
        read_numbers(in, params.biases[i].data(), static_cast<std::size_t>(bl));
    }
    expect_token(in, "gamma");
    int gl = 0;
    if (!(in >> gl) || gl != arch.output_input_dim()) throw DataError("checkpoint parse: bad gamma length");
    read_numbers(in, params.output_weights.data(), static_cast<std::size_t>(gl));
    expect_token(in, "c");
    read_numbers(in, &params.intercept, 1);
}

} // namespace macroq
