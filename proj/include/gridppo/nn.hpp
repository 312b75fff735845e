#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "gridppo/linalg.hpp"

namespace gridppo::nn {

enum class Activation { Relu, Sigmoid, Linear };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Linear: return "linear";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "linear") return Activation::Linear;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

// Non-deduced parameter types so Eigen expressions bind without casts.
template <typename Scalar>
using MatArg = std::type_identity_t<MatrixX<Scalar>>;
template <typename Scalar>
using VecArg = std::type_identity_t<VectorX<Scalar>>;

// One dense layer: out = act(in · Wᵀ + b), W is out × in.
template <typename Scalar>
struct Layer {
    MatrixX<Scalar> W;
    VectorX<Scalar> b;
    Activation act = Activation::Linear;
};

template <typename Scalar>
struct Mlp {
    std::vector<Layer<Scalar>> layers;

    Eigen::Index in_width() const { return layers.front().W.cols(); }
    Eigen::Index out_width() const { return layers.back().W.rows(); }
    Eigen::Index param_count() const {
        Eigen::Index n = 0;
        for (const auto& l : layers) n += l.W.size() + l.b.size();
        return n;
    }
};

/// Builds a chain with the given widths (input first). Hidden layers get
/// He-uniform init, the output layer Xavier-uniform; biases start at zero.
template <typename Scalar, typename Rng>
Mlp<Scalar> make_mlp(const std::vector<int>& widths, Activation hidden, Activation output, Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("an MLP needs at least input and output widths");
    Mlp<Scalar> m;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
        const int in = widths[k], out = widths[k + 1];
        if (in < 1 || out < 1) throw std::invalid_argument("layer widths must be positive");
        const bool last = k + 2 == widths.size();
        const double limit = last ? std::sqrt(6.0 / (in + out)) : std::sqrt(6.0 / in);
        std::uniform_real_distribution<double> u(-limit, limit);
        Layer<Scalar> l;
        l.W.resize(out, in);
        for (Eigen::Index i = 0; i < l.W.size(); ++i) l.W.data()[i] = static_cast<Scalar>(u(rng));
        l.b = VectorX<Scalar>::Zero(out);
        l.act = last ? output : hidden;
        m.layers.push_back(std::move(l));
    }
    return m;
}

template <typename Scalar>
void apply_activation(MatrixX<Scalar>& z, Activation act) {
    switch (act) {
        case Activation::Relu: z = z.cwiseMax(Scalar(0)); break;
        case Activation::Sigmoid: z = (Scalar(1) + (-z.array()).exp()).inverse().matrix(); break;
        case Activation::Linear: break;
    }
}

// Layer inputs and outputs from the most recent forward pass.
template <typename Scalar>
struct ForwardCache {
    std::vector<MatrixX<Scalar>> inputs;
    std::vector<MatrixX<Scalar>> outputs;
};

template <typename Scalar>
MatrixX<Scalar> forward(const Mlp<Scalar>& m, const MatArg<Scalar>& x, ForwardCache<Scalar>* cache = nullptr) {
    if (x.cols() != m.in_width())
        throw std::invalid_argument("forward: batch width " + std::to_string(x.cols()) + " but network expects " +
                                    std::to_string(m.in_width()));
    if (cache) {
        cache->inputs.clear();
        cache->outputs.clear();
    }
    MatrixX<Scalar> a = x;
    for (const auto& l : m.layers) {
        MatrixX<Scalar> z = a * l.W.transpose();
        z.rowwise() += l.b.transpose();
        apply_activation(z, l.act);
        if (cache) {
            cache->inputs.push_back(std::move(a));
            cache->outputs.push_back(z);
        }
        a = std::move(z);
    }
    return a;
}

/// Parameter gradients for upstream gradient `dy` (N × out) of a scalar loss
/// with respect to the outputs of the forward pass recorded in `cache`.
/// The result reuses the Mlp layout; `dx`, when given, receives the input gradient.
template <typename Scalar>
Mlp<Scalar> backward(const Mlp<Scalar>& m, const ForwardCache<Scalar>& cache, const MatArg<Scalar>& dy,
                     MatrixX<Scalar>* dx = nullptr) {
    if (cache.outputs.size() != m.layers.size() || dy.rows() != cache.outputs.back().rows() ||
        dy.cols() != m.out_width())
        throw std::invalid_argument("backward: gradient shape does not match the cached forward pass");
    Mlp<Scalar> g;
    g.layers.resize(m.layers.size());
    MatrixX<Scalar> d = dy;
    for (std::size_t k = m.layers.size(); k-- > 0;) {
        const auto& l = m.layers[k];
        const auto& out = cache.outputs[k];
        switch (l.act) {
            case Activation::Relu: d = (out.array() > Scalar(0)).select(d, Scalar(0)); break;
            case Activation::Sigmoid: d = (d.array() * out.array() * (Scalar(1) - out.array())).matrix(); break;
            case Activation::Linear: break;
        }
        g.layers[k].W = d.transpose() * cache.inputs[k];
        g.layers[k].b = d.colwise().sum().transpose();
        g.layers[k].act = l.act;
        if (k > 0 || dx) d = d * l.W;
    }
    if (dx) *dx = std::move(d);
    return g;
}

template <typename Scalar>
VectorX<Scalar> flatten(const Mlp<Scalar>& m) {
    VectorX<Scalar> v(m.param_count());
    Eigen::Index o = 0;
    for (const auto& l : m.layers) {
        v.segment(o, l.W.size()) = l.W.reshaped();
        o += l.W.size();
        v.segment(o, l.b.size()) = l.b;
        o += l.b.size();
    }
    return v;
}

template <typename Scalar>
void assign(Mlp<Scalar>& m, const VectorX<Scalar>& v) {
    if (v.size() != m.param_count()) throw std::invalid_argument("assign: parameter count mismatch");
    Eigen::Index o = 0;
    for (auto& l : m.layers) {
        l.W.reshaped() = v.segment(o, l.W.size());
        o += l.W.size();
        l.b = v.segment(o, l.b.size());
        o += l.b.size();
    }
}

template <typename Scalar>
bool all_finite(const Mlp<Scalar>& m) {
    for (const auto& l : m.layers)
        if (!l.W.allFinite() || !l.b.allFinite()) return false;
    return true;
}

// ---- Gaussian policy head ----

template <typename Scalar>
Scalar gaussian_log_prob(const VectorX<Scalar>& mean, const VecArg<Scalar>& log_std, const VecArg<Scalar>& action) {
    if (mean.size() != log_std.size() || mean.size() != action.size())
        throw std::invalid_argument("gaussian_log_prob: length mismatch");
    const Scalar half_log_2pi = Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    const auto z = (action - mean).array() * (-log_std.array()).exp();
    return (Scalar(-0.5) * z.square() - log_std.array() - half_log_2pi).sum();
}

// Row-wise log-probabilities for a batch (N × d means and actions).
template <typename Scalar>
VectorX<Scalar> gaussian_log_prob_rows(const MatrixX<Scalar>& mean, const VecArg<Scalar>& log_std,
                                       const MatArg<Scalar>& action) {
    const Scalar half_log_2pi = Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    const VectorX<Scalar> inv_std = (-log_std.array()).exp();
    const MatrixX<Scalar> z = (action - mean) * inv_std.asDiagonal();
    return (Scalar(-0.5) * z.array().square()).rowwise().sum().matrix() -
           VectorX<Scalar>::Constant(mean.rows(), log_std.sum() + half_log_2pi * Scalar(mean.cols()));
}

template <typename Scalar>
Scalar gaussian_entropy(const VectorX<Scalar>& log_std) {
    const Scalar c = Scalar(0.5) + Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    return (log_std.array() + c).sum();
}

template <typename Scalar, typename Rng>
VectorX<Scalar> sample_action(const VectorX<Scalar>& mean, const VecArg<Scalar>& log_std, Rng& rng) {
    std::normal_distribution<Scalar> n01;
    VectorX<Scalar> a(mean.size());
    for (Eigen::Index d = 0; d < mean.size(); ++d) a(d) = mean(d) + std::exp(log_std(d)) * n01(rng);
    return a;
}

/// Actor network plus state-independent log standard deviations. The actor
/// reads only the leading `input_width` columns of a state batch.
template <typename Scalar>
struct PolicyParams {
    Mlp<Scalar> actor;
    VectorX<Scalar> log_std;

    Eigen::Index input_width() const { return actor.in_width(); }
    Eigen::Index action_width() const { return actor.out_width(); }

    MatrixX<Scalar> mean(const MatrixX<Scalar>& states, ForwardCache<Scalar>* cache = nullptr) const {
        if (states.cols() < input_width()) throw std::invalid_argument("policy: state narrower than actor input");
        return forward(actor, MatrixX<Scalar>(states.leftCols(input_width())), cache);
    }
};

template <typename Scalar>
using CriticParams = Mlp<Scalar>;

// ---- optimizers ----

template <typename Scalar>
struct AdamState {
    VectorX<Scalar> m, v;
    long t = 0;
    Scalar beta1 = Scalar(0.9), beta2 = Scalar(0.999), eps = Scalar(1e-8);
};

template <typename Scalar>
void adam_step(VectorX<Scalar>& params, const VecArg<Scalar>& grads, AdamState<Scalar>& s, std::type_identity_t<Scalar> lr) {
    if (grads.size() != params.size()) throw std::invalid_argument("adam_step: gradient length mismatch");
    if (s.m.size() != params.size()) {
        s.m = VectorX<Scalar>::Zero(params.size());
        s.v = VectorX<Scalar>::Zero(params.size());
        s.t = 0;
    }
    ++s.t;
    s.m = s.beta1 * s.m + (Scalar(1) - s.beta1) * grads;
    s.v = s.beta2 * s.v + (Scalar(1) - s.beta2) * grads.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(s.beta1, Scalar(s.t));
    const Scalar c2 = Scalar(1) - std::pow(s.beta2, Scalar(s.t));
    params.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

template <typename Scalar>
void sgd_step(VectorX<Scalar>& params, const VecArg<Scalar>& grads, std::type_identity_t<Scalar> lr) {
    if (grads.size() != params.size()) throw std::invalid_argument("sgd_step: gradient length mismatch");
    params -= lr * grads;
}

}  // namespace gridppo::nn
