#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "atl/error.hpp"
#include "atl/linalg.hpp"

namespace atl {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Act { identity, tanh_, relu, softplus };

// Elementwise activation with its certified constants. Every kind maps 0 to 0
// (softplus is shifted to do so; the shift is constant and does not change
// derivatives).
struct Activation {
    Act kind = Act::identity;
    double scale = 1.0; // softplus sharpness

    static Activation identity() { return {Act::identity, 1.0}; }
    static Activation tanh() { return {Act::tanh_, 1.0}; }
    static Activation relu() { return {Act::relu, 1.0}; }
    static Activation softplus(double s) {
        if (s <= 0.0) throw NumericError("softplus scale must be positive");
        return {Act::softplus, s};
    }

    double value(double z) const {
        switch (kind) {
            case Act::identity: return z;
            case Act::tanh_: return std::tanh(z);
            case Act::relu: return z > 0.0 ? z : 0.0;
            case Act::softplus: {
                const double u = scale * z;
                const double sp = u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
                constexpr double log2 = 0.69314718055994530941723212145818;
                return (sp - log2) / scale;
            }
        }
        return z;
    }

    double deriv(double z) const {
        switch (kind) {
            case Act::identity: return 1.0;
            case Act::tanh_: {
                const double t = std::tanh(z);
                return 1.0 - t * t;
            }
            case Act::relu: return z > 0.0 ? 1.0 : 0.0; // subgradient 0 at z = 0
            case Act::softplus: {
                const double u = scale * z;
                return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
            }
        }
        return 1.0;
    }

    double lipschitz() const { return 1.0; }

    // Upper bound on |phi''|. sup|tanh''| = 4/(3*sqrt(3)) ~= 0.7698, recorded
    // conservatively as 1 so the Lipschitz and smoothness constants coincide.
    double smoothness() const {
        switch (kind) {
            case Act::identity: return 0.0;
            case Act::tanh_: return 1.0;
            case Act::relu: return kInf;
            case Act::softplus: return scale / 4.0;
        }
        return 0.0;
    }

    // Single per-layer constant dominating both the first and second
    // derivative, as the capacity formulas require.
    double assumption_gamma() const { return std::max(lipschitz(), smoothness()); }

    bool differentiable_everywhere() const { return kind != Act::relu; }

    std::string name() const {
        switch (kind) {
            case Act::identity: return "identity";
            case Act::tanh_: return "tanh";
            case Act::relu: return "relu";
            case Act::softplus: return "softplus" + std::to_string(scale);
        }
        return "identity";
    }

    static Activation parse(const std::string& s) {
        if (s == "identity" || s == "id" || s == "linear") return identity();
        if (s == "tanh") return tanh();
        if (s == "relu") return relu();
        if (s.rfind("softplus", 0) == 0) {
            const std::string rest = s.substr(8);
            return softplus(rest.empty() ? 1.0 : std::stod(rest));
        }
        throw UsageError("unknown activation: " + s);
    }

    bool operator==(const Activation&) const = default;
};

enum class LossKind { brier, cross_entropy, zero_one };

// Loss over logits. brier is the bounded/smooth choice the capacity formulas
// consume; cross_entropy is admissible for training but its unbounded range
// keeps it out of the bound report; zero_one is evaluation-only.
struct Loss {
    LossKind kind = LossKind::brier;

    static Loss brier() { return {LossKind::brier}; }
    static Loss cross_entropy() { return {LossKind::cross_entropy}; }
    static Loss zero_one() { return {LossKind::zero_one}; }

    // Metadata, verified empirically by the test suite rather than proved.
    double bound() const {
        switch (kind) {
            case LossKind::brier: return 1.0;
            case LossKind::cross_entropy: return kInf;
            case LossKind::zero_one: return 1.0;
        }
        return kInf;
    }
    double lipschitz() const {
        switch (kind) {
            case LossKind::brier: return 1.0;
            case LossKind::cross_entropy: return std::sqrt(2.0);
            case LossKind::zero_one: return kInf;
        }
        return kInf;
    }
    double smoothness() const {
        switch (kind) {
            case LossKind::brier: return 2.0;
            case LossKind::cross_entropy: return 0.5;
            case LossKind::zero_one: return kInf;
        }
        return kInf;
    }

    bool differentiable() const { return kind != LossKind::zero_one; }

    std::string name() const {
        switch (kind) {
            case LossKind::brier: return "brier";
            case LossKind::cross_entropy: return "cross_entropy";
            case LossKind::zero_one: return "zero_one";
        }
        return "brier";
    }

    static Loss parse(const std::string& s) {
        if (s == "brier") return brier();
        if (s == "cross_entropy" || s == "ce") return cross_entropy();
        if (s == "zero_one" || s == "01") return zero_one();
        throw UsageError("unknown loss: " + s);
    }

    bool operator==(const Loss&) const = default;
};

inline Vector softmax(const Vector& z) {
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    Vector p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        s += p[i];
    }
    for (double& v : p) v /= s;
    return p;
}

inline double loss_value(const Loss& loss, const Vector& z, int y) {
    if (y < 0 || static_cast<std::size_t>(y) >= z.size())
        throw DataError("loss: label out of range");
    switch (loss.kind) {
        case LossKind::brier: {
            const Vector p = softmax(z);
            double s = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double d = p[i] - (static_cast<int>(i) == y ? 1.0 : 0.0);
                s += d * d;
            }
            return 0.5 * s;
        }
        case LossKind::cross_entropy: {
            double m = z[0];
            for (double v : z) m = std::max(m, v);
            double s = 0.0;
            for (double v : z) s += std::exp(v - m);
            return m + std::log(s) - z[static_cast<std::size_t>(y)];
        }
        case LossKind::zero_one: {
            std::size_t best = 0;
            for (std::size_t i = 1; i < z.size(); ++i)
                if (z[i] > z[best]) best = i;
            return best == static_cast<std::size_t>(y) ? 0.0 : 1.0;
        }
    }
    return 0.0;
}

inline Vector loss_grad(const Loss& loss, const Vector& z, int y) {
    if (!loss.differentiable())
        throw NumericError("loss " + loss.name() + " is evaluation-only and has no gradient");
    const Vector p = softmax(z);
    Vector q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        q[i] = p[i] - (static_cast<int>(i) == y ? 1.0 : 0.0);
    if (loss.kind == LossKind::cross_entropy) return q;
    // brier: (diag(p) - p p^T) q
    double pq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) pq += p[i] * q[i];
    Vector g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * q[i] - p[i] * pq;
    return g;
}

// Dense feed-forward stack: x -> phi_0(W_0 x) -> ... -> W_L a_{L-1}. No bias
// terms; the final activation is identity.
struct Network {
    struct Layer {
        Matrix W;
        Activation act;
        bool operator==(const Layer&) const = default;
    };
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().W.cols; }
    std::size_t output_dim() const { return layers.back().W.rows; }
    std::size_t depth() const { return layers.size(); }

    void validate() const {
        if (layers.empty()) throw NumericError("network: no layers");
        for (std::size_t i = 0; i + 1 < layers.size(); ++i)
            if (layers[i + 1].W.cols != layers[i].W.rows)
                throw NumericError("network: layer " + std::to_string(i + 1) +
                                   " input dim does not match layer " + std::to_string(i) +
                                   " output dim");
        if (layers.back().act.kind != Act::identity)
            throw NumericError("network: final layer must have identity activation");
    }

    bool operator==(const Network&) const = default;
};

inline Network make_mlp(const std::vector<std::size_t>& dims, Activation hidden) {
    if (dims.size() < 2) throw UsageError("architecture needs at least two dimensions");
    Network net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const bool last = (i + 2 == dims.size());
        net.layers.push_back({Matrix(dims[i + 1], dims[i]), last ? Activation::identity() : hidden});
    }
    return net;
}

inline Vector forward(const Network& net, const Vector& x) {
    if (x.size() != net.input_dim())
        throw NumericError("forward: input dim " + std::to_string(x.size()) + " != " +
                           std::to_string(net.input_dim()));
    Vector a = x;
    for (const auto& layer : net.layers) {
        Vector z = matvec(layer.W, a);
        for (double& v : z) v = layer.act.value(v);
        a = std::move(z);
    }
    return a;
}

struct ForwardTrace {
    std::vector<Vector> pre;  // z_i = W_i a_{i-1}
    std::vector<Vector> post; // a_i = phi_i(z_i); post.back() is the output
};

inline ForwardTrace forward_trace(const Network& net, const Vector& x) {
    if (x.size() != net.input_dim()) throw NumericError("forward_trace: input dim mismatch");
    ForwardTrace t;
    Vector a = x;
    for (const auto& layer : net.layers) {
        Vector z = matvec(layer.W, a);
        t.pre.push_back(z);
        for (double& v : z) v = layer.act.value(v);
        t.post.push_back(z);
        a = t.post.back();
    }
    return t;
}

// Reverse-mode gradient of loss(net(x), y) with respect to x.
inline Vector input_gradient(const Network& net, const Loss& loss, const Vector& x, int y) {
    const ForwardTrace t = forward_trace(net, x);
    Vector g = loss_grad(loss, t.post.back(), y);
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto& layer = net.layers[li];
        if (layer.act.kind != Act::identity)
            for (std::size_t j = 0; j < g.size(); ++j) g[j] *= layer.act.deriv(t.pre[li][j]);
        g = matvec_t(layer.W, g);
    }
    return g;
}

// Per-layer gradients of the batch-mean loss; shapes mirror the weights.
inline std::vector<Matrix> weight_gradients(const Network& net, const Loss& loss,
                                            const std::vector<Vector>& xs,
                                            const std::vector<int>& ys) {
    if (xs.empty() || xs.size() != ys.size())
        throw NumericError("weight_gradients: empty or mismatched batch");
    std::vector<Matrix> grads;
    grads.reserve(net.layers.size());
    for (const auto& layer : net.layers) grads.emplace_back(layer.W.rows, layer.W.cols);

    const double inv_n = 1.0 / static_cast<double>(xs.size());
    for (std::size_t s = 0; s < xs.size(); ++s) {
        const ForwardTrace t = forward_trace(net, xs[s]);
        Vector g = loss_grad(loss, t.post.back(), ys[s]);
        for (std::size_t li = net.layers.size(); li-- > 0;) {
            const auto& layer = net.layers[li];
            if (layer.act.kind != Act::identity)
                for (std::size_t j = 0; j < g.size(); ++j) g[j] *= layer.act.deriv(t.pre[li][j]);
            const Vector& input = (li == 0) ? xs[s] : t.post[li - 1];
            Matrix& gw = grads[li];
            for (std::size_t i = 0; i < gw.rows; ++i) {
                const double gi = g[i] * inv_n;
                if (gi == 0.0) continue;
                for (std::size_t j = 0; j < gw.cols; ++j) gw.at(i, j) += gi * input[j];
            }
            if (li > 0) g = matvec_t(layer.W, g);
        }
    }
    return grads;
}

// J[a][b] = d out_a / d x_b.
inline Matrix input_jacobian(const Network& net, const Vector& x) {
    const ForwardTrace t = forward_trace(net, x);
    Matrix j = net.layers[0].W;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        if (li > 0) j = matmul(net.layers[li].W, j);
        const auto& act = net.layers[li].act;
        if (act.kind != Act::identity)
            for (std::size_t r = 0; r < j.rows; ++r) {
                const double d = act.deriv(t.pre[li][r]);
                for (std::size_t c = 0; c < j.cols; ++c) j.at(r, c) *= d;
            }
    }
    return j;
}

} // namespace atl
