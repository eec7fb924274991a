#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "atl/error.hpp"
#include "atl/linalg.hpp"
#include "atl/nn.hpp"

namespace atl {

// Norm-based capacity and smoothness quantities of a substitute/target pair,
// plus the generalization-bound value assembled from them.

struct LayerNorms {
    std::vector<double> sigma; // spectral norms
    std::vector<double> gamma; // per-layer activation constants
};

inline LayerNorms substitute_layer_norms(const Network& net, double tol = 1e-8) {
    LayerNorms n;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& layer = net.layers[i];
        const double g = layer.act.assumption_gamma();
        if (!std::isfinite(g))
            throw NumericError("layer " + std::to_string(i) + " activation '" + layer.act.name() +
                               "' has unbounded smoothness; substitute capacity quantities "
                               "require a finitely smooth activation");
        n.sigma.push_back(spectral_norm(layer.W, tol).value);
        n.gamma.push_back(g);
    }
    return n;
}

// Product of gamma_i * sigma_i over all layers.
inline double lipschitz_product(const Network& net, double tol = 1e-8) {
    const LayerNorms n = substitute_layer_norms(net, tol);
    double p = 1.0;
    for (std::size_t i = 0; i < n.sigma.size(); ++i) p *= n.gamma[i] * n.sigma[i];
    return p;
}

// Sum over i of prod_{j<=i} gamma_j sigma_j.
inline double prefix_product_sum(const Network& net, double tol = 1e-8) {
    const LayerNorms n = substitute_layer_norms(net, tol);
    double sum = 0.0, run = 1.0;
    for (std::size_t i = 0; i < n.sigma.size(); ++i) {
        run *= n.gamma[i] * n.sigma[i];
        sum += run;
    }
    return sum;
}

// Smoothness constant of x -> loss(net(x), y): Lipschitz bound on the input
// gradient. For a 1-Lipschitz 1-smooth loss this is exactly
// (sum of prefix products) * (product of all layers); for other recorded loss
// constants the two pieces scale independently:
//   kappa = lip * P * (S - P)  +  smooth * P^2,
// where P is the full product and S the prefix-product sum (S - P drops the
// last prefix term, which equals P itself).
inline double kappa(const Network& net, const Loss& loss, double tol = 1e-8) {
    if (!loss.differentiable())
        throw NumericError("kappa: loss " + loss.name() + " has no gradient");
    if (!std::isfinite(loss.lipschitz()) || !std::isfinite(loss.smoothness()))
        throw NumericError("kappa: loss " + loss.name() + " lacks finite gradient metadata");
    const double p = lipschitz_product(net, tol);
    const double s = prefix_product_sum(net, tol);
    return loss.lipschitz() * p * (s - p) + loss.smoothness() * p * p;
}

namespace detail {

inline double ratio_sum_pow(const Network& net, const std::vector<double>& sigma) {
    double rs = 0.0;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (sigma[i] < 1e-12)
            throw NumericError("capacity: layer " + std::to_string(i) +
                               " has (near-)zero spectral norm; the norm ratio is undefined");
        const double n21 = norm_2_1(net.layers[i].W.transposed());
        rs += std::pow(n21, 2.0 / 3.0) / std::pow(sigma[i], 2.0 / 3.0);
    }
    return std::pow(rs, 1.5);
}

} // namespace detail

// (sum of prefix products) * (sum_i ||W_i^T||_{2,1}^{2/3} / ||W_i||_2^{2/3})^{3/2}
inline double capacity_substitute(const Network& net, double tol = 1e-8) {
    const LayerNorms n = substitute_layer_norms(net, tol);
    double sum = 0.0, run = 1.0;
    for (std::size_t i = 0; i < n.sigma.size(); ++i) {
        run *= n.gamma[i] * n.sigma[i];
        sum += run;
    }
    return sum * detail::ratio_sum_pow(net, n.sigma);
}

// (product of xi_i sigma_i) * (same norm-ratio sum)^{3/2}; targets only need
// Lipschitz activations, so relu is admissible here.
inline double capacity_target(const Network& net, double tol = 1e-8) {
    std::vector<double> sigma;
    double prod = 1.0;
    for (const auto& layer : net.layers) {
        sigma.push_back(spectral_norm(layer.W, tol).value);
        prod *= layer.act.lipschitz() * sigma.back();
    }
    return prod * detail::ratio_sum_pow(net, sigma);
}

struct AssumptionFlags {
    bool loss_ok = false;       // bounded, 1-Lipschitz, 1-smooth loss
    bool substitute_ok = false; // zero-fixed, finitely smooth activations
    bool target_ok = false;     // zero-fixed, Lipschitz activations
    std::string diagnostics;
};

struct CapacityReport {
    double kappa = 0.0;
    double lipschitz = 0.0;          // L_w
    double capacity_sub = 0.0;       // R_w
    double capacity_tgt = 0.0;       // R_V
    double data_bound = 0.0;         // B
    double tau = 0.0;
    double lambda = 0.0;
    double omega = 0.0;
    std::size_t n = 0;
    std::size_t max_dim = 0;         // D
    double loss_bound = 0.0;         // c
    double bound_value = 0.0;
    bool applicable = false;
    double contraction_margin = 0.0;       // lambda(1-tau) - prefix-form threshold
    double threshold_prefix = 0.0;         // L_w * sum_i prod_{j<=i} gamma sigma
    double threshold_flat = 0.0;           // L_w * sum_i prod_{j<=L} gamma sigma (verbatim form)
    AssumptionFlags assumptions;
};

// Pure arithmetic core; also the hand-recomputation target for tests.
inline double bound_value_from_terms(double c, double B, double L_w, double R_w, double R_V,
                                     double lambda, double tau, double omega, std::size_t n,
                                     std::size_t D) {
    const double first = c * std::sqrt(std::log(1.0 / omega) / static_cast<double>(n));
    const double second = (B + L_w / lambda) * (R_V + L_w * R_w / (tau * tau)) *
                          std::log(static_cast<double>(n)) * std::log(static_cast<double>(D)) /
                          static_cast<double>(n);
    return first + second;
}

// Assembles every capacity quantity for a substitute/target pair and
// evaluates the bound with its multiplicative constant fixed at 1. The
// contraction condition is gated on the prefix-product form (the one the
// perturbation analysis actually uses); the flat verbatim form is reported
// alongside.
inline CapacityReport generalization_bound(const Network& sub, const Network& tgt,
                                           const Loss& loss, double data_bound, double lambda,
                                           double tau, double omega, std::size_t n,
                                           double tol = 1e-8) {
    if (!(tau > 0.0) || tau >= 1.0) throw NumericError("generalization_bound: need 0 < tau < 1");
    if (!(omega > 0.0) || omega > 1.0)
        throw NumericError("generalization_bound: need 0 < omega <= 1");
    if (n < 1) throw NumericError("generalization_bound: need n >= 1");
    if (!std::isfinite(loss.bound()))
        throw NumericError("generalization_bound: loss " + loss.name() +
                           " is unbounded and excluded from capacity reporting");

    CapacityReport r;
    r.kappa = kappa(sub, loss, tol);
    r.lipschitz = lipschitz_product(sub, tol);
    r.capacity_sub = capacity_substitute(sub, tol);
    r.capacity_tgt = capacity_target(tgt, tol);
    r.data_bound = data_bound;
    r.tau = tau;
    r.lambda = lambda;
    r.omega = omega;
    r.n = n;
    r.loss_bound = loss.bound();

    for (const auto& l : sub.layers) r.max_dim = std::max({r.max_dim, l.W.rows, l.W.cols});
    for (const auto& l : tgt.layers) r.max_dim = std::max({r.max_dim, l.W.rows, l.W.cols});

    const double s = prefix_product_sum(sub, tol);
    r.threshold_prefix = r.lipschitz * s;
    r.threshold_flat = r.lipschitz * r.lipschitz * static_cast<double>(sub.layers.size());
    r.contraction_margin = lambda * (1.0 - tau) - r.threshold_prefix;
    r.applicable = r.contraction_margin >= 0.0;

    AssumptionFlags& f = r.assumptions;
    f.loss_ok = std::isfinite(loss.bound()) && loss.lipschitz() <= 1.0 && loss.smoothness() <= 1.0;
    f.substitute_ok = true;
    for (const auto& l : sub.layers)
        if (!std::isfinite(l.act.smoothness())) f.substitute_ok = false;
    f.target_ok = true;
    if (!f.loss_ok)
        f.diagnostics += "loss '" + loss.name() + "' metadata exceeds the 1-Lipschitz/1-smooth "
                         "regime; quantities use the recorded constants. ";
    if (!r.applicable)
        f.diagnostics += "contraction condition violated: lambda(1-tau) < " +
                         std::to_string(r.threshold_prefix) + ". ";

    r.bound_value = r.applicable
                        ? bound_value_from_terms(r.loss_bound, data_bound, r.lipschitz,
                                                 r.capacity_sub, r.capacity_tgt, lambda, tau,
                                                 omega, n, r.max_dim)
                        : std::numeric_limits<double>::quiet_NaN();
    return r;
}

} // namespace atl
