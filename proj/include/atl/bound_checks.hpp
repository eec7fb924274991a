#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "atl/attacks.hpp"
#include "atl/capacity.hpp"
#include "atl/linalg.hpp"
#include "atl/nn.hpp"

namespace atl {

// Numerical verification of the norm inequalities behind the capacity
// analysis, on concrete networks. Each check returns the observed quantity,
// the bound, and their ratio; a suite aggregates violations.
//
// The inequalities are stated with prefix products of layer norms and are
// only guaranteed once every gamma_i * sigma_i >= 1 (below that the stated
// right-hand side drops under the direct perturbation term). Generators in
// the test suites therefore sample layer norms at or above 1.

struct CheckRecord {
    double observed = 0.0;
    double bound = 0.0;
    double ratio = 0.0; // observed / bound, 0 when both vanish
    bool ok = false;
};

struct VerifySummary {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double max_ratio = 0.0;
    std::vector<CheckRecord> records;

    void add(const CheckRecord& r) {
        ++checked;
        if (!r.ok) ++violations;
        max_ratio = std::max(max_ratio, r.ratio);
        records.push_back(r);
    }
};

// ||delta*|| <= L_w / lambda, delta* from the fixed-point attack.
inline CheckRecord check_attack_norm_bound(const Network& net, const Loss& loss, const Vector& x,
                                           int y, double lambda, double tol = 1e-10,
                                           int max_iters = 2000) {
    CheckRecord r;
    const AttackResult a = lambda_optimal(net, loss, x, y, lambda, tol, max_iters);
    r.observed = norm2(a.delta);
    r.bound = lipschitz_product(net) / lambda;
    r.ratio = r.bound > 0.0 ? r.observed / r.bound : 0.0;
    r.ok = r.observed <= r.bound + tol + 1e-9;
    return r;
}

inline VerifySummary verify_attack_norm_bound(const Network& net, const Loss& loss,
                                              const std::vector<Vector>& xs,
                                              const std::vector<int>& ys, double lambda,
                                              double tol = 1e-10) {
    VerifySummary s;
    for (std::size_t i = 0; i < xs.size(); ++i)
        s.add(check_attack_norm_bound(net, loss, xs[i], ys[i], lambda, tol));
    return s;
}

// Spectral-norm distance of input Jacobians under a perturbation of layer k:
// ||J(x; w) - J(x; w~)|| <= L_w * (sum_{i=k}^{L} prefix_i) / sigma_k * ||Delta_k||.
inline CheckRecord check_jacobian_shift_bound(const Network& net, const Vector& x, std::size_t k,
                                              const Matrix& delta_k) {
    if (k >= net.layers.size()) throw NumericError("check_jacobian_shift_bound: bad layer index");
    const LayerNorms norms = substitute_layer_norms(net);

    Network shifted = net;
    for (std::size_t i = 0; i < delta_k.a.size(); ++i) shifted.layers[k].W.a[i] += delta_k.a[i];

    const Matrix j0 = input_jacobian(net, x);
    const Matrix j1 = input_jacobian(shifted, x);
    Matrix diff = j0;
    for (std::size_t i = 0; i < diff.a.size(); ++i) diff.a[i] -= j1.a[i];

    CheckRecord r;
    r.observed = (diff.rows <= 16 && diff.cols <= 16) ? svd_bruteforce(diff)
                                                      : spectral_norm(diff, 1e-10).value;

    double lw = 1.0, run = 1.0, tail = 0.0;
    for (std::size_t i = 0; i < norms.sigma.size(); ++i) lw *= norms.gamma[i] * norms.sigma[i];
    for (std::size_t i = 0; i < norms.sigma.size(); ++i) {
        run *= norms.gamma[i] * norms.sigma[i];
        if (i >= k) tail += run;
    }
    const double dk = (delta_k.rows <= 16 && delta_k.cols <= 16)
                          ? svd_bruteforce(delta_k)
                          : spectral_norm(delta_k, 1e-10).value;
    r.bound = lw * tail / norms.sigma[k] * dk;
    r.ratio = r.bound > 0.0 ? r.observed / r.bound : 0.0;
    r.ok = r.observed <= r.bound + 1e-9;
    return r;
}

// Fixed-point attack shift under a perturbation of layer k:
// ||delta*_w - delta*_w~|| <= L_w * (sum_{i=k}^{L} prefix_i) / (tau * lambda * sigma_k) * ||Delta_k||,
// requiring lambda(1-tau) >= kappa for both the original and shifted weights.
inline CheckRecord check_attack_shift_bound(const Network& net, const Loss& loss, const Vector& x,
                                            int y, double lambda, double tau, std::size_t k,
                                            const Matrix& delta_k, double fp_tol = 1e-10,
                                            int max_iters = 5000) {
    if (k >= net.layers.size()) throw NumericError("check_attack_shift_bound: bad layer index");
    Network shifted = net;
    for (std::size_t i = 0; i < delta_k.a.size(); ++i) shifted.layers[k].W.a[i] += delta_k.a[i];

    const double contraction_lhs = lambda * (1.0 - tau);
    if (contraction_lhs < kappa(net, loss) || contraction_lhs < kappa(shifted, loss))
        throw NumericError("check_attack_shift_bound: contraction margin tau does not hold for "
                           "both weight settings");

    const AttackResult a0 = lambda_optimal(net, loss, x, y, lambda, fp_tol, max_iters);
    const AttackResult a1 = lambda_optimal(shifted, loss, x, y, lambda, fp_tol, max_iters);

    CheckRecord r;
    double d2 = 0.0;
    for (std::size_t i = 0; i < a0.delta.size(); ++i) {
        const double d = a0.delta[i] - a1.delta[i];
        d2 += d * d;
    }
    r.observed = std::sqrt(d2);

    const LayerNorms norms = substitute_layer_norms(net);
    double lw = 1.0, run = 1.0, tail = 0.0;
    for (std::size_t i = 0; i < norms.sigma.size(); ++i) lw *= norms.gamma[i] * norms.sigma[i];
    for (std::size_t i = 0; i < norms.sigma.size(); ++i) {
        run *= norms.gamma[i] * norms.sigma[i];
        if (i >= k) tail += run;
    }
    const double dk = (delta_k.rows <= 16 && delta_k.cols <= 16)
                          ? svd_bruteforce(delta_k)
                          : spectral_norm(delta_k, 1e-10).value;
    r.bound = lw * tail / (tau * lambda * norms.sigma[k]) * dk;
    // Each fixed point is only fp_tol-accurate, hence the additive slack.
    r.ratio = r.bound > 0.0 ? r.observed / r.bound : 0.0;
    r.ok = r.observed <= r.bound + 2.0 * fp_tol + 1e-9;
    return r;
}

} // namespace atl
