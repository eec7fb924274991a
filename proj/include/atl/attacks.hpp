#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "atl/capacity.hpp"
#include "atl/error.hpp"
#include "atl/linalg.hpp"
#include "atl/nn.hpp"

namespace atl {

enum class AttackMethod { fgm, fgsm, pgd_l2, pgd_linf, lambda_opt };

inline std::string attack_method_name(AttackMethod m) {
    switch (m) {
        case AttackMethod::fgm: return "fgm";
        case AttackMethod::fgsm: return "fgsm";
        case AttackMethod::pgd_l2: return "pgd-l2";
        case AttackMethod::pgd_linf: return "pgd-linf";
        case AttackMethod::lambda_opt: return "lambda-opt";
    }
    return "fgm";
}

inline AttackMethod parse_attack_method(const std::string& s) {
    if (s == "fgm") return AttackMethod::fgm;
    if (s == "fgsm") return AttackMethod::fgsm;
    if (s == "pgd-l2" || s == "pgd_l2") return AttackMethod::pgd_l2;
    if (s == "pgd-linf" || s == "pgd_linf") return AttackMethod::pgd_linf;
    if (s == "lambda-opt" || s == "lambda_opt") return AttackMethod::lambda_opt;
    throw UsageError("unknown attack method: " + s);
}

struct AttackSpec {
    AttackMethod method = AttackMethod::fgm;
    double epsilon = 0.0;     // absolute budget
    int steps = 15;           // PGD only
    double step_size = 0.0;   // 0 means rule-derived: 1.5 * epsilon / steps
    double lambda = 0.0;      // lambda-opt only
    double fp_tol = 1e-10;
    int fp_max_iters = 500;

    double resolved_step() const {
        return step_size > 0.0 ? step_size : 1.5 * epsilon / static_cast<double>(steps);
    }
};

struct AttackResult {
    Vector delta;
    double loss_before = 0.0;
    double loss_after = 0.0;
    bool converged = true;
    int iterations = 0;
};

namespace detail {

constexpr double kGradFloor = 1e-12;

inline Vector scaled_unit(const Vector& g, double eps) {
    const double n = norm2(g);
    Vector d(g.size(), 0.0);
    if (n < kGradFloor || eps == 0.0) return d;
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = eps * (g[i] / n);
    return d;
}

inline Vector perturbed(const Vector& x, const Vector& d) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + d[i];
    return out;
}

// Restrict x + delta to the declared feature box; no-op otherwise.
inline void clip_to_domain(Vector& delta, const Vector& x,
                           const std::optional<std::pair<double, double>>& domain) {
    if (!domain) return;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        const double v = std::clamp(x[i] + delta[i], domain->first, domain->second);
        delta[i] = v - x[i];
    }
}

} // namespace detail

// Single gradient step of length epsilon in the L2-normalized gradient
// direction; zero when the gradient underflows.
inline AttackResult fgm(const Network& net, const Loss& loss, const Vector& x, int y, double eps,
                        const std::optional<std::pair<double, double>>& domain = std::nullopt) {
    if (eps < 0.0) throw NumericError("fgm: negative budget");
    AttackResult r;
    r.loss_before = loss_value(loss, forward(net, x), y);
    r.delta = detail::scaled_unit(input_gradient(net, loss, x, y), eps);
    detail::clip_to_domain(r.delta, x, domain);
    r.loss_after = loss_value(loss, forward(net, detail::perturbed(x, r.delta)), y);
    r.iterations = 1;
    return r;
}

// Componentwise sign step; sign(0) = 0.
inline AttackResult fgsm(const Network& net, const Loss& loss, const Vector& x, int y, double eps,
                         const std::optional<std::pair<double, double>>& domain = std::nullopt) {
    if (eps < 0.0) throw NumericError("fgsm: negative budget");
    AttackResult r;
    r.loss_before = loss_value(loss, forward(net, x), y);
    const Vector g = input_gradient(net, loss, x, y);
    r.delta.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i)
        r.delta[i] = g[i] > 0.0 ? eps : (g[i] < 0.0 ? -eps : 0.0);
    detail::clip_to_domain(r.delta, x, domain);
    r.loss_after = loss_value(loss, forward(net, detail::perturbed(x, r.delta)), y);
    r.iterations = 1;
    return r;
}

// Projected gradient ascent inside the epsilon-ball (L2 or Linf). Starts from
// zero, no random restarts. The first step from zero takes the shortcut
// min(alpha, eps) * direction, which is what step-then-project evaluates to
// and keeps the single-step case bit-identical to fgm.
inline AttackResult pgd(const Network& net, const Loss& loss, const Vector& x, int y,
                        const AttackSpec& spec,
                        const std::optional<std::pair<double, double>>& domain = std::nullopt) {
    if (spec.method != AttackMethod::pgd_l2 && spec.method != AttackMethod::pgd_linf)
        throw NumericError("pgd: spec method must be pgd-l2 or pgd-linf");
    if (spec.epsilon < 0.0) throw NumericError("pgd: negative budget");
    if (spec.steps < 1) throw NumericError("pgd: need at least one step");

    const bool l2 = spec.method == AttackMethod::pgd_l2;
    const double alpha = spec.resolved_step();
    AttackResult r;
    r.loss_before = loss_value(loss, forward(net, x), y);
    r.delta.assign(x.size(), 0.0);

    for (int it = 0; it < spec.steps; ++it) {
        const Vector g = input_gradient(net, loss, detail::perturbed(x, r.delta), y);
        if (it == 0) {
            const double first = std::min(alpha, spec.epsilon);
            if (l2) {
                r.delta = detail::scaled_unit(g, first);
            } else {
                for (std::size_t i = 0; i < g.size(); ++i)
                    r.delta[i] = g[i] > 0.0 ? first : (g[i] < 0.0 ? -first : 0.0);
            }
        } else {
            if (l2) {
                const double gn = norm2(g);
                if (gn >= detail::kGradFloor)
                    for (std::size_t i = 0; i < g.size(); ++i) r.delta[i] += alpha * (g[i] / gn);
                r.delta = project_l2(r.delta, spec.epsilon);
            } else {
                for (std::size_t i = 0; i < g.size(); ++i)
                    r.delta[i] += g[i] > 0.0 ? alpha : (g[i] < 0.0 ? -alpha : 0.0);
                r.delta = project_linf(r.delta, spec.epsilon);
            }
        }
        detail::clip_to_domain(r.delta, x, domain);
        r.iterations = it + 1;
    }
    r.loss_after = loss_value(loss, forward(net, detail::perturbed(x, r.delta)), y);
    return r;
}

struct FixedPointResult {
    Vector delta;
    bool converged = false;
    int iterations = 0;
    std::vector<double> gaps; // successive iterate distances
};

// Banach iteration delta <- grad_at(delta) / lambda. The caller certifies the
// contraction (see lambda_optimal).
inline FixedPointResult fixed_point_attack(const std::function<Vector(const Vector&)>& grad_at,
                                           std::size_t dim, double lambda, double tol,
                                           int max_iters, const Vector& start = {}) {
    FixedPointResult r;
    r.delta = start.empty() ? Vector(dim, 0.0) : start;
    for (int it = 1; it <= max_iters; ++it) {
        Vector g = grad_at(r.delta);
        for (double& v : g) v /= lambda;
        double gap2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = g[i] - r.delta[i];
            gap2 += d * d;
        }
        const double gap = std::sqrt(gap2);
        r.gaps.push_back(gap);
        r.delta = std::move(g);
        r.iterations = it;
        if (gap <= tol) {
            r.converged = true;
            break;
        }
    }
    return r;
}

// Unique loss-maximizing perturbation under the quadratic norm penalty
// lambda/2 * ||delta||^2, found as the fixed point lambda*delta = grad at
// x+delta. Requires the input-gradient smoothness constant kappa < lambda so
// the iteration contracts.
inline AttackResult lambda_optimal(const Network& net, const Loss& loss, const Vector& x, int y,
                                   double lambda, double tol = 1e-10, int max_iters = 500,
                                   const Vector& start = {}) {
    if (lambda <= 0.0) throw NumericError("lambda_optimal: lambda must be positive");
    const double k = kappa(net, loss);
    if (k >= lambda)
        throw NumericError("lambda_optimal: contraction requires kappa < lambda (kappa=" +
                           std::to_string(k) + ", lambda=" + std::to_string(lambda) + ")");

    const auto grad_at = [&](const Vector& d) {
        return input_gradient(net, loss, detail::perturbed(x, d), y);
    };
    const FixedPointResult fp = fixed_point_attack(grad_at, x.size(), lambda, tol, max_iters, start);

    AttackResult r;
    r.loss_before = loss_value(loss, forward(net, x), y);
    r.delta = fp.delta;
    r.converged = fp.converged;
    r.iterations = fp.iterations;
    r.loss_after = loss_value(loss, forward(net, detail::perturbed(x, r.delta)), y);
    return r;
}

inline AttackResult run_attack(const Network& net, const Loss& loss, const Vector& x, int y,
                               const AttackSpec& spec,
                               const std::optional<std::pair<double, double>>& domain = std::nullopt) {
    switch (spec.method) {
        case AttackMethod::fgm: return fgm(net, loss, x, y, spec.epsilon, domain);
        case AttackMethod::fgsm: return fgsm(net, loss, x, y, spec.epsilon, domain);
        case AttackMethod::pgd_l2:
        case AttackMethod::pgd_linf: return pgd(net, loss, x, y, spec, domain);
        case AttackMethod::lambda_opt:
            return lambda_optimal(net, loss, x, y, spec.lambda, spec.fp_tol, spec.fp_max_iters);
    }
    throw NumericError("run_attack: unhandled method");
}

} // namespace atl
