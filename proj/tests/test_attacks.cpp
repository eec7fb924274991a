#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "atl/attacks.hpp"
#include "atl/capacity.hpp"
#include "atl/nn.hpp"
#include "atl/rng.hpp"

using namespace atl;

namespace {

Network random_net(Rng& rng, const std::vector<std::size_t>& dims, Activation hidden,
                   double scale = 0.8) {
    Network net = make_mlp(dims, hidden);
    for (auto& layer : net.layers)
        for (double& v : layer.W.a) v = rng.normal() * scale / std::sqrt(double(layer.W.cols));
    return net;
}

Vector random_vec(Rng& rng, std::size_t d, double scale = 1.0) {
    Vector v(d);
    for (double& x : v) x = rng.normal() * scale;
    return v;
}

} // namespace

TEST_CASE("fgm: zero budget returns the zero perturbation") {
    Rng rng(1);
    const Network net = random_net(rng, {2, 3, 2}, Activation::tanh());
    const AttackResult r = fgm(net, Loss::brier(), {0.4, -0.2}, 0, 0.0);
    CHECK(r.delta == Vector{0.0, 0.0});
    CHECK(r.loss_after == r.loss_before);
}

TEST_CASE("fgm normalizes the gradient direction to the budget") {
    // Identity net + cross-entropy at logits (log .3, log .7) with label 1:
    // the gradient is (0.3, -0.3), so the direction is (1,-1)/sqrt(2).
    Network net;
    net.layers.push_back({Matrix::identity(2), Activation::identity()});
    const Vector x{std::log(0.3), std::log(0.7)};
    const AttackResult r = fgm(net, Loss::cross_entropy(), x, 1, 1.0);
    CHECK_THAT(r.delta[0], Catch::Matchers::WithinAbs(std::sqrt(0.5), 1e-12));
    CHECK_THAT(r.delta[1], Catch::Matchers::WithinAbs(-std::sqrt(0.5), 1e-12));
    CHECK_THAT(norm2(r.delta), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("fgm on a 1-D logistic model matches the closed form") {
    // One feature, logits (w x, 0): cross-entropy gradient wrt x is
    // w * (sigmoid(w x) - [y == 0]).
    const double w = 1.7, xv = 0.6;
    Network net;
    net.layers.push_back({Matrix(2, 1), Activation::identity()});
    net.layers[0].W.at(0, 0) = w;
    const double eps = 0.05;
    const AttackResult r = fgm(net, Loss::cross_entropy(), {xv}, 0, eps);
    const double sig = 1.0 / (1.0 + std::exp(-w * xv));
    const double g = w * (sig - 1.0);
    CHECK_THAT(r.delta[0], Catch::Matchers::WithinAbs(eps * (g > 0 ? 1.0 : -1.0), 1e-12));
    CHECK_THAT(r.loss_after, Catch::Matchers::WithinAbs(
                                 loss_value(Loss::cross_entropy(),
                                            forward(net, {xv + r.delta[0]}), 0),
                                 0.0));
}

TEST_CASE("fgsm takes the componentwise sign with sign(0) = 0") {
    // First-layer column of zeros kills the gradient in that coordinate.
    Network net;
    net.layers.push_back({Matrix(2, 3), Activation::identity()});
    net.layers[0].W.at(0, 0) = 0.7;
    net.layers[0].W.at(1, 1) = -1.3;
    // column 2 stays zero
    const AttackResult r = fgsm(net, Loss::cross_entropy(), {0.2, -0.1, 0.9}, 0, 0.25);
    CHECK(std::fabs(r.delta[0]) == 0.25);
    CHECK(std::fabs(r.delta[1]) == 0.25);
    CHECK(r.delta[2] == 0.0);
    CHECK(norm_inf(r.delta) == 0.25);
}

TEST_CASE("fgsm at the image-style budget saturates every live coordinate") {
    Rng rng(2);
    const Network net = random_net(rng, {4, 5, 3}, Activation::tanh());
    const double eps = 8.0 / 255.0;
    const Vector x = random_vec(rng, 4);
    const Vector g = input_gradient(net, Loss::brier(), x, 1);
    const AttackResult r = fgsm(net, Loss::brier(), x, 1, eps);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] != 0.0)
            CHECK(std::fabs(r.delta[i]) == eps);
        else
            CHECK(r.delta[i] == 0.0);
    }
}

TEST_CASE("pgd with one step and a full-size step equals fgm bit for bit") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const Network net = random_net(rng, {3, 4, 2}, Activation::tanh());
        const Vector x = random_vec(rng, 3);
        const int y = int(rng.below(2));
        const double eps = rng.uniform(0.01, 0.8);

        AttackSpec spec;
        spec.method = AttackMethod::pgd_l2;
        spec.epsilon = eps;
        spec.steps = 1;
        spec.step_size = eps * rng.uniform(1.0, 3.0);
        const AttackResult p = pgd(net, Loss::brier(), x, y, spec);
        const AttackResult f = fgm(net, Loss::brier(), x, y, eps);
        CHECK(p.delta == f.delta);
    }
}

TEST_CASE("pgd derives the step size from the budget rule") {
    AttackSpec spec;
    spec.method = AttackMethod::pgd_l2;
    spec.epsilon = 0.4;
    spec.steps = 15;
    CHECK_THAT(spec.resolved_step(), Catch::Matchers::WithinRel(0.1 * 0.4, 1e-15));
}

TEST_CASE("pgd finds the grid-search maximizer on a 2-D toy") {
    Rng rng(4);
    const Network net = random_net(rng, {2, 6, 2}, Activation::tanh(), 1.3);
    const Vector x{0.35, -0.2};
    const int y = 0;
    const double eps = 0.25;
    const Loss loss = Loss::brier();

    AttackSpec spec;
    spec.method = AttackMethod::pgd_l2;
    spec.epsilon = eps;
    spec.steps = 4000;
    spec.step_size = 2e-4; // final oscillation stays below the grid tolerance
    const AttackResult r = pgd(net, loss, x, y, spec);

    // Dense polar grid over the budget ball; the maximizer sits on the
    // boundary for this instance, interior ring included as a guard.
    Vector best{0.0, 0.0};
    double best_loss = loss_value(loss, forward(net, x), y);
    for (double radius : {eps, 0.5 * eps}) {
        const int steps = 100000;
        for (int i = 0; i < steps; ++i) {
            const double th = 2.0 * M_PI * double(i) / double(steps);
            const Vector d{radius * std::cos(th), radius * std::sin(th)};
            const double lv = loss_value(loss, forward(net, {x[0] + d[0], x[1] + d[1]}), y);
            if (lv > best_loss) {
                best_loss = lv;
                best = d;
            }
        }
    }
    Vector diff{r.delta[0] - best[0], r.delta[1] - best[1]};
    CHECK(norm2(diff) <= 1e-3);
}

TEST_CASE("budget invariant across methods on seeded instances") {
    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
        const Network net = random_net(rng, {3, 4, 2}, Activation::tanh());
        const Vector x = random_vec(rng, 3);
        const int y = int(rng.below(2));
        const double eps = rng.uniform(0.0, 1.0);

        CHECK(norm2(fgm(net, Loss::brier(), x, y, eps).delta) <= eps + 1e-9);
        CHECK(norm_inf(fgsm(net, Loss::brier(), x, y, eps).delta) <= eps + 1e-9);

        AttackSpec l2{AttackMethod::pgd_l2, eps, 5};
        CHECK(norm2(pgd(net, Loss::brier(), x, y, l2).delta) <= eps + 1e-9);
        AttackSpec li{AttackMethod::pgd_linf, eps, 5};
        CHECK(norm_inf(pgd(net, Loss::brier(), x, y, li).delta) <= eps + 1e-9);
    }
}

TEST_CASE("pgd respects a declared box domain") {
    Rng rng(6);
    const Network net = random_net(rng, {2, 4, 2}, Activation::tanh(), 1.5);
    const Vector x{0.95, 0.1};
    AttackSpec spec;
    spec.method = AttackMethod::pgd_linf;
    spec.epsilon = 0.3;
    spec.steps = 10;
    const auto domain = std::make_optional(std::make_pair(0.0, 1.0));
    const AttackResult r = pgd(net, Loss::brier(), x, 0, spec, domain);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(x[i] + r.delta[i] >= 0.0);
        CHECK(x[i] + r.delta[i] <= 1.0);
    }
    CHECK(norm_inf(r.delta) <= 0.3 + 1e-12);
}

TEST_CASE("fixed-point attack: zero gradient yields the zero fixed point") {
    Network net = make_mlp({3, 2}, Activation::identity()); // zero weights, flat loss
    const AttackResult r = lambda_optimal(net, Loss::brier(), {0.5, -0.5, 0.2}, 0, 1.0);
    CHECK(r.converged);
    CHECK(norm2(r.delta) == 0.0);
}

TEST_CASE("fixed-point attack matches the scalar closed form") {
    // Driving the iterator with gradient g(u) = a * u gives the fixed point
    // delta* = a x / (lambda - a).
    const double a = 0.8, lambda = 3.0, x = 1.7;
    const auto grad_at = [&](const Vector& d) { return Vector{a * (x + d[0])}; };
    const FixedPointResult r = fixed_point_attack(grad_at, 1, lambda, 1e-12, 10000);
    REQUIRE(r.converged);
    CHECK_THAT(r.delta[0], Catch::Matchers::WithinAbs(a * x / (lambda - a), 1e-9));
}

TEST_CASE("fixed-point attack refuses when the contraction constant exceeds lambda") {
    Rng rng(7);
    const Network net = random_net(rng, {2, 3, 2}, Activation::tanh(), 1.5);
    const double k = kappa(net, Loss::brier());
    CHECK_THROWS_AS(lambda_optimal(net, Loss::brier(), {0.2, 0.1}, 0, 0.5 * k), NumericError);
    CHECK_NOTHROW(lambda_optimal(net, Loss::brier(), {0.2, 0.1}, 0, 2.0 * k));
}

TEST_CASE("fixed-point attack: local optimality against random search") {
    Rng rng(8);
    const Network net = random_net(rng, {3, 5, 3}, Activation::tanh());
    const Vector x = random_vec(rng, 3);
    const int y = 1;
    const Loss loss = Loss::brier();
    const double lambda = 10.0 * kappa(net, loss);

    const AttackResult r = lambda_optimal(net, loss, x, y, lambda, 1e-12, 5000);
    REQUIRE(r.converged);
    const auto objective = [&](const Vector& d) {
        Vector xp = x;
        for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += d[i];
        return loss_value(loss, forward(net, xp), y) - 0.5 * lambda * dot(d, d);
    };
    const double at_fixed_point = objective(r.delta);
    const double radius = 2.0 * std::max(norm2(r.delta), 1e-6);
    for (int t = 0; t < 1000; ++t) {
        Vector d = random_vec(rng, 3);
        const double n = norm2(d);
        const double target = rng.uniform(0.0, radius);
        for (double& v : d) v *= target / n;
        CHECK(objective(d) <= at_fixed_point + 1e-9);
    }
}

TEST_CASE("fixed-point iterate gaps contract at the certified rate") {
    Rng rng(9);
    for (int t = 0; t < 20; ++t) {
        const Network net = random_net(rng, {3, 4, 2}, Activation::tanh());
        const Vector x = random_vec(rng, 3);
        const int y = int(rng.below(2));
        const double k = kappa(net, Loss::brier());
        const double lambda = 2.0 * k; // ratio 0.5
        const auto grad_at = [&](const Vector& d) {
            Vector xp = x;
            for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += d[i];
            return input_gradient(net, Loss::brier(), xp, y);
        };
        const FixedPointResult r = fixed_point_attack(grad_at, 3, lambda, 1e-13, 300);
        const double certified = k / lambda + 0.05;
        for (std::size_t i = 3; i + 1 < r.gaps.size(); ++i) {
            if (r.gaps[i] < 1e-14) break; // at roundoff, ratios are noise
            CHECK(r.gaps[i + 1] <= certified * r.gaps[i] + 1e-15);
        }
    }
}

TEST_CASE("fixed points from different starts coincide") {
    Rng rng(10);
    for (int t = 0; t < 20; ++t) {
        const Network net = random_net(rng, {3, 4, 2}, Activation::tanh());
        const Vector x = random_vec(rng, 3);
        const int y = int(rng.below(2));
        const double lambda = 4.0 * kappa(net, Loss::brier());
        const double tol = 1e-10;

        const AttackResult a = lambda_optimal(net, Loss::brier(), x, y, lambda, tol, 2000);
        const Vector start = random_vec(rng, 3, 0.05);
        const AttackResult b = lambda_optimal(net, Loss::brier(), x, y, lambda, tol, 2000, start);
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        Vector d(3);
        for (int i = 0; i < 3; ++i) d[i] = a.delta[i] - b.delta[i];
        CHECK(norm2(d) <= 2.0 * tol);
    }
}

TEST_CASE("attacks are deterministic") {
    Rng rng(11);
    const Network net = random_net(rng, {3, 4, 2}, Activation::tanh());
    const Vector x = random_vec(rng, 3);
    AttackSpec spec;
    spec.method = AttackMethod::pgd_l2;
    spec.epsilon = 0.3;
    spec.steps = 15;
    const AttackResult a = pgd(net, Loss::brier(), x, 0, spec);
    const AttackResult b = pgd(net, Loss::brier(), x, 0, spec);
    CHECK(a.delta == b.delta);
    CHECK(a.loss_after == b.loss_after);
}
