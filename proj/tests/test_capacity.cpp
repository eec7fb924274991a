#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "atl/capacity.hpp"
#include "atl/linalg.hpp"
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

Matrix diag_matrix(const std::vector<double>& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m.at(i, i) = d[i];
    return m;
}

Vector random_vec(Rng& rng, std::size_t d, double scale = 1.0) {
    Vector v(d);
    for (double& x : v) x = rng.normal() * scale;
    return v;
}

// Independent evaluation of the substitute capacity from its definition,
// using the brute-force singular values.
double capacity_sub_oracle(const Network& net) {
    double prefix_sum = 0.0, run = 1.0, ratios = 0.0;
    for (const auto& l : net.layers) {
        const double sigma = svd_bruteforce(l.W);
        const double gamma = std::max(l.act.lipschitz(), l.act.smoothness());
        run *= gamma * sigma;
        prefix_sum += run;
        double colsum = 0.0;
        for (std::size_t j = 0; j < l.W.cols; ++j) {
            double col = 0.0;
            for (std::size_t r = 0; r < l.W.rows; ++r) col += l.W.at(r, j) * l.W.at(r, j);
            colsum += std::sqrt(col);
        }
        ratios += std::cbrt(colsum * colsum) / std::cbrt(sigma * sigma);
    }
    return prefix_sum * std::pow(ratios, 1.5);
}

double capacity_tgt_oracle(const Network& net) {
    double prod = 1.0, ratios = 0.0;
    for (const auto& l : net.layers) {
        const double sigma = svd_bruteforce(l.W);
        prod *= l.act.lipschitz() * sigma;
        double colsum = 0.0;
        for (std::size_t j = 0; j < l.W.cols; ++j) {
            double col = 0.0;
            for (std::size_t r = 0; r < l.W.rows; ++r) col += l.W.at(r, j) * l.W.at(r, j);
            colsum += std::sqrt(col);
        }
        ratios += std::cbrt(colsum * colsum) / std::cbrt(sigma * sigma);
    }
    return prod * std::pow(ratios, 1.5);
}

} // namespace

TEST_CASE("lipschitz product: identity layer gives 1, diagonal stacks multiply") {
    Network net;
    net.layers.push_back({Matrix::identity(3), Activation::identity()});
    CHECK_THAT(lipschitz_product(net), Catch::Matchers::WithinRel(1.0, 1e-9));

    Network two = make_mlp({3, 3, 3}, Activation::tanh());
    two.layers[0].W = diag_matrix({2.0, 0.5, 0.1});
    two.layers[1].W = diag_matrix({3.0, 1.0, 0.2});
    CHECK_THAT(lipschitz_product(two), Catch::Matchers::WithinRel(6.0, 1e-7));
}

TEST_CASE("lipschitz product matches the oracle norms on a seeded net") {
    Rng rng(1);
    const Network net = random_net(rng, {4, 5, 4, 3}, Activation::tanh());
    double oracle = 1.0;
    for (const auto& l : net.layers) oracle *= svd_bruteforce(l.W);
    CHECK_THAT(lipschitz_product(net), Catch::Matchers::WithinRel(oracle, 1e-5));
}

TEST_CASE("lipschitz product refuses relu substitutes") {
    Rng rng(2);
    const Network net = random_net(rng, {3, 4, 2}, Activation::relu());
    CHECK_THROWS_AS(lipschitz_product(net), NumericError);
}

TEST_CASE("smoothness constant on unit-norm stacks") {
    // Single identity layer: prefix sum = product = 1. With brier metadata
    // (lip 1, smooth 2): kappa = 1*1*(1-1) + 2*1 = 2; a (1,1)-loss gives 1.
    Network one;
    one.layers.push_back({Matrix::identity(3), Activation::identity()});
    CHECK_THAT(kappa(one, Loss::brier()), Catch::Matchers::WithinRel(2.0, 1e-9));

    // Two unit layers: prefix sum = 2, product = 1; kappa = 1*(2-1) + 2 = 3
    // for brier, 2 for a (1,1)-loss.
    Network two = make_mlp({3, 3, 3}, Activation::tanh());
    two.layers[0].W = Matrix::identity(3);
    two.layers[1].W = Matrix::identity(3);
    CHECK_THAT(kappa(two, Loss::brier()), Catch::Matchers::WithinRel(3.0, 1e-7));
}

TEST_CASE("smoothness constant dominates sampled gradient-Lipschitz ratios") {
    Rng rng(3);
    for (int n = 0; n < 10; ++n) {
        const Network net = random_net(rng, {3, 4, 3}, Activation::tanh(), 1.2);
        const double k = kappa(net, Loss::brier());
        double max_ratio = 0.0;
        for (int t = 0; t < 1000; ++t) {
            const Vector a = random_vec(rng, 3, rng.uniform(0.1, 2.0));
            Vector b = a;
            for (double& v : b) v += rng.normal() * rng.uniform(1e-3, 1.0);
            Vector d(3);
            for (int i = 0; i < 3; ++i) d[i] = a[i] - b[i];
            const double dn = norm2(d);
            if (dn < 1e-12) continue;
            const Vector ga = input_gradient(net, Loss::brier(), a, 0);
            const Vector gb = input_gradient(net, Loss::brier(), b, 0);
            Vector gd(3);
            for (int i = 0; i < 3; ++i) gd[i] = ga[i] - gb[i];
            max_ratio = std::max(max_ratio, norm2(gd) / dn);
        }
        CHECK(max_ratio <= k);
    }
}

TEST_CASE("kappa refuses the evaluation-only loss and relu substitutes") {
    Rng rng(4);
    CHECK_THROWS_AS(kappa(random_net(rng, {2, 2}, Activation::identity()), Loss::zero_one()),
                    NumericError);
    CHECK_THROWS_AS(kappa(random_net(rng, {2, 3, 2}, Activation::relu()), Loss::brier()),
                    NumericError);
}

TEST_CASE("substitute capacity: identity layer closed form is the width") {
    for (std::size_t d : {std::size_t(2), std::size_t(5), std::size_t(9)}) {
        Network net;
        net.layers.push_back({Matrix::identity(d), Activation::identity()});
        CHECK_THAT(capacity_substitute(net), Catch::Matchers::WithinRel(double(d), 1e-7));
        CHECK_THAT(capacity_target(net), Catch::Matchers::WithinRel(double(d), 1e-7));
    }
}

TEST_CASE("substitute capacity tracks a doubled layer per the definition") {
    Rng rng(5);
    Network net = random_net(rng, {3, 4, 2}, Activation::tanh());
    CHECK_THAT(capacity_substitute(net), Catch::Matchers::WithinRel(capacity_sub_oracle(net), 1e-5));
    for (double& v : net.layers[0].W.a) v *= 2.0;
    CHECK_THAT(capacity_substitute(net), Catch::Matchers::WithinRel(capacity_sub_oracle(net), 1e-5));
}

TEST_CASE("target capacity: homogeneity and the second-implementation oracle") {
    Rng rng(6);
    Network net = random_net(rng, {4, 3}, Activation::identity());
    const double base = capacity_target(net);
    CHECK_THAT(base, Catch::Matchers::WithinRel(capacity_tgt_oracle(net), 1e-6));
    for (double& v : net.layers[0].W.a) v *= 3.0;
    CHECK_THAT(capacity_target(net), Catch::Matchers::WithinRel(3.0 * base, 1e-6));

    const Network deep = random_net(rng, {3, 5, 4, 2}, Activation::relu(), 1.1);
    CHECK_THAT(capacity_target(deep), Catch::Matchers::WithinRel(capacity_tgt_oracle(deep), 1e-5));
}

TEST_CASE("capacity refuses zero-norm layers with a diagnostic naming the layer") {
    Network net = make_mlp({3, 4, 2}, Activation::tanh()); // zero weights
    try {
        capacity_substitute(net);
        FAIL("expected a refusal");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
    }
}

TEST_CASE("bound value: omega = 1 kills the first term") {
    const double v = bound_value_from_terms(1.0, 2.0, 1.5, 3.0, 4.0, 10.0, 0.5, 1.0, 1000, 8);
    const double second =
        (2.0 + 0.15) * (4.0 + 1.5 * 3.0 / 0.25) * std::log(1000.0) * std::log(8.0) / 1000.0;
    CHECK_THAT(v, Catch::Matchers::WithinRel(second, 1e-12));
}

TEST_CASE("bound value: large n is dominated by the first term and decreases") {
    const double a = bound_value_from_terms(1.0, 2.0, 1.5, 3.0, 4.0, 10.0, 0.5, 0.5, 1000000, 8);
    const double b =
        bound_value_from_terms(1.0, 2.0, 1.5, 3.0, 4.0, 10.0, 0.5, 0.5, 1000000000, 8);
    CHECK(b < a);
    const double first_only = 1.0 * std::sqrt(std::log(2.0) / 1e9);
    CHECK(b <= 10.0 * first_only);
}

TEST_CASE("generalization bound report matches a hand recomputation") {
    Rng rng(7);
    const Network sub = random_net(rng, {3, 4, 2}, Activation::tanh());
    const Network tgt = random_net(rng, {3, 5, 2}, Activation::relu());
    const double B = 2.5, lambda = 50.0, tau = 0.5, omega = 0.05;
    const std::size_t n = 500;

    const CapacityReport rep =
        generalization_bound(sub, tgt, Loss::brier(), B, lambda, tau, omega, n);

    std::vector<double> sigma;
    for (const auto& l : sub.layers) sigma.push_back(svd_bruteforce(l.W));
    double lw = 1.0;
    for (double s : sigma) lw *= s;
    CHECK_THAT(rep.lipschitz, Catch::Matchers::WithinRel(lw, 1e-5));
    CHECK_THAT(rep.capacity_sub, Catch::Matchers::WithinRel(capacity_sub_oracle(sub), 1e-5));
    CHECK_THAT(rep.capacity_tgt, Catch::Matchers::WithinRel(capacity_tgt_oracle(tgt), 1e-5));
    CHECK(rep.max_dim == 5);

    const double expected =
        1.0 * std::sqrt(std::log(1.0 / omega) / double(n)) +
        (B + lw / lambda) * (rep.capacity_tgt + lw * rep.capacity_sub / (tau * tau)) *
            std::log(double(n)) * std::log(5.0) / double(n);
    REQUIRE(rep.applicable);
    CHECK_THAT(rep.bound_value, Catch::Matchers::WithinRel(expected, 1e-5));
}

TEST_CASE("bound value is monotone in B, target capacity and substitute capacity") {
    const double base = bound_value_from_terms(1.0, 2.0, 1.5, 3.0, 4.0, 10.0, 0.5, 0.5, 1000, 8);
    for (double f : {1.1, 2.0, 7.3}) {
        CHECK(bound_value_from_terms(1.0, 2.0 * f, 1.5, 3.0, 4.0, 10.0, 0.5, 0.5, 1000, 8) > base);
        CHECK(bound_value_from_terms(1.0, 2.0, 1.5, 3.0 * f, 4.0, 10.0, 0.5, 0.5, 1000, 8) > base);
        CHECK(bound_value_from_terms(1.0, 2.0, 1.5, 3.0, 4.0 * f, 10.0, 0.5, 0.5, 1000, 8) > base);
    }
}

TEST_CASE("contraction gating flips exactly at the prefix-form threshold") {
    Rng rng(8);
    const Network sub = random_net(rng, {3, 4, 2}, Activation::tanh());
    const Network tgt = random_net(rng, {3, 3, 2}, Activation::tanh());
    const double tau = 0.25;

    std::vector<double> sigma;
    for (const auto& l : sub.layers) sigma.push_back(svd_bruteforce(l.W));
    double lw = 1.0, run = 1.0, prefix_sum = 0.0;
    for (double s : sigma) lw *= s;
    for (double s : sigma) {
        run *= s;
        prefix_sum += run;
    }
    const double threshold = lw * prefix_sum;

    const double lambda_ok = threshold / (1.0 - tau) * 1.001;
    const double lambda_bad = threshold / (1.0 - tau) * 0.999;
    CHECK(generalization_bound(sub, tgt, Loss::brier(), 1.0, lambda_ok, tau, 0.5, 100).applicable);
    const CapacityReport bad =
        generalization_bound(sub, tgt, Loss::brier(), 1.0, lambda_bad, tau, 0.5, 100);
    CHECK_FALSE(bad.applicable);
    CHECK(std::isnan(bad.bound_value));
    CHECK(bad.contraction_margin < 0.0);
}

TEST_CASE("generalization bound refuses the unbounded loss") {
    Rng rng(9);
    const Network sub = random_net(rng, {3, 4, 2}, Activation::tanh());
    CHECK_THROWS_AS(generalization_bound(sub, sub, Loss::cross_entropy(), 1.0, 1e6, 0.5, 0.5, 100),
                    NumericError);
}

TEST_CASE("capacity quantities are invariant under paired row/column permutation") {
    Rng rng(10);
    const Network net = random_net(rng, {3, 5, 2}, Activation::tanh());
    const double k0 = kappa(net, Loss::brier());
    const double l0 = lipschitz_product(net);
    const double r0 = capacity_substitute(net);
    const double t0 = capacity_target(net);

    // Permute layer 0's rows together with layer 1's columns: same function.
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    Network p = net;
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) p.layers[0].W.at(i, j) = net.layers[0].W.at(perm[i], j);
        for (std::size_t r = 0; r < 2; ++r) p.layers[1].W.at(r, i) = net.layers[1].W.at(r, perm[i]);
    }
    const Vector x{0.3, -0.5, 0.8};
    const Vector fa = forward(net, x), fb = forward(p, x);
    for (std::size_t i = 0; i < fa.size(); ++i)
        CHECK_THAT(fb[i], Catch::Matchers::WithinAbs(fa[i], 1e-12));
    CHECK_THAT(kappa(p, Loss::brier()), Catch::Matchers::WithinRel(k0, 1e-9));
    CHECK_THAT(lipschitz_product(p), Catch::Matchers::WithinRel(l0, 1e-9));
    CHECK_THAT(capacity_substitute(p), Catch::Matchers::WithinRel(r0, 1e-9));
    CHECK_THAT(capacity_target(p), Catch::Matchers::WithinRel(t0, 1e-9));
}
