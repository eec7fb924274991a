#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "atl/linalg.hpp"
#include "atl/rng.hpp"

using namespace atl;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m(r, c);
    for (double& v : m.a) v = rng.normal() * scale;
    return m;
}

Matrix diag(const std::vector<double>& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m.at(i, i) = d[i];
    return m;
}

} // namespace

TEST_CASE("spectral norm on identity and diagonal matrices") {
    auto r = spectral_norm(Matrix::identity(3), 1e-8);
    CHECK(r.converged);
    CHECK(r.value == Catch::Approx(1.0).epsilon(1e-8));

    r = spectral_norm(diag({3.0, 1.0, 0.5}), 1e-8);
    CHECK(r.value == Catch::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("spectral norm matches the brute-force oracle on a seeded matrix") {
    Rng rng(42);
    const Matrix m = random_matrix(rng, 6, 4);
    const double oracle = svd_bruteforce(m);
    const double pi = spectral_norm(m, 1e-10).value;
    CHECK(std::fabs(pi - oracle) <= 1e-6 * oracle);
}

TEST_CASE("spectral norm survives a start vector orthogonal to the top direction") {
    // Top right-singular vector of [[1, -1]] is (1,-1)/sqrt(2), exactly
    // orthogonal to the all-ones start.
    Matrix m(1, 2);
    m.at(0, 0) = 1.0;
    m.at(0, 1) = -1.0;
    const auto r = spectral_norm(m, 1e-10);
    CHECK(r.value == Catch::Approx(std::sqrt(2.0)).epsilon(1e-8));
}

TEST_CASE("brute-force oracle basics") {
    CHECK(svd_bruteforce(Matrix::identity(4)) == Catch::Approx(1.0).margin(1e-12));

    Matrix m(2, 2);
    m.at(0, 1) = 2.0; // rank one, sigma = 2
    CHECK(svd_bruteforce(m) == Catch::Approx(2.0).margin(1e-12));

    CHECK(svd_bruteforce(diag({1.0, 2.0, 3.0})) == Catch::Approx(3.0).margin(1e-12));

    Matrix big(17, 3);
    CHECK_THROWS_AS(svd_bruteforce(big), NumericError);
}

TEST_CASE("oracle agreement over seeded matrices up to 16x16") {
    Rng rng(7);
    for (int t = 0; t < 200; ++t) {
        const std::size_t r = 1 + rng.below(16);
        const std::size_t c = 1 + rng.below(16);
        const Matrix m = random_matrix(rng, r, c, rng.uniform(0.1, 3.0));
        const double oracle = svd_bruteforce(m);
        const double pi = spectral_norm(m, 1e-9).value;
        if (oracle > 0.0) CHECK(std::fabs(pi - oracle) <= 1e-6 * oracle);
    }
}

TEST_CASE("norm_2_1 basics and always-true row-norm relation") {
    CHECK(norm_2_1(Matrix::identity(2)) == Catch::Approx(2.0));

    Matrix m(2, 2);
    m.at(0, 0) = 3.0;
    m.at(0, 1) = 4.0;
    CHECK(norm_2_1(m) == Catch::Approx(5.0));

    Rng rng(11);
    const Matrix s = random_matrix(rng, 5, 3);
    double direct = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 3; ++j) row += s.at(i, j) * s.at(i, j);
        direct += std::sqrt(row);
    }
    CHECK(norm_2_1(s) == Catch::Approx(direct).epsilon(1e-12));

    for (int t = 0; t < 100; ++t) {
        const Matrix w = random_matrix(rng, 1 + rng.below(8), 1 + rng.below(8));
        CHECK(norm_2_1(w) >= max_row_norm(w));
        CHECK(max_row_norm(w) >= 0.0);
    }
}

TEST_CASE("L2 projection: inside, boundary, scaling") {
    const Vector v{3.0, 4.0};
    CHECK(project_l2(v, 10.0) == v);
    CHECK(project_l2(v, 5.0) == v);
    const Vector p = project_l2(v, 1.0);
    CHECK(p[0] == Catch::Approx(0.6));
    CHECK(p[1] == Catch::Approx(0.8));
}

TEST_CASE("Linf projection: clamp componentwise") {
    CHECK(project_linf({0.5, -0.2}, 1.0) == Vector{0.5, -0.2});
    CHECK(project_linf({2.0, -3.0}, 1.0) == Vector{1.0, -1.0});
    CHECK(project_linf({0.0, 0.0}, 0.0) == Vector{0.0, 0.0});
}

TEST_CASE("projections are idempotent and non-expansive") {
    Rng rng(3);
    for (int t = 0; t < 300; ++t) {
        Vector v(1 + rng.below(6));
        for (double& x : v) x = rng.normal() * rng.uniform(0.1, 5.0);
        const double radius = rng.uniform(0.0, 3.0);

        const Vector p2 = project_l2(v, radius);
        CHECK(norm2(p2) <= radius + 1e-12);
        CHECK(norm2(p2) <= norm2(v) + 1e-12);
        CHECK(project_l2(p2, radius) == p2);

        const Vector pi = project_linf(v, radius);
        CHECK(norm_inf(pi) <= radius + 1e-12);
        CHECK(norm_inf(pi) <= norm_inf(v) + 1e-12);
        CHECK(project_linf(pi, radius) == pi);
    }
}

TEST_CASE("spectral norm is deterministic") {
    Rng rng(5);
    const Matrix m = random_matrix(rng, 9, 7);
    const auto a = spectral_norm(m, 1e-9);
    const auto b = spectral_norm(m, 1e-9);
    CHECK(a.value == b.value);
    CHECK(a.iterations == b.iterations);
}
