#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "atl/error.hpp"
#include "atl/rng.hpp"

namespace atl {

using Vector = std::vector<double>;

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a; // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    Matrix transposed() const {
        Matrix t(cols, rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) t.at(j, i) = at(i, j);
        return t;
    }

    bool operator==(const Matrix& o) const = default;
};

inline double dot(const Vector& x, const Vector& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(const Vector& x) { return std::sqrt(dot(x, x)); }

inline double norm_inf(const Vector& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::fabs(v));
    return m;
}

inline Vector matvec(const Matrix& m, const Vector& x) {
    Vector y(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        const double* row = &m.a[i * m.cols];
        for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

inline Vector matvec_t(const Matrix& m, const Vector& x) {
    Vector y(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = &m.a[i * m.cols];
        const double xi = x[i];
        for (std::size_t j = 0; j < m.cols; ++j) y[j] += row[j] * xi;
    }
    return y;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
        }
    return c;
}

inline double frobenius(const Matrix& m) {
    double s = 0.0;
    for (double v : m.a) s += v * v;
    return std::sqrt(s);
}

// Sum of the L2 norms of the rows. Callers wanting the column variant pass
// the transpose.
inline double norm_2_1(const Matrix& m) {
    if (m.rows == 0 || m.cols == 0) throw NumericError("norm_2_1: empty matrix");
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        double r = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) r += m.at(i, j) * m.at(i, j);
        s += std::sqrt(r);
    }
    return s;
}

inline double max_row_norm(const Matrix& m) {
    double best = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        double r = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) r += m.at(i, j) * m.at(i, j);
        best = std::max(best, std::sqrt(r));
    }
    return best;
}

struct SpectralNormResult {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
    Vector right_vector; // top right-singular vector estimate, reusable as a warm start
};

namespace detail {

inline SpectralNormResult power_phase(const Matrix& m, Vector v, double tol, int max_iters) {
    SpectralNormResult res;
    double nv = norm2(v);
    if (nv == 0.0) return res;
    for (double& x : v) x /= nv;

    double sigma_prev = -1.0;
    for (int it = 1; it <= max_iters; ++it) {
        Vector w = matvec(m, v);
        const double sigma = norm2(w);
        res.iterations = it;
        if (sigma == 0.0) {
            // v is in the null space; caller restarts from another vector.
            res.value = 0.0;
            res.right_vector = v;
            return res;
        }
        Vector u = matvec_t(m, w);
        const double nu = norm2(u);
        if (nu == 0.0) {
            res.value = sigma;
            res.right_vector = v;
            return res;
        }
        for (std::size_t j = 0; j < u.size(); ++j) v[j] = u[j] / nu;
        res.value = sigma;
        if (sigma_prev >= 0.0 && std::fabs(sigma - sigma_prev) <= tol * sigma) {
            res.converged = true;
            res.right_vector = v;
            return res;
        }
        sigma_prev = sigma;
    }
    res.right_vector = v;
    return res;
}

} // namespace detail

// Largest singular value by power iteration on m^T m. Deterministic: starts
// from the normalized all-ones vector; if that stagnates within 10 iterations
// (which is what an unlucky orthogonal start looks like) one seeded random
// restart is taken and the larger estimate wins.
inline SpectralNormResult spectral_norm(const Matrix& m, double tol = 1e-8, int max_iters = 100000) {
    if (m.rows == 0 || m.cols == 0) throw NumericError("spectral_norm: empty matrix");
    if (tol <= 0.0) throw NumericError("spectral_norm: tol must be positive");
    if (max_iters < 1) throw NumericError("spectral_norm: max_iters must be >= 1");

    Vector ones(m.cols, 1.0);
    SpectralNormResult first = detail::power_phase(m, ones, tol, max_iters);

    const bool suspicious = (!first.converged && first.value == 0.0) ||
                            (first.converged && first.iterations <= 10);
    if (suspicious) {
        Rng rng(0x51ab5eedull);
        Vector v(m.cols);
        for (double& x : v) x = rng.normal();
        SpectralNormResult second = detail::power_phase(m, std::move(v), tol, max_iters);
        if (second.value > first.value) {
            second.converged = second.converged || first.converged;
            return second;
        }
        first.converged = first.converged || second.converged;
    }
    return first;
}

// Exact-to-roundoff top singular value for matrices up to 16x16, via cyclic
// Jacobi on the smaller Gram matrix. Test oracle for spectral_norm.
inline double svd_bruteforce(const Matrix& m) {
    if (m.rows == 0 || m.cols == 0) throw NumericError("svd_bruteforce: empty matrix");
    if (m.rows > 16 || m.cols > 16)
        throw NumericError("svd_bruteforce: refusing matrices larger than 16x16 (" +
                           std::to_string(m.rows) + "x" + std::to_string(m.cols) + ")");

    const Matrix mt = m.transposed();
    const Matrix& s = (m.rows <= m.cols) ? m : mt;   // s has rows <= cols
    const std::size_t n = s.rows;

    // Gram matrix s s^T, size n x n, symmetric PSD.
    Matrix b(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < s.cols; ++k) acc += s.at(i, k) * s.at(j, k);
            b.at(i, j) = acc;
            b.at(j, i) = acc;
        }

    double scale = 0.0;
    for (double v : b.a) scale = std::max(scale, std::fabs(v));
    if (scale == 0.0) return 0.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += b.at(p, q) * b.at(p, q);
        if (off <= 1e-30 * scale * scale) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = b.at(p, q);
                if (std::fabs(apq) <= 1e-300) continue;
                const double app = b.at(p, p);
                const double aqq = b.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double bkp = b.at(k, p);
                    const double bkq = b.at(k, q);
                    b.at(k, p) = c * bkp - sn * bkq;
                    b.at(k, q) = sn * bkp + c * bkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double bpk = b.at(p, k);
                    const double bqk = b.at(q, k);
                    b.at(p, k) = c * bpk - sn * bqk;
                    b.at(q, k) = sn * bpk + c * bqk;
                }
            }
        }
    }

    double lmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) lmax = std::max(lmax, b.at(i, i));
    return std::sqrt(std::max(lmax, 0.0));
}

inline Vector project_l2(const Vector& v, double radius) {
    if (radius < 0.0) throw NumericError("project_l2: negative radius");
    const double n = norm2(v);
    // The slack absorbs the one-ulp norm wobble of a vector already scaled to
    // the boundary, making the projection exactly idempotent.
    if (n <= radius * (1.0 + 1e-12)) return v;
    Vector out(v.size());
    const double f = radius / n;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * f;
    return out;
}

inline Vector project_linf(const Vector& v, double radius) {
    if (radius < 0.0) throw NumericError("project_linf: negative radius");
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i], -radius, radius);
    return out;
}

} // namespace atl
