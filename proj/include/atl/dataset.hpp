#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "atl/error.hpp"
#include "atl/linalg.hpp"
#include "atl/rng.hpp"

namespace atl {

// Identifies the exact index set a dataset came from: the generating source,
// the chain of splits below it, and the seed that drove the selection.
// Two datasets with the same source overlap iff one path is an ancestor of
// the other (or they are equal).
struct Lineage {
    std::string source;
    std::string path = "root";
    std::uint64_t seed = 0;

    Lineage child(const std::string& step, std::uint64_t split_seed) const {
        return {source, path + "/" + step, split_seed};
    }
};

inline bool lineages_disjoint(const Lineage& a, const Lineage& b) {
    if (a.source != b.source) return true; // independent sources
    if (a.path == b.path) return false;
    const auto prefix = [](const std::string& p, const std::string& q) {
        return q.size() > p.size() && q.compare(0, p.size(), p) == 0 && q[p.size()] == '/';
    };
    return !prefix(a.path, b.path) && !prefix(b.path, a.path);
}

struct Dataset {
    std::vector<Vector> x;
    std::vector<int> y;
    int classes = 0;
    std::optional<std::pair<double, double>> domain; // per-feature box, e.g. [0,1] images
    Lineage lineage;

    std::size_t size() const { return x.size(); }
    std::size_t dim() const { return x.empty() ? 0 : x[0].size(); }

    Dataset subset(const std::vector<std::size_t>& idx, const std::string& step,
                   std::uint64_t split_seed) const {
        Dataset d;
        d.classes = classes;
        d.domain = domain;
        d.lineage = lineage.child(step, split_seed);
        d.x.reserve(idx.size());
        d.y.reserve(idx.size());
        for (std::size_t i : idx) {
            d.x.push_back(x[i]);
            d.y.push_back(y[i]);
        }
        return d;
    }
};

namespace detail {

// Orthonormal basis of the sum-zero hyperplane of R^k, deterministic.
inline std::vector<Vector> sum_zero_basis(std::size_t k) {
    std::vector<Vector> basis;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        Vector v(k, 0.0);
        for (std::size_t j = 0; j <= i; ++j) v[j] = 1.0;
        v[i + 1] = -static_cast<double>(i + 1);
        const double n = norm2(v);
        for (double& t : v) t /= n;
        basis.push_back(std::move(v));
    }
    return basis;
}

inline std::vector<Vector> orthonormal_columns(std::size_t rows, std::size_t cols, Rng& rng) {
    std::vector<Vector> q;
    for (std::size_t c = 0; c < cols; ++c) {
        Vector v(rows);
        for (double& t : v) t = rng.normal();
        for (const Vector& prev : q) {
            const double d = dot(v, prev);
            for (std::size_t i = 0; i < rows; ++i) v[i] -= d * prev[i];
        }
        const double n = norm2(v);
        if (n < 1e-12) { // retry this column
            --c;
            continue;
        }
        for (double& t : v) t /= n;
        q.push_back(std::move(v));
    }
    return q;
}

} // namespace detail

// Class means on a regular simplex of circumradius `separation` (seeded random
// orientation), unit-covariance Gaussian noise, labels round-robin.
inline Dataset gen_gaussian_mixture(int classes, std::size_t dim, double separation, std::size_t n,
                                    std::uint64_t seed) {
    if (classes < 2) throw UsageError("gen_gaussian_mixture: need at least 2 classes");
    if (n < static_cast<std::size_t>(classes))
        throw UsageError("gen_gaussian_mixture: need at least one sample per class");
    Rng rng(seed);

    const std::size_t k = static_cast<std::size_t>(classes);
    std::vector<Vector> means(k, Vector(dim, 0.0));
    if (dim >= k - 1) {
        // Simplex vertices in the sum-zero hyperplane of R^k, rotated into R^dim.
        const auto hyper = detail::sum_zero_basis(k);
        const auto rot = detail::orthonormal_columns(dim, k - 1, rng);
        const double vertex_scale = std::sqrt(static_cast<double>(k) / (k - 1.0));
        for (std::size_t c = 0; c < k; ++c) {
            Vector vertex(k, -1.0 / static_cast<double>(k));
            vertex[c] += 1.0;
            for (double& t : vertex) t *= vertex_scale; // circumradius 1
            for (std::size_t b = 0; b < k - 1; ++b) {
                const double coord = dot(vertex, hyper[b]) * separation;
                for (std::size_t i = 0; i < dim; ++i) means[c][i] += coord * rot[b][i];
            }
        }
    } else {
        // Too few dimensions for a regular simplex: seeded unit directions.
        for (std::size_t c = 0; c < k; ++c) {
            Vector v(dim);
            for (double& t : v) t = rng.normal();
            const double nv = norm2(v);
            for (std::size_t i = 0; i < dim; ++i) means[c][i] = separation * v[i] / nv;
        }
    }

    Dataset d;
    d.classes = classes;
    d.lineage = {"gm:" + std::to_string(classes) + "x" + std::to_string(dim) + ":sep" +
                     std::to_string(separation) + ":n" + std::to_string(n) + ":s" +
                     std::to_string(seed),
                 "root", seed};
    d.x.reserve(n);
    d.y.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % k);
        Vector v(dim);
        for (std::size_t j = 0; j < dim; ++j) v[j] = means[label][j] + rng.normal();
        d.x.push_back(std::move(v));
        d.y.push_back(label);
    }
    return d;
}

namespace detail {

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace detail

// Rows are comma-separated features followed by an integer label.
inline Dataset load_csv(const std::string& path, int class_count,
                        std::optional<std::pair<double, double>> domain = std::nullopt,
                        bool has_header = false) {
    std::ifstream in(path);
    if (!in) throw DataError("load_csv: cannot open " + path);
    std::stringstream whole;
    whole << in.rdbuf();
    const std::string content = whole.str();

    Dataset d;
    d.classes = class_count;
    d.domain = domain;
    d.lineage = {"csv:" + std::to_string(detail::fnv1a(content)), "root", 0};

    std::istringstream lines(content);
    std::string line;
    std::size_t lineno = 0;
    std::size_t expected_dim = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (has_header && lineno == 1) continue;
        if (line.empty()) continue;
        std::vector<double> fields;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                fields.push_back(std::stod(cell, &used));
                if (used != cell.size() && cell.find_first_not_of(" \t\r", used) != std::string::npos)
                    throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw DataError("load_csv: malformed value '" + cell + "' at line " +
                                std::to_string(lineno));
            }
        }
        if (fields.size() < 2)
            throw DataError("load_csv: need at least one feature and a label at line " +
                            std::to_string(lineno));
        const double label_field = fields.back();
        fields.pop_back();
        const int label = static_cast<int>(label_field);
        if (label != label_field || label < 0 || label >= class_count)
            throw DataError("load_csv: label out of range at line " + std::to_string(lineno));
        if (expected_dim == 0) expected_dim = fields.size();
        if (fields.size() != expected_dim)
            throw DataError("load_csv: inconsistent column count at line " + std::to_string(lineno));
        d.x.push_back(std::move(fields));
        d.y.push_back(label);
    }
    if (d.x.empty()) throw DataError("load_csv: no samples in " + path);
    return d;
}

struct DataNormInfo {
    double spectral = 0.0;    // top singular value of the stacked n x d matrix
    double mean_norm = 0.0;   // mean per-sample L2 norm, for relative budgets
};

inline DataNormInfo data_norm_bound(const Dataset& data) {
    if (data.size() == 0) throw DataError("data_norm_bound: empty dataset");
    DataNormInfo info;
    for (const Vector& v : data.x) info.mean_norm += norm2(v);
    info.mean_norm /= static_cast<double>(data.size());

    const std::size_t n = data.size(), d = data.dim();
    Matrix stacked(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) stacked.at(i, j) = data.x[i][j];
    if (n <= 16 && d <= 16) {
        info.spectral = svd_bruteforce(stacked);
    } else {
        info.spectral = spectral_norm(stacked, 1e-10, 200000).value;
    }
    return info;
}

} // namespace atl
