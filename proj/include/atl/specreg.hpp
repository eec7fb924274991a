#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "atl/linalg.hpp"
#include "atl/nn.hpp"

namespace atl {

// Absent beta means no regularization at all.
struct SpectralCap {
    std::optional<double> beta;

    static SpectralCap none() { return {}; }
    static SpectralCap at(double b) {
        if (b <= 0.0) throw NumericError("spectral cap must be positive");
        return {b};
    }
};

// W / max(1, ||W||_2 / beta): identical matrix below the cap, rescaled to
// spectral norm beta above it.
inline Matrix normalize_layer(const Matrix& w, const SpectralCap& cap, double tol = 1e-8) {
    if (!cap.beta) return w;
    const double sigma = spectral_norm(w, tol).value;
    if (sigma <= *cap.beta) return w;
    Matrix out = w;
    const double f = *cap.beta / sigma;
    for (double& v : out.a) v *= f;
    return out;
}

inline Network normalize_network(const Network& net, const SpectralCap& cap, double tol = 1e-8) {
    Network out = net;
    for (auto& layer : out.layers) layer.W = normalize_layer(layer.W, cap, tol);
    return out;
}

// Per-step projection used inside the training loop. Power iteration is
// re-warmed from the previous step's singular vector per layer, so the per
// step cost after the first projection is a handful of matvecs.
class CapProjector {
  public:
    CapProjector(SpectralCap cap, double tol = 1e-6) : cap_(cap), tol_(tol) {}

    void apply(Network& net) {
        if (!cap_.beta) return;
        if (warm_.size() != net.layers.size()) warm_.assign(net.layers.size(), Vector{});
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            Matrix& w = net.layers[i].W;
            SpectralNormResult r;
            if (warm_[i].size() == w.cols) {
                r = detail::power_phase(w, warm_[i], tol_, 1000);
                if (!r.converged) r = spectral_norm(w, tol_, 100000);
            } else {
                r = spectral_norm(w, tol_, 100000);
            }
            warm_[i] = r.right_vector;
            if (r.value > *cap_.beta) {
                const double f = *cap_.beta / r.value;
                for (double& v : w.a) v *= f;
            }
        }
    }

  private:
    SpectralCap cap_;
    double tol_;
    std::vector<Vector> warm_;
};

// Best-validation-snapshot tracker with strict improvement and a patience
// cutoff. Higher metric is better.
struct EarlyStop {
    int patience = 10;
    double best_metric = -std::numeric_limits<double>::infinity();
    Network snapshot;
    int epochs_since_improvement = 0;
    int best_epoch = -1;

    explicit EarlyStop(int patience_ = 10) : patience(patience_) {}

    // Returns true when training should stop.
    bool step(const Network& model, double metric, int epoch) {
        if (metric > best_metric) {
            best_metric = metric;
            snapshot = model;
            best_epoch = epoch;
            epochs_since_improvement = 0;
        } else {
            ++epochs_since_improvement;
        }
        return epochs_since_improvement >= patience;
    }
};

} // namespace atl
