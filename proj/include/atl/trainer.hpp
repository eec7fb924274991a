#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "atl/attacks.hpp"
#include "atl/dataset.hpp"
#include "atl/error.hpp"
#include "atl/nn.hpp"
#include "atl/rng.hpp"
#include "atl/specreg.hpp"

namespace atl {

enum class OptimKind { adam, sgd };

struct OptimConfig {
    OptimKind kind = OptimKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;
    double momentum = 0.0; // sgd
};

struct EarlyStopConfig {
    int patience = 10;
    double val_fraction = 0.3;
};

struct ArchSpec {
    std::vector<std::size_t> dims;
    Activation hidden = Activation::tanh();

    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < dims.size(); ++i)
            s += (i ? "-" : "") + std::to_string(dims[i]);
        return s + ":" + hidden.name();
    }
};

// "2-8-2:tanh" -> dims {2,8,2}, tanh hidden layers, identity output.
inline ArchSpec parse_arch(const std::string& s) {
    ArchSpec a;
    const auto colon = s.find(':');
    a.hidden = colon == std::string::npos ? Activation::tanh()
                                          : Activation::parse(s.substr(colon + 1));
    std::string dims = s.substr(0, colon);
    std::size_t pos = 0;
    while (pos < dims.size()) {
        auto dash = dims.find('-', pos);
        if (dash == std::string::npos) dash = dims.size();
        const std::string tok = dims.substr(pos, dash - pos);
        try {
            const long v = std::stol(tok);
            if (v < 1) throw std::invalid_argument(tok);
            a.dims.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw UsageError("bad architecture token '" + tok + "' in '" + s + "'");
        }
        pos = dash + 1;
    }
    if (a.dims.size() < 2) throw UsageError("architecture needs at least input and output dims: " + s);
    return a;
}

struct TrainConfig {
    int epochs = 100;
    int batch_size = 128;
    OptimConfig optim;
    std::optional<AttackSpec> adversarial;
    SpectralCap cap = SpectralCap::none();
    std::optional<EarlyStopConfig> early_stop;
    Loss loss = Loss::brier();
    std::uint64_t seed = 0;
    bool log_progress = false;
    std::function<void(const Network&, int)> step_observer; // test hook
};

struct TrainReport {
    std::vector<double> train_loss; // epoch-mean training objective
    std::vector<double> train_acc;  // clean accuracy on the training data
    std::vector<double> val_acc;    // present when early stopping is active
    int epochs_run = 0;
    int stopped_epoch = -1; // epoch of the snapshot actually returned
    int steps_per_epoch = 0;
    int total_steps = 0;
    double attack_step_size = 0.0;
};

namespace detail {

inline Network init_network(const ArchSpec& arch, std::uint64_t seed) {
    Network net = make_mlp(arch.dims, arch.hidden);
    Rng rng(Rng::derive(seed, 0xA11C));
    for (auto& layer : net.layers) {
        const double b = 1.0 / std::sqrt(static_cast<double>(layer.W.cols));
        for (double& v : layer.W.a) v = rng.uniform(-b, b);
    }
    return net;
}

class Optimizer {
  public:
    Optimizer(const OptimConfig& cfg, const Network& net) : cfg_(cfg) {
        for (const auto& l : net.layers) {
            m_.emplace_back(l.W.rows, l.W.cols);
            v_.emplace_back(l.W.rows, l.W.cols);
        }
    }

    void step(Network& net, const std::vector<Matrix>& grads) {
        ++t_;
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            auto& w = net.layers[li].W.a;
            const auto& g = grads[li].a;
            if (cfg_.kind == OptimKind::sgd) {
                auto& mom = m_[li].a;
                for (std::size_t i = 0; i < w.size(); ++i) {
                    mom[i] = cfg_.momentum * mom[i] + g[i];
                    w[i] -= cfg_.lr * mom[i];
                }
            } else {
                auto& m = m_[li].a;
                auto& v = v_[li].a;
                const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
                const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
                for (std::size_t i = 0; i < w.size(); ++i) {
                    m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                    v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                    w[i] -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps_hat);
                }
            }
        }
    }

  private:
    OptimConfig cfg_;
    std::vector<Matrix> m_, v_;
    int t_ = 0;
};

inline double clean_accuracy(const Network& net, const Dataset& data) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vector z = forward(net, data.x[i]);
        std::size_t best = 0;
        for (std::size_t j = 1; j < z.size(); ++j)
            if (z[j] > z[best]) best = j;
        if (static_cast<int>(best) == data.y[i]) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(data.size());
}

} // namespace detail

// Mini-batch training with optional per-sample adversarial perturbation,
// per-step spectral projection and best-validation early stopping. Fully
// deterministic in (seed, config, data).
inline std::pair<Network, TrainReport> train(const Dataset& data, const ArchSpec& arch,
                                             const TrainConfig& cfg,
                                             const Dataset* validation = nullptr) {
    if (data.size() == 0) throw DataError("train: empty dataset");
    if (cfg.epochs < 1) throw UsageError("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw UsageError("train: batch_size must be >= 1");
    if (cfg.optim.lr <= 0.0) throw UsageError("train: learning rate must be positive");
    if (arch.dims.front() != data.dim())
        throw DataError("train: architecture input dim != data dim");
    if (cfg.early_stop && validation == nullptr)
        throw UsageError("train: early stopping requires a validation set");
    if (cfg.adversarial && cfg.adversarial->method == AttackMethod::lambda_opt)
        throw UsageError("train: adversarial training supports fgm/fgsm/pgd methods only");

    Network net = detail::init_network(arch, cfg.seed);
    CapProjector projector(cfg.cap);
    projector.apply(net);
    detail::Optimizer opt(cfg.optim, net);

    TrainReport report;
    report.steps_per_epoch =
        static_cast<int>((data.size() + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size));
    if (cfg.adversarial) report.attack_step_size = cfg.adversarial->resolved_step();

    std::optional<EarlyStop> stopper;
    if (cfg.early_stop) stopper.emplace(cfg.early_stop->patience);

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    int step_index = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(Rng::derive(cfg.seed, 0x5AFE0000ull + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Vector> xs;
            std::vector<int> ys;
            xs.reserve(end - start);
            ys.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t s = order[i];
                if (cfg.adversarial && cfg.adversarial->epsilon > 0.0) {
                    const AttackResult a =
                        run_attack(net, cfg.loss, data.x[s], data.y[s], *cfg.adversarial, data.domain);
                    Vector xp = data.x[s];
                    for (std::size_t j = 0; j < xp.size(); ++j) xp[j] += a.delta[j];
                    xs.push_back(std::move(xp));
                } else {
                    xs.push_back(data.x[s]);
                }
                ys.push_back(data.y[s]);
            }

            double batch_loss = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i)
                batch_loss += loss_value(cfg.loss, forward(net, xs[i]), ys[i]);
            batch_loss /= static_cast<double>(xs.size());
            if (!std::isfinite(batch_loss))
                throw NumericError("train: loss diverged at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(start / cfg.batch_size));
            epoch_loss += batch_loss * static_cast<double>(xs.size());

            const std::vector<Matrix> grads = weight_gradients(net, cfg.loss, xs, ys);
            opt.step(net, grads);
            projector.apply(net);
            ++step_index;
            if (cfg.step_observer) cfg.step_observer(net, step_index);
        }

        report.train_loss.push_back(epoch_loss / static_cast<double>(data.size()));
        report.train_acc.push_back(detail::clean_accuracy(net, data));
        report.epochs_run = epoch + 1;

        if (stopper) {
            const double va = detail::clean_accuracy(net, *validation);
            report.val_acc.push_back(va);
            const bool stop = stopper->step(net, va, epoch);
            if (cfg.log_progress)
                std::cerr << "epoch " << epoch << " loss " << report.train_loss.back() << " acc "
                          << report.train_acc.back() << " val " << va << "\n";
            if (stop) break;
        } else if (cfg.log_progress) {
            std::cerr << "epoch " << epoch << " loss " << report.train_loss.back() << " acc "
                      << report.train_acc.back() << "\n";
        }
    }
    report.total_steps = step_index;

    if (stopper && stopper->best_epoch >= 0) {
        report.stopped_epoch = stopper->best_epoch;
        return {stopper->snapshot, report};
    }
    report.stopped_epoch = report.epochs_run - 1;
    return {net, report};
}

inline std::pair<Network, TrainReport> train_erm(const Dataset& data, const ArchSpec& arch,
                                                 const TrainConfig& cfg,
                                                 const Dataset* validation = nullptr) {
    if (cfg.adversarial) throw UsageError("train_erm: adversarial spec present; use train_adversarial");
    return train(data, arch, cfg, validation);
}

inline std::pair<Network, TrainReport> train_adversarial(const Dataset& data, const ArchSpec& arch,
                                                         const TrainConfig& cfg,
                                                         const Dataset* validation = nullptr) {
    if (!cfg.adversarial) throw UsageError("train_adversarial: config has no attack spec");
    return train(data, arch, cfg, validation);
}

namespace detail {

inline std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& data) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.classes));
    for (std::size_t i = 0; i < data.size(); ++i)
        by_class[static_cast<std::size_t>(data.y[i])].push_back(i);
    return by_class;
}

} // namespace detail

// Stratified disjoint halves of sizes floor(n/2) and ceil(n/2); per-class
// counts differ by at most one between the halves. A single-sample class goes
// to the first half (the substitute side) with a warning.
inline std::pair<Dataset, Dataset> split_half(const Dataset& data, std::uint64_t seed) {
    if (data.size() < 2) throw DataError("split_half: need at least 2 samples");
    Rng rng(Rng::derive(seed, 0x11A1F));
    auto by_class = detail::indices_by_class(data);

    std::vector<std::size_t> first, second;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        if (idx.size() == 1) {
            std::cerr << "split_half: class " << c
                      << " has a single sample; assigning it to the first half\n";
            first.push_back(idx[0]);
            continue;
        }
        rng.shuffle(idx);
        const std::size_t base = idx.size() / 2;
        // Give the odd extra to whichever half is behind; ties feed the second
        // half so the overall sizes land on floor/ceil.
        std::size_t to_first = base;
        if (idx.size() % 2 == 1 && first.size() < second.size()) ++to_first;
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < to_first ? first : second).push_back(idx[i]);
    }
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {data.subset(first, "h0", seed), data.subset(second, "h1", seed)};
}

// Stratified split with |first| = round(fraction * n); per-class shares are
// floored and the remainder goes to the largest fractional parts.
inline std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction,
                                                    std::uint64_t seed) {
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw UsageError("split_validation: fraction must be in (0, 1)");
    if (data.size() < 2) throw DataError("split_validation: need at least 2 samples");
    Rng rng(Rng::derive(seed, 0x7A11D));
    auto by_class = detail::indices_by_class(data);

    const std::size_t want = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(data.size())));
    std::vector<std::size_t> takes(by_class.size(), 0);
    std::vector<std::pair<double, std::size_t>> fracs;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const double share = fraction * static_cast<double>(by_class[c].size());
        takes[c] = std::min(by_class[c].size(), static_cast<std::size_t>(share));
        assigned += takes[c];
        fracs.push_back({share - static_cast<double>(takes[c]), c});
    }
    std::sort(fracs.begin(), fracs.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (const auto& [frac, c] : fracs) {
        if (assigned >= want) break;
        if (takes[c] < by_class[c].size()) {
            ++takes[c];
            ++assigned;
        }
    }

    std::vector<std::size_t> first, second;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < takes[c] ? first : second).push_back(idx[i]);
    }
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {data.subset(first, "v0", seed), data.subset(second, "v1", seed)};
}

} // namespace atl
