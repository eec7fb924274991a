#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "atl/attacks.hpp"
#include "atl/capacity.hpp"
#include "atl/dataset.hpp"
#include "atl/metrics.hpp"
#include "atl/model_io.hpp"
#include "atl/report.hpp"
#include "atl/trainer.hpp"

namespace atl {

// Dataset descriptor: "gm:<classes>x<dim>:sep<separation>[:n<count>]" or
// "csv:<path>:k<classes>".
struct DataSpec {
    std::string raw;
    bool is_csv = false;
    std::string csv_path;
    int classes = 2;
    std::size_t dim = 2;
    double separation = 4.0;
    std::size_t n = 1000;

    static DataSpec parse(const std::string& s) {
        DataSpec d;
        d.raw = s;
        std::vector<std::string> parts;
        std::size_t pos = 0;
        while (pos <= s.size()) {
            auto colon = s.find(':', pos);
            if (colon == std::string::npos) colon = s.size();
            parts.push_back(s.substr(pos, colon - pos));
            pos = colon + 1;
        }
        if (parts.empty()) throw UsageError("empty data spec");
        if (parts[0] == "csv") {
            if (parts.size() < 3 || parts[2].size() < 2 || parts[2][0] != 'k')
                throw UsageError("csv data spec is csv:<path>:k<classes>: " + s);
            d.is_csv = true;
            d.csv_path = parts[1];
            d.classes = std::stoi(parts[2].substr(1));
            return d;
        }
        if (parts[0] != "gm") throw UsageError("unknown data source '" + parts[0] + "' in " + s);
        if (parts.size() < 2) throw UsageError("gm data spec is gm:<classes>x<dim>:sep<s>[:n<n>]");
        const auto x = parts[1].find('x');
        if (x == std::string::npos) throw UsageError("gm spec needs <classes>x<dim>: " + s);
        d.classes = std::stoi(parts[1].substr(0, x));
        d.dim = static_cast<std::size_t>(std::stoul(parts[1].substr(x + 1)));
        for (std::size_t i = 2; i < parts.size(); ++i) {
            if (parts[i].rfind("sep", 0) == 0)
                d.separation = std::stod(parts[i].substr(3));
            else if (parts[i].rfind("n", 0) == 0)
                d.n = static_cast<std::size_t>(std::stoul(parts[i].substr(1)));
            else
                throw UsageError("unknown gm spec field '" + parts[i] + "' in " + s);
        }
        return d;
    }

    Dataset realize(std::uint64_t seed) const {
        if (is_csv) return load_csv(csv_path, classes);
        return gen_gaussian_mixture(classes, dim, separation, n, seed);
    }
};

struct ExperimentConfig {
    DataSpec data;
    std::size_t train_n = 0; // 0: half of the dataset is the training pool
    ArchSpec sub_arch;
    std::vector<ArchSpec> target_archs;

    // substitute training
    int epochs = 100;
    int batch_size = 128;
    OptimConfig optim;
    AttackSpec attack{AttackMethod::pgd_l2};
    double gamma = 0.05;                 // relative budget
    std::optional<double> epsilon_abs;   // overrides gamma when set
    std::optional<double> beta;          // spectral cap
    bool early_stop = false;
    int patience = 10;
    double val_fraction = 0.3;

    // target training
    int target_epochs = 100;

    // capacity report inputs
    std::optional<double> cap_lambda; // default 4 * kappa
    double cap_tau = 0.5;
    double cap_omega = 0.05;

    // optional twin substitute for intersection rates (its cap; typically none)
    std::optional<double> intersect_with_beta;
    bool intersect_on_clean = false;

    Loss loss = Loss::brier();
    std::uint64_t seed = 0;
    std::string out_dir; // empty: nothing written

    // The resolved config captures the science of the run, not its disk
    // location, so a rerun into a different directory stays byte-identical.
    KvDoc resolved() const {
        KvDoc doc;
        doc.set("subcommand", std::string("experiment"));
        doc.set("data", data.raw);
        doc.set("train_n", train_n);
        doc.set("arch", sub_arch.to_string());
        for (std::size_t i = 0; i < target_archs.size(); ++i)
            doc.set("target_arch" + std::to_string(i), target_archs[i].to_string());
        doc.set("epochs", epochs);
        doc.set("batch_size", batch_size);
        doc.set("optimizer", std::string(optim.kind == OptimKind::adam ? "adam" : "sgd"));
        doc.set("lr", optim.lr);
        doc.set("adam_beta1", optim.beta1);
        doc.set("adam_beta2", optim.beta2);
        doc.set("adam_eps", optim.eps_hat);
        doc.set("sgd_momentum", optim.momentum);
        doc.set("attack", attack_method_name(attack.method));
        doc.set("steps", attack.steps);
        doc.set("gamma", gamma);
        if (epsilon_abs) doc.set("epsilon", *epsilon_abs);
        if (beta) doc.set("beta", *beta);
        doc.set("early_stop", early_stop);
        doc.set("patience", patience);
        doc.set("val_fraction", val_fraction);
        doc.set("target_epochs", target_epochs);
        if (cap_lambda) doc.set("lambda", *cap_lambda);
        doc.set("tau", cap_tau);
        doc.set("omega", cap_omega);
        if (intersect_with_beta) doc.set("intersect_beta", *intersect_with_beta);
        doc.set("intersect_on_clean", intersect_on_clean);
        doc.set("loss", loss.name());
        doc.set("seed", seed);
        return doc;
    }

    static ExperimentConfig from_doc(const KvDoc& doc) {
        ExperimentConfig c;
        c.data = DataSpec::parse(doc.get("data"));
        c.train_n = static_cast<std::size_t>(doc.get_long("train_n"));
        c.sub_arch = parse_arch(doc.get("arch"));
        for (int i = 0; doc.has("target_arch" + std::to_string(i)); ++i)
            c.target_archs.push_back(parse_arch(doc.get("target_arch" + std::to_string(i))));
        c.epochs = static_cast<int>(doc.get_long("epochs"));
        c.batch_size = static_cast<int>(doc.get_long("batch_size"));
        c.optim.kind = doc.get("optimizer") == "sgd" ? OptimKind::sgd : OptimKind::adam;
        c.optim.lr = doc.get_double("lr");
        c.optim.beta1 = doc.get_double("adam_beta1");
        c.optim.beta2 = doc.get_double("adam_beta2");
        c.optim.eps_hat = doc.get_double("adam_eps");
        c.optim.momentum = doc.get_double("sgd_momentum");
        c.attack.method = parse_attack_method(doc.get("attack"));
        c.attack.steps = static_cast<int>(doc.get_long("steps"));
        c.gamma = doc.get_double("gamma");
        if (doc.has("epsilon")) c.epsilon_abs = doc.get_double("epsilon");
        if (doc.has("beta")) c.beta = doc.get_double("beta");
        c.early_stop = doc.get("early_stop") == "1";
        c.patience = static_cast<int>(doc.get_long("patience"));
        c.val_fraction = doc.get_double("val_fraction");
        c.target_epochs = static_cast<int>(doc.get_long("target_epochs"));
        if (doc.has("lambda")) c.cap_lambda = doc.get_double("lambda");
        c.cap_tau = doc.get_double("tau");
        c.cap_omega = doc.get_double("omega");
        if (doc.has("intersect_beta")) c.intersect_with_beta = doc.get_double("intersect_beta");
        c.intersect_on_clean = doc.get_or("intersect_on_clean", "0") == "1";
        c.loss = Loss::parse(doc.get("loss"));
        c.seed = doc.get_u64("seed");
        return c;
    }
};

struct ExperimentResult {
    double epsilon = 0.0;
    Network substitute;
    std::vector<Network> targets;
    TrainReport sub_report;
    double sub_train_acc = 0.0;
    double sub_test_acc = 0.0;
    double acc_gap = 0.0;
    std::vector<TransferabilityRate> rates;
    std::vector<TransferabilityRate> intersection_rates; // when a twin is trained
    TransferScore score;
    CapacityReport capacity;
    KvDoc report;
};

// Full pipeline: half/half split of the training pool, adversarially trained
// substitute on one half, ERM targets on the other, attack evaluation on the
// held-out pool, capacity report for the substitute.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.target_archs.empty()) throw UsageError("experiment: need at least one target arch");

    const Dataset all = cfg.data.realize(cfg.seed);
    const std::size_t train_n = cfg.train_n == 0 ? all.size() / 2 : cfg.train_n;
    if (train_n < 2 || train_n >= all.size())
        throw DataError("experiment: train_n must be in [2, dataset size)");

    // Leading indices form the training pool; generation interleaves classes
    // so both pools stay balanced.
    std::vector<std::size_t> head(train_n), tail(all.size() - train_n);
    for (std::size_t i = 0; i < train_n; ++i) head[i] = i;
    for (std::size_t i = train_n; i < all.size(); ++i) tail[i - train_n] = i;
    const Dataset train_pool = all.subset(head, "t0", cfg.seed);
    const Dataset test_pool = all.subset(tail, "t1", cfg.seed);

    const auto [sub_half, tgt_half] = split_half(train_pool, cfg.seed);

    ExperimentResult res;
    res.epsilon = cfg.epsilon_abs ? *cfg.epsilon_abs
                                  : cfg.gamma * data_norm_bound(sub_half).mean_norm;

    // Validation comes out of the held-out pool, never the training halves.
    Dataset val, test_eval;
    if (cfg.early_stop) {
        auto [v, rest] = split_validation(test_pool, cfg.val_fraction, cfg.seed);
        val = std::move(v);
        test_eval = std::move(rest);
    } else {
        test_eval = test_pool;
    }

    TrainConfig sub_cfg;
    sub_cfg.epochs = cfg.epochs;
    sub_cfg.batch_size = cfg.batch_size;
    sub_cfg.optim = cfg.optim;
    sub_cfg.loss = cfg.loss;
    sub_cfg.seed = Rng::derive(cfg.seed, 1);
    AttackSpec atk = cfg.attack;
    atk.epsilon = res.epsilon;
    sub_cfg.adversarial = atk;
    if (cfg.beta) sub_cfg.cap = SpectralCap::at(*cfg.beta);
    if (cfg.early_stop) sub_cfg.early_stop = EarlyStopConfig{cfg.patience, cfg.val_fraction};

    auto [sub, sub_report] = train_adversarial(sub_half, cfg.sub_arch, sub_cfg,
                                               cfg.early_stop ? &val : nullptr);
    res.substitute = std::move(sub);
    res.sub_report = std::move(sub_report);

    std::optional<Network> twin;
    if (cfg.intersect_with_beta) {
        TrainConfig twin_cfg = sub_cfg;
        twin_cfg.cap = *cfg.intersect_with_beta > 0.0 ? SpectralCap::at(*cfg.intersect_with_beta)
                                                      : SpectralCap::none();
        twin = train_adversarial(sub_half, cfg.sub_arch, twin_cfg,
                                 cfg.early_stop ? &val : nullptr)
                   .first;
    }

    TrainConfig tgt_cfg;
    tgt_cfg.epochs = cfg.target_epochs;
    tgt_cfg.batch_size = cfg.batch_size;
    tgt_cfg.loss = cfg.loss;
    for (std::size_t t = 0; t < cfg.target_archs.size(); ++t) {
        tgt_cfg.seed = Rng::derive(cfg.seed, 100 + t);
        res.targets.push_back(train_erm(tgt_half, cfg.target_archs[t], tgt_cfg).first);
    }

    res.sub_train_acc = accuracy(res.substitute, sub_half);
    res.sub_test_acc = accuracy(res.substitute, test_eval);
    res.acc_gap = res.sub_train_acc - res.sub_test_acc;

    for (const Network& tgt : res.targets) {
        res.rates.push_back(transferability_rate(res.substitute, tgt, atk, cfg.loss, test_eval,
                                                 Eligibility::clean_correct));
        if (twin)
            res.intersection_rates.push_back(transferability_rate(
                res.substitute, tgt, atk, cfg.loss, test_eval,
                cfg.intersect_on_clean ? Eligibility::intersection_clean_correct
                                       : Eligibility::intersection_adv_correct,
                &*twin));
    }

    const AttackFn fn = make_attack_fn(res.substitute, cfg.loss, atk, test_eval.domain);
    res.score = generalization_error(fn, res.targets, cfg.loss, sub_half, test_eval);

    const double kap = kappa(res.substitute, cfg.loss);
    const double lambda = cfg.cap_lambda ? *cfg.cap_lambda : 4.0 * kap;
    res.capacity = generalization_bound(res.substitute, res.targets.front(), cfg.loss,
                                        data_norm_bound(sub_half).spectral, lambda, cfg.cap_tau,
                                        cfg.cap_omega, sub_half.size());

    KvDoc& r = res.report;
    r.set("epsilon", res.epsilon);
    r.set("gamma", cfg.gamma);
    r.set("attack_step_size", res.sub_report.attack_step_size);
    r.set("sub_train_acc", res.sub_train_acc);
    r.set("sub_test_acc", res.sub_test_acc);
    r.set("acc_gap", res.acc_gap);
    r.set("sub_epochs_run", res.sub_report.epochs_run);
    r.set("sub_snapshot_epoch", res.sub_report.stopped_epoch);
    for (std::size_t t = 0; t < res.targets.size(); ++t) {
        const std::string p = "target" + std::to_string(t) + "_";
        r.set(p + "clean_acc", accuracy(res.targets[t], test_eval));
        r.set(p + "transfer_rate", res.rates[t].rate);
        r.set(p + "eligible", res.rates[t].eligible);
        r.set(p + "fooled", res.rates[t].fooled);
        if (t < res.intersection_rates.size()) {
            r.set(p + "intersection_rate", res.intersection_rates[t].rate);
            r.set(p + "intersection_eligible", res.intersection_rates[t].eligible);
        }
    }
    r.set("transfer_loss_empirical", res.score.empirical);
    r.set("transfer_loss_heldout", res.score.heldout);
    r.set("gen_error", res.score.gen_error);
    r.set("gen_error_argmin_empirical", res.score.argmin_empirical);
    r.set("gen_error_argmin_heldout", res.score.argmin_heldout);
    r.set("kappa", res.capacity.kappa);
    r.set("lipschitz_product", res.capacity.lipschitz);
    r.set("capacity_sub", res.capacity.capacity_sub);
    r.set("capacity_tgt", res.capacity.capacity_tgt);
    r.set("data_norm_bound", res.capacity.data_bound);
    r.set("bound_lambda", res.capacity.lambda);
    r.set("bound_tau", res.capacity.tau);
    r.set("bound_omega", res.capacity.omega);
    r.set("bound_value", res.capacity.bound_value);
    r.set("bound_applicable", res.capacity.applicable);
    r.set("contraction_margin", res.capacity.contraction_margin);

    if (!cfg.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.out_dir);
        const auto at = [&](const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); };
        cfg.resolved().save(at("config.txt"));
        res.report.save(at("experiment_report.txt"));
        std::vector<std::string> echo;
        for (const auto& [k, v] : cfg.resolved().entries()) echo.push_back(k + "=" + v);
        save_model(res.substitute, at("substitute.atl"), echo);
        for (std::size_t t = 0; t < res.targets.size(); ++t)
            save_model(res.targets[t], at("target" + std::to_string(t) + ".atl"), echo);

        KvDoc train_doc;
        for (std::size_t e = 0; e < res.sub_report.train_loss.size(); ++e) {
            train_doc.set("epoch" + std::to_string(e) + "_loss", res.sub_report.train_loss[e]);
            train_doc.set("epoch" + std::to_string(e) + "_acc", res.sub_report.train_acc[e]);
            if (e < res.sub_report.val_acc.size())
                train_doc.set("epoch" + std::to_string(e) + "_val_acc", res.sub_report.val_acc[e]);
        }
        train_doc.save(at("substitute_train_report.txt"));
    }
    return res;
}

} // namespace atl
