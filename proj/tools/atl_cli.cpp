// Command-line driver: dataset generation, training, attack evaluation and
// capacity reporting wired into one reproducible pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical or
// assumption failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atl/atl.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::string data;
    std::string arch;
    int epochs = 100;
    int batch_size = 128;
    std::string optimizer = "adam";
    double lr = 1e-3;
    std::string attack = "pgd-l2";
    double gamma = 0.05;
    double epsilon = -1.0; // <0: use gamma
    int steps = 15;
    double beta = 0.0; // 0: no cap
    double lambda = 0.0;
    double tau = 0.5;
    double omega = 0.05;
    bool early_stop = false;
    int patience = 10;
    double val_fraction = 0.3;
    std::string loss = "brier";
    std::uint64_t seed = 0;
    std::string out;
};

atl::OptimConfig make_optim(const CommonFlags& f) {
    atl::OptimConfig o;
    if (f.optimizer == "adam")
        o.kind = atl::OptimKind::adam;
    else if (f.optimizer == "sgd")
        o.kind = atl::OptimKind::sgd;
    else
        throw atl::UsageError("unknown optimizer: " + f.optimizer);
    o.lr = f.lr;
    return o;
}

int cmd_train(const CommonFlags& f, bool adversarial_requested) {
    if (f.out.empty()) throw atl::UsageError("train: --out is required");
    const atl::DataSpec spec = atl::DataSpec::parse(f.data);
    atl::Dataset data = spec.realize(f.seed);

    atl::Dataset val;
    const atl::Dataset* valp = nullptr;
    if (f.early_stop) {
        auto [v, rest] = atl::split_validation(data, f.val_fraction, f.seed);
        val = std::move(v);
        data = std::move(rest);
        valp = &val;
    }

    atl::TrainConfig cfg;
    cfg.epochs = f.epochs;
    cfg.batch_size = f.batch_size;
    cfg.optim = make_optim(f);
    cfg.loss = atl::Loss::parse(f.loss);
    cfg.seed = f.seed;
    cfg.log_progress = true;
    if (f.beta > 0.0) cfg.cap = atl::SpectralCap::at(f.beta);
    if (f.early_stop) cfg.early_stop = atl::EarlyStopConfig{f.patience, f.val_fraction};

    double eps = 0.0;
    if (adversarial_requested) {
        eps = f.epsilon >= 0.0 ? f.epsilon : f.gamma * atl::data_norm_bound(data).mean_norm;
        atl::AttackSpec atk;
        atk.method = atl::parse_attack_method(f.attack);
        atk.epsilon = eps;
        atk.steps = f.steps;
        cfg.adversarial = atk;
    }

    const atl::ArchSpec arch = atl::parse_arch(f.arch);
    auto [net, report] = atl::train(data, arch, cfg, valp);

    fs::create_directories(f.out);
    atl::KvDoc config;
    config.set("subcommand", std::string("train"));
    config.set("data", f.data);
    config.set("arch", f.arch);
    config.set("epochs", f.epochs);
    config.set("batch_size", f.batch_size);
    config.set("optimizer", f.optimizer);
    config.set("lr", f.lr);
    config.set("loss", f.loss);
    config.set("adversarial", adversarial_requested);
    if (adversarial_requested) {
        config.set("attack", f.attack);
        config.set("epsilon", eps);
        config.set("gamma", f.gamma);
        config.set("steps", f.steps);
    }
    if (f.beta > 0.0) config.set("beta", f.beta);
    config.set("early_stop", f.early_stop);
    config.set("patience", f.patience);
    config.set("val_fraction", f.val_fraction);
    config.set("seed", f.seed);
    config.save((fs::path(f.out) / "config.txt").string());

    std::vector<std::string> echo;
    for (const auto& [k, v] : config.entries()) echo.push_back(k + "=" + v);
    atl::save_model(net, (fs::path(f.out) / "model.atl").string(), echo);

    atl::KvDoc rep;
    rep.set("epochs_run", report.epochs_run);
    rep.set("steps_per_epoch", report.steps_per_epoch);
    rep.set("total_steps", report.total_steps);
    rep.set("snapshot_epoch", report.stopped_epoch);
    if (adversarial_requested) rep.set("attack_step_size", report.attack_step_size);
    for (int e = 0; e < report.epochs_run; ++e) {
        rep.set("epoch" + std::to_string(e) + "_loss", report.train_loss[e]);
        rep.set("epoch" + std::to_string(e) + "_acc", report.train_acc[e]);
        if (e < static_cast<int>(report.val_acc.size()))
            rep.set("epoch" + std::to_string(e) + "_val_acc", report.val_acc[e]);
    }
    rep.save((fs::path(f.out) / "train_report.txt").string());
    std::cout << "model written to " << (fs::path(f.out) / "model.atl").string() << "\n";
    return 0;
}

int cmd_experiment(const CommonFlags& f, const std::string& config_path,
                   const std::vector<std::string>& target_archs, std::size_t train_n,
                   double intersect_beta, int target_epochs) {
    atl::ExperimentConfig cfg;
    if (!config_path.empty()) {
        cfg = atl::ExperimentConfig::from_doc(atl::KvDoc::load(config_path));
    } else {
        cfg.data = atl::DataSpec::parse(f.data);
        cfg.train_n = train_n;
        cfg.sub_arch = atl::parse_arch(f.arch);
        for (const auto& t : target_archs) cfg.target_archs.push_back(atl::parse_arch(t));
        cfg.epochs = f.epochs;
        cfg.batch_size = f.batch_size;
        cfg.optim = make_optim(f);
        cfg.attack.method = atl::parse_attack_method(f.attack);
        cfg.attack.steps = f.steps;
        cfg.gamma = f.gamma;
        if (f.epsilon >= 0.0) cfg.epsilon_abs = f.epsilon;
        if (f.beta > 0.0) cfg.beta = f.beta;
        cfg.early_stop = f.early_stop;
        cfg.patience = f.patience;
        cfg.val_fraction = f.val_fraction;
        cfg.target_epochs = target_epochs;
        if (f.lambda > 0.0) cfg.cap_lambda = f.lambda;
        cfg.cap_tau = f.tau;
        cfg.cap_omega = f.omega;
        if (intersect_beta >= 0.0) cfg.intersect_with_beta = intersect_beta;
        cfg.loss = atl::Loss::parse(f.loss);
        cfg.seed = f.seed;
    }
    cfg.out_dir = f.out;

    const atl::ExperimentResult res = atl::run_experiment(cfg);
    std::cout << res.report.to_string();
    return 0;
}

int cmd_bound(const CommonFlags& f, const std::string& sub_path, const std::string& tgt_path,
              double data_bound, std::size_t n) {
    const atl::Network sub = atl::load_model(sub_path).net;
    const atl::Network tgt = atl::load_model(tgt_path).net;

    double bound_b = data_bound;
    std::size_t bound_n = n;
    if (!f.data.empty()) {
        const atl::Dataset data = atl::DataSpec::parse(f.data).realize(f.seed);
        const atl::DataNormInfo info = atl::data_norm_bound(data);
        bound_b = info.spectral;
        if (bound_n == 0) bound_n = data.size();
    }
    if (bound_b <= 0.0) throw atl::UsageError("bound: provide --data or a positive --data-bound");
    if (bound_n == 0) throw atl::UsageError("bound: provide --data or a positive --n");

    const atl::Loss loss = atl::Loss::parse(f.loss);
    const double kap = atl::kappa(sub, loss);
    const double lambda = f.lambda > 0.0 ? f.lambda : 4.0 * kap;
    const atl::CapacityReport rep =
        atl::generalization_bound(sub, tgt, loss, bound_b, lambda, f.tau, f.omega, bound_n);

    atl::KvDoc doc;
    doc.set("kappa", rep.kappa);
    doc.set("lipschitz_product", rep.lipschitz);
    doc.set("capacity_sub", rep.capacity_sub);
    doc.set("capacity_tgt", rep.capacity_tgt);
    doc.set("data_norm_bound", rep.data_bound);
    doc.set("lambda", rep.lambda);
    doc.set("tau", rep.tau);
    doc.set("omega", rep.omega);
    doc.set("n", rep.n);
    doc.set("max_dim", rep.max_dim);
    doc.set("loss_bound", rep.loss_bound);
    doc.set("bound_value", rep.bound_value);
    doc.set("bound_applicable", rep.applicable);
    doc.set("contraction_margin", rep.contraction_margin);
    doc.set("threshold_prefix", rep.threshold_prefix);
    doc.set("threshold_flat", rep.threshold_flat);
    doc.set("assumption_loss_ok", rep.assumptions.loss_ok);
    doc.set("assumption_substitute_ok", rep.assumptions.substitute_ok);
    doc.set("assumption_target_ok", rep.assumptions.target_ok);
    if (!rep.assumptions.diagnostics.empty())
        doc.set("diagnostics", rep.assumptions.diagnostics);
    std::cout << doc.to_string();
    if (!f.out.empty()) {
        fs::create_directories(f.out);
        doc.save((fs::path(f.out) / "capacity_report.txt").string());
    }
    return 0;
}

int cmd_evaluate(const CommonFlags& f, const std::string& sub_path, const std::string& sub2_path,
                 const std::vector<std::string>& target_paths, std::size_t train_n) {
    if (target_paths.empty()) throw atl::UsageError("evaluate: need at least one --target");
    const atl::Network sub = atl::load_model(sub_path).net;
    std::optional<atl::Network> sub2;
    if (!sub2_path.empty()) sub2 = atl::load_model(sub2_path).net;
    std::vector<atl::Network> targets;
    for (const auto& p : target_paths) targets.push_back(atl::load_model(p).net);

    const atl::DataSpec spec = atl::DataSpec::parse(f.data);
    const atl::Dataset all = spec.realize(f.seed);
    const std::size_t tn = train_n == 0 ? all.size() / 2 : train_n;
    if (tn < 2 || tn >= all.size()) throw atl::DataError("evaluate: bad --train-n");
    std::vector<std::size_t> head(tn), tail(all.size() - tn);
    for (std::size_t i = 0; i < tn; ++i) head[i] = i;
    for (std::size_t i = tn; i < all.size(); ++i) tail[i - tn] = i;
    const atl::Dataset train_pool = all.subset(head, "t0", f.seed);
    const atl::Dataset test_pool = all.subset(tail, "t1", f.seed);
    const auto [sub_half, tgt_half] = atl::split_half(train_pool, f.seed);

    const atl::Loss loss = atl::Loss::parse(f.loss);
    atl::AttackSpec atk;
    atk.method = atl::parse_attack_method(f.attack);
    atk.steps = f.steps;
    atk.epsilon = f.epsilon >= 0.0 ? f.epsilon : f.gamma * atl::data_norm_bound(sub_half).mean_norm;
    if (f.lambda > 0.0) atk.lambda = f.lambda;

    const double gen_err = atl::accuracy(sub, sub_half) - atl::accuracy(sub, test_pool);

    std::printf("%-10s", "Gen.Err.");
    for (std::size_t t = 0; t < targets.size(); ++t)
        std::printf("  %-22s", ("TransferRate(target" + std::to_string(t) + ")").c_str());
    if (sub2)
        for (std::size_t t = 0; t < targets.size(); ++t)
            std::printf("  %-22s", ("TransferRate-Int(t" + std::to_string(t) + ")").c_str());
    std::printf("\n%-10.3f", gen_err);
    for (const auto& tgt : targets) {
        const auto r = atl::transferability_rate(sub, tgt, atk, loss, test_pool,
                                                 atl::Eligibility::clean_correct);
        std::printf("  %-22.3f", r.rate);
    }
    if (sub2) {
        for (const auto& tgt : targets) {
            const auto r = atl::transferability_rate(sub, tgt, atk, loss, test_pool,
                                                     atl::Eligibility::intersection_adv_correct,
                                                     &*sub2);
            std::printf("  %-22.3f", r.rate);
        }
    }
    std::printf("\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"norm-bounded attack generation, spectral regularization and "
                 "transferability evaluation for dense networks"};
    app.require_subcommand(1);

    CommonFlags f;
    std::string config_path, sub_path, sub2_path, tgt_path;
    std::vector<std::string> target_archs, target_paths;
    std::size_t train_n = 0, bound_n = 0;
    double data_bound = 0.0, intersect_beta = -1.0;
    int target_epochs = 100;
    bool adversarial = false;

    const auto add_common = [&](CLI::App* cmd, bool with_training) {
        cmd->add_option("--seed", f.seed, "run seed");
        cmd->add_option("--out", f.out, "output directory");
        cmd->add_option("--loss", f.loss, "training/evaluation loss")->capture_default_str();
        if (with_training) {
            cmd->add_option("--data", f.data, "dataset spec, gm:CxD:sepS[:nN] or csv:PATH:kK");
            cmd->add_option("--epochs", f.epochs)->capture_default_str();
            cmd->add_option("--batch-size", f.batch_size)->capture_default_str();
            cmd->add_option("--optimizer", f.optimizer, "adam or sgd")->capture_default_str();
            cmd->add_option("--lr", f.lr)->capture_default_str();
            cmd->add_option("--beta", f.beta, "spectral cap (0 = none)");
            cmd->add_flag("--early-stop", f.early_stop, "early stopping on validation accuracy");
            cmd->add_option("--patience", f.patience)->capture_default_str();
            cmd->add_option("--val-fraction", f.val_fraction)->capture_default_str();
        }
        cmd->add_option("--attack", f.attack, "fgm fgsm pgd-l2 pgd-linf lambda-opt")
            ->capture_default_str();
        cmd->add_option("--gamma", f.gamma, "relative budget: eps = gamma * mean ||x||")
            ->capture_default_str();
        cmd->add_option("--epsilon", f.epsilon, "absolute budget, overrides --gamma");
        cmd->add_option("--steps", f.steps, "PGD steps")->capture_default_str();
        cmd->add_option("--lambda", f.lambda, "quadratic-penalty attack weight / bound lambda");
        cmd->add_option("--tau", f.tau)->capture_default_str();
        cmd->add_option("--omega", f.omega)->capture_default_str();
    };

    CLI::App* train = app.add_subcommand("train", "train one model, write model + report");
    add_common(train, true);
    train->add_option("--arch", f.arch, "dense stack, e.g. 2-8-2:tanh");
    train->add_flag("--adversarial", adversarial, "train on attacked batches");

    CLI::App* experiment =
        app.add_subcommand("experiment", "half/half substitute-target pipeline with reports");
    add_common(experiment, true);
    experiment->add_option("--arch", f.arch, "substitute architecture");
    experiment->add_option("--target-arch", target_archs, "target architecture (repeatable)");
    experiment->add_option("--train-n", train_n, "training-pool size (rest is held out)");
    experiment->add_option("--target-epochs", target_epochs)->capture_default_str();
    experiment->add_option("--intersect-beta", intersect_beta,
                           "also train a twin substitute with this cap (0 = uncapped) and "
                           "report intersection rates");
    experiment->add_option("--config", config_path, "load a resolved config instead of flags");

    CLI::App* bound = app.add_subcommand("bound", "capacity report for a substitute/target pair");
    add_common(bound, false);
    bound->add_option("--sub", sub_path, "substitute model file")->required();
    bound->add_option("--target", tgt_path, "target model file")->required();
    bound->add_option("--data", f.data, "dataset spec for the data-norm bound");
    bound->add_option("--data-bound", data_bound, "explicit data matrix norm B");
    bound->add_option("--n", bound_n, "sample count for the bound");

    CLI::App* evaluate = app.add_subcommand("evaluate", "transferability table for saved models");
    add_common(evaluate, false);
    evaluate->add_option("--sub", sub_path, "substitute model file")->required();
    evaluate->add_option("--sub2", sub2_path, "second substitute for intersection rates");
    evaluate->add_option("--target", target_paths, "target model file (repeatable)")->required();
    evaluate->add_option("--data", f.data, "dataset spec")->required();
    evaluate->add_option("--train-n", train_n, "training-pool size used when the models were built");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        if (*train) return cmd_train(f, adversarial);
        if (*experiment) return cmd_experiment(f, config_path, target_archs, train_n,
                                               intersect_beta, target_epochs);
        if (*bound) return cmd_bound(f, sub_path, tgt_path, data_bound, bound_n);
        if (*evaluate) return cmd_evaluate(f, sub_path, sub2_path, target_paths, train_n);
    } catch (const atl::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const atl::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const atl::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
