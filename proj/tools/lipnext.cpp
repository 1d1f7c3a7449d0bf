#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lipnext/lipnext.hpp"

namespace {

lipnext::Dataset load_split(const lipnext::TrainConfig& cfg, bool train) {
    const std::string dir = cfg.data_dir;
    if (cfg.dataset == "mnist") {
        const std::string stem = train ? "train" : "t10k";
        return lipnext::load_mnist_idx(dir + "/" + stem + "-images-idx3-ubyte",
                                       dir + "/" + stem + "-labels-idx1-ubyte");
    }
    std::vector<std::string> paths;
    if (train)
        for (int i = 1; i <= 5; ++i)
            paths.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
    else
        paths.push_back(dir + "/test_batch.bin");
    return lipnext::load_cifar_bin(paths);
}

void apply_overrides(lipnext::TrainConfig& cfg, const std::vector<std::string>& sets) {
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        lipnext::config_set(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
}

std::vector<double> parse_eps_list(const std::string& s) {
    std::vector<double> eps;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        eps.push_back(std::stod(item));
    }
    if (eps.empty()) throw std::invalid_argument("--eps: no radii given");
    return eps;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets) {
    lipnext::TrainConfig cfg =
        config_path.empty() ? lipnext::TrainConfig{} : lipnext::load_config(config_path);
    apply_overrides(cfg, sets);

    const lipnext::Dataset train = load_split(cfg, true);
    lipnext::LipNextModel model(cfg.to_model_spec(train.h, train.w, train.c));
    lipnext::Rng init_rng(lipnext::derive_seed(cfg.seed, 0));
    model.init(init_rng);
    lipnext::ModelOptimizerState opt(model, cfg.optimizer == "stabilized");

    std::printf("training %s: %zu examples, depth %zu, %zu channels, %zu epochs, seed %llu\n",
                cfg.dataset.c_str(), train.size(), cfg.depth, cfg.channels,
                cfg.epochs, static_cast<unsigned long long>(cfg.seed));

    std::vector<lipnext::EpochMetrics> metrics =
        lipnext::fit(model, opt, train, cfg, [&](const lipnext::EpochMetrics& em) {
            std::printf("epoch %3zu  loss %.4f  acc %.4f  drift %.2e  %.1fs\n", em.epoch, em.loss,
                        em.train_acc, em.drift_max, em.seconds);
            std::fflush(stdout);
            lipnext::save_checkpoint(cfg.checkpoint, model, em.epoch + 1, &opt);
        });

    if (!cfg.metrics_csv.empty()) {
        std::ofstream mf(cfg.metrics_csv);
        if (!mf) throw std::runtime_error("cannot open " + cfg.metrics_csv);
        lipnext::write_metrics_csv(mf, metrics);
    }
    std::printf("saved checkpoint to %s\n", cfg.checkpoint.c_str());
    return 0;
}

int cmd_certify(const std::string& checkpoint, const lipnext::TrainConfig& cfg,
                const std::string& eps_arg, const std::string& out_path) {
    const lipnext::Checkpoint ck = lipnext::load_checkpoint(checkpoint);
    const lipnext::Dataset test = load_split(cfg, false);
    const std::vector<double> eps = parse_eps_list(eps_arg);

    const lipnext::EvalResult res =
        lipnext::evaluate(ck.model, test, cfg.limit_test, cfg.threads);
    if (out_path.empty()) {
        lipnext::write_cra_csv(std::cout, eps, res.records);
    } else {
        std::ofstream f(out_path);
        if (!f) throw std::runtime_error("cannot open " + out_path);
        lipnext::write_cra_csv(f, eps, res.records);
        std::printf("wrote %s (%zu examples, backbone bound %.6f)\n", out_path.c_str(),
                    res.records.size(), res.backbone_bound);
    }
    return 0;
}

int cmd_eval(const std::string& checkpoint, const lipnext::TrainConfig& cfg) {
    const lipnext::Checkpoint ck = lipnext::load_checkpoint(checkpoint);
    const lipnext::Dataset test = load_split(cfg, false);
    const lipnext::EvalResult res =
        lipnext::evaluate(ck.model, test, cfg.limit_test, cfg.threads);
    std::printf("examples        %zu\n", res.records.size());
    std::printf("clean accuracy  %.4f\n", res.accuracy);
    std::printf("backbone bound  %.8f\n", res.backbone_bound);
    std::printf("max drift       %.3e\n", ck.model.max_drift());
    std::printf("epoch           %llu\n", static_cast<unsigned long long>(ck.epoch));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"1-Lipschitz spatial-shift networks: train, certify, verify"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    bool seed_given = false;

    auto* train = app.add_subcommand("train", "Train a model from a config file");
    train->add_option("-c,--config", config_path, "key=value config file");
    train->add_option("-s,--set", sets, "override a config key (key=value, repeatable)");
    train->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
        seed_given = true;
    });

    std::string checkpoint = "model.lpnx";
    std::string eps_arg = "0,0.1411764705882353,0.2823529411764706,0.4235294117647059";
    std::string out_path;
    lipnext::TrainConfig data_cfg;

    auto add_data_flags = [&](CLI::App* cmd) {
        cmd->add_option("-k,--checkpoint", checkpoint, "model file");
        cmd->add_option("-d,--data-dir", data_cfg.data_dir, "dataset directory");
        cmd->add_option("--dataset", data_cfg.dataset, "mnist | cifar10");
        cmd->add_option("--limit", data_cfg.limit_test, "cap the number of test examples");
        cmd->add_option("--threads", data_cfg.threads, "worker threads");
        cmd->add_option("--seed", seed, "random seed (accepted for interface uniformity)");
    };

    auto* certify = app.add_subcommand("certify", "Certified robust accuracy at given radii");
    add_data_flags(certify);
    certify->add_option("--eps", eps_arg, "comma-separated list of L2 radii");
    certify->add_option("-o,--out", out_path, "output CSV (default: stdout)");

    auto* eval = app.add_subcommand("eval", "Clean accuracy and certification summary");
    add_data_flags(eval);

    auto* verify = app.add_subcommand("verify", "Run the built-in oracle suite");
    verify->add_option("--seed", seed, "seed for the randomized oracles");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            if (seed_given) sets.push_back("seed=" + std::to_string(seed));
            return cmd_train(config_path, sets);
        }
        if (certify->parsed()) return cmd_certify(checkpoint, data_cfg, eps_arg, out_path);
        if (eval->parsed()) return cmd_eval(checkpoint, data_cfg);
        if (verify->parsed()) return lipnext::verify_all(std::cout, seed ? seed : 7) ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
