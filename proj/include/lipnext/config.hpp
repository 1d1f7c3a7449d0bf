#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "layers.hpp"
#include "model.hpp"
#include "optim.hpp"

namespace lipnext {

/// Flat key=value run configuration. Every knob has a sane default; a config
/// file (or CLI override) only states what differs. Unknown keys are hard
/// errors -- silently ignoring a typo like "epocs=20" wastes a training run.
struct TrainConfig {
    std::string dataset = "mnist";  // mnist | cifar10
    std::string data_dir = "data";

    std::size_t patch = 2;
    std::size_t channels = 64;
    std::size_t depth = 4;
    double alpha = 1.0 / 16.0;
    double beta = 0.75;
    std::string padding = "circular";     // circular | zero
    std::string activation = "beta_abs";  // beta_abs | minmax
    bool use_pos = true;

    std::size_t epochs = 10;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::size_t lookahead_k = 5;
    double eps_train = 36.0 / 255.0;  // certification radius targeted by the margin loss
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    std::string optimizer = "stabilized";  // stabilized | plain
    std::string denominator = "sqrt_v";    // sqrt_v | literal_v
    bool bias_correction = true;

    std::string checkpoint = "model.lpnx";
    std::string metrics_csv;
    std::size_t limit_train = 0;  // 0 = full set
    std::size_t limit_test = 0;

    ModelSpec to_model_spec(std::size_t h, std::size_t w, std::size_t c_in) const {
        ModelSpec spec;
        spec.input_h = h;
        spec.input_w = w;
        spec.input_c = c_in;
        spec.patch = patch;
        spec.channels = channels;
        spec.depth = depth;
        spec.num_classes = 10;
        spec.shift.alpha = alpha;
        spec.shift.padding = padding == "zero" ? ShiftPadding::zero : ShiftPadding::circular;
        spec.activation.kind =
            activation == "minmax" ? ActivationKind::minmax : ActivationKind::beta_abs;
        spec.activation.beta = beta;
        spec.use_pos = use_pos;
        return spec;
    }

    OptimizerMode optimizer_mode() const {
        OptimizerMode mode =
            optimizer == "plain" ? OptimizerMode::plain_adam() : OptimizerMode::stabilized();
        mode.denominator = denominator == "literal_v" ? OptimizerMode::Denominator::literal_v
                                                      : OptimizerMode::Denominator::sqrt_v;
        mode.bias_correction = bias_correction;
        return mode;
    }

    AdamHyper adam_hyper() const {
        AdamHyper hp;
        hp.lr = lr;
        hp.beta1 = beta1;
        hp.beta2 = beta2;
        hp.eps = eps_adam;
        hp.lookahead_k = lookahead_k;
        return hp;
    }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: " + key + " expects a boolean, got '" + v + "'");
}

template <class T>
T parse_num(const std::string& key, const std::string& v) {
    std::istringstream ss(v);
    T out;
    ss >> out;
    if (ss.fail() || !ss.eof())
        throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
    return out;
}

inline void expect_one_of(const std::string& key, const std::string& v,
                          std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (v == a) return;
    std::string msg = "config: " + key + " must be one of {";
    bool first = true;
    for (const char* a : allowed) {
        if (!first) msg += ", ";
        msg += a;
        first = false;
    }
    throw std::invalid_argument(msg + "}, got '" + v + "'");
}

}  // namespace detail

inline void config_set(TrainConfig& cfg, const std::string& key, const std::string& value) {
    using detail::expect_one_of;
    using detail::parse_bool;
    using detail::parse_num;
    if (key == "dataset") {
        expect_one_of(key, value, {"mnist", "cifar10"});
        cfg.dataset = value;
    } else if (key == "data_dir") {
        cfg.data_dir = value;
    } else if (key == "patch") {
        cfg.patch = parse_num<std::size_t>(key, value);
    } else if (key == "channels") {
        cfg.channels = parse_num<std::size_t>(key, value);
    } else if (key == "depth") {
        cfg.depth = parse_num<std::size_t>(key, value);
    } else if (key == "alpha") {
        cfg.alpha = parse_num<double>(key, value);
    } else if (key == "beta") {
        cfg.beta = parse_num<double>(key, value);
    } else if (key == "padding") {
        expect_one_of(key, value, {"circular", "zero"});
        cfg.padding = value;
    } else if (key == "activation") {
        expect_one_of(key, value, {"beta_abs", "minmax"});
        cfg.activation = value;
    } else if (key == "use_pos") {
        cfg.use_pos = parse_bool(key, value);
    } else if (key == "epochs") {
        cfg.epochs = parse_num<std::size_t>(key, value);
    } else if (key == "batch_size") {
        cfg.batch_size = parse_num<std::size_t>(key, value);
    } else if (key == "lr") {
        cfg.lr = parse_num<double>(key, value);
    } else if (key == "beta1") {
        cfg.beta1 = parse_num<double>(key, value);
    } else if (key == "beta2") {
        cfg.beta2 = parse_num<double>(key, value);
    } else if (key == "eps_adam") {
        cfg.eps_adam = parse_num<double>(key, value);
    } else if (key == "lookahead_k") {
        cfg.lookahead_k = parse_num<std::size_t>(key, value);
    } else if (key == "eps_train") {
        cfg.eps_train = parse_num<double>(key, value);
    } else if (key == "seed") {
        cfg.seed = parse_num<std::uint64_t>(key, value);
    } else if (key == "threads") {
        cfg.threads = parse_num<std::size_t>(key, value);
    } else if (key == "optimizer") {
        expect_one_of(key, value, {"stabilized", "plain"});
        cfg.optimizer = value;
    } else if (key == "denominator") {
        expect_one_of(key, value, {"sqrt_v", "literal_v"});
        cfg.denominator = value;
    } else if (key == "bias_correction") {
        cfg.bias_correction = parse_bool(key, value);
    } else if (key == "checkpoint") {
        cfg.checkpoint = value;
    } else if (key == "metrics_csv") {
        cfg.metrics_csv = value;
    } else if (key == "limit_train") {
        cfg.limit_train = parse_num<std::size_t>(key, value);
    } else if (key == "limit_test") {
        cfg.limit_test = parse_num<std::size_t>(key, value);
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

inline TrainConfig parse_config(std::istream& is) {
    TrainConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value, got '" + line + "'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        config_set(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline TrainConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    return parse_config(f);
}

}  // namespace lipnext
