#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "smoothf1/checkpoint.hpp"
#include "smoothf1/data.hpp"
#include "smoothf1/losses.hpp"
#include "smoothf1/model.hpp"

namespace smoothf1 {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key-value configuration: one `key = value` per line, dotted keys as
/// sections, full-line `#` comments. Unknown keys are rejected.
using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos)
        return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline const std::set<std::string>& config_schema() {
    static const std::set<std::string> keys = {
        "data.kind", "data.path", "data.n", "data.feature_dim", "data.classes",
        "data.latent_dim", "data.target_mean_label_count", "data.label_correlation",
        "data.noise_scale", "data.seed", "data.split_train", "data.split_val",
        "data.split_test", "data.split_seed",
        "model.hidden_dim", "model.bounding",
        "train.epochs", "train.batch_size", "train.optimizer", "train.learning_rate",
        "train.adam_beta1", "train.adam_beta2", "train.adam_epsilon",
        "experiment.losses", "experiment.seeds",
        "sigmoid_f1.beta", "sigmoid_f1.eta", "sigmoid_f1.input", "sigmoid_f1.aggregate",
        "focal.gamma",
        "eval.thresholds",
        "grid.betas", "grid.etas", "grid.metric", "grid.threshold", "grid.epochs",
        "output.dir",
    };
    return keys;
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size())
            throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size())
            throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a non-negative integer: '" + value +
                          "'");
    }
}

inline std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

inline std::string format_double(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

}  // namespace detail

inline void set_config_key(ConfigMap& map, const std::string& key, const std::string& value) {
    if (detail::config_schema().count(key) == 0)
        throw ConfigError("unknown config key: '" + key + "'");
    map[key] = value;
}

inline ConfigMap parse_config_text(const std::string& text) {
    ConfigMap map;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed[0] == '#')
            continue;
        const std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + trimmed + "'");
        const std::string key = detail::trim(trimmed.substr(0, eq));
        const std::string value = detail::trim(trimmed.substr(eq + 1));
        set_config_key(map, key, value);
    }
    return map;
}

inline ConfigMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

/// Applies a `key=value` override; overrides win over file values.
inline void apply_override(ConfigMap& map, const std::string& item) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must be key=value, got '" + item + "'");
    set_config_key(map, detail::trim(item.substr(0, eq)), detail::trim(item.substr(eq + 1)));
}

inline std::string serialize_config(const ConfigMap& map) {
    std::ostringstream out;
    for (const auto& [key, value] : map)
        out << key << " = " << value << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Typed experiment configuration.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    // data
    std::string data_kind = "synthetic";  // synthetic | file
    std::string data_path;
    SynthConfig synth;
    SplitFractions split_fractions;
    Seed split_seed = 1;
    // model
    std::size_t hidden_dim = 160;
    Bounding bounding = Bounding::logistic;
    // training
    std::size_t epochs = 50;
    std::size_t batch_size = 256;
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-3;
    AdamParams adam;
    // losses and evaluation
    std::vector<LossSpec> losses;
    std::vector<double> thresholds = {0.5, 0.05};
    std::vector<Seed> seeds = {1, 2, 3, 4, 5};
    // sensitivity grid
    std::vector<double> grid_betas = {1, 2, 5, 10, 30};
    std::vector<double> grid_etas = {0, 0.5, 1, 2};
    std::string grid_metric = "weighted_f1";
    double grid_threshold = 0.5;
    std::size_t grid_epochs = 0;  // 0: reuse train.epochs
    // output
    std::string output_dir;

    TrainConfig train_config(const LossSpec& loss) const {
        TrainConfig cfg;
        cfg.loss = loss;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.optimizer = optimizer;
        cfg.learning_rate = learning_rate;
        cfg.adam = adam;
        return cfg;
    }
};

inline ExperimentConfig config_from_map(const ConfigMap& map) {
    for (const auto& [key, value] : map)
        if (detail::config_schema().count(key) == 0)
            throw ConfigError("unknown config key: '" + key + "'");
    const auto get = [&](const char* key) -> const std::string* {
        const auto it = map.find(key);
        return it == map.end() ? nullptr : &it->second;
    };
    ExperimentConfig cfg;
    if (const auto* v = get("data.kind")) {
        if (*v != "synthetic" && *v != "file")
            throw ConfigError("config key 'data.kind': must be 'synthetic' or 'file'");
        cfg.data_kind = *v;
    }
    if (const auto* v = get("data.path"))
        cfg.data_path = *v;
    if (cfg.data_kind == "file" && cfg.data_path.empty())
        throw ConfigError("config key 'data.path': required when data.kind = file");
    if (const auto* v = get("data.n"))
        cfg.synth.n = detail::parse_u64("data.n", *v);
    if (const auto* v = get("data.feature_dim"))
        cfg.synth.feature_dim = detail::parse_u64("data.feature_dim", *v);
    if (const auto* v = get("data.classes"))
        cfg.synth.n_classes = detail::parse_u64("data.classes", *v);
    if (const auto* v = get("data.latent_dim"))
        cfg.synth.latent_dim = detail::parse_u64("data.latent_dim", *v);
    if (const auto* v = get("data.target_mean_label_count"))
        cfg.synth.target_mean_label_count = detail::parse_double("data.target_mean_label_count", *v);
    if (const auto* v = get("data.label_correlation"))
        cfg.synth.label_correlation = detail::parse_double("data.label_correlation", *v);
    if (const auto* v = get("data.noise_scale"))
        cfg.synth.noise_scale = detail::parse_double("data.noise_scale", *v);
    if (const auto* v = get("data.seed"))
        cfg.synth.seed = detail::parse_u64("data.seed", *v);
    if (const auto* v = get("data.split_train"))
        cfg.split_fractions.train = detail::parse_double("data.split_train", *v);
    if (const auto* v = get("data.split_val"))
        cfg.split_fractions.val = detail::parse_double("data.split_val", *v);
    if (const auto* v = get("data.split_test"))
        cfg.split_fractions.test = detail::parse_double("data.split_test", *v);
    if (const auto* v = get("data.split_seed"))
        cfg.split_seed = detail::parse_u64("data.split_seed", *v);
    if (const auto* v = get("model.hidden_dim"))
        cfg.hidden_dim = detail::parse_u64("model.hidden_dim", *v);
    if (const auto* v = get("model.bounding")) {
        if (*v != "logistic" && *v != "softmax")
            throw ConfigError("config key 'model.bounding': must be 'logistic' or 'softmax'");
        cfg.bounding = *v == "softmax" ? Bounding::softmax : Bounding::logistic;
    }
    if (const auto* v = get("train.epochs"))
        cfg.epochs = detail::parse_u64("train.epochs", *v);
    if (const auto* v = get("train.batch_size")) {
        cfg.batch_size = detail::parse_u64("train.batch_size", *v);
        if (cfg.batch_size == 0)
            throw ConfigError("config key 'train.batch_size': must be >= 1");
    }
    if (const auto* v = get("train.optimizer")) {
        if (*v != "adam" && *v != "sgd")
            throw ConfigError("config key 'train.optimizer': must be 'adam' or 'sgd'");
        cfg.optimizer = *v == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
    }
    if (const auto* v = get("train.learning_rate"))
        cfg.learning_rate = detail::parse_double("train.learning_rate", *v);
    if (const auto* v = get("train.adam_beta1"))
        cfg.adam.beta1 = detail::parse_double("train.adam_beta1", *v);
    if (const auto* v = get("train.adam_beta2"))
        cfg.adam.beta2 = detail::parse_double("train.adam_beta2", *v);
    if (const auto* v = get("train.adam_epsilon"))
        cfg.adam.epsilon = detail::parse_double("train.adam_epsilon", *v);

    SigmoidParams sigmoid_params;
    if (const auto* v = get("sigmoid_f1.beta"))
        sigmoid_params.beta = detail::parse_double("sigmoid_f1.beta", *v);
    if (const auto* v = get("sigmoid_f1.eta"))
        sigmoid_params.eta = detail::parse_double("sigmoid_f1.eta", *v);
    LossInput sigmoid_input = LossInput::logit;
    if (const auto* v = get("sigmoid_f1.input")) {
        if (*v != "probability" && *v != "logit")
            throw ConfigError("config key 'sigmoid_f1.input': must be 'probability' or 'logit'");
        sigmoid_input = *v == "logit" ? LossInput::logit : LossInput::probability;
    }
    F1Aggregate sigmoid_aggregate = F1Aggregate::macro;
    if (const auto* v = get("sigmoid_f1.aggregate")) {
        if (*v != "macro" && *v != "micro")
            throw ConfigError("config key 'sigmoid_f1.aggregate': must be 'macro' or 'micro'");
        sigmoid_aggregate = *v == "micro" ? F1Aggregate::micro : F1Aggregate::macro;
    }
    double focal_gamma = 2.0;
    if (const auto* v = get("focal.gamma"))
        focal_gamma = detail::parse_double("focal.gamma", *v);

    std::vector<std::string> loss_names = {"sigmoid_f1", "cross_entropy"};
    if (const auto* v = get("experiment.losses")) {
        loss_names = detail::split_list(*v);
        if (loss_names.empty())
            throw ConfigError("config key 'experiment.losses': at least one loss required");
    }
    for (const auto& name : loss_names) {
        LossSpec spec;
        try {
            spec.kind = parse_loss_kind(name);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("config key 'experiment.losses': " + std::string(e.what()));
        }
        spec.params = sigmoid_params;
        spec.focal_gamma = focal_gamma;
        spec.input = sigmoid_input;
        spec.aggregate = sigmoid_aggregate;
        cfg.losses.push_back(spec);
    }

    if (const auto* v = get("eval.thresholds")) {
        cfg.thresholds.clear();
        for (const auto& item : detail::split_list(*v))
            cfg.thresholds.push_back(detail::parse_double("eval.thresholds", item));
        if (cfg.thresholds.empty())
            throw ConfigError("config key 'eval.thresholds': at least one threshold required");
    }
    if (const auto* v = get("experiment.seeds")) {
        cfg.seeds.clear();
        for (const auto& item : detail::split_list(*v))
            cfg.seeds.push_back(detail::parse_u64("experiment.seeds", item));
        if (cfg.seeds.empty())
            throw ConfigError("config key 'experiment.seeds': at least one seed required");
    }
    if (const auto* v = get("grid.betas")) {
        cfg.grid_betas.clear();
        for (const auto& item : detail::split_list(*v))
            cfg.grid_betas.push_back(detail::parse_double("grid.betas", item));
    }
    if (const auto* v = get("grid.etas")) {
        cfg.grid_etas.clear();
        for (const auto& item : detail::split_list(*v))
            cfg.grid_etas.push_back(detail::parse_double("grid.etas", item));
    }
    if (const auto* v = get("grid.metric")) {
        static const std::set<std::string> metrics = {"weighted_f1", "micro_f1", "macro_f1",
                                                      "precision", "recall", "map"};
        if (metrics.count(*v) == 0)
            throw ConfigError("config key 'grid.metric': unknown metric '" + *v + "'");
        cfg.grid_metric = *v;
    }
    if (const auto* v = get("grid.threshold"))
        cfg.grid_threshold = detail::parse_double("grid.threshold", *v);
    if (const auto* v = get("grid.epochs"))
        cfg.grid_epochs = detail::parse_u64("grid.epochs", *v);
    if (const auto* v = get("output.dir"))
        cfg.output_dir = *v;
    return cfg;
}

/// Full effective configuration, every key explicit. Serializing this map and
/// parsing it back reproduces the same typed config (lossless round trip).
inline ConfigMap config_to_map(const ExperimentConfig& cfg) {
    ConfigMap map;
    map["data.kind"] = cfg.data_kind;
    if (!cfg.data_path.empty())
        map["data.path"] = cfg.data_path;
    map["data.n"] = std::to_string(cfg.synth.n);
    map["data.feature_dim"] = std::to_string(cfg.synth.feature_dim);
    map["data.classes"] = std::to_string(cfg.synth.n_classes);
    map["data.latent_dim"] = std::to_string(cfg.synth.latent_dim);
    map["data.target_mean_label_count"] = detail::format_double(cfg.synth.target_mean_label_count);
    map["data.label_correlation"] = detail::format_double(cfg.synth.label_correlation);
    map["data.noise_scale"] = detail::format_double(cfg.synth.noise_scale);
    map["data.seed"] = std::to_string(cfg.synth.seed);
    map["data.split_train"] = detail::format_double(cfg.split_fractions.train);
    map["data.split_val"] = detail::format_double(cfg.split_fractions.val);
    map["data.split_test"] = detail::format_double(cfg.split_fractions.test);
    map["data.split_seed"] = std::to_string(cfg.split_seed);
    map["model.hidden_dim"] = std::to_string(cfg.hidden_dim);
    map["model.bounding"] = cfg.bounding == Bounding::softmax ? "softmax" : "logistic";
    map["train.epochs"] = std::to_string(cfg.epochs);
    map["train.batch_size"] = std::to_string(cfg.batch_size);
    map["train.optimizer"] = cfg.optimizer == OptimizerKind::sgd ? "sgd" : "adam";
    map["train.learning_rate"] = detail::format_double(cfg.learning_rate);
    map["train.adam_beta1"] = detail::format_double(cfg.adam.beta1);
    map["train.adam_beta2"] = detail::format_double(cfg.adam.beta2);
    map["train.adam_epsilon"] = detail::format_double(cfg.adam.epsilon);
    std::string losses;
    for (const auto& spec : cfg.losses) {
        if (!losses.empty())
            losses += ",";
        losses += loss_kind_name(spec.kind);
    }
    map["experiment.losses"] = losses;
    if (!cfg.losses.empty()) {
        map["sigmoid_f1.beta"] = detail::format_double(cfg.losses.front().params.beta);
        map["sigmoid_f1.eta"] = detail::format_double(cfg.losses.front().params.eta);
        map["sigmoid_f1.input"] =
            cfg.losses.front().input == LossInput::logit ? "logit" : "probability";
        map["sigmoid_f1.aggregate"] =
            cfg.losses.front().aggregate == F1Aggregate::micro ? "micro" : "macro";
        map["focal.gamma"] = detail::format_double(cfg.losses.front().focal_gamma);
    }
    std::string thresholds;
    for (double t : cfg.thresholds) {
        if (!thresholds.empty())
            thresholds += ",";
        thresholds += detail::format_double(t);
    }
    map["eval.thresholds"] = thresholds;
    std::string seeds;
    for (Seed s : cfg.seeds) {
        if (!seeds.empty())
            seeds += ",";
        seeds += std::to_string(s);
    }
    map["experiment.seeds"] = seeds;
    std::string betas, etas;
    for (double b : cfg.grid_betas) {
        if (!betas.empty())
            betas += ",";
        betas += detail::format_double(b);
    }
    for (double e : cfg.grid_etas) {
        if (!etas.empty())
            etas += ",";
        etas += detail::format_double(e);
    }
    map["grid.betas"] = betas;
    map["grid.etas"] = etas;
    map["grid.metric"] = cfg.grid_metric;
    map["grid.threshold"] = detail::format_double(cfg.grid_threshold);
    map["grid.epochs"] = std::to_string(cfg.grid_epochs);
    if (!cfg.output_dir.empty())
        map["output.dir"] = cfg.output_dir;
    return map;
}

/// Hash of the effective configuration, recorded with sensitivity grids so
/// every cell can be traced to one fixed setup.
inline std::string config_hash(const ExperimentConfig& cfg) {
    ConfigMap map = config_to_map(cfg);
    map.erase("output.dir");  // location does not change the experiment
    char buffer[24];
    std::snprintf(buffer, sizeof(buffer), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(serialize_config(map))));
    return buffer;
}

}  // namespace smoothf1
