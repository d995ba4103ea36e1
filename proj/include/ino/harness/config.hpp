#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "ino/encoder/vit.hpp"
#include "ino/objectives/ino_objective.hpp"
#include "ino/objectives/teacher.hpp"
#include "ino/optimizer/schedule.hpp"
#include "ino/propagation/propagate.hpp"
#include "ino/views/crops.hpp"

// Config files are flat UTF-8 "key = value" lines with dotted namespaces
// (view.local_crops = 8). '#' starts a comment. Unknown keys are errors.

namespace ino {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t epochs = 25;
    std::size_t batch_size = 4;
    std::size_t max_steps = 0;  // 0 = run every epoch to completion
    std::string train_data;     // path to the training videos.txt
    std::string eval_data;      // path to the evaluation videos.txt
    std::string output;         // run directory

    ViewConfig view;
    ModelConfig model;
    TemperatureConfig temps;
    double ema_momentum = 0.996;
    double center_momentum = 0.9;
    OptimizerConfig optim;
    ObjectiveSet objectives;
    PropagationConfig prop;

    void validate() const {
        try {
            view.validate();
            model.validate();
            temps.validate();
            prop.validate();
            optimizer(1).validate();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (epochs == 0 || batch_size == 0) throw ConfigError("train: epochs and batch size must be positive");
        if (!(ema_momentum >= 0 && ema_momentum <= 1)) throw ConfigError("teacher: ema_momentum outside [0,1]");
        if (!(center_momentum >= 0 && center_momentum <= 1)) throw ConfigError("teacher: center_momentum outside [0,1]");
        if (view.global_size % model.patch_size || view.local_size % model.patch_size) {
            throw ConfigError("patch size must divide both crop sizes");
        }
        if (!objectives.out_g2g && !objectives.out_l2g && !objectives.in_mim && !objectives.in_aff) {
            throw ConfigError("at least one loss term must be enabled");
        }
    }

    /// Optimizer config with the run-level batch, clip length and epoch
    /// count filled in.
    OptimizerConfig optimizer(std::size_t steps_per_epoch) const {
        OptimizerConfig o = optim;
        o.batch_size = batch_size;
        o.clip_length = view.clip_length;
        o.total_epochs = static_cast<double>(epochs);
        o.steps_per_epoch = steps_per_epoch;
        return o;
    }
};

namespace config_detail {

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <class U>
U parse_number(const std::string& key, const std::string& s) {
    U v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw ConfigError("invalid value '" + s + "' for " + key);
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "1" || s == "true" || s == "on") return true;
    if (s == "0" || s == "false" || s == "off") return false;
    throw ConfigError("invalid boolean '" + s + "' for " + key);
}

struct Entry {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class M>
Entry size_entry(std::string key, M member) {
    return {key, [key, member](RunConfig& c, const std::string& v) { member(c) = parse_number<std::size_t>(key, v); },
            [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }};
}

template <class M>
Entry double_entry(std::string key, M member) {
    return {key, [key, member](RunConfig& c, const std::string& v) { member(c) = parse_number<double>(key, v); },
            [member](const RunConfig& c) { return format_double(member(const_cast<RunConfig&>(c))); }};
}

template <class M>
Entry bool_entry(std::string key, M member) {
    return {key, [key, member](RunConfig& c, const std::string& v) { member(c) = parse_bool(key, v); },
            [member](const RunConfig& c) { return std::string(member(const_cast<RunConfig&>(c)) ? "1" : "0"); }};
}

template <class M>
Entry string_entry(std::string key, M member) {
    return {key, [member](RunConfig& c, const std::string& v) { member(c) = v; },
            [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)); }};
}

#define INO_FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

inline const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        size_entry("train.epochs", INO_FIELD(epochs)),
        size_entry("train.batch_size", INO_FIELD(batch_size)),
        size_entry("train.max_steps", INO_FIELD(max_steps)),
        string_entry("train.data", INO_FIELD(train_data)),
        string_entry("train.output", INO_FIELD(output)),
        string_entry("eval.data", INO_FIELD(eval_data)),

        size_entry("view.clip_length", INO_FIELD(view.clip_length)),
        size_entry("view.local_crops", INO_FIELD(view.local_crops)),
        double_entry("view.global_scale_min", INO_FIELD(view.global_scale_min)),
        double_entry("view.global_scale_max", INO_FIELD(view.global_scale_max)),
        double_entry("view.local_scale_min", INO_FIELD(view.local_scale_min)),
        double_entry("view.local_scale_max", INO_FIELD(view.local_scale_max)),
        size_entry("view.global_size", INO_FIELD(view.global_size)),
        size_entry("view.local_size", INO_FIELD(view.local_size)),
        {"view.augment", [](RunConfig& c, const std::string& v) { c.view.augment = parse_augment_target(v); },
         [](const RunConfig& c) { return std::string(to_string(c.view.augment)); }},
        size_entry("view.frameskip", INO_FIELD(view.frameskip)),
        double_entry("view.flip_probability", INO_FIELD(view.flip_probability)),
        double_entry("view.brightness", INO_FIELD(view.brightness)),
        double_entry("view.contrast", INO_FIELD(view.contrast)),
        double_entry("view.saturation", INO_FIELD(view.saturation)),
        double_entry("mask.gate_probability", INO_FIELD(view.gate_probability)),
        double_entry("mask.ratio_min", INO_FIELD(view.ratio_min)),
        double_entry("mask.ratio_max", INO_FIELD(view.ratio_max)),

        size_entry("model.patch_size", INO_FIELD(model.patch_size)),
        size_entry("model.in_channels", INO_FIELD(model.in_channels)),
        size_entry("model.embed_dim", INO_FIELD(model.embed_dim)),
        size_entry("model.depth", INO_FIELD(model.depth)),
        size_entry("model.heads", INO_FIELD(model.heads)),
        size_entry("model.mlp_ratio", INO_FIELD(model.mlp_ratio)),
        size_entry("model.proj_layers", INO_FIELD(model.proj_layers)),
        size_entry("model.proj_dim", INO_FIELD(model.proj_dim)),
        size_entry("model.proj_hidden", INO_FIELD(model.proj_hidden)),
        size_entry("model.pe_base_resolution", INO_FIELD(model.pe_base_resolution)),
        size_entry("model.inference_layer", INO_FIELD(model.inference_layer)),
        double_entry("model.init_std", INO_FIELD(model.init_std)),

        double_entry("temp.student", INO_FIELD(temps.student)),
        double_entry("temp.teacher", INO_FIELD(temps.teacher)),
        double_entry("teacher.ema_momentum", INO_FIELD(ema_momentum)),
        double_entry("teacher.center_momentum", INO_FIELD(center_momentum)),

        double_entry("optim.beta1", INO_FIELD(optim.beta1)),
        double_entry("optim.beta2", INO_FIELD(optim.beta2)),
        double_entry("optim.eps", INO_FIELD(optim.eps)),
        double_entry("optim.warmup_epochs", INO_FIELD(optim.warmup_epochs)),
        double_entry("optim.lr_scale", INO_FIELD(optim.lr_scale)),
        double_entry("optim.final_lr_ratio", INO_FIELD(optim.final_lr_ratio)),
        double_entry("optim.wd_start", INO_FIELD(optim.wd_start)),
        double_entry("optim.wd_end", INO_FIELD(optim.wd_end)),

        bool_entry("loss.out_g2g", INO_FIELD(objectives.out_g2g)),
        bool_entry("loss.out_l2g", INO_FIELD(objectives.out_l2g)),
        bool_entry("loss.in_mim", INO_FIELD(objectives.in_mim)),
        bool_entry("loss.in_aff", INO_FIELD(objectives.in_aff)),

        size_entry("prop.top_k", INO_FIELD(prop.top_k)),
        size_entry("prop.context_frames", INO_FIELD(prop.context_frames)),
        size_entry("prop.radius", INO_FIELD(prop.radius)),
        double_entry("prop.temperature", INO_FIELD(prop.temperature)),
        size_entry("prop.threads", INO_FIELD(prop.threads)),
    };
    return table;
}

#undef INO_FIELD

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace config_detail

inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& e : config_detail::entries()) keys.push_back(e.key);
    return keys;
}

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& e : config_detail::entries()) {
        if (e.key == key) {
            e.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

inline std::string get_config_value(const RunConfig& cfg, const std::string& key) {
    for (const auto& e : config_detail::entries()) {
        if (e.key == key) return e.get(cfg);
    }
    throw ConfigError("unknown config key '" + key + "'");
}

/// Applies one "key=value" override.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set_config_value(cfg, config_detail::trim(assignment.substr(0, eq)), config_detail::trim(assignment.substr(eq + 1)));
}

inline void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = config_detail::trim(line);
        if (line.empty()) continue;
        try {
            apply_override(cfg, line);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    apply_config_text(cfg, text);
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

/// Every key in table order; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& e : config_detail::entries()) out += e.key + " = " + e.get(cfg) + "\n";
    return out;
}

}  // namespace ino
