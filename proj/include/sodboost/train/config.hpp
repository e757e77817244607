#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sodboost/nn/model.hpp"

namespace sodboost {

// Everything a training run depends on. Paper-scale values (352/56 input,
// batch 26) stay reachable through the same knobs; the defaults are the toy
// configuration that trains in minutes on a CPU.
struct TrainConfig {
    // architecture
    int detail_input_size = 64;
    int semantic_input_size = 16;
    int fusion_channels = 64;
    int detail_width_base = 16;
    int semantic_dim_base = 32;
    int window = 4;
    int patch = 2;
    int branches = 4;
    bool use_detail = true;
    bool use_semantic = true;
    bool use_af = true;
    bool boost_weights = true;
    bool aspp_sync = false;
    // optimization
    int batch_size = 4;
    int epochs = 32;
    int64_t max_steps = 0;  // 0 = derive from epochs
    double max_lr_backbone = 0.004;
    double head_lr_multiplier = 10.0;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double warmup_fraction = 0.1;
    // data / bookkeeping
    bool augment = true;
    uint64_t seed = 1;
    int log_every = 10;

    void validate() const {
        require(detail_input_size % 32 == 0,
                "detail_input_size must be a multiple of 32, got " +
                    std::to_string(detail_input_size));
        require(semantic_input_size % patch == 0,
                "semantic_input_size must be a multiple of the patch size");
        require(batch_size >= 1, "batch_size must be >= 1");
        require(branches >= 1, "branches must be >= 1");
        require(max_lr_backbone > 0.0, "max_lr_backbone must be positive");
        require(head_lr_multiplier > 0.0, "head_lr_multiplier must be positive");
        require(warmup_fraction >= 0.0 && warmup_fraction < 1.0,
                "warmup_fraction must lie in [0,1)");
        require(use_detail || use_semantic, "at least one branch must be enabled");
    }

    ModelConfig model_config() const {
        ModelConfig m;
        m.detail_input = detail_input_size;
        m.semantic_input = semantic_input_size;
        m.fusion_channels = fusion_channels;
        m.branches = branches;
        m.use_detail = use_detail;
        m.use_semantic = use_semantic;
        m.use_af = use_af;
        for (int i = 0; i < 4; ++i) {
            m.detail.widths[static_cast<size_t>(i)] = detail_width_base << i;
            m.semantic.dims[static_cast<size_t>(i)] = semantic_dim_base << i;
            m.semantic.heads[static_cast<size_t>(i)] =
                std::max(1, (semantic_dim_base << i) / 32);
        }
        m.semantic.input_size = semantic_input_size;
        m.semantic.patch = patch;
        m.semantic.window = window;
        return m;
    }
};

namespace config_detail {

struct Field {
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

inline int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const int64_t r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for key '" + key + "': " + v);
    }
}

inline double parse_real(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for key '" + key + "': " + v);
    }
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError("invalid boolean for key '" + key + "': " + v);
}

inline std::string fmt_real(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline const std::vector<std::pair<std::string, Field>>& fields() {
    using C = TrainConfig;
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        auto add_int = [&t](const std::string& key, auto member) {
            t.push_back({key,
                         {[key, member](C& c, const std::string& v) {
                              c.*member = static_cast<std::decay_t<decltype(std::declval<C>().*
                                                                            member)>>(
                                  parse_int(v, key));
                          },
                          [member](const C& c) { return std::to_string(c.*member); }}});
        };
        auto add_real = [&t](const std::string& key, auto member) {
            t.push_back({key,
                         {[key, member](C& c, const std::string& v) {
                              c.*member = parse_real(v, key);
                          },
                          [member](const C& c) { return fmt_real(c.*member); }}});
        };
        auto add_bool = [&t](const std::string& key, auto member) {
            t.push_back({key,
                         {[key, member](C& c, const std::string& v) {
                              c.*member = parse_bool(v, key);
                          },
                          [member](const C& c) { return c.*member ? "1" : "0"; }}});
        };
        add_int("detail_input_size", &C::detail_input_size);
        add_int("semantic_input_size", &C::semantic_input_size);
        add_int("fusion_channels", &C::fusion_channels);
        add_int("detail_width_base", &C::detail_width_base);
        add_int("semantic_dim_base", &C::semantic_dim_base);
        add_int("window", &C::window);
        add_int("patch", &C::patch);
        add_int("branches", &C::branches);
        add_bool("use_detail", &C::use_detail);
        add_bool("use_semantic", &C::use_semantic);
        add_bool("use_af", &C::use_af);
        add_bool("boost_weights", &C::boost_weights);
        add_bool("aspp_sync", &C::aspp_sync);
        add_int("batch_size", &C::batch_size);
        add_int("epochs", &C::epochs);
        add_int("max_steps", &C::max_steps);
        add_real("max_lr_backbone", &C::max_lr_backbone);
        add_real("head_lr_multiplier", &C::head_lr_multiplier);
        add_real("momentum", &C::momentum);
        add_real("weight_decay", &C::weight_decay);
        add_real("warmup_fraction", &C::warmup_fraction);
        add_bool("augment", &C::augment);
        add_int("seed", &C::seed);
        add_int("log_every", &C::log_every);
        return t;
    }();
    return table;
}

inline const Field& find_field(const std::string& key) {
    for (const auto& [name, field] : fields()) {
        if (name == key) return field;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace config_detail

// key=value file, one entry per line, '#' comments. Unknown keys and parse
// failures report the offending line number.
inline TrainConfig load_train_config(const std::string& path,
                                     const std::vector<std::pair<std::string, std::string>>&
                                         overrides = {}) {
    TrainConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError(path + ": cannot open config file");
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto strip = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            line = strip(line);
            if (line.empty()) continue;
            const size_t eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": expected key=value, got '" + line + "'");
            }
            const std::string key = strip(line.substr(0, eq));
            const std::string value = strip(line.substr(eq + 1));
            try {
                config_detail::find_field(key).set(cfg, value);
            } catch (const ConfigError& e) {
                throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    for (const auto& [key, value] : overrides) {
        config_detail::find_field(key).set(cfg, value);
    }
    cfg.validate();
    return cfg;
}

inline std::string dump_config(const TrainConfig& cfg) {
    std::ostringstream os;
    for (const auto& [name, field] : config_detail::fields()) {
        os << name << "=" << field.get(cfg) << "\n";
    }
    return os.str();
}

inline void write_resolved_config(const TrainConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot write resolved config");
    out << dump_config(cfg);
}

}  // namespace sodboost
