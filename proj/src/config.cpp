#include "pnen/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace pnen {

namespace {

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int out = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        unsigned long long out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" + v +
                          "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    throw ConfigError("config: key '" + key + "' expects 0/1/true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::istringstream is(v);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(to_int(key, tok));
    if (out.empty()) throw ConfigError("config: key '" + key + "' expects a comma list");
    return out;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string fmt_scales(const std::vector<int>& scales) {
    std::string s;
    for (size_t i = 0; i < scales.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(scales[i]);
    }
    return s;
}

struct KeyDef {
    ConfigKey info;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyDef>& key_defs() {
    static const std::vector<KeyDef> defs = [] {
        std::vector<KeyDef> d;
        auto add = [&](const std::string& name, const std::string& def, const std::string& desc,
                       auto set, auto get) {
            d.push_back({{name, def, desc}, set, get});
        };
        add("dtype", "f32", "numeric precision, f32 or f64",
            [](RunConfig& c, const std::string& v) {
                if (v != "f32" && v != "f64") throw ConfigError("config: dtype must be f32 or f64");
                c.dtype = v;
            },
            [](const RunConfig& c) { return c.dtype; });
        add("channels", "3", "image channels c (1 gray, 3 color)",
            [](RunConfig& c, const std::string& v) { c.train.model.channels = to_int("channels", v); },
            [](const RunConfig& c) { return std::to_string(c.train.model.channels); });
        add("d", "64", "feature width of the backbone",
            [](RunConfig& c, const std::string& v) { c.train.model.d = to_int("d", v); },
            [](const RunConfig& c) { return std::to_string(c.train.model.d); });
        add("m", "64", "query/reference embedding dim",
            [](RunConfig& c, const std::string& v) { c.train.model.m = to_int("m", v); },
            [](const RunConfig& c) { return std::to_string(c.train.model.m); });
        add("n", "32", "value embedding dim",
            [](RunConfig& c, const std::string& v) { c.train.model.n = to_int("n", v); },
            [](const RunConfig& c) { return std::to_string(c.train.model.n); });
        add("scales", "1,2,3", "pyramid scale exponents; scale s uses kernel=stride=2^s",
            [](RunConfig& c, const std::string& v) { c.train.model.scales = to_int_list("scales", v); },
            [](const RunConfig& c) { return fmt_scales(c.train.model.scales); });
        add("blocks", "3", "number M of DRB+PNB groups",
            [](RunConfig& c, const std::string& v) { c.train.model.blocks = to_int("blocks", v); },
            [](const RunConfig& c) { return std::to_string(c.train.model.blocks); });
        add("patch_size", "96", "training patch side",
            [](RunConfig& c, const std::string& v) { c.train.patch_size = to_int("patch_size", v); },
            [](const RunConfig& c) { return std::to_string(c.train.patch_size); });
        add("batch_size", "8", "mini-batch size",
            [](RunConfig& c, const std::string& v) { c.train.batch_size = to_int("batch_size", v); },
            [](const RunConfig& c) { return std::to_string(c.train.batch_size); });
        add("lr_init", "5e-4", "initial learning rate",
            [](RunConfig& c, const std::string& v) { c.train.lr_init = to_double("lr_init", v); },
            [](const RunConfig& c) { return fmt_double(c.train.lr_init); });
        add("lr_floor", "1e-4", "learning-rate floor for plateau halving",
            [](RunConfig& c, const std::string& v) { c.train.lr_floor = to_double("lr_floor", v); },
            [](const RunConfig& c) { return fmt_double(c.train.lr_floor); });
        add("plateau_patience", "5", "epochs without improvement before halving",
            [](RunConfig& c, const std::string& v) {
                c.train.plateau_patience = to_int("plateau_patience", v);
            },
            [](const RunConfig& c) { return std::to_string(c.train.plateau_patience); });
        add("plateau_min_delta", "1e-6", "relative improvement that resets the plateau counter",
            [](RunConfig& c, const std::string& v) {
                c.train.plateau_min_delta = to_double("plateau_min_delta", v);
            },
            [](const RunConfig& c) { return fmt_double(c.train.plateau_min_delta); });
        add("seed", "1", "master seed for init, data order, and augmentation",
            [](RunConfig& c, const std::string& v) { c.train.seed = to_u64("seed", v); },
            [](const RunConfig& c) { return std::to_string(c.train.seed); });
        add("epochs", "20", "training epochs",
            [](RunConfig& c, const std::string& v) { c.train.epochs = to_int("epochs", v); },
            [](const RunConfig& c) { return std::to_string(c.train.epochs); });
        add("steps_per_epoch", "100", "optimizer steps per epoch",
            [](RunConfig& c, const std::string& v) {
                c.train.steps_per_epoch = to_int("steps_per_epoch", v);
            },
            [](const RunConfig& c) { return std::to_string(c.train.steps_per_epoch); });
        add("clip_gradients", "0", "enable global-norm gradient clipping (off for reported runs)",
            [](RunConfig& c, const std::string& v) {
                c.train.clip_gradients = to_bool("clip_gradients", v);
            },
            [](const RunConfig& c) { return c.train.clip_gradients ? "1" : "0"; });
        add("clip_norm", "1", "global gradient-norm cap when clipping is enabled",
            [](RunConfig& c, const std::string& v) { c.train.clip_norm = to_double("clip_norm", v); },
            [](const RunConfig& c) { return fmt_double(c.train.clip_norm); });
        add("checkpoint_every", "0", "epochs between checkpoints (0 = final only)",
            [](RunConfig& c, const std::string& v) {
                c.train.checkpoint_every = to_int("checkpoint_every", v);
            },
            [](const RunConfig& c) { return std::to_string(c.train.checkpoint_every); });
        add("filter", "gaussian", "imitation target: gaussian, median, or weighted_median",
            [](RunConfig& c, const std::string& v) { c.train.filter.kind = parse_filter_kind(v); },
            [](const RunConfig& c) { return filter_kind_name(c.train.filter.kind); });
        add("filter_radius", "1", "window radius for the median filters",
            [](RunConfig& c, const std::string& v) {
                c.train.filter.radius = to_int("filter_radius", v);
            },
            [](const RunConfig& c) { return std::to_string(c.train.filter.radius); });
        add("filter_sigma", "1.5", "Gaussian sigma / spatial sigma of the weighted median",
            [](RunConfig& c, const std::string& v) {
                c.train.filter.sigma_spatial = to_double("filter_sigma", v);
            },
            [](const RunConfig& c) { return fmt_double(c.train.filter.sigma_spatial); });
        add("filter_sigma_range", "0.1", "range sigma of the weighted median",
            [](RunConfig& c, const std::string& v) {
                c.train.filter.sigma_range = to_double("filter_sigma_range", v);
            },
            [](const RunConfig& c) { return fmt_double(c.train.filter.sigma_range); });
        add("data_dir", "", "directory of .pgm/.ppm training images; empty = synthetic",
            [](RunConfig& c, const std::string& v) { c.train.data_dir = v; },
            [](const RunConfig& c) { return c.train.data_dir; });
        add("synth_count", "16", "number of synthetic training images",
            [](RunConfig& c, const std::string& v) { c.train.synth_count = to_int("synth_count", v); },
            [](const RunConfig& c) { return std::to_string(c.train.synth_count); });
        add("synth_size", "128", "synthetic image side (>= 128)",
            [](RunConfig& c, const std::string& v) { c.train.synth.size = to_int("synth_size", v); },
            [](const RunConfig& c) { return std::to_string(c.train.synth.size); });
        add("synth_regions", "4", "piecewise-constant regions per synthetic image",
            [](RunConfig& c, const std::string& v) {
                c.train.synth.regions = to_int("synth_regions", v);
            },
            [](const RunConfig& c) { return std::to_string(c.train.synth.regions); });
        add("synth_texture_sigma", "0.02", "std of the additive band-limited texture",
            [](RunConfig& c, const std::string& v) {
                c.train.synth.texture_sigma = to_double("synth_texture_sigma", v);
            },
            [](const RunConfig& c) { return fmt_double(c.train.synth.texture_sigma); });
        return d;
    }();
    return defs;
}

}  // namespace

void RunConfig::validate() const {
    if (dtype != "f32" && dtype != "f64") throw ConfigError("config: dtype must be f32 or f64");
    TrainConfig chk = train;
    chk.synth.channels = train.model.channels;
    chk.validate();
}

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& d : key_defs()) out.push_back(d.info);
        return out;
    }();
    return keys;
}

void apply_config_pair(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& d : key_defs()) {
        if (d.info.name == key) {
            d.set(cfg, value);
            return;
        }
    }
    throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value: '" +
                              line + "'");
        apply_config_pair(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.train.synth.channels = cfg.train.model.channels;
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string config_help() {
    std::ostringstream os;
    char buf[256];
    for (const auto& k : config_schema()) {
        std::snprintf(buf, sizeof buf, "  %-22s (default %-10s) %s\n", k.name.c_str(),
                      k.default_value.empty() ? "\"\"" : k.default_value.c_str(),
                      k.description.c_str());
        os << buf;
    }
    return os.str();
}

std::string render_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& d : key_defs()) os << d.info.name << "=" << d.get(cfg) << "\n";
    return os.str();
}

}  // namespace pnen
