#include "crackres/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "crackres/errors.hpp"

namespace crackres {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "cli";

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* type) {
    throw ConfigError(kModule, "key '" + key + "' expects " + type + ", got '" + value + "'");
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) bad_value(key, v, "an integer");
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) bad_value(key, v, "a real number");
        return out;
    } catch (const std::logic_error&) {
        bad_value(key, v, "a real number");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "a boolean");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    if (v.empty() || v == "auto") return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_int(key, trim(item))));
    return out;
}

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

std::string fmt_list(const std::vector<int>& v) {
    if (v.empty()) return "auto";
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

enum class Kind { Int, Real, Bool, Text };

struct KeyDef {
    std::string name;
    Kind kind;
    std::string help;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define INT_KEY(NAME, FIELD, HELP)                                                                    \
    KeyDef {                                                                                          \
        NAME, Kind::Int, HELP,                                                                        \
            [](RunConfig& c, const std::string& k, const std::string& v) {                            \
                c.FIELD = static_cast<decltype(c.FIELD)>(parse_int(k, v));                            \
            },                                                                                        \
            [](const RunConfig& c) { return std::to_string(c.FIELD); }                                \
    }
#define REAL_KEY(NAME, FIELD, HELP)                                                                   \
    KeyDef {                                                                                          \
        NAME, Kind::Real, HELP,                                                                       \
            [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_real(k, v); }, \
            [](const RunConfig& c) { return fmt_real(c.FIELD); }                                      \
    }
#define BOOL_KEY(NAME, FIELD, HELP)                                                                   \
    KeyDef {                                                                                          \
        NAME, Kind::Bool, HELP,                                                                       \
            [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_bool(k, v); }, \
            [](const RunConfig& c) { return fmt_bool(c.FIELD); }                                      \
    }
#define PATH_KEY(NAME, FIELD, HELP)                                                                   \
    KeyDef {                                                                                          \
        NAME, Kind::Text, HELP, [](RunConfig& c, const std::string&, const std::string& v) { c.FIELD = v; }, \
            [](const RunConfig& c) { return c.FIELD.string(); }                                       \
    }

const std::vector<KeyDef>& registry() {
    static const std::vector<KeyDef> keys = {
        PATH_KEY("data_root", data_root, "dataset root directory"),
        PATH_KEY("run_dir", run_dir, "run directory for checkpoints and outputs"),
        PATH_KEY("checkpoint", checkpoint, "checkpoint for detect (default <run_dir>/best.ckpt)"),
        INT_KEY("seed", train.seed, "run seed"),
        INT_KEY("epochs", train.epochs, "maximum training epochs"),
        INT_KEY("patience", train.patience, "early-stopping patience in epochs"),
        INT_KEY("batch_size", train.batch_size, "training batch size"),
        REAL_KEY("lr_g", train.lr_g, "generator learning rate"),
        REAL_KEY("lr_d", train.lr_d, "discriminator learning rate"),
        REAL_KEY("adam_beta1", train.adam_beta1, "Adam beta1"),
        REAL_KEY("adam_beta2", train.adam_beta2, "Adam beta2"),
        REAL_KEY("lr_decay_gamma", train.lr_decay_gamma, "per-epoch learning-rate decay factor"),
        REAL_KEY("lambda_mae", train.weights.mae, "MAE weight"),
        REAL_KEY("lambda_ssim", train.weights.ssim, "SSIM weight"),
        REAL_KEY("lambda_gms", train.weights.gms, "MSGMS weight"),
        REAL_KEY("lambda_style", train.weights.style, "style weight"),
        REAL_KEY("lambda_res", train.weights.res, "restoration weight"),
        REAL_KEY("lambda_adv", train.weights.adv, "adversarial weight"),
        KeyDef{"no_style", Kind::Bool, "disable the style term (no pretrained extractor needed)",
               [](RunConfig& c, const std::string& k, const std::string& v) { c.train.use_style = !parse_bool(k, v); },
               [](const RunConfig& c) { return fmt_bool(!c.train.use_style); }},
        PATH_KEY("style_weights_path", train.style_weights_path, "VGG-16 weights for the style loss"),
        BOOL_KEY("freeze_discriminator", train.freeze_discriminator, "never update the discriminator"),
        BOOL_KEY("augment", train.augment, "scale/crop/flip augmentation"),
        BOOL_KEY("resume", train.resume, "continue from <run_dir>/last.ckpt"),
        BOOL_KEY("verbose", train.verbose, "print per-epoch progress"),
        INT_KEY("resolution", train.resolution, "square training/detection resolution"),
        INT_KEY("base_width", train.generator.base_width, "generator base channel width"),
        INT_KEY("disc_base_width", train.discriminator.base_width, "discriminator base channel width"),
        REAL_KEY("dropout_rate", train.generator.dropout_rate, "generator decoder dropout"),
        KeyDef{"mask_scales", Kind::Text, "comma-separated mask cell sizes (auto: res/2,res/4,res/8)",
               [](RunConfig& c, const std::string& k, const std::string& v) { c.train.mask_scales = parse_int_list(k, v); },
               [](const RunConfig& c) { return fmt_list(c.train.mask_scales); }},
        KeyDef{"mask_mode", Kind::Text, "multiscale_square | striped | jumbled",
               [](RunConfig& c, const std::string&, const std::string& v) { c.train.mask_mode = parse_mask_mode(v); },
               [](const RunConfig& c) { return to_string(c.train.mask_mode); }},
        KeyDef{"strategy", Kind::Text, "restoration at detection: direct | masked_ensemble",
               [](RunConfig& c, const std::string&, const std::string& v) { c.detect.strategy = parse_restore_strategy(v); },
               [](const RunConfig& c) { return to_string(c.detect.strategy); }},
        INT_KEY("bilateral_diameter", detect.bilateral.diameter, "bilateral filter diameter (odd)"),
        REAL_KEY("bilateral_sigma_intensity", detect.bilateral.sigma_intensity, "bilateral range sigma (8-bit levels)"),
        REAL_KEY("bilateral_sigma_spatial", detect.bilateral.sigma_spatial, "bilateral spatial sigma (pixels)"),
        BOOL_KEY("inference_dropout", detect.inference_dropout, "keep dropout active at detection"),
        INT_KEY("synth_train", synth_train, "synthetic training images"),
        INT_KEY("synth_val", synth_val, "synthetic validation images (-1: train/10)"),
        INT_KEY("synth_test", synth_test, "synthetic test images"),
        INT_KEY("synth_size", synth_size, "synthetic image size"),
        PATH_KEY("pred_dir", pred_dir, "prediction directory for eval (default <run_dir>/detect)"),
        PATH_KEY("report", report, "metrics CSV path (default <run_dir>/metrics.csv)"),
        BOOL_KEY("write_error_maps", write_error_maps, "detect: also write 8-bit error maps"),
        BOOL_KEY("write_overlays", write_overlays, "detect: write TP/FP/FN overlays when ground truth exists"),
        KeyDef{"ablate_mode", Kind::Text, "losses | masks",
               [](RunConfig& c, const std::string&, const std::string& v) {
                   if (v != "losses" && v != "masks") throw ConfigError(kModule, "ablate_mode must be losses or masks");
                   c.ablate_mode = v;
               },
               [](const RunConfig& c) { return c.ablate_mode; }},
    };
    return keys;
}

#undef INT_KEY
#undef REAL_KEY
#undef BOOL_KEY
#undef PATH_KEY

const KeyDef* find_key(const std::string& name) {
    for (const auto& k : registry())
        if (k.name == name) return &k;
    return nullptr;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::Default: return "default";
        case Provenance::File: return "file";
        case Provenance::Flag: return "flag";
    }
    return "unknown";
}

fs::path RunConfig::checkpoint_path() const { return checkpoint.empty() ? run_dir / "best.ckpt" : checkpoint; }
fs::path RunConfig::pred_path() const { return pred_dir.empty() ? run_dir / "detect" : pred_dir; }
fs::path RunConfig::report_path() const { return report.empty() ? run_dir / "metrics.csv" : report; }

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& k : registry()) v.push_back(k.name);
        return v;
    }();
    return names;
}

std::string config_key_help(const std::string& key) {
    const auto* k = find_key(key);
    return k ? k->help : "";
}

bool config_key_is_bool(const std::string& key) {
    const auto* k = find_key(key);
    return k && k->kind == Kind::Bool;
}

std::string suggest_key(const std::string& unknown) {
    std::string best;
    std::size_t best_d = std::string::npos;
    for (const auto& k : registry()) {
        const auto d = edit_distance(unknown, k.name);
        if (d < best_d) {
            best_d = d;
            best = k.name;
        }
    }
    return best_d <= std::max<std::size_t>(2, unknown.size() / 3) ? best : "";
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value, Provenance source) {
    const auto* k = find_key(key);
    if (!k) {
        const auto hint = suggest_key(key);
        throw ConfigError(kModule, "unknown configuration key '" + key + "'" +
                                       (hint.empty() ? "" : " (did you mean '" + hint + "'?)"));
    }
    try {
        k->set(config, key, value);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(kModule, "key '" + key + "': " + e.what());
    }
    config.provenance[key] = source;
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
    const auto* k = find_key(key);
    if (!k) throw ConfigError(kModule, "unknown configuration key '" + key + "'");
    return k->get(config);
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(kModule, "line " + std::to_string(lineno) + ": expected key=value");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

RunConfig load_config(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& flags) {
    RunConfig config;
    for (const auto& k : registry()) config.provenance[k.name] = Provenance::Default;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError(kModule, "cannot read config file " + path.string());
        std::stringstream buf;
        buf << in.rdbuf();
        for (const auto& [key, value] : parse_config_text(buf.str())) set_config_value(config, key, value, Provenance::File);
    }
    for (const auto& [key, value] : flags) set_config_value(config, key, value, Provenance::Flag);
    return config;
}

std::string serialize_config(const RunConfig& config) {
    std::string out;
    for (const auto& k : registry()) {
        const auto it = config.provenance.find(k.name);
        const auto prov = it == config.provenance.end() ? Provenance::Default : it->second;
        out += k.name + " = " + k.get(config) + "  # " + to_string(prov) + "\n";
    }
    return out;
}

void write_resolved_config(const RunConfig& config, const fs::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path);
    if (!out) throw IoError(kModule, "cannot write " + path.string());
    out << serialize_config(config);
}

}  // namespace crackres
