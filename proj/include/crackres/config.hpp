#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "crackres/detector.hpp"
#include "crackres/trainer.hpp"

namespace crackres {

enum class Provenance { Default, File, Flag };
std::string to_string(Provenance p);

/// Everything a subcommand may need, merged from defaults, the config file
/// and command-line flags (later sources win).
struct RunConfig {
    TrainConfig train;
    DetectParams detect;
    std::filesystem::path data_root;
    std::filesystem::path run_dir = "runs/default";
    std::filesystem::path checkpoint;  // empty: <run_dir>/best.ckpt
    std::filesystem::path pred_dir;    // empty: <run_dir>/detect
    std::filesystem::path report;      // empty: <run_dir>/metrics.csv
    int synth_train = 100;
    int synth_val = -1;
    int synth_test = 20;
    int synth_size = 256;
    bool write_error_maps = true;
    bool write_overlays = true;
    std::string ablate_mode = "losses";

    std::map<std::string, Provenance> provenance;

    std::filesystem::path checkpoint_path() const;
    std::filesystem::path pred_path() const;
    std::filesystem::path report_path() const;
};

/// Names of every recognised key, in serialisation order.
const std::vector<std::string>& config_keys();
std::string config_key_help(const std::string& key);
bool config_key_is_bool(const std::string& key);

/// Sets one key from text. Throws ConfigError for unknown keys (with a
/// closest-match suggestion) or unparsable values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value, Provenance source);
std::string get_config_value(const RunConfig& config, const std::string& key);

/// Flat key=value text, '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);

/// Defaults, then the file at `path` (if non-empty), then `flags`.
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& flags);

/// key = value  # provenance, one line per key; loadable by load_config.
std::string serialize_config(const RunConfig& config);
void write_resolved_config(const RunConfig& config, const std::filesystem::path& path);

/// Closest known key by edit distance, or empty when nothing is close.
std::string suggest_key(const std::string& unknown);

}  // namespace crackres
