// Command-line entry point: synth | masks | train | detect | eval | ablate.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>

#include "crackres/commands.hpp"
#include "crackres/config.hpp"
#include "crackres/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised crack detection by adversarial image restoration"};
    app.require_subcommand(1, 1);

    std::string config_path;
    app.add_option("--config", config_path, "flat key=value config file");

    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    for (const auto& key : crackres::config_keys()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        CLI::Option* opt = crackres::config_key_is_bool(key)
                               ? app.add_flag(flag + "{true}", values[key], crackres::config_key_help(key))
                               : app.add_option(flag, values[key], crackres::config_key_help(key));
        options[key] = opt;
    }

    const std::pair<const char*, const char*> subcommands[] = {
        {"synth", "generate a synthetic road-texture dataset"},
        {"masks", "export the mask pool as PNG files"},
        {"train", "train the restoration GAN on undamaged patches"},
        {"detect", "write crack masks for the test split"},
        {"eval", "score predictions against ground truth"},
        {"ablate", "train/detect/eval over loss or mask-mode variants"},
    };
    for (const auto& [name, help] : subcommands) app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    std::vector<std::pair<std::string, std::string>> flags;
    for (const auto& key : crackres::config_keys())
        if (options[key]->count() > 0) flags.emplace_back(key, values[key]);

    crackres::RunConfig config;
    try {
        config = crackres::load_config(config_path, flags);
    } catch (const crackres::Error& e) {
        std::fprintf(stderr, "configuration error [%s]: %s\n", e.module().c_str(), e.what());
        return 2;
    }

    return crackres::run_subcommand(app.get_subcommands().front()->get_name(), config);
}
