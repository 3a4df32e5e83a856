#pragma once

#include <string>
#include <vector>

#include "crackres/config.hpp"
#include "crackres/evalkit.hpp"

namespace crackres {

void cmd_synth(const RunConfig& config);
void cmd_masks(const RunConfig& config);
FitResult cmd_train(const RunConfig& config);
void cmd_detect(const RunConfig& config);
/// Returns the micro-averaged report and writes the CSV.
MetricsReport cmd_eval(const RunConfig& config);
void cmd_ablate(const RunConfig& config);

/// One row of an ablation study.
struct AblationCase {
    std::string name;
    RunConfig config;
};

/// Loss toggles (MAE always on) or mask modes, mirroring the ablation tables.
std::vector<AblationCase> ablation_cases(const RunConfig& base);

/// Dispatches a subcommand. Returns the process exit code: 0 success,
/// 1 pipeline failure, 2 usage or configuration error.
int run_subcommand(const std::string& name, const RunConfig& config);

}  // namespace crackres
