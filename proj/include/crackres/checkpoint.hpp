#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

#include "crackres/maskgen.hpp"
#include "crackres/model.hpp"

namespace crackres {

inline constexpr std::int64_t kCheckpointFormatVersion = 1;

/// Everything in a checkpoint except tensors. `history` holds one row of
/// per-epoch numbers in the order of the history CSV columns.
struct CheckpointInfo {
    std::int64_t format_version = kCheckpointFormatVersion;
    GeneratorSpec generator;
    DiscriminatorSpec discriminator;
    std::int64_t epoch = 0;
    double best_val_loss = 0.0;
    std::int64_t best_epoch = 0;
    std::uint64_t run_seed = 0;
    int resolution = 256;
    std::vector<int> mask_scales;
    MaskMode mask_mode = MaskMode::MultiscaleSquare;
    std::vector<std::vector<double>> history;
};

/// Optimizers may be null (inference-only checkpoints).
void save_checkpoint(const std::filesystem::path& path, const CheckpointInfo& info, Generator& generator,
                     Discriminator& discriminator, torch::optim::Optimizer* opt_g = nullptr,
                     torch::optim::Optimizer* opt_d = nullptr);

/// Reads metadata only. Throws FormatError on a version mismatch.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Loads tensors into already constructed modules (and optimizers when given).
void restore_checkpoint(const std::filesystem::path& path, Generator& generator, Discriminator& discriminator,
                        torch::optim::Optimizer* opt_g = nullptr, torch::optim::Optimizer* opt_d = nullptr);

struct LoadedModels {
    CheckpointInfo info;
    Generator generator{nullptr};
    Discriminator discriminator{nullptr};
};

/// Builds both networks from the stored specs and loads their weights.
LoadedModels load_models(const std::filesystem::path& path);

}  // namespace crackres
