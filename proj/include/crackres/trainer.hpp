#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "crackres/datapipe.hpp"
#include "crackres/losses.hpp"
#include "crackres/maskgen.hpp"
#include "crackres/model.hpp"

namespace crackres {

struct TrainConfig {
    int epochs = 200;
    int patience = 20;
    int batch_size = 8;
    double lr_g = 1e-4;
    double lr_d = 4e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double lr_decay_gamma = 0.97;
    LossWeights weights;
    std::uint64_t seed = 0;
    int resolution = 256;
    std::vector<int> mask_scales;  // empty: {res/2, res/4, res/8}
    MaskMode mask_mode = MaskMode::MultiscaleSquare;
    GeneratorSpec generator{.depth = 0};  // depth 0: bring the resolution to 1x1
    DiscriminatorSpec discriminator;
    bool use_style = true;
    std::filesystem::path style_weights_path;
    bool freeze_discriminator = false;
    bool augment = true;
    bool resume = false;
    bool verbose = false;

    void validate() const;
    /// Copy with automatic fields filled in (depth, mask scales, style weight).
    TrainConfig resolved() const;
    MaskPool make_mask_pool() const;
};

/// Learning rate in effect during 1-based epoch `epoch`.
double scheduled_lr(double initial, double gamma, int epoch);

struct EpochRecord {
    int epoch = 0;
    LossBreakdown train;
    double val_res = 0.0;
    double lr_g = 0.0;
    double lr_d = 0.0;
    double seconds = 0.0;

    std::vector<double> to_row() const;
    static EpochRecord from_row(const std::vector<double>& row);
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_val = 0.0;

    /// epoch,mae,ssim,msgms,style,adv_g,adv_d,res,total,val_res,lr_g,lr_d,seconds
    void write_csv(const std::filesystem::path& path) const;
};

/// Stops once the monitored value has failed to improve for `patience`
/// consecutive epochs.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience) : patience_(patience) {}

    /// Returns true when `value` is a new best. Epochs are 1-based.
    bool update(int epoch, double value);
    bool should_stop() const { return bad_epochs_ >= patience_; }
    int best_epoch() const { return best_epoch_; }
    double best_value() const { return best_; }

private:
    int patience_;
    int best_epoch_ = 0;
    int bad_epochs_ = 0;
    double best_ = 0.0;
};

/// Restoration used by validation: maps a signed-range corrupted batch to a
/// signed-range restoration. Clean unit-range targets are passed alongside so
/// reference restorers can be plugged in.
using RestoreFn = std::function<torch::Tensor(const torch::Tensor& corrupted_signed, const torch::Tensor& clean_unit)>;

/// Mean weighted restoration loss over `images`, each corrupted by a mask
/// fixed by (seed, index).
double validation_loss(const RestoreFn& restore, std::span<const Image> images, const MaskPool& pool,
                       const LossWeights& weights, std::uint64_t seed, StyleExtractor* style, int batch_size);

/// Owns the two networks, their optimisers and the mask pool.
class Trainer {
public:
    explicit Trainer(const TrainConfig& config, StyleExtractor style = StyleExtractor{nullptr});

    /// One discriminator and one generator update on a unit-range batch.
    LossBreakdown train_step(const torch::Tensor& batch_unit, std::uint64_t step_seed);
    double validate(std::span<const Image> images);

    void set_learning_rates(double lr_g, double lr_d);
    Generator& generator() { return generator_; }
    Discriminator& discriminator() { return discriminator_; }
    torch::optim::Adam& opt_g() { return *opt_g_; }
    torch::optim::Adam& opt_d() { return *opt_d_; }
    const MaskPool& mask_pool() const { return pool_; }
    const TrainConfig& config() const { return config_; }
    StyleExtractor* style() { return style_.is_empty() ? nullptr : &style_; }

private:
    TrainConfig config_;
    Generator generator_{nullptr};
    Discriminator discriminator_{nullptr};
    std::unique_ptr<torch::optim::Adam> opt_g_;
    std::unique_ptr<torch::optim::Adam> opt_d_;
    MaskPool pool_;
    StyleExtractor style_{nullptr};
};

struct FitResult {
    TrainHistory history;
    std::filesystem::path best_checkpoint;
    std::filesystem::path last_checkpoint;
    int stop_epoch = 0;
};

/// Loads a split into memory at `resolution`.
std::vector<Image> load_split_images(const DatasetManifest& manifest, int resolution);

/// Full training run. Writes best.ckpt, last.ckpt and history.csv into
/// run_dir; with config.resume it continues from run_dir/last.ckpt.
FitResult fit(const TrainConfig& config, const DatasetManifest& train, const DatasetManifest& val,
              const std::filesystem::path& run_dir);

}  // namespace crackres
