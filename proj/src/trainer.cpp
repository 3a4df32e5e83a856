#include "crackres/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "crackres/checkpoint.hpp"
#include "crackres/errors.hpp"
#include "crackres/rng.hpp"
#include "crackres/tensor_image.hpp"

namespace crackres {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "trainer";
constexpr std::uint64_t kValidationStream = 0x7a11da7e;
constexpr std::uint64_t kStepStream = 0x57e9;

torch::Tensor mask_batch(const MaskPool& pool, std::int64_t n,
                         const std::function<std::uint64_t(std::int64_t)>& draw_seed) {
    std::vector<torch::Tensor> masks;
    masks.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const Mask& m = sample_mask(pool, draw_seed(i));
        masks.push_back(torch::from_blob(const_cast<std::uint8_t*>(m.grid.data()), {1, 1, m.height, m.width},
                                         torch::kUInt8)
                            .to(torch::kFloat32));
    }
    return torch::cat(masks, 0);
}

struct RestorationTerms {
    LossComponents<torch::Tensor> tensors;
    LossComponents<double> values;
};

// Computes only the terms with a nonzero weight; the rest stay zero.
RestorationTerms restoration_terms(const torch::Tensor& restored_unit, const torch::Tensor& clean_unit,
                                   const LossWeights& w, StyleExtractor* style) {
    RestorationTerms t;
    const auto zero = torch::zeros({}, restored_unit.options());
    t.tensors = {zero, zero, zero, zero, zero, zero};
    if (w.mae != 0.0) t.tensors.mae = mae_loss(restored_unit, clean_unit);
    if (w.ssim != 0.0) t.tensors.ssim = ssim_loss(restored_unit, clean_unit);
    if (w.gms != 0.0) t.tensors.msgms = msgms_loss(restored_unit, clean_unit);
    if (w.style != 0.0) {
        if (!style) throw ConfigError(kModule, "style weight is nonzero but no style extractor is loaded");
        t.tensors.style = style_loss(restored_unit, clean_unit, *style);
    }
    t.values.mae = t.tensors.mae.item<double>();
    t.values.ssim = t.tensors.ssim.item<double>();
    t.values.msgms = t.tensors.msgms.item<double>();
    t.values.style = t.tensors.style.item<double>();
    return t;
}

void set_requires_grad(torch::nn::Module& m, bool flag) {
    for (auto& p : m.parameters()) p.set_requires_grad(flag);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError(kModule, "epochs must be >= 1");
    if (patience < 1) throw ConfigError(kModule, "patience must be >= 1");
    if (batch_size < 1) throw ConfigError(kModule, "batch_size must be >= 1");
    if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigError(kModule, "learning rates must be positive");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
        throw ConfigError(kModule, "Adam betas must lie in (0,1)");
    if (!(lr_decay_gamma > 0.0 && lr_decay_gamma <= 1.0)) throw ConfigError(kModule, "lr_decay_gamma must lie in (0,1]");
    if (resolution < 8) throw ConfigError(kModule, "resolution must be >= 8");
    weights.validate();
}

TrainConfig TrainConfig::resolved() const {
    TrainConfig c = *this;
    if (c.generator.depth <= 0) c.generator.depth = GeneratorSpec::depth_for(c.resolution);
    if (c.mask_scales.empty()) c.mask_scales = default_mask_scales(c.resolution);
    if (!c.use_style) c.weights.style = 0.0;
    return c;
}

MaskPool TrainConfig::make_mask_pool() const {
    const TrainConfig c = resolved();
    return build_mask_pool(c.resolution, c.resolution, c.mask_scales, c.mask_mode, c.seed);
}

double scheduled_lr(double initial, double gamma, int epoch) { return initial * std::pow(gamma, epoch - 1); }

// ---------------------------------------------------------------------------
// History

std::vector<double> EpochRecord::to_row() const {
    return {static_cast<double>(epoch), train.mae, train.ssim, train.msgms, train.style, train.adversarial_g,
            train.adversarial_d, train.restoration, train.total, val_res, lr_g, lr_d, seconds};
}

EpochRecord EpochRecord::from_row(const std::vector<double>& r) {
    if (r.size() != 13) throw FormatError(kModule, "history row must have 13 columns");
    EpochRecord e;
    e.epoch = static_cast<int>(r[0]);
    e.train.mae = r[1];
    e.train.ssim = r[2];
    e.train.msgms = r[3];
    e.train.style = r[4];
    e.train.adversarial_g = r[5];
    e.train.adversarial_d = r[6];
    e.train.restoration = r[7];
    e.train.total = r[8];
    e.val_res = r[9];
    e.lr_g = r[10];
    e.lr_d = r[11];
    e.seconds = r[12];
    return e;
}

void TrainHistory::write_csv(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError(kModule, "cannot write history " + path.string());
    out << "epoch,mae,ssim,msgms,style,adv_g,adv_d,res,total,val_res,lr_g,lr_d,seconds\n";
    char buf[64];
    for (const auto& e : epochs) {
        const auto row = e.to_row();
        out << e.epoch;
        for (std::size_t i = 1; i < row.size(); ++i) {
            std::snprintf(buf, sizeof buf, ",%.10g", row[i]);
            out << buf;
        }
        out << '\n';
    }
}

bool EarlyStopping::update(int epoch, double value) {
    if (best_epoch_ == 0 || value < best_) {
        best_ = value;
        best_epoch_ = epoch;
        bad_epochs_ = 0;
        return true;
    }
    ++bad_epochs_;
    return false;
}

// ---------------------------------------------------------------------------
// Validation

double validation_loss(const RestoreFn& restore, std::span<const Image> images, const MaskPool& pool,
                       const LossWeights& weights, std::uint64_t seed, StyleExtractor* style, int batch_size) {
    if (images.empty()) throw ConfigError(kModule, "validation set is empty");
    torch::NoGradGuard no_grad;
    double sum = 0.0;
    for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t n = std::min<std::size_t>(batch_size, images.size() - start);
        const auto clean = to_batch(images.subspan(start, n));
        const auto masks = mask_batch(pool, static_cast<std::int64_t>(n), [&](std::int64_t i) {
            return derive_seed(seed, {kValidationStream, start + static_cast<std::uint64_t>(i)});
        });
        const auto corrupted_signed = clean * masks * 2.0 - 1.0;
        const auto restored_unit = (restore(corrupted_signed, clean) + 1.0) * 0.5;
        // Per-sample losses so the mean does not depend on batch boundaries.
        for (std::size_t i = 0; i < n; ++i) {
            const auto idx = static_cast<std::int64_t>(i);
            const auto t = restoration_terms(restored_unit.narrow(0, idx, 1), clean.narrow(0, idx, 1), weights, style);
            sum += weighted_restoration(t.values, weights, 0.0);
        }
    }
    return sum / static_cast<double>(images.size());
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(const TrainConfig& config, StyleExtractor style) : config_(config.resolved()), style_(std::move(style)) {
    config_.validate();
    if (config_.weights.style != 0.0 && style_.is_empty())
        throw ConfigError(kModule, "style weight is nonzero but no style extractor was supplied (use --no-style)");
    generator_ = Generator(config_.generator);
    discriminator_ = Discriminator(config_.discriminator);
    init_weights(*generator_, derive_seed(config_.seed, {0x6e}));
    init_weights(*discriminator_, derive_seed(config_.seed, {0xd1}));
    opt_g_ = std::make_unique<torch::optim::Adam>(
        generator_->parameters(),
        torch::optim::AdamOptions(config_.lr_g).betas({config_.adam_beta1, config_.adam_beta2}));
    opt_d_ = std::make_unique<torch::optim::Adam>(
        discriminator_->parameters(),
        torch::optim::AdamOptions(config_.lr_d).betas({config_.adam_beta1, config_.adam_beta2}));
    pool_ = config_.make_mask_pool();
}

void Trainer::set_learning_rates(double lr_g, double lr_d) {
    for (auto& g : opt_g_->param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr_g);
    for (auto& g : opt_d_->param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr_d);
}

LossBreakdown Trainer::train_step(const torch::Tensor& batch_unit, std::uint64_t step_seed) {
    const auto& w = config_.weights;
    const auto n = batch_unit.size(0);
    torch::manual_seed(derive_seed(step_seed, {0xd0}) >> 1);

    const auto masks = mask_batch(pool_, n,
                                  [&](std::int64_t i) { return derive_seed(step_seed, {static_cast<std::uint64_t>(i)}); });
    const auto condition = batch_unit * masks * 2.0 - 1.0;
    const auto real_signed = batch_unit * 2.0 - 1.0;
    const auto fake_signed = generator_forward(generator_, condition, RunMode::Train);

    double adv_d = 0.0;
    discriminator_->train();
    if (!config_.freeze_discriminator) {
        set_requires_grad(*discriminator_, true);
        opt_d_->zero_grad();
        const auto real_logits = discriminator_forward(discriminator_, condition, real_signed);
        const auto fake_logits = discriminator_forward(discriminator_, condition, fake_signed.detach());
        const auto d_loss = discriminator_loss(real_logits, fake_logits);
        adv_d = d_loss.item<double>();
        if (!std::isfinite(adv_d)) throw NumericError(kModule, "non-finite discriminator loss");
        d_loss.backward();
        opt_d_->step();
    }

    const auto restored_unit = (fake_signed + 1.0) * 0.5;
    auto terms = restoration_terms(restored_unit, batch_unit, w, style());
    terms.values.adv_d = adv_d;
    torch::Tensor adv_g = torch::zeros({}, batch_unit.options());
    if (w.adv != 0.0) {
        set_requires_grad(*discriminator_, false);
        adv_g = generator_adversarial_loss(discriminator_forward(discriminator_, condition, fake_signed));
        terms.values.adv_g = adv_g.item<double>();
    }
    const LossBreakdown breakdown = total_generator_loss(terms.values, w);

    const auto zero = torch::zeros({}, batch_unit.options());
    const auto restoration = weighted_restoration(terms.tensors, w, zero);
    const auto total = weighted_total(restoration, adv_g, w, zero);
    opt_g_->zero_grad();
    if (total.requires_grad()) total.backward();
    opt_g_->step();
    set_requires_grad(*discriminator_, true);
    return breakdown;
}

double Trainer::validate(std::span<const Image> images) {
    RestoreFn fn = [this](const torch::Tensor& corrupted, const torch::Tensor&) {
        return generator_forward(generator_, corrupted, RunMode::Eval);
    };
    return validation_loss(fn, images, pool_, config_.weights, config_.seed, style(), config_.batch_size);
}

// ---------------------------------------------------------------------------
// fit

std::vector<Image> load_split_images(const DatasetManifest& manifest, int resolution) {
    std::vector<Image> images;
    images.reserve(manifest.size());
    for (const auto& e : manifest.entries) images.push_back(load_image(e.image, resolution));
    return images;
}

FitResult fit(const TrainConfig& config_in, const DatasetManifest& train, const DatasetManifest& val,
              const fs::path& run_dir) {
    const TrainConfig config = config_in.resolved();
    config.validate();
    if (train.entries.empty()) throw ConfigError(kModule, "training set is empty");
    if (val.entries.empty()) throw ConfigError(kModule, "validation set is empty");
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) throw IoError(kModule, "cannot create run directory " + run_dir.string());

    StyleExtractor style{nullptr};
    if (config.weights.style != 0.0) style = load_style_extractor(config.style_weights_path);

    const auto train_images = load_split_images(train, config.resolution);
    const auto val_images = load_split_images(val, config.resolution);

    Trainer trainer(config, style);
    FitResult result;
    result.best_checkpoint = run_dir / "best.ckpt";
    result.last_checkpoint = run_dir / "last.ckpt";
    EarlyStopping stopper(config.patience);
    int start_epoch = 1;

    if (config.resume && fs::exists(result.last_checkpoint)) {
        const auto info = read_checkpoint_info(result.last_checkpoint);
        if (!(info.generator == trainer.generator()->spec()) || info.run_seed != config.seed)
            throw ConfigError(kModule, "cannot resume: " + result.last_checkpoint.string() +
                                           " was written by a different configuration");
        restore_checkpoint(result.last_checkpoint, trainer.generator(), trainer.discriminator(), &trainer.opt_g(),
                           &trainer.opt_d());
        for (const auto& row : info.history) {
            result.history.epochs.push_back(EpochRecord::from_row(row));
            stopper.update(result.history.epochs.back().epoch, result.history.epochs.back().val_res);
        }
        start_epoch = static_cast<int>(info.epoch) + 1;
        if (stopper.should_stop()) start_epoch = config.epochs + 1;
    }

    CheckpointInfo info;
    info.generator = trainer.generator()->spec();
    info.discriminator = trainer.discriminator()->spec();
    info.run_seed = config.seed;
    info.resolution = config.resolution;
    info.mask_scales = config.mask_scales;
    info.mask_mode = config.mask_mode;

    const auto n = static_cast<std::int64_t>(train_images.size());
    for (int epoch = start_epoch; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr_g = scheduled_lr(config.lr_g, config.lr_decay_gamma, epoch);
        rec.lr_d = scheduled_lr(config.lr_d, config.lr_decay_gamma, epoch);
        trainer.set_learning_rates(rec.lr_g, rec.lr_d);

        std::vector<std::int64_t> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 shuffle_rng(derive_seed(config.seed, {static_cast<std::uint64_t>(epoch)}));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        LossBreakdown sum;
        for (std::int64_t start = 0, b = 0; start < n; start += config.batch_size, ++b) {
            const std::int64_t count = std::min<std::int64_t>(config.batch_size, n - start);
            std::vector<Image> batch;
            for (std::int64_t i = 0; i < count; ++i) {
                const auto idx = static_cast<std::uint64_t>(order[static_cast<std::size_t>(start + i)]);
                const Image& src = train_images[idx];
                batch.push_back(config.augment
                                    ? augment(src, derive_seed(config.seed, {static_cast<std::uint64_t>(epoch), idx}),
                                              config.resolution)
                                    : src);
            }
            const auto step_seed =
                derive_seed(config.seed, {kStepStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)});
            LossBreakdown step;
            try {
                step = trainer.train_step(to_batch(batch), step_seed);
            } catch (const NumericError& e) {
                throw NumericError(kModule, std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                                "; last good checkpoint: " +
                                                (fs::exists(result.last_checkpoint) ? result.last_checkpoint.string()
                                                                                    : std::string("none")));
            }
            const double wgt = static_cast<double>(count);
            sum.mae += wgt * step.mae;
            sum.ssim += wgt * step.ssim;
            sum.msgms += wgt * step.msgms;
            sum.style += wgt * step.style;
            sum.adversarial_g += wgt * step.adversarial_g;
            sum.adversarial_d += wgt * step.adversarial_d;
            sum.restoration += wgt * step.restoration;
            sum.total += wgt * step.total;
        }
        const double inv = 1.0 / static_cast<double>(n);
        rec.train = {sum.mae * inv, sum.ssim * inv, sum.msgms * inv, sum.style * inv, sum.restoration * inv,
                     sum.adversarial_g * inv, sum.adversarial_d * inv, sum.total * inv};
        rec.val_res = trainer.validate(val_images);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool improved = stopper.update(epoch, rec.val_res);
        result.history.epochs.push_back(rec);

        info.epoch = epoch;
        info.best_epoch = stopper.best_epoch();
        info.best_val_loss = stopper.best_value();
        info.history.clear();
        for (const auto& e : result.history.epochs) info.history.push_back(e.to_row());
        save_checkpoint(result.last_checkpoint, info, trainer.generator(), trainer.discriminator(), &trainer.opt_g(),
                        &trainer.opt_d());
        if (improved)
            save_checkpoint(result.best_checkpoint, info, trainer.generator(), trainer.discriminator(), &trainer.opt_g(),
                            &trainer.opt_d());
        result.history.best_epoch = stopper.best_epoch();
        result.history.best_val = stopper.best_value();
        result.history.write_csv(run_dir / "history.csv");
        if (config.verbose)
            std::fprintf(stderr, "epoch %d  res %.5f  adv_g %.4f  adv_d %.4f  val_res %.5f%s  (%.1fs)\n", epoch,
                         rec.train.restoration, rec.train.adversarial_g, rec.train.adversarial_d, rec.val_res,
                         improved ? " *" : "", rec.seconds);
        if (stopper.should_stop()) break;
    }
    result.history.best_epoch = stopper.best_epoch();
    result.history.best_val = stopper.best_value();
    result.stop_epoch = result.history.epochs.empty() ? 0 : result.history.epochs.back().epoch;
    return result;
}

}  // namespace crackres
