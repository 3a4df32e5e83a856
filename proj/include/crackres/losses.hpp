#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace crackres {

// All image losses take [N,C,H,W] tensors in unit range [0,1].

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

struct GmsOptions {
    // 170 on an 8-bit scale, rescaled to unit range.
    double c = 170.0 / (255.0 * 255.0);
    int levels = 4;
};

torch::Tensor mae_loss(const torch::Tensor& a, const torch::Tensor& b);

/// Per-pixel, per-channel SSIM [N,C,H,W]; windows are reflect-padded so every
/// pixel gets a centred window.
torch::Tensor ssim_map(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& opt = {});
torch::Tensor ssim_loss(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& opt = {});

/// Gradient magnitude similarity [N,1,H,W] on the channel-mean image.
torch::Tensor gms_map(const torch::Tensor& a, const torch::Tensor& b, const GmsOptions& opt = {});
torch::Tensor msgms_loss(const torch::Tensor& a, const torch::Tensor& b, const GmsOptions& opt = {});

/// [N,C,H,W] -> [N,C,C] normalised by C*H*W.
torch::Tensor gram_matrix(const torch::Tensor& features);

/// One entry per layer: a 3x3 convolution (out_channels > 0, followed by
/// ReLU) or a 2x2 max-pool (out_channels == 0).
struct StyleLayer {
    int out_channels = 0;
};

struct StyleExtractorSpec {
    int input_channels = 3;
    std::vector<StyleLayer> layers;
    /// 1-based convolution indices whose activations feed a Gram matrix.
    std::vector<int> taps;
    /// Per-channel input statistics applied after the unit-range input.
    std::vector<double> mean;
    std::vector<double> stddev;

    /// VGG-16 features through conv4_3, tapping relu1_2/2_2/3_3/4_3.
    static StyleExtractorSpec vgg16();
};

/// Frozen convolutional feature extractor for the style loss.
class StyleExtractorImpl : public torch::nn::Module {
public:
    explicit StyleExtractorImpl(StyleExtractorSpec spec);

    /// Activations at every tap, in tap order.
    std::vector<torch::Tensor> forward(const torch::Tensor& x);
    const StyleExtractorSpec& spec() const { return spec_; }
    std::vector<torch::nn::Conv2d>& convs() { return convs_; }

    /// Loads kernels stored under keys conv{i}_weight / conv{i}_bias (0-based).
    void load_weights(const std::filesystem::path& path);
    void randomize(std::uint64_t seed);
    void freeze();

private:
    StyleExtractorSpec spec_;
    std::vector<torch::nn::Conv2d> convs_;
    torch::Tensor mean_, stddev_;
};
TORCH_MODULE(StyleExtractor);

/// Builds the VGG-16 extractor from a weights file. Throws ConfigError with
/// fetch instructions when the file is missing.
StyleExtractor load_style_extractor(const std::filesystem::path& weights_path);

torch::Tensor style_loss(const torch::Tensor& a, const torch::Tensor& b, StyleExtractor& extractor);

struct AdversarialLosses {
    torch::Tensor g_loss;
    torch::Tensor d_loss;
};

/// Logit-space binary cross-entropy. The generator term is the
/// non-saturating -log D(fake).
AdversarialLosses adversarial_losses(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);
torch::Tensor discriminator_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);
torch::Tensor generator_adversarial_loss(const torch::Tensor& fake_logits);

struct LossWeights {
    double mae = 1.0;
    double ssim = 1.0;
    double gms = 1.0;
    double style = 10.0;
    double res = 100.0;
    double adv = 1.0;

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

template <class T>
struct LossComponents {
    T mae{};
    T ssim{};
    T msgms{};
    T style{};
    T adv_g{};
    T adv_d{};
};

struct LossBreakdown {
    double mae = 0, ssim = 0, msgms = 0, style = 0;
    double restoration = 0;
    double adversarial_g = 0, adversarial_d = 0;
    double total = 0;
};

/// Weighted restoration sum; terms with a zero weight are never touched.
template <class T>
T weighted_restoration(const LossComponents<T>& c, const LossWeights& w, T zero) {
    T r = zero;
    if (w.mae != 0.0) r = r + w.mae * c.mae;
    if (w.ssim != 0.0) r = r + w.ssim * c.ssim;
    if (w.gms != 0.0) r = r + w.gms * c.msgms;
    if (w.style != 0.0) r = r + w.style * c.style;
    return r;
}

template <class T>
T weighted_total(const T& restoration, const T& adv_g, const LossWeights& w, T zero) {
    T t = zero;
    if (w.res != 0.0) t = t + w.res * restoration;
    if (w.adv != 0.0) t = t + w.adv * adv_g;
    return t;
}

/// Fills a breakdown from scalar components. Throws NumericError naming the
/// first non-finite component that carries a nonzero weight.
LossBreakdown total_generator_loss(const LossComponents<double>& components, const LossWeights& weights);

}  // namespace crackres
