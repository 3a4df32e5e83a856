#include "crackres/losses.hpp"

#include <cmath>

#include "crackres/errors.hpp"

namespace crackres {

namespace {

constexpr const char* kModule = "losses";
namespace F = torch::nn::functional;

void require_same_images(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.dim() != 4 || b.dim() != 4)
        throw DimensionError(kModule, std::string(what) + " expects [N,C,H,W] tensors");
    if (a.sizes() != b.sizes())
        throw DimensionError(kModule, std::string(what) + ": shape mismatch");
}

torch::Tensor gaussian_window(const SsimOptions& opt, int channels, const torch::TensorOptions& to) {
    auto g = torch::empty({opt.window}, to.dtype(torch::kFloat64));
    const double centre = opt.window / 2;
    for (int i = 0; i < opt.window; ++i) {
        const double d = i - centre;
        g[i] = std::exp(-d * d / (2.0 * opt.sigma * opt.sigma));
    }
    g = g / g.sum();
    auto w2 = torch::outer(g, g).to(to.dtype());
    return w2.expand({channels, 1, opt.window, opt.window}).contiguous();
}

torch::Tensor local_mean(const torch::Tensor& x, const torch::Tensor& window, int pad) {
    auto padded = F::pad(x, F::PadFuncOptions({pad, pad, pad, pad}).mode(torch::kReflect));
    return F::conv2d(padded, window, F::Conv2dFuncOptions().groups(x.size(1)));
}

torch::Tensor prewitt_magnitude(const torch::Tensor& gray) {
    auto kx = torch::tensor({1.0, 0.0, -1.0, 1.0, 0.0, -1.0, 1.0, 0.0, -1.0}, gray.options()).view({1, 1, 3, 3}) / 3.0;
    auto ky = kx.transpose(2, 3).contiguous();
    auto padded = F::pad(gray, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReflect));
    auto gx = F::conv2d(padded, kx);
    auto gy = F::conv2d(padded, ky);
    // Exact magnitude; flat pixels get a zero subgradient instead of an infinite one.
    auto sq = gx * gx + gy * gy;
    auto positive = sq > 0;
    return torch::where(positive, torch::sqrt(torch::where(positive, sq, torch::ones_like(sq))), torch::zeros_like(sq));
}

}  // namespace

torch::Tensor mae_loss(const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes()) throw DimensionError(kModule, "mae_loss: shape mismatch");
    return (a - b).abs().mean();
}

torch::Tensor ssim_map(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& opt) {
    require_same_images(a, b, "ssim");
    if (opt.window % 2 == 0 || opt.window < 3) throw ArgumentError(kModule, "SSIM window must be odd and >= 3");
    if (a.size(2) < opt.window || a.size(3) < opt.window)
        throw DimensionError(kModule, "image " + std::to_string(a.size(2)) + "x" + std::to_string(a.size(3)) +
                                          " is smaller than the " + std::to_string(opt.window) + "-pixel SSIM window");
    const int pad = opt.window / 2;
    const auto window = gaussian_window(opt, static_cast<int>(a.size(1)), a.options());
    const double c1 = std::pow(opt.k1 * opt.dynamic_range, 2);
    const double c2 = std::pow(opt.k2 * opt.dynamic_range, 2);

    auto mu_a = local_mean(a, window, pad);
    auto mu_b = local_mean(b, window, pad);
    auto var_a = local_mean(a * a, window, pad) - mu_a * mu_a;
    auto var_b = local_mean(b * b, window, pad) - mu_b * mu_b;
    auto cov = local_mean(a * b, window, pad) - mu_a * mu_b;
    return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
           ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

torch::Tensor ssim_loss(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& opt) {
    return (1.0 - ssim_map(a, b, opt)).mean();
}

torch::Tensor gms_map(const torch::Tensor& a, const torch::Tensor& b, const GmsOptions& opt) {
    require_same_images(a, b, "gms");
    if (a.size(2) < 2 || a.size(3) < 2) throw DimensionError(kModule, "GMS needs at least 2x2 pixels");
    auto ga = prewitt_magnitude(a.mean(1, true));
    auto gb = prewitt_magnitude(b.mean(1, true));
    return (2.0 * ga * gb + opt.c) / (ga * ga + gb * gb + opt.c);
}

torch::Tensor msgms_loss(const torch::Tensor& a, const torch::Tensor& b, const GmsOptions& opt) {
    require_same_images(a, b, "msgms");
    const std::int64_t factor = std::int64_t{1} << (opt.levels - 1);
    if (opt.levels < 1 || a.size(2) % factor != 0 || a.size(3) % factor != 0)
        throw DimensionError(kModule, "MSGMS needs spatial dims divisible by " + std::to_string(factor));
    torch::Tensor x = a, y = b;
    torch::Tensor total = torch::zeros({}, a.options());
    for (int level = 0; level < opt.levels; ++level) {
        if (level > 0) {
            x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
            y = F::avg_pool2d(y, F::AvgPool2dFuncOptions(2));
        }
        total = total + (1.0 - gms_map(x, y, opt)).mean();
    }
    return total / static_cast<double>(opt.levels);
}

torch::Tensor gram_matrix(const torch::Tensor& features) {
    if (features.dim() != 4) throw DimensionError(kModule, "gram_matrix expects [N,C,H,W]");
    const auto n = features.size(0), c = features.size(1), hw = features.size(2) * features.size(3);
    auto f = features.reshape({n, c, hw});
    return torch::bmm(f, f.transpose(1, 2)) / static_cast<double>(c * hw);
}

StyleExtractorSpec StyleExtractorSpec::vgg16() {
    StyleExtractorSpec s;
    for (int w : {64, 64, 0, 128, 128, 0, 256, 256, 256, 0, 512, 512, 512}) s.layers.push_back({w});
    s.taps = {2, 4, 7, 10};
    s.mean = {0.485, 0.456, 0.406};
    s.stddev = {0.229, 0.224, 0.225};
    return s;
}

StyleExtractorImpl::StyleExtractorImpl(StyleExtractorSpec spec) : spec_(std::move(spec)) {
    if (spec_.taps.empty()) throw ArgumentError(kModule, "style extractor needs at least one tap");
    int in = spec_.input_channels;
    for (const auto& layer : spec_.layers) {
        if (layer.out_channels <= 0) continue;
        const auto idx = convs_.size();
        convs_.push_back(register_module(
            "conv" + std::to_string(idx),
            torch::nn::Conv2d(torch::nn::Conv2dOptions(in, layer.out_channels, 3).padding(1))));
        in = layer.out_channels;
    }
    for (int t : spec_.taps)
        if (t < 1 || t > static_cast<int>(convs_.size()))
            throw ArgumentError(kModule, "style tap " + std::to_string(t) + " is out of range");
    if (!spec_.mean.empty()) {
        if (spec_.mean.size() != static_cast<std::size_t>(spec_.input_channels) || spec_.stddev.size() != spec_.mean.size())
            throw ArgumentError(kModule, "style normalisation statistics must match the input channels");
        mean_ = register_buffer("mean", torch::tensor(spec_.mean).view({1, -1, 1, 1}).to(torch::kFloat32));
        stddev_ = register_buffer("stddev", torch::tensor(spec_.stddev).view({1, -1, 1, 1}).to(torch::kFloat32));
    }
    freeze();
}

std::vector<torch::Tensor> StyleExtractorImpl::forward(const torch::Tensor& x) {
    torch::Tensor h = x;
    if (mean_.defined()) h = (h - mean_.to(x.dtype())) / stddev_.to(x.dtype());
    std::vector<torch::Tensor> out;
    const int last_tap = *std::max_element(spec_.taps.begin(), spec_.taps.end());
    int conv_index = 0;
    for (const auto& layer : spec_.layers) {
        if (layer.out_channels == 0) {
            h = F::max_pool2d(h, F::MaxPool2dFuncOptions(2));
            continue;
        }
        h = torch::relu(convs_[conv_index]->forward(h));
        ++conv_index;
        if (std::find(spec_.taps.begin(), spec_.taps.end(), conv_index) != spec_.taps.end()) out.push_back(h);
        if (conv_index == last_tap) break;
    }
    return out;
}

void StyleExtractorImpl::load_weights(const std::filesystem::path& path) {
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(path.string());
    } catch (const c10::Error& e) {
        throw ConfigError(kModule, "cannot read style weights " + path.string() + ": " + e.what_without_backtrace());
    }
    torch::NoGradGuard no_grad;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        torch::Tensor w, b;
        const auto key = "conv" + std::to_string(i);
        if (!archive.try_read(key + "_weight", w) || !archive.try_read(key + "_bias", b))
            throw ConfigError(kModule, "style weights " + path.string() + " lack " + key + "_weight/_bias");
        if (w.sizes() != convs_[i]->weight.sizes() || b.sizes() != convs_[i]->bias.sizes())
            throw ConfigError(kModule, "style weights " + path.string() + " have the wrong shape for " + key);
        convs_[i]->weight.copy_(w);
        convs_[i]->bias.copy_(b);
    }
}

void StyleExtractorImpl::randomize(std::uint64_t seed) {
    torch::NoGradGuard no_grad;
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    for (auto& conv : convs_) {
        const double fan_in = static_cast<double>(conv->weight[0].numel());
        conv->weight.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
        conv->bias.normal_(0.0, 0.01, gen);
    }
}

void StyleExtractorImpl::freeze() {
    for (auto& p : parameters()) p.set_requires_grad(false);
    eval();
}

StyleExtractor load_style_extractor(const std::filesystem::path& weights_path) {
    if (weights_path.empty() || !std::filesystem::exists(weights_path))
        throw ConfigError(kModule,
                          "style extractor weights not found at '" + weights_path.string() +
                              "'. Export them with tools/export_vgg16_weights.py (needs torchvision and network "
                              "access) and set style_weights_path, or disable the style term with --no-style.");
    StyleExtractor extractor(StyleExtractorSpec::vgg16());
    extractor->load_weights(weights_path);
    extractor->freeze();
    return extractor;
}

torch::Tensor style_loss(const torch::Tensor& a, const torch::Tensor& b, StyleExtractor& extractor) {
    require_same_images(a, b, "style");
    if (extractor.is_empty()) throw ConfigError(kModule, "style loss requested without a loaded extractor");
    const auto fa = extractor->forward(a);
    const auto fb = extractor->forward(b);
    torch::Tensor total = torch::zeros({}, a.options());
    for (std::size_t i = 0; i < fa.size(); ++i) total = total + (gram_matrix(fa[i]) - gram_matrix(fb[i])).abs().mean();
    return total / static_cast<double>(fa.size());
}

torch::Tensor discriminator_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
    if (real_logits.sizes() != fake_logits.sizes())
        throw DimensionError(kModule, "real and fake logit maps differ in shape");
    return F::softplus(-real_logits).mean() + F::softplus(fake_logits).mean();
}

torch::Tensor generator_adversarial_loss(const torch::Tensor& fake_logits) {
    return F::softplus(-fake_logits).mean();
}

AdversarialLosses adversarial_losses(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
    return {generator_adversarial_loss(fake_logits), discriminator_loss(real_logits, fake_logits)};
}

void LossWeights::validate() const {
    for (double w : {mae, ssim, gms, style, res, adv})
        if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError(kModule, "loss weights must be finite and >= 0");
}

LossBreakdown total_generator_loss(const LossComponents<double>& c, const LossWeights& w) {
    w.validate();
    const std::pair<const char*, std::pair<double, double>> checks[] = {
        {"mae", {c.mae, w.mae}},           {"ssim", {c.ssim, w.ssim}},   {"msgms", {c.msgms, w.gms}},
        {"style", {c.style, w.style}},     {"adversarial_g", {c.adv_g, w.adv}},
        {"adversarial_d", {c.adv_d, 1.0}},
    };
    for (const auto& [name, vw] : checks)
        if (vw.second != 0.0 && !std::isfinite(vw.first))
            throw NumericError(kModule, std::string("non-finite ") + name + " loss component");

    LossBreakdown out;
    out.mae = c.mae;
    out.ssim = c.ssim;
    out.msgms = c.msgms;
    out.style = c.style;
    out.adversarial_g = c.adv_g;
    out.adversarial_d = c.adv_d;
    out.restoration = weighted_restoration(c, w, 0.0);
    out.total = weighted_total(out.restoration, c.adv_g, w, 0.0);
    return out;
}

}  // namespace crackres
