#include "crackres/model.hpp"

#include <algorithm>

#include "crackres/errors.hpp"

namespace crackres {

namespace {

constexpr const char* kModule = "model";
namespace nn = torch::nn;

nn::Conv2d conv4(int in, int out, int stride, bool bias) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(stride).padding(1).bias(bias));
}

}  // namespace

void GeneratorSpec::validate() const {
    if (depth < 1) throw ArgumentError(kModule, "generator depth must be >= 1");
    if (depth > 16) throw ArgumentError(kModule, "generator depth is unreasonably large");
    if (input_channels < 1 || output_channels < 1 || base_width < 1 || max_width < base_width)
        throw ArgumentError(kModule, "generator channel widths must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ArgumentError(kModule, "dropout rate must lie in [0,1)");
    if (dropout_blocks < 0) throw ArgumentError(kModule, "dropout block count must be >= 0");
}

std::vector<int> GeneratorSpec::encoder_widths() const {
    std::vector<int> widths;
    long w = base_width;
    for (int i = 0; i < depth; ++i) {
        widths.push_back(static_cast<int>(std::min<long>(w, max_width)));
        w *= 2;
    }
    return widths;
}

int GeneratorSpec::depth_for(int resolution) {
    int d = 0;
    while ((1 << (d + 1)) <= resolution && resolution % (1 << (d + 1)) == 0) ++d;
    return std::max(d, 1);
}

void DiscriminatorSpec::validate() const {
    if (condition_channels < 1 || candidate_channels < 1 || base_width < 1)
        throw ArgumentError(kModule, "discriminator channel counts must be positive");
    if (num_downsample_blocks < 1) throw ArgumentError(kModule, "discriminator needs a downsampling block");
}

int DiscriminatorSpec::output_size(int input_size) const {
    int s = input_size;
    for (int i = 0; i < num_downsample_blocks; ++i) s = (s + 2 - 4) / 2 + 1;
    for (int i = 0; i < 2; ++i) s = s + 2 - 4 + 1;
    return s;
}

GeneratorImpl::GeneratorImpl(const GeneratorSpec& spec) : spec_(spec) {
    spec_.validate();
    const int d = spec_.depth;
    const auto widths = spec_.encoder_widths();

    int in = spec_.input_channels;
    for (int i = 0; i < d; ++i) {
        const bool normed = i > 0 && i < d - 1;
        nn::Sequential block;
        block->push_back(conv4(in, widths[i], 2, !normed));
        if (normed) block->push_back(nn::BatchNorm2d(widths[i]));
        block->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(spec_.leaky_slope)));
        encoder_.push_back(register_module("enc" + std::to_string(i), block));
        in = widths[i];
    }

    std::vector<int> consumers(d, 0);
    for (int j = 0; j < d; ++j) {
        const bool outermost = j == d - 1;
        const int skip = j == 0 ? -1 : d - 1 - j;
        const int in_ch = j == 0 ? widths[d - 1] : 2 * widths[d - 1 - j];
        const int out_ch = outermost ? spec_.output_channels : widths[d - 2 - j];
        nn::Sequential block;
        block->push_back(nn::ConvTranspose2d(
            nn::ConvTranspose2dOptions(in_ch, out_ch, 4).stride(2).padding(1).bias(outermost)));
        if (!outermost) block->push_back(nn::BatchNorm2d(out_ch));
        decoder_.push_back(register_module("dec" + std::to_string(j), block));
        skip_sources_.push_back(skip);
        if (skip >= 0) ++consumers[skip];
    }
    for (int i = 0; i < d - 1; ++i)
        if (consumers[i] != 1)
            throw StateError(kModule, "encoder block " + std::to_string(i) + " has " + std::to_string(consumers[i]) +
                                          " skip consumers, expected exactly one");
    if (consumers[d - 1] != 0) throw StateError(kModule, "bottleneck features must not be used as a skip");
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x) {
    const int d = spec_.depth;
    std::vector<torch::Tensor> features;
    features.reserve(d);
    torch::Tensor h = x;
    for (auto& block : encoder_) {
        h = block->forward(h);
        features.push_back(h);
    }
    const bool dropout_active = is_training() || inference_dropout_;
    for (int j = 0; j < d; ++j) {
        const int skip = skip_sources_[j];
        torch::Tensor in = skip < 0 ? h : torch::cat({h, features[skip]}, 1);
        h = decoder_[j]->forward(in);
        if (j == d - 1) return torch::tanh(h);
        if (j < spec_.dropout_blocks && spec_.dropout_rate > 0.0)
            h = torch::dropout(h, spec_.dropout_rate, dropout_active);
        h = torch::relu(h);
    }
    return h;
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorSpec& spec) : spec_(spec) {
    spec_.validate();
    const auto lrelu = [&] { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(spec_.leaky_slope)); };
    nn::Sequential body;
    int in = spec_.input_channels();
    int width = spec_.base_width;
    body->push_back(conv4(in, width, 2, true));
    body->push_back(lrelu());
    in = width;
    for (int n = 1; n < spec_.num_downsample_blocks; ++n) {
        width = spec_.base_width * std::min(1 << n, 8);
        body->push_back(conv4(in, width, 2, false));
        body->push_back(nn::BatchNorm2d(width));
        body->push_back(lrelu());
        in = width;
    }
    width = spec_.base_width * std::min(1 << spec_.num_downsample_blocks, 8);
    body->push_back(conv4(in, width, 1, false));
    body->push_back(nn::BatchNorm2d(width));
    body->push_back(lrelu());
    body->push_back(conv4(width, 1, 1, true));
    body_ = register_module("body", body);
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& pair) { return body_->forward(pair); }

void init_weights(torch::nn::Module& module, std::uint64_t seed) {
    torch::NoGradGuard no_grad;
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    for (auto& m : module.modules(/*include_self=*/true)) {
        if (auto* conv = m->as<nn::Conv2dImpl>()) {
            conv->weight.normal_(0.0, 0.02, gen);
            if (conv->bias.defined()) conv->bias.zero_();
        } else if (auto* convt = m->as<nn::ConvTranspose2dImpl>()) {
            convt->weight.normal_(0.0, 0.02, gen);
            if (convt->bias.defined()) convt->bias.zero_();
        } else if (auto* bn = m->as<nn::BatchNorm2dImpl>()) {
            bn->weight.fill_(1.0);
            bn->bias.zero_();
        }
    }
}

std::int64_t parameter_count(torch::nn::Module& module) {
    std::int64_t n = 0;
    for (const auto& p : module.parameters()) n += p.numel();
    return n;
}

torch::Tensor generator_forward(Generator& generator, const torch::Tensor& corrupted, RunMode mode) {
    if (generator.is_empty()) throw StateError(kModule, "generator parameters are not initialized");
    const auto& spec = generator->spec();
    if (corrupted.dim() != 4 || corrupted.size(1) != spec.input_channels)
        throw DimensionError(kModule, "generator expects [N," + std::to_string(spec.input_channels) + ",H,W] input");
    const int m = spec.size_multiple();
    if (corrupted.size(2) % m != 0 || corrupted.size(3) % m != 0)
        throw DimensionError(kModule, "spatial size " + std::to_string(corrupted.size(2)) + "x" +
                                          std::to_string(corrupted.size(3)) + " is not divisible by " +
                                          std::to_string(m));
    generator->train(mode == RunMode::Train);
    return generator->forward(corrupted);
}

torch::Tensor discriminator_forward(Discriminator& discriminator, const torch::Tensor& condition,
                                    const torch::Tensor& candidate) {
    if (discriminator.is_empty()) throw StateError(kModule, "discriminator parameters are not initialized");
    if (condition.dim() != 4 || candidate.dim() != 4 || condition.size(0) != candidate.size(0) ||
        condition.size(2) != candidate.size(2) || condition.size(3) != candidate.size(3))
        throw DimensionError(kModule, "condition and candidate must share batch and spatial dimensions");
    const auto& spec = discriminator->spec();
    if (condition.size(1) != spec.condition_channels || candidate.size(1) != spec.candidate_channels)
        throw DimensionError(kModule, "condition/candidate channel counts do not match the discriminator");
    return discriminator->forward(torch::cat({condition, candidate}, 1));
}

}  // namespace crackres
