#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace crackres {

/// U-Net restoration generator hyperparameters (Pix2Pix widths).
struct GeneratorSpec {
    int input_channels = 3;
    int output_channels = 3;
    int base_width = 64;
    int max_width = 512;
    int depth = 8;
    double dropout_rate = 0.5;
    int dropout_blocks = 3;  // decoder blocks nearest the bottleneck
    double leaky_slope = 0.2;

    void validate() const;
    int size_multiple() const { return 1 << depth; }
    std::vector<int> encoder_widths() const;
    /// Depth that brings a square input of `resolution` down to 1x1.
    static int depth_for(int resolution);
    bool operator==(const GeneratorSpec&) const = default;
};

/// Conditional patch discriminator: strided blocks, one stride-1 block, then a
/// stride-1 head producing one logit per receptive field.
struct DiscriminatorSpec {
    int condition_channels = 3;
    int candidate_channels = 3;
    int base_width = 64;
    int num_downsample_blocks = 3;
    double leaky_slope = 0.2;

    int input_channels() const { return condition_channels + candidate_channels; }
    void validate() const;
    /// Spatial side of the logit map for a square input side.
    int output_size(int input_size) const;
    bool operator==(const DiscriminatorSpec&) const = default;
};

enum class RunMode { Train, Eval };

class GeneratorImpl : public torch::nn::Module {
public:
    explicit GeneratorImpl(const GeneratorSpec& spec);

    torch::Tensor forward(const torch::Tensor& x);

    const GeneratorSpec& spec() const { return spec_; }
    /// skip_sources()[j] is the encoder block concatenated into decoder block
    /// j, or -1 for the bottleneck block which takes no skip.
    const std::vector<int>& skip_sources() const { return skip_sources_; }
    /// Keep dropout stochastic in eval mode.
    void set_inference_dropout(bool enabled) { inference_dropout_ = enabled; }
    bool inference_dropout() const { return inference_dropout_; }

private:
    GeneratorSpec spec_;
    std::vector<torch::nn::Sequential> encoder_;
    std::vector<torch::nn::Sequential> decoder_;
    std::vector<int> skip_sources_;
    bool inference_dropout_ = false;
};
TORCH_MODULE(Generator);

class DiscriminatorImpl : public torch::nn::Module {
public:
    explicit DiscriminatorImpl(const DiscriminatorSpec& spec);

    torch::Tensor forward(const torch::Tensor& pair);
    const DiscriminatorSpec& spec() const { return spec_; }

private:
    DiscriminatorSpec spec_;
    torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(Discriminator);

/// Conv kernels ~ N(0, 0.02), norm scale 1, every bias/offset 0.
void init_weights(torch::nn::Module& module, std::uint64_t seed);

std::int64_t parameter_count(torch::nn::Module& module);

/// Runs the generator on a signed-range batch [N,C,H,W].
torch::Tensor generator_forward(Generator& generator, const torch::Tensor& corrupted, RunMode mode);

/// Returns the patch logit map [N,1,h,w] for (condition, candidate).
torch::Tensor discriminator_forward(Discriminator& discriminator, const torch::Tensor& condition,
                                    const torch::Tensor& candidate);

}  // namespace crackres
