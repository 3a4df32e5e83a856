#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "crackres/image.hpp"
#include "crackres/maskgen.hpp"
#include "crackres/model.hpp"

namespace crackres {

enum class RestoreStrategy { Direct, MaskedEnsemble };

std::string to_string(RestoreStrategy strategy);
RestoreStrategy parse_restore_strategy(std::string_view text);

/// Wraps a trained generator for test-time restoration of unit-range images.
class Restorer {
public:
    Restorer() = default;
    Restorer(Generator generator, std::vector<int> mask_scales, MaskMode mask_mode, std::uint64_t mask_seed);

    static Restorer from_checkpoint(const std::filesystem::path& path);

    bool loaded() const { return !generator_.is_empty(); }
    Generator& generator() { return generator_; }

    /// direct: one eval pass on the clean image. masked_ensemble: for every
    /// complement pair, each pixel is taken from the pass where it was
    /// removed; pair composites are averaged.
    Image restore(const Image& image, RestoreStrategy strategy, bool inference_dropout = false);

private:
    torch::Tensor run(const torch::Tensor& unit_batch, bool inference_dropout);

    Generator generator_{nullptr};
    std::vector<int> mask_scales_;
    MaskMode mask_mode_ = MaskMode::MultiscaleSquare;
    std::uint64_t mask_seed_ = 0;
};

/// Channel-averaged squared residual.
ErrorMap error_map(const Image& image, const Image& restored);

struct BilateralParams {
    int diameter = 9;
    double sigma_intensity = 75.0;  // 8-bit levels
    double sigma_spatial = 75.0;    // pixels

    void validate() const;
};

/// Min-max quantisation to 256 levels. `degenerate` is set for constant maps.
struct QuantizedMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> levels;
    double min = 0.0;
    double max = 0.0;
    bool degenerate = false;
};

QuantizedMap quantize_min_max(const ErrorMap& map);

/// Edge-preserving smoothing on the 8-bit quantised map (circular window,
/// reflect-101 borders), mapped back to the input's value range.
ErrorMap smooth_bilateral(const ErrorMap& map, const BilateralParams& params);

/// Otsu level of a 256-bin histogram: maximises between-class variance over
/// classes {<= t} and {> t}, ties to the lower level. Exact arithmetic.
int otsu_level(std::span<const std::uint64_t, 256> histogram);

struct OtsuResult {
    int threshold = 0;
    BinaryCrackMap binary;
    bool no_anomaly = false;
};

/// Quantises, thresholds, and flags pixels strictly above the Otsu level.
/// A constant map yields an all-zero result with `no_anomaly` set.
OtsuResult otsu_threshold(const ErrorMap& map);

struct DetectParams {
    RestoreStrategy strategy = RestoreStrategy::Direct;
    BilateralParams bilateral;
    bool inference_dropout = false;
};

struct Detection {
    Image restored;
    ErrorMap raw;
    ErrorMap smoothed;
    OtsuResult otsu;
};

/// error_map -> smooth_bilateral -> otsu_threshold on a given restoration.
Detection postprocess(const Image& image, Image restored, const BilateralParams& bilateral);

/// restore -> error_map -> smooth_bilateral -> otsu_threshold.
Detection detect(Restorer& restorer, const Image& image, const DetectParams& params);

}  // namespace crackres
