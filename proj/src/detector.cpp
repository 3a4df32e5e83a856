#include "crackres/detector.hpp"

#include <algorithm>
#include <cmath>

#include "crackres/checkpoint.hpp"
#include "crackres/datapipe.hpp"
#include "crackres/errors.hpp"
#include "crackres/tensor_image.hpp"

namespace crackres {

namespace {

constexpr const char* kModule = "detector";

int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
    return i;
}

}  // namespace

std::string to_string(RestoreStrategy strategy) {
    return strategy == RestoreStrategy::Direct ? "direct" : "masked_ensemble";
}

RestoreStrategy parse_restore_strategy(std::string_view text) {
    if (text == "direct") return RestoreStrategy::Direct;
    if (text == "masked_ensemble") return RestoreStrategy::MaskedEnsemble;
    throw ArgumentError(kModule, "unknown restore strategy '" + std::string(text) + "' (direct or masked_ensemble)");
}

Restorer::Restorer(Generator generator, std::vector<int> mask_scales, MaskMode mask_mode, std::uint64_t mask_seed)
    : generator_(std::move(generator)),
      mask_scales_(std::move(mask_scales)),
      mask_mode_(mask_mode),
      mask_seed_(mask_seed) {}

Restorer Restorer::from_checkpoint(const std::filesystem::path& path) {
    if (path.empty() || !std::filesystem::exists(path))
        throw StateError(kModule, "no trained checkpoint at '" + path.string() + "'");
    auto models = load_models(path);
    return Restorer(models.generator, models.info.mask_scales, models.info.mask_mode, models.info.run_seed);
}

torch::Tensor Restorer::run(const torch::Tensor& unit_batch, bool inference_dropout) {
    torch::NoGradGuard no_grad;
    generator_->set_inference_dropout(inference_dropout);
    auto out = generator_forward(generator_, unit_batch * 2.0 - 1.0, RunMode::Eval);
    generator_->set_inference_dropout(false);
    return ((out + 1.0) * 0.5).clamp(0.0, 1.0);
}

Image Restorer::restore(const Image& image, RestoreStrategy strategy, bool inference_dropout) {
    if (!loaded()) throw StateError(kModule, "restore called without a trained checkpoint");
    if (strategy == RestoreStrategy::Direct) return to_image(run(to_tensor(image), inference_dropout));

    if (mask_scales_.empty()) throw StateError(kModule, "masked ensemble needs the training mask scales");
    const MaskPool pool = build_mask_pool(image.height, image.width, mask_scales_, mask_mode_, mask_seed_);
    const auto clean = to_tensor(image);
    torch::Tensor sum = torch::zeros_like(clean);
    for (std::size_t i = 0; i + 1 < pool.size(); i += 2) {
        const Mask& m = pool.masks[i];
        const Mask& mc = pool.masks[i + 1];
        const auto restored = run(torch::cat({to_tensor(corrupt(image, m)), to_tensor(corrupt(image, mc))}, 0),
                                  inference_dropout);
        auto keep = torch::from_blob(const_cast<std::uint8_t*>(m.grid.data()), {1, 1, m.height, m.width}, torch::kUInt8)
                        .to(torch::kFloat32);
        // Pixels removed by m come from restored[0]; the rest were removed by mc.
        sum += restored[0].unsqueeze(0) * (1.0 - keep) + restored[1].unsqueeze(0) * keep;
    }
    return to_image(sum / static_cast<double>(pool.size() / 2));
}

ErrorMap error_map(const Image& image, const Image& restored) {
    if (!image.same_shape(restored)) throw DimensionError(kModule, "image and restoration differ in shape");
    ErrorMap out(image.height, image.width);
    const int c = image.channels;
    for (std::size_t p = 0; p < out.size(); ++p) {
        double acc = 0.0;
        for (int k = 0; k < c; ++k) {
            const double d = static_cast<double>(image.pixels[p * c + k]) - restored.pixels[p * c + k];
            acc += d * d;
        }
        out.values[p] = acc / c;
    }
    return out;
}

void BilateralParams::validate() const {
    if (diameter < 3 || diameter % 2 == 0)
        throw ArgumentError(kModule, "bilateral diameter must be odd and >= 3, got " + std::to_string(diameter));
    if (!(sigma_intensity > 0.0) || !(sigma_spatial > 0.0))
        throw ArgumentError(kModule, "bilateral sigmas must be positive");
}

QuantizedMap quantize_min_max(const ErrorMap& map) {
    if (map.values.empty()) throw DimensionError(kModule, "empty error map");
    QuantizedMap q;
    q.height = map.height;
    q.width = map.width;
    for (double v : map.values)
        if (!std::isfinite(v)) throw ArgumentError(kModule, "error map contains non-finite values");
    const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
    q.min = *lo;
    q.max = *hi;
    q.levels.assign(map.size(), 0);
    if (!(q.max > q.min)) {
        q.degenerate = true;
        return q;
    }
    const double scale = 255.0 / (q.max - q.min);
    for (std::size_t i = 0; i < map.size(); ++i)
        q.levels[i] = static_cast<std::uint8_t>(std::clamp(std::lround((map.values[i] - q.min) * scale), 0L, 255L));
    return q;
}

ErrorMap smooth_bilateral(const ErrorMap& map, const BilateralParams& params) {
    params.validate();
    const QuantizedMap q = quantize_min_max(map);
    if (q.degenerate) return map;

    const int r = params.diameter / 2;
    std::vector<int> dys, dxs;
    std::vector<double> spatial;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            if (dy * dy + dx * dx > r * r) continue;
            dys.push_back(dy);
            dxs.push_back(dx);
            spatial.push_back(std::exp(-(dy * dy + dx * dx) / (2.0 * params.sigma_spatial * params.sigma_spatial)));
        }
    double range[256];
    for (int d = 0; d < 256; ++d)
        range[d] = std::exp(-(static_cast<double>(d) * d) / (2.0 * params.sigma_intensity * params.sigma_intensity));

    ErrorMap out(map.height, map.width);
    const double step = (q.max - q.min) / 255.0;
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) {
            const int centre = q.levels[static_cast<std::size_t>(y) * map.width + x];
            double num = 0.0, den = 0.0;
            for (std::size_t k = 0; k < spatial.size(); ++k) {
                const int yy = reflect101(y + dys[k], map.height);
                const int xx = reflect101(x + dxs[k], map.width);
                const int v = q.levels[static_cast<std::size_t>(yy) * map.width + xx];
                const double w = spatial[k] * range[std::abs(v - centre)];
                num += w * v;
                den += w;
            }
            const long level = std::clamp(std::lround(num / den), 0L, 255L);
            out.at(y, x) = std::clamp(q.min + static_cast<double>(level) * step, q.min, q.max);
        }
    return out;
}

int otsu_level(std::span<const std::uint64_t, 256> hist) {
    std::uint64_t n = 0, s = 0;
    for (int l = 0; l < 256; ++l) {
        n += hist[l];
        s += hist[l] * static_cast<std::uint64_t>(l);
    }
    // Between-class variance is proportional to (N*s0 - n0*S)^2 / (n0*n1).
    const bool exact = n < (std::uint64_t{1} << 18);
    int best = -1;
    unsigned __int128 best_num = 0, best_den = 1;
    long double best_score = -1.0L;
    std::uint64_t n0 = 0, s0 = 0;
    int top = 0;
    for (int t = 0; t < 256; ++t) {
        if (hist[t] > 0) top = t;
        n0 += hist[t];
        s0 += hist[t] * static_cast<std::uint64_t>(t);
        const std::uint64_t n1 = n - n0;
        if (n0 == 0 || n1 == 0) continue;
        const __int128 diff = static_cast<__int128>(n) * s0 - static_cast<__int128>(n0) * s;
        const unsigned __int128 num = static_cast<unsigned __int128>(diff < 0 ? -diff : diff) *
                                      static_cast<unsigned __int128>(diff < 0 ? -diff : diff);
        const unsigned __int128 den = static_cast<unsigned __int128>(n0) * n1;
        if (exact) {
            if (best < 0 || num * best_den > best_num * den) {
                best = t;
                best_num = num;
                best_den = den;
            }
        } else {
            const long double score = static_cast<long double>(num) / static_cast<long double>(den);
            if (best < 0 || score > best_score) {
                best = t;
                best_score = score;
            }
        }
    }
    return best < 0 ? top : best;
}

OtsuResult otsu_threshold(const ErrorMap& map) {
    const QuantizedMap q = quantize_min_max(map);
    OtsuResult r;
    r.binary = BinaryCrackMap(map.height, map.width);
    if (q.degenerate) {
        r.no_anomaly = true;
        return r;
    }
    std::array<std::uint64_t, 256> hist{};
    for (auto v : q.levels) ++hist[v];
    r.threshold = otsu_level(hist);
    for (std::size_t i = 0; i < q.levels.size(); ++i) r.binary.values[i] = q.levels[i] > r.threshold ? 1 : 0;
    return r;
}

Detection postprocess(const Image& image, Image restored, const BilateralParams& bilateral) {
    Detection d;
    d.raw = error_map(image, restored);
    d.restored = std::move(restored);
    d.smoothed = smooth_bilateral(d.raw, bilateral);
    d.otsu = otsu_threshold(d.smoothed);
    return d;
}

Detection detect(Restorer& restorer, const Image& image, const DetectParams& params) {
    params.bilateral.validate();
    return postprocess(image, restorer.restore(image, params.strategy, params.inference_dropout), params.bilateral);
}

}  // namespace crackres
