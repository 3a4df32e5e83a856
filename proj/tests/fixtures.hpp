#pragma once
// Shared random inputs and the toy style extractor used across tests.

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "crackres/losses.hpp"
#include "oracles.hpp"

namespace fixtures {

inline torch::Tensor random_unit(std::vector<std::int64_t> shape, std::uint64_t seed,
                                 torch::Dtype dtype = torch::kFloat64) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    return torch::rand(shape, gen, torch::TensorOptions().dtype(dtype));
}

/// conv(4) -> pool -> conv(6), tapping both convolutions.
inline crackres::StyleExtractor toy_extractor(std::uint64_t seed) {
    crackres::StyleExtractorSpec spec;
    spec.layers = {{4}, {0}, {6}};
    spec.taps = {1, 2};
    spec.mean = {0.4, 0.5, 0.6};
    spec.stddev = {0.2, 0.25, 0.3};
    crackres::StyleExtractor e(spec);
    e->randomize(seed);
    e->to(torch::kFloat64);
    e->freeze();
    return e;
}

inline std::vector<double> flat(const torch::Tensor& t) {
    auto d = t.detach().to(torch::kFloat64).contiguous();
    return {d.data_ptr<double>(), d.data_ptr<double>() + d.numel()};
}

/// Loop-based style loss using the extractor's kernels.
inline double style_oracle(const torch::Tensor& a, const torch::Tensor& b, crackres::StyleExtractor& e) {
    auto features = [&](oracle::Tensor4 x) {
        const auto& spec = e->spec();
        for (int i = 0; i < x.n; ++i)
            for (int k = 0; k < x.c; ++k)
                for (int y = 0; y < x.h; ++y)
                    for (int xx = 0; xx < x.w; ++xx)
                        x.at(i, k, y, xx) = (x.at(i, k, y, xx) - spec.mean[k]) / spec.stddev[k];
        std::vector<oracle::Tensor4> taps;
        int conv = 0;
        for (const auto& layer : spec.layers) {
            if (layer.out_channels == 0) {
                x = oracle::max_pool2(x);
                continue;
            }
            x = oracle::conv3_relu(x, flat(e->convs()[conv]->weight), flat(e->convs()[conv]->bias), layer.out_channels);
            ++conv;
            for (int t : spec.taps)
                if (t == conv) taps.push_back(x);
        }
        return taps;
    };
    const auto fa = features(oracle::Tensor4::from(a));
    const auto fb = features(oracle::Tensor4::from(b));
    double total = 0;
    for (std::size_t t = 0; t < fa.size(); ++t) {
        double s = 0;
        for (int i = 0; i < fa[t].n; ++i) {
            const auto ga = oracle::gram(fa[t], i), gb = oracle::gram(fb[t], i);
            for (int p = 0; p < fa[t].c; ++p)
                for (int q = 0; q < fa[t].c; ++q) s += std::abs(ga[p][q] - gb[p][q]);
        }
        total += s / (static_cast<double>(fa[t].n) * fa[t].c * fa[t].c);
    }
    return total / static_cast<double>(fa.size());
}

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-12);
}

}  // namespace fixtures
