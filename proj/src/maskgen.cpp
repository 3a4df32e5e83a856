#include "crackres/maskgen.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include "crackres/errors.hpp"
#include "crackres/rng.hpp"

namespace crackres {

namespace {

constexpr const char* kModule = "maskgen";

// Cell (row, col) -> removed?  Evaluated once per pixel.
Mask fill_by_cell(int height, int width, int scale, MaskMode mode,
                  const std::function<bool(int, int)>& removed) {
    Mask m;
    m.height = height;
    m.width = width;
    m.scale = scale;
    m.mode = mode;
    m.grid.resize(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            m.grid[static_cast<std::size_t>(y) * width + x] = removed(y / scale, x / scale) ? 0 : 1;
    return m;
}

}  // namespace

std::string to_string(MaskMode mode) {
    switch (mode) {
        case MaskMode::MultiscaleSquare: return "multiscale_square";
        case MaskMode::Striped: return "striped";
        case MaskMode::Jumbled: return "jumbled";
    }
    return "unknown";
}

MaskMode parse_mask_mode(std::string_view text) {
    if (text == "multiscale_square") return MaskMode::MultiscaleSquare;
    if (text == "striped") return MaskMode::Striped;
    if (text == "jumbled") return MaskMode::Jumbled;
    throw ArgumentError(kModule, "unknown mask mode '" + std::string(text) +
                                     "' (expected multiscale_square, striped or jumbled)");
}

std::size_t Mask::count_zeros() const {
    return static_cast<std::size_t>(std::count(grid.begin(), grid.end(), std::uint8_t{0}));
}

Mask Mask::complement() const {
    Mask c = *this;
    for (auto& v : c.grid) v = static_cast<std::uint8_t>(1 - v);
    return c;
}

std::vector<int> default_mask_scales(int resolution) {
    return {resolution / 2, resolution / 4, resolution / 8};
}

MaskPool build_mask_pool(int height, int width, std::vector<int> scales, MaskMode mode,
                         std::uint64_t seed) {
    if (scales.empty()) throw ArgumentError(kModule, "mask pool needs at least one scale");
    if (height <= 0 || width <= 0)
        throw DimensionError(kModule, "mask dimensions must be positive");
    std::sort(scales.begin(), scales.end(), std::greater<>());
    scales.erase(std::unique(scales.begin(), scales.end()), scales.end());

    MaskPool pool;
    pool.seed = seed;
    pool.scales = scales;
    for (int k : scales) {
        if (k <= 0 || height % k != 0 || width % k != 0)
            throw DimensionError(kModule, "image " + std::to_string(height) + "x" + std::to_string(width) +
                                              " is not divisible by scale " + std::to_string(k));
        const int rows = height / k;
        const int cols = width / k;
        Mask m;
        switch (mode) {
            case MaskMode::MultiscaleSquare:
                if ((rows * cols) % 2 != 0)
                    throw DimensionError(kModule, "a " + std::to_string(rows) + "x" + std::to_string(cols) +
                                                      " cell grid cannot be split 1:1 at scale " +
                                                      std::to_string(k));
                m = fill_by_cell(height, width, k, mode, [](int r, int c) { return (r + c) % 2 == 0; });
                break;
            case MaskMode::Striped:
                if (cols % 2 != 0)
                    throw DimensionError(kModule, std::to_string(cols) +
                                                      " stripes cannot be split 1:1 at scale " +
                                                      std::to_string(k));
                m = fill_by_cell(height, width, k, mode, [](int, int c) { return c % 2 == 0; });
                break;
            case MaskMode::Jumbled: {
                const int cells = rows * cols;
                if (cells % 2 != 0)
                    throw DimensionError(kModule, "odd cell count " + std::to_string(cells) +
                                                      " cannot be split 1:1 at scale " + std::to_string(k));
                std::vector<int> order(cells);
                std::iota(order.begin(), order.end(), 0);
                std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
                std::shuffle(order.begin(), order.end(), rng);
                std::vector<bool> removed(cells, false);
                for (int i = 0; i < cells / 2; ++i) removed[order[i]] = true;
                m = fill_by_cell(height, width, k, mode,
                                 [&](int r, int c) { return removed[static_cast<std::size_t>(r) * cols + c]; });
                break;
            }
        }
        pool.masks.push_back(m);
        pool.masks.push_back(m.complement());
    }
    return pool;
}

std::size_t sample_mask_index(const MaskPool& pool, std::uint64_t draw_seed) {
    if (pool.empty()) throw StateError(kModule, "cannot sample from an empty mask pool");
    return static_cast<std::size_t>(splitmix64(draw_seed) % pool.size());
}

const Mask& sample_mask(const MaskPool& pool, std::uint64_t draw_seed) {
    return pool.masks[sample_mask_index(pool, draw_seed)];
}

Image corrupt(const Image& image, const Mask& mask) {
    if (image.height != mask.height || image.width != mask.width)
        throw DimensionError(kModule, "mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                                          " does not match image " + std::to_string(image.height) + "x" +
                                          std::to_string(image.width));
    Image out = image;
    const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
    for (std::size_t p = 0; p < n; ++p) {
        if (mask.grid[p] != 0) continue;
        for (int c = 0; c < image.channels; ++c) out.pixels[p * image.channels + c] = 0.0f;
    }
    return out;
}

}  // namespace crackres
