#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "crackres/image.hpp"

namespace crackres {

enum class MaskMode { MultiscaleSquare, Striped, Jumbled };

std::string to_string(MaskMode mode);
MaskMode parse_mask_mode(std::string_view text);

/// Binary corruption mask: 0 = removed, 1 = retained.
struct Mask {
    int height = 0;
    int width = 0;
    int scale = 0;
    MaskMode mode = MaskMode::MultiscaleSquare;
    std::vector<std::uint8_t> grid;

    std::uint8_t at(int y, int x) const { return grid[static_cast<std::size_t>(y) * width + x]; }
    std::size_t count_zeros() const;
    Mask complement() const;
    bool operator==(const Mask& o) const = default;
};

/// Immutable set of masks. Entries come in complement pairs: masks[2i] and
/// masks[2i+1] partition the pixel grid.
struct MaskPool {
    std::vector<Mask> masks;
    std::vector<int> scales;
    std::uint64_t seed = 0;

    std::size_t size() const { return masks.size(); }
    bool empty() const { return masks.empty(); }
};

/// Builds two masks (pattern + complement) per scale. Scales are deduplicated
/// and ordered largest first. Every cell grid must split into equal halves.
MaskPool build_mask_pool(int height, int width, std::vector<int> scales, MaskMode mode,
                         std::uint64_t seed);

std::size_t sample_mask_index(const MaskPool& pool, std::uint64_t draw_seed);
const Mask& sample_mask(const MaskPool& pool, std::uint64_t draw_seed);

/// Hadamard product of an image with a mask broadcast across channels.
Image corrupt(const Image& image, const Mask& mask);

/// Default scales for a square resolution: {res/2, res/4, res/8}.
std::vector<int> default_mask_scales(int resolution);

}  // namespace crackres
