#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace crackres {

/// Interleaved H x W x C floating image. Values are in unit range [0,1] at
/// every I/O boundary; the model works on the signed range [-1,1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    std::size_t size() const { return pixels.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

/// Single-channel real-valued map, row-major. Used for error maps.
struct ScalarMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    ScalarMap() = default;
    ScalarMap(int h, int w, double fill = 0.0)
        : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

    double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return values.size(); }
};

using ErrorMap = ScalarMap;

/// Strictly binary {0,1} map, row-major. 1 = crack.
struct BinaryMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> values;

    BinaryMap() = default;
    BinaryMap(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

    std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return values.size(); }
    std::size_t count_ones() const;
};

using BinaryCrackMap = BinaryMap;

}  // namespace crackres
