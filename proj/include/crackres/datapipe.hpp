#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crackres/image.hpp"

namespace crackres {

enum class Split { TrainUndamaged, ValUndamaged, Test };

std::string to_string(Split split);

struct ManifestEntry {
    std::filesystem::path image;
    std::optional<std::filesystem::path> ground_truth;
};

struct DatasetManifest {
    std::filesystem::path root;
    Split split = Split::TrainUndamaged;
    std::vector<ManifestEntry> entries;
    int resolution = 256;

    std::size_t size() const { return entries.size(); }
};

struct DatasetLayout {
    DatasetManifest train;
    DatasetManifest val;
    DatasetManifest test;
};

/// Directory of one split under the dataset root.
std::filesystem::path split_directory(const std::filesystem::path& root, Split split);

/// Lists one split in byte-wise lexicographic order. Test entries are paired
/// with test/masks/<stem>.png by stem; a mask without an image is an error.
DatasetManifest discover_split(const std::filesystem::path& root, Split split, int resolution = 256);
DatasetLayout discover_dataset(const std::filesystem::path& root, int resolution = 256);

/// Reads an 8-bit image as 3-channel unit range, resized bilinearly to a
/// square `resolution` (0 keeps the native size).
Image load_image(const std::filesystem::path& path, int resolution = 0);
/// Reads a ground-truth mask, resized nearest-neighbour and binarised at 128.
BinaryMap load_mask(const std::filesystem::path& path, int resolution = 0);

void save_image(const std::filesystem::path& path, const Image& image);
/// Writes a {0,1} map as 0/255 grayscale.
void save_binary_map(const std::filesystem::path& path, const BinaryMap& map);
void save_gray8(const std::filesystem::path& path, int height, int width, const std::vector<std::uint8_t>& levels);

Image resize_bilinear(const Image& image, int height, int width);

/// Row-major grid of size x size patches; partial trailing patches dropped.
std::vector<Image> extract_patches(const Image& image, int size, int stride);

struct AugmentParams {
    double scale = 1.0;
    int crop_y = 0;
    int crop_x = 0;
    bool hflip = false;
    bool vflip = false;

    bool is_identity() const { return scale == 1.0 && crop_y == 0 && crop_x == 0 && !hflip && !vflip; }
};

/// Scale is drawn uniformly from the 11-point grid {0.75, 0.80, ..., 1.25}.
AugmentParams draw_augment_params(std::uint64_t seed, int height, int width, int target);
Image apply_augment(const Image& patch, const AugmentParams& params, int target);
/// Scale, crop (reflect-padding when undersized) and flip; output is target x target.
Image augment(const Image& patch, std::uint64_t seed, int target);

/// Counts values clamped back into range by normalize().
struct ClampCounter {
    std::size_t clamped = 0;
};

/// [0,1] -> [-1,1] via 2x-1; out-of-range inputs are clamped and counted.
Image normalize(const Image& unit, ClampCounter* counter = nullptr);
Image denormalize(const Image& signed_image);

struct SynthOptions {
    int size = 256;
    int n_val = -1;  // -1: max(1, n_train / 10)
};

/// Procedural asphalt-like textures; test images get dark random-walk cracks
/// with exact ground truth. Writes the standard dataset layout.
DatasetLayout generate_synthetic_dataset(const std::filesystem::path& out_root, int n_train, int n_test,
                                         std::uint64_t seed, const SynthOptions& options = {});

}  // namespace crackres
