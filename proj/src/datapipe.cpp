#include "crackres/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "crackres/errors.hpp"
#include "crackres/rng.hpp"

namespace crackres {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "datapipe";

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> list_images(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) { return a.string() < b.string(); });
    return files;
}

cv::Mat to_mat(const Image& img) {
    cv::Mat m(img.height, img.width, CV_32FC(img.channels));
    std::copy(img.pixels.begin(), img.pixels.end(), m.ptr<float>());
    return m;
}

Image from_mat(const cv::Mat& m) {
    cv::Mat f = m.isContinuous() ? m : m.clone();
    Image img(f.rows, f.cols, f.channels());
    std::copy(f.ptr<float>(), f.ptr<float>() + img.size(), img.pixels.begin());
    return img;
}

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError(kModule, "cannot create directory " + path.parent_path().string());
    }
}

void write_mat(const fs::path& path, const cv::Mat& m) {
    ensure_parent(path);
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), m);
    } catch (const cv::Exception&) {
        ok = false;
    }
    if (!ok) throw IoError(kModule, "cannot write image " + path.string());
}

}  // namespace

std::string to_string(Split split) {
    switch (split) {
        case Split::TrainUndamaged: return "train_undamaged";
        case Split::ValUndamaged: return "val_undamaged";
        case Split::Test: return "test";
    }
    return "unknown";
}

fs::path split_directory(const fs::path& root, Split split) {
    switch (split) {
        case Split::TrainUndamaged: return root / "train" / "undamaged";
        case Split::ValUndamaged: return root / "val" / "undamaged";
        case Split::Test: return root / "test" / "images";
    }
    return root;
}

DatasetManifest discover_split(const fs::path& root, Split split, int resolution) {
    const fs::path dir = split_directory(root, split);
    if (!fs::is_directory(dir)) throw LayoutError(kModule, "missing dataset directory: " + dir.string());
    DatasetManifest m;
    m.root = root;
    m.split = split;
    m.resolution = resolution;
    for (const auto& p : list_images(dir)) m.entries.push_back({p, std::nullopt});
    if (split != Split::Test) return m;

    const fs::path mask_dir = root / "test" / "masks";
    if (!fs::is_directory(mask_dir)) return m;
    std::map<std::string, std::size_t> by_stem;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const auto stem = m.entries[i].image.stem().string();
        if (!by_stem.emplace(stem, i).second)
            throw PairingError(kModule, "two test images share the stem '" + stem + "'");
    }
    for (const auto& mask : list_images(mask_dir)) {
        auto it = by_stem.find(mask.stem().string());
        if (it == by_stem.end()) throw PairingError(kModule, "ground-truth mask without an image: " + mask.string());
        m.entries[it->second].ground_truth = mask;
    }
    return m;
}

DatasetLayout discover_dataset(const fs::path& root, int resolution) {
    return {discover_split(root, Split::TrainUndamaged, resolution),
            discover_split(root, Split::ValUndamaged, resolution), discover_split(root, Split::Test, resolution)};
}

Image load_image(const fs::path& path, int resolution) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError(kModule, "cannot read image " + path.string());
    cv::Mat rgb, f;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    rgb.convertTo(f, CV_32FC3, 1.0 / 255.0);
    if (resolution > 0 && (f.rows != resolution || f.cols != resolution))
        cv::resize(f, f, cv::Size(resolution, resolution), 0, 0, cv::INTER_LINEAR);
    return from_mat(f);
}

BinaryMap load_mask(const fs::path& path, int resolution) {
    cv::Mat g = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (g.empty()) throw IoError(kModule, "cannot read mask " + path.string());
    if (resolution > 0 && (g.rows != resolution || g.cols != resolution))
        cv::resize(g, g, cv::Size(resolution, resolution), 0, 0, cv::INTER_NEAREST);
    BinaryMap m(g.rows, g.cols);
    for (int y = 0; y < g.rows; ++y)
        for (int x = 0; x < g.cols; ++x) m.at(y, x) = g.at<std::uint8_t>(y, x) >= 128 ? 1 : 0;
    return m;
}

void save_image(const fs::path& path, const Image& image) {
    if (image.channels != 3 && image.channels != 1)
        throw ArgumentError(kModule, "only 1- or 3-channel images can be saved");
    cv::Mat f = to_mat(image), u8;
    f.convertTo(u8, image.channels == 3 ? CV_8UC3 : CV_8UC1, 255.0);
    if (image.channels == 3) cv::cvtColor(u8, u8, cv::COLOR_RGB2BGR);
    write_mat(path, u8);
}

void save_gray8(const fs::path& path, int height, int width, const std::vector<std::uint8_t>& levels) {
    if (levels.size() != static_cast<std::size_t>(height) * width)
        throw DimensionError(kModule, "gray image size does not match its dimensions");
    cv::Mat m(height, width, CV_8UC1);
    std::copy(levels.begin(), levels.end(), m.ptr<std::uint8_t>());
    write_mat(path, m);
}

void save_binary_map(const fs::path& path, const BinaryMap& map) {
    std::vector<std::uint8_t> levels(map.values.size());
    std::transform(map.values.begin(), map.values.end(), levels.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
    save_gray8(path, map.height, map.width, levels);
}

Image resize_bilinear(const Image& image, int height, int width) {
    if (height == image.height && width == image.width) return image;
    cv::Mat out;
    cv::resize(to_mat(image), out, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
    return from_mat(out);
}

std::vector<Image> extract_patches(const Image& image, int size, int stride) {
    if (size <= 0 || stride <= 0) throw ArgumentError(kModule, "patch size and stride must be positive");
    if (size > image.height || size > image.width)
        throw DimensionError(kModule, "patch size " + std::to_string(size) + " exceeds image " +
                                          std::to_string(image.height) + "x" + std::to_string(image.width));
    std::vector<Image> patches;
    for (int y = 0; y + size <= image.height; y += stride)
        for (int x = 0; x + size <= image.width; x += stride) {
            Image p(size, size, image.channels);
            for (int r = 0; r < size; ++r) {
                const float* src = &image.pixels[((static_cast<std::size_t>(y) + r) * image.width + x) * image.channels];
                std::copy(src, src + static_cast<std::size_t>(size) * image.channels,
                          &p.pixels[static_cast<std::size_t>(r) * size * image.channels]);
            }
            patches.push_back(std::move(p));
        }
    return patches;
}

AugmentParams draw_augment_params(std::uint64_t seed, int height, int width, int target) {
    std::mt19937_64 rng(seed);
    AugmentParams p;
    p.scale = 0.75 + 0.05 * std::uniform_int_distribution<int>(0, 10)(rng);
    const int sh = std::max(target, static_cast<int>(std::lround(height * p.scale)));
    const int sw = std::max(target, static_cast<int>(std::lround(width * p.scale)));
    p.crop_y = std::uniform_int_distribution<int>(0, sh - target)(rng);
    p.crop_x = std::uniform_int_distribution<int>(0, sw - target)(rng);
    p.hflip = std::bernoulli_distribution(0.5)(rng);
    p.vflip = std::bernoulli_distribution(0.5)(rng);
    return p;
}

Image apply_augment(const Image& patch, const AugmentParams& p, int target) {
    cv::Mat m = to_mat(patch);
    if (p.scale != 1.0) {
        const int sh = static_cast<int>(std::lround(patch.height * p.scale));
        const int sw = static_cast<int>(std::lround(patch.width * p.scale));
        cv::resize(m, m, cv::Size(sw, sh), 0, 0, cv::INTER_LINEAR);
    }
    if (m.rows < target || m.cols < target) {
        const int pad_y = std::max(0, target - m.rows);
        const int pad_x = std::max(0, target - m.cols);
        cv::copyMakeBorder(m, m, pad_y / 2, pad_y - pad_y / 2, pad_x / 2, pad_x - pad_x / 2, cv::BORDER_REFLECT_101);
    }
    const int cy = std::min(p.crop_y, m.rows - target);
    const int cx = std::min(p.crop_x, m.cols - target);
    cv::Mat out = m(cv::Rect(cx, cy, target, target)).clone();
    if (p.hflip && p.vflip)
        cv::flip(out, out, -1);
    else if (p.hflip)
        cv::flip(out, out, 1);
    else if (p.vflip)
        cv::flip(out, out, 0);
    Image img = from_mat(out);
    for (auto& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

Image augment(const Image& patch, std::uint64_t seed, int target) {
    return apply_augment(patch, draw_augment_params(seed, patch.height, patch.width, target), target);
}

Image normalize(const Image& unit, ClampCounter* counter) {
    Image out = unit;
    for (auto& v : out.pixels) {
        if (v < 0.0f || v > 1.0f) {
            v = std::clamp(v, 0.0f, 1.0f);
            if (counter) ++counter->clamped;
        }
        v = 2.0f * v - 1.0f;
    }
    return out;
}

Image denormalize(const Image& signed_image) {
    Image out = signed_image;
    for (auto& v : out.pixels) v = (v + 1.0f) * 0.5f;
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic dataset

namespace {

// Bilinearly upsampled Gaussian lattice noise: band-limited to ~`cell` pixels.
std::vector<float> lattice_noise(std::mt19937_64& rng, int size, int cell, double amplitude) {
    const int n = size / cell + 2;
    std::normal_distribution<double> normal(0.0, amplitude);
    std::vector<double> lattice(static_cast<std::size_t>(n) * n);
    for (auto& v : lattice) v = normal(rng);
    std::vector<float> out(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y) {
        const double fy = static_cast<double>(y) / cell;
        const int y0 = static_cast<int>(fy);
        const double ty = fy - y0;
        for (int x = 0; x < size; ++x) {
            const double fx = static_cast<double>(x) / cell;
            const int x0 = static_cast<int>(fx);
            const double tx = fx - x0;
            const auto L = [&](int yy, int xx) { return lattice[static_cast<std::size_t>(yy) * n + xx]; };
            const double top = L(y0, x0) * (1 - tx) + L(y0, x0 + 1) * tx;
            const double bot = L(y0 + 1, x0) * (1 - tx) + L(y0 + 1, x0 + 1) * tx;
            out[static_cast<std::size_t>(y) * size + x] = static_cast<float>(top * (1 - ty) + bot * ty);
        }
    }
    return out;
}

Image road_texture(std::mt19937_64& rng, int size) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double base = 0.40 + 0.20 * uni(rng);
    const double angle = 2.0 * std::numbers::pi * uni(rng);
    const double ramp = 0.10 * (uni(rng) - 0.5);
    const auto coarse = lattice_noise(rng, size, std::max(2, size / 4), 0.05);
    const auto medium = lattice_noise(rng, size, std::max(2, size / 16), 0.035);
    const auto fine = lattice_noise(rng, size, 2, 0.025);
    std::normal_distribution<double> grain(0.0, 0.012);
    double tint[3];
    for (double& t : tint) t = 0.02 * (uni(rng) - 0.5);

    Image img(size, size, 3);
    const double cx = std::cos(angle), sy = std::sin(angle);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * size + x;
            const double u = ((x - size / 2.0) * cx + (y - size / 2.0) * sy) / size;
            const double v = base + ramp * u + coarse[p] + medium[p] + fine[p] + grain(rng);
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(std::clamp(v + tint[c], 0.0, 1.0));
        }
    return img;
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double qx = ax + t * dx - px, qy = ay + t * dy - py;
    return std::sqrt(qx * qx + qy * qy);
}

// Rasterises one random-walk polyline of the given width into `mask`.
void draw_crack(std::mt19937_64& rng, int size, BinaryMap& mask) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> turn(0.0, 0.35);
    const double width = 1.0 + std::uniform_int_distribution<int>(0, 4)(rng);
    double x = size * (0.1 + 0.8 * uni(rng));
    double y = size * (0.1 + 0.8 * uni(rng));
    double heading = 2.0 * std::numbers::pi * uni(rng);
    const double step = std::max(2.0, size / 32.0);
    const double length = size * (0.5 + uni(rng));
    const double r = width / 2.0;
    for (double travelled = 0; travelled < length; travelled += step) {
        heading += turn(rng);
        const double nx = x + step * std::cos(heading), ny = y + step * std::sin(heading);
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(y, ny) - r - 1)));
        const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(y, ny) + r + 1)));
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(x, nx) - r - 1)));
        const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(x, nx) + r + 1)));
        for (int py = y0; py <= y1; ++py)
            for (int px = x0; px <= x1; ++px)
                if (segment_distance(px + 0.5, py + 0.5, x, y, nx, ny) <= r) mask.at(py, px) = 1;
        x = nx;
        y = ny;
        if (x < -size * 0.1 || y < -size * 0.1 || x > size * 1.1 || y > size * 1.1) break;
    }
}

constexpr double kMinCrackFraction = 0.005;
constexpr double kMaxCrackFraction = 0.10;

}  // namespace

DatasetLayout generate_synthetic_dataset(const fs::path& out_root, int n_train, int n_test, std::uint64_t seed,
                                         const SynthOptions& options) {
    if (n_train < 0 || n_test < 0) throw ArgumentError(kModule, "image counts must be >= 0");
    if (options.size < 16) throw ArgumentError(kModule, "synthetic images must be at least 16 pixels");
    const int size = options.size;
    const int n_val = options.n_val >= 0 ? options.n_val : std::max(1, n_train / 10);

    std::error_code ec;
    for (const auto& dir : {split_directory(out_root, Split::TrainUndamaged), split_directory(out_root, Split::ValUndamaged),
                            split_directory(out_root, Split::Test), out_root / "test" / "masks"}) {
        fs::create_directories(dir, ec);
        if (ec || !fs::is_directory(dir)) throw IoError(kModule, "cannot create " + dir.string());
    }

    const auto name = [](const char* prefix, int i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s_%04d.png", prefix, i);
        return std::string(buf);
    };
    for (int i = 0; i < n_train; ++i) {
        std::mt19937_64 rng(derive_seed(seed, {1, static_cast<std::uint64_t>(i)}));
        save_image(split_directory(out_root, Split::TrainUndamaged) / name("train", i), road_texture(rng, size));
    }
    for (int i = 0; i < n_val; ++i) {
        std::mt19937_64 rng(derive_seed(seed, {2, static_cast<std::uint64_t>(i)}));
        save_image(split_directory(out_root, Split::ValUndamaged) / name("val", i), road_texture(rng, size));
    }
    for (int i = 0; i < n_test; ++i) {
        std::mt19937_64 rng(derive_seed(seed, {3, static_cast<std::uint64_t>(i)}));
        Image img = road_texture(rng, size);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        BinaryMap mask;
        for (;;) {
            mask = BinaryMap(size, size);
            const int cracks = 1 + std::uniform_int_distribution<int>(0, 1)(rng);
            for (int c = 0; c < cracks; ++c) draw_crack(rng, size, mask);
            const double frac = static_cast<double>(mask.count_ones()) / mask.size();
            if (frac >= kMinCrackFraction && frac <= kMaxCrackFraction) break;
        }
        const double drop = 0.30 + 0.30 * uni(rng);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                if (mask.at(y, x))
                    for (int c = 0; c < 3; ++c) img.at(y, x, c) *= static_cast<float>(1.0 - drop);
        save_image(split_directory(out_root, Split::Test) / name("test", i), img);
        save_binary_map(out_root / "test" / "masks" / name("test", i), mask);
    }
    return discover_dataset(out_root, size);
}

}  // namespace crackres
