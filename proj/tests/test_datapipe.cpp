#include "prelude.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "crackres/datapipe.hpp"
#include "crackres/errors.hpp"

using namespace crackres;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("crackres_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Image gradient_image(int h, int w) {
    Image im(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) im.at(y, x, c) = static_cast<float>((y * w + x + c) % 256) / 255.0f;
    return im;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void make_layout(const fs::path& root, int n_train, int n_val, int n_test) {
    const Image im = gradient_image(16, 16);
    for (int i = 0; i < n_train; ++i) {
        fs::create_directories(root / "train/undamaged");
        save_image(root / "train/undamaged" / ("t" + std::to_string(i) + ".png"), im);
    }
    for (int i = 0; i < n_val; ++i) {
        fs::create_directories(root / "val/undamaged");
        save_image(root / "val/undamaged" / ("v" + std::to_string(i) + ".png"), im);
    }
    fs::create_directories(root / "test/images");
    fs::create_directories(root / "test/masks");
    for (int i = 0; i < n_test; ++i) {
        save_image(root / "test/images" / ("x" + std::to_string(i) + ".png"), im);
        save_binary_map(root / "test/masks" / ("x" + std::to_string(i) + ".png"), BinaryMap(16, 16));
    }
}

}  // namespace

TEST_CASE("discover a small layout") {
    TempDir tmp("discover");
    make_layout(tmp.path, 3, 1, 2);
    const auto d = discover_dataset(tmp.path);
    CHECK(d.train.size() == 3);
    CHECK(d.val.size() == 1);
    CHECK(d.test.size() == 2);
    for (const auto& e : d.train.entries) CHECK_FALSE(e.ground_truth.has_value());
    for (const auto& e : d.test.entries) CHECK(e.ground_truth.has_value());
    CHECK(d.train.entries[0].image.filename() == "t0.png");
    CHECK(d.train.entries[2].image.filename() == "t2.png");

    save_image(tmp.path / "test/images/y.png", gradient_image(16, 16));
    const auto with_unlabelled = discover_split(tmp.path, Split::Test);
    CHECK(with_unlabelled.size() == 3);
    CHECK_FALSE(with_unlabelled.entries[2].ground_truth.has_value());

    save_binary_map(tmp.path / "test/masks/orphan.png", BinaryMap(16, 16));
    CHECK_THROWS_AS(discover_split(tmp.path, Split::Test), PairingError);
}

TEST_CASE("ordering is bytewise") {
    TempDir tmp("order");
    make_layout(tmp.path, 0, 1, 0);
    for (const char* name : {"b.png", "B.png", "a10.png", "a2.png", "_x.png"})
        save_image(tmp.path / "train/undamaged" / name, gradient_image(4, 4));
    const auto m = discover_split(tmp.path, Split::TrainUndamaged);
    std::vector<std::string> names;
    for (const auto& e : m.entries) names.push_back(e.image.filename().string());
    CHECK(names == std::vector<std::string>{"B.png", "_x.png", "a10.png", "a2.png", "b.png"});
}

TEST_CASE("missing split directory names the path") {
    TempDir tmp("missing");
    make_layout(tmp.path, 2, 0, 1);
    try {
        discover_dataset(tmp.path);
        FAIL("expected a layout error");
    } catch (const LayoutError& e) {
        CHECK(std::string(e.what()).find("val") != std::string::npos);
    }
}

TEST_CASE("image and mask loading") {
    TempDir tmp("load");
    const Image im = gradient_image(20, 30);
    save_image(tmp.path / "im.png", im);
    const Image back = load_image(tmp.path / "im.png");
    REQUIRE(back.same_shape(im));
    for (std::size_t i = 0; i < im.size(); ++i) CHECK(std::abs(back.pixels[i] - im.pixels[i]) < 0.5f / 255);
    CHECK(load_image(tmp.path / "im.png", 16).height == 16);

    BinaryMap m(8, 8);
    m.at(2, 3) = 1;
    save_binary_map(tmp.path / "m.png", m);
    const auto mb = load_mask(tmp.path / "m.png", 16);
    CHECK(mb.height == 16);
    CHECK(mb.count_ones() == 4);
    for (auto v : mb.values) CHECK(v <= 1);
    CHECK_THROWS_AS(load_image(tmp.path / "nope.png"), IoError);
}

TEST_CASE("patch grid") {
    CHECK(extract_patches(Image(1500, 2000, 3), 500, 500).size() == 12);
    CHECK(extract_patches(Image(256, 256, 3), 256, 256).size() == 1);
    CHECK(extract_patches(Image(300, 300, 3), 256, 256).size() == 1);
    const auto p = extract_patches(gradient_image(8, 12), 4, 4);
    REQUIRE(p.size() == 6);
    CHECK(p[1].at(0, 0, 0) == gradient_image(8, 12).at(0, 4, 0));
    CHECK(p[3].at(0, 0, 0) == gradient_image(8, 12).at(4, 0, 0));
    CHECK_THROWS_AS(extract_patches(Image(100, 100, 3), 128, 128), DimensionError);
}

TEST_CASE("augmentation") {
    const Image im = gradient_image(64, 64);
    CHECK(augment(im, 5, 64).pixels == augment(im, 5, 64).pixels);

    std::uint64_t seed = 0;
    while (!draw_augment_params(seed, 64, 64, 64).is_identity()) ++seed;
    CHECK(seed < 10000);
    CHECK(augment(im, seed, 64).pixels == im.pixels);

    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto p = draw_augment_params(s, 64, 64, 64);
        CHECK(p.scale >= 0.75);
        CHECK(p.scale <= 1.25);
        const Image out = augment(im, s, 64);
        CHECK(out.height == 64);
        CHECK(out.width == 64);
        for (float v : out.pixels) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("normalisation") {
    Image im(1, 3, 1);
    im.pixels = {0.0f, 1.0f, 0.5f};
    const Image n = normalize(im);
    CHECK(n.pixels == std::vector<float>{-1.0f, 1.0f, 0.0f});

    std::mt19937 rng(2);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Image r(8, 8, 3);
    for (auto& v : r.pixels) v = u(rng);
    const Image rt = denormalize(normalize(r));
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(std::abs(rt.pixels[i] - r.pixels[i]) < 1e-7);

    ClampCounter counter;
    Image hot(1, 1, 1, 1.2f);
    CHECK(normalize(hot, &counter).pixels[0] == 1.0f);
    CHECK(counter.clamped == 1);
}

TEST_CASE("synthetic dataset") {
    TempDir a("synth_a"), b("synth_b");
    SynthOptions opt;
    opt.size = 64;
    const auto la = generate_synthetic_dataset(a.path, 10, 8, 0, opt);
    generate_synthetic_dataset(b.path, 10, 8, 0, opt);
    CHECK(la.train.size() == 10);
    CHECK(la.val.size() == 1);
    CHECK(la.test.size() == 8);
    for (const auto& e : la.train.entries) CHECK_FALSE(e.ground_truth.has_value());

    for (const auto& e : la.test.entries) {
        REQUIRE(e.ground_truth.has_value());
        const auto m = load_mask(*e.ground_truth);
        const double frac = static_cast<double>(m.count_ones()) / static_cast<double>(m.size());
        CHECK(frac >= 0.005);
        CHECK(frac <= 0.10);
        // Cracks are darker than the surrounding road.
        const Image im = load_image(e.image);
        double in = 0, out = 0;
        std::size_t n_in = 0;
        for (std::size_t p = 0; p < m.size(); ++p) {
            const double g = im.pixels[p * 3];
            if (m.values[p]) {
                in += g;
                ++n_in;
            } else {
                out += g;
            }
        }
        CHECK(in / n_in < out / (m.size() - n_in));
    }

    for (const auto& entry : fs::recursive_directory_iterator(a.path)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a.path);
        CHECK(slurp(entry.path()) == slurp(b.path / rel));
    }
    CHECK_THROWS_AS(generate_synthetic_dataset("/proc/crackres_cannot_write", 1, 1, 0, opt), IoError);
}
