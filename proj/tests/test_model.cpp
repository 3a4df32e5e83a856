#include "prelude.hpp"

#include "crackres/errors.hpp"
#include "crackres/model.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace crackres;

namespace {

std::int64_t conv_params(std::int64_t in, std::int64_t out, bool bias) { return in * out * 16 + (bias ? out : 0); }

/// Closed-form count for the U-Net layout: plain first/innermost encoder convs
/// carry a bias, normalised ones do not; only the last decoder conv has a bias.
std::int64_t expected_generator_params(const GeneratorSpec& s) {
    std::vector<std::int64_t> w;
    for (int i = 0; i < s.depth; ++i) w.push_back(std::min<std::int64_t>(std::int64_t{s.base_width} << i, s.max_width));
    std::int64_t n = 0, in = s.input_channels;
    for (int i = 0; i < s.depth; ++i) {
        const bool normed = i > 0 && i < s.depth - 1;
        n += conv_params(in, w[i], !normed) + (normed ? 2 * w[i] : 0);
        in = w[i];
    }
    for (int j = 0; j < s.depth; ++j) {
        const std::int64_t cin = j == 0 ? w[s.depth - 1] : 2 * w[s.depth - 1 - j];
        if (j == s.depth - 1) {
            n += conv_params(cin, s.output_channels, true);
        } else {
            const std::int64_t cout = w[s.depth - 2 - j];
            n += conv_params(cin, cout, false) + 2 * cout;
        }
    }
    return n;
}

const std::vector<oracle::ConvLayer> kPatchLayers{{4, 2, 1}, {4, 2, 1}, {4, 2, 1}, {4, 1, 1}, {4, 1, 1}};

}  // namespace

TEST_CASE("discriminator geometry") {
    CHECK(oracle::conv_output_size(256, kPatchLayers) == 30);
    CHECK(oracle::receptive_field(kPatchLayers) == 70);
    DiscriminatorSpec spec;
    CHECK(spec.input_channels() == 6);
    for (int n : {64, 128, 256}) CHECK(spec.output_size(n) == oracle::conv_output_size(n, kPatchLayers));

    spec.base_width = 8;
    Discriminator d(spec);
    init_weights(*d, 1);
    d->eval();
    torch::NoGradGuard no_grad;
    const auto cond = fixtures::random_unit({1, 3, 256, 256}, 1, torch::kFloat32);
    const auto a = discriminator_forward(d, cond, fixtures::random_unit({1, 3, 256, 256}, 2, torch::kFloat32));
    CHECK(a.sizes() == torch::IntArrayRef{1, 1, 30, 30});
    const auto b = discriminator_forward(d, cond, fixtures::random_unit({1, 3, 256, 256}, 3, torch::kFloat32));
    CHECK((a - b).abs().max().item<double>() > 0.0);
    CHECK_THROWS_AS(discriminator_forward(d, cond, torch::zeros({1, 3, 128, 128})), DimensionError);
    CHECK_THROWS_AS(discriminator_forward(d, cond, torch::zeros({1, 1, 256, 256})), DimensionError);
}

TEST_CASE("generator parameter count") {
    GeneratorSpec full;
    Generator g(full);
    CHECK(parameter_count(*g) == expected_generator_params(full));
    CHECK(parameter_count(*g) == 54414531);

    // 6->64 (+bias), 64->128 +BN, 128->256 +BN, 256->512 +BN, 512->1 (+bias); 4x4 kernels.
    Discriminator d(DiscriminatorSpec{});
    const std::int64_t want = (6 * 64 * 16 + 64) + (64 * 128 * 16 + 256) + (128 * 256 * 16 + 512) +
                              (256 * 512 * 16 + 1024) + (512 * 16 + 1);
    CHECK(parameter_count(*d) == want);
}

TEST_CASE("generator shape, range and eval determinism") {
    GeneratorSpec spec;
    spec.base_width = 8;
    Generator g(spec);
    init_weights(*g, 7);
    torch::NoGradGuard no_grad;
    const auto x = fixtures::random_unit({1, 3, 256, 256}, 4, torch::kFloat32) * 2 - 1;
    const auto a = generator_forward(g, x, RunMode::Eval);
    const auto b = generator_forward(g, x, RunMode::Eval);
    CHECK(a.sizes() == x.sizes());
    CHECK(torch::equal(a, b));
    CHECK(a.abs().max().item<double>() < 1.0);

    g->set_inference_dropout(true);
    const auto c = generator_forward(g, x, RunMode::Eval);
    g->set_inference_dropout(false);
    CHECK_FALSE(torch::equal(a, c));
}

TEST_CASE("generator wiring and errors") {
    GeneratorSpec spec;
    spec.base_width = 4;
    spec.depth = 5;
    Generator g(spec);
    CHECK(g->skip_sources() == std::vector<int>{-1, 3, 2, 1, 0});
    CHECK(GeneratorSpec::depth_for(256) == 8);
    CHECK(GeneratorSpec::depth_for(128) == 7);

    CHECK_THROWS_AS(generator_forward(g, torch::zeros({1, 3, 48, 48}), RunMode::Eval), DimensionError);
    CHECK_THROWS_AS(generator_forward(g, torch::zeros({1, 1, 32, 32}), RunMode::Eval), DimensionError);
    Generator empty{nullptr};
    CHECK_THROWS_AS(generator_forward(empty, torch::zeros({1, 3, 32, 32}), RunMode::Eval), StateError);

    GeneratorSpec bad;
    bad.depth = 0;
    CHECK_THROWS_AS(Generator{bad}, ArgumentError);
}

TEST_CASE("initialisation statistics") {
    Generator g(GeneratorSpec{});
    init_weights(*g, 0);
    const auto w = g->named_parameters()["enc3.0.weight"];
    CHECK(w.mean().item<double>() == doctest::Approx(0.0).epsilon(0.001));
    CHECK(w.std().item<double>() == doctest::Approx(0.02).epsilon(0.01));
    CHECK(torch::all(g->named_parameters()["enc3.1.weight"] == 1).item<bool>());
}
