// Acceptance checks, one per criterion. Usage: acceptance <n> [work_dir]
// Prints "criterion <n>: PASS|FAIL  <details>" and exits non-zero on FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "crackres/checkpoint.hpp"
#include "crackres/commands.hpp"
#include "crackres/config.hpp"
#include "crackres/detector.hpp"
#include "crackres/evalkit.hpp"
#include "crackres/maskgen.hpp"
#include "crackres/tensor_image.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace crackres;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail << "first failure: " << what << "; ";
        pass = pass && ok;
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 -------------------------------------------------------------------------
Outcome otsu_oracle() {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> shape(0, 3), count(0, 1000), level(0, 255);
    const auto t0 = std::chrono::steady_clock::now();
    int matched = 0;
    double impl_secs = 0;
    for (int t = 0; t < 200; ++t) {
        std::array<std::uint64_t, 256> h{};
        switch (shape(rng)) {
            case 0:
                for (auto& v : h) v = count(rng);
                break;
            case 1:
                for (int k = 0; k < 3; ++k) h[level(rng)] += count(rng) + 1;
                break;
            case 2: {
                const int a = level(rng), b = level(rng);
                for (int l = 0; l < 256; ++l)
                    h[l] = static_cast<std::uint64_t>(400 * std::exp(-0.02 * (l - a) * (l - a)) +
                                                      100 * std::exp(-0.01 * (l - b) * (l - b)));
                break;
            }
            default:
                for (auto& v : h) v = count(rng) % 7 == 0 ? count(rng) : 0;
        }
        if (std::count_if(h.begin(), h.end(), [](auto v) { return v > 0; }) < 2) {
            h[0] += 1;
            h[255] += 1;
        }
        const auto t1 = std::chrono::steady_clock::now();
        const int got = otsu_level(h);
        impl_secs += seconds_since(t1);
        const int want = oracle::otsu(h);
        matched += got == want;
        o.require(got == want, "histogram " + std::to_string(t) + ": " + std::to_string(got) + " vs " + std::to_string(want));
    }
    const double secs = seconds_since(t0);
    o.require(secs < 5.0, "runtime");
    o.detail << matched << "/200 exact; " << secs << " s including the rational oracle, " << impl_secs
             << " s in the implementation";
    return o;
}

// 2 -------------------------------------------------------------------------
Outcome loss_oracles() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    double worst[6] = {0, 0, 0, 0, 0, 0};
    auto extractor = fixtures::toy_extractor(77);
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto a = fixtures::random_unit({1, 3, 16, 16}, 1000 + s), b = fixtures::random_unit({1, 3, 16, 16}, 2000 + s);
        const auto oa = oracle::Tensor4::from(a), ob = oracle::Tensor4::from(b);
        worst[0] = std::max(worst[0], fixtures::rel_err(mae_loss(a, b).item<double>(), oracle::mae(oa, ob)));
        worst[1] = std::max(worst[1], fixtures::rel_err(ssim_loss(a, b).item<double>(), oracle::ssim_loss(oa, ob)));
        worst[2] = std::max(worst[2], fixtures::rel_err(msgms_loss(a, b).item<double>(), oracle::msgms_loss(oa, ob)));
        const auto g = fixtures::flat(gms_map(a, b));
        const auto gw = oracle::gms_map(oa, ob, 0);
        for (std::size_t i = 0; i < g.size(); ++i) worst[3] = std::max(worst[3], fixtures::rel_err(g[i], gw[i]));
        const auto sa = fixtures::random_unit({1, 3, 8, 8}, 3000 + s), sb = fixtures::random_unit({1, 3, 8, 8}, 4000 + s);
        worst[4] = std::max(worst[4], fixtures::rel_err(style_loss(sa, sb, extractor).item<double>(),
                                                        fixtures::style_oracle(sa, sb, extractor)));
        const auto real = fixtures::random_unit({1, 1, 6, 6}, 5000 + s) * 10 - 5;
        const auto fake = fixtures::random_unit({1, 1, 6, 6}, 6000 + s) * 10 - 5;
        const auto r = fixtures::flat(real), f = fixtures::flat(fake);
        double d = 0, gl = 0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            d += (oracle::neg_log_sigmoid(r[i]) + oracle::neg_log_one_minus_sigmoid(f[i])) / r.size();
            gl += oracle::neg_log_sigmoid(f[i]) / f.size();
        }
        const auto adv = adversarial_losses(real, fake);
        worst[5] = std::max({worst[5], fixtures::rel_err(adv.d_loss.item<double>(), d),
                             fixtures::rel_err(adv.g_loss.item<double>(), gl)});
    }
    const char* names[] = {"mae", "ssim", "msgms", "gms_map", "style", "adversarial"};
    for (int i = 0; i < 6; ++i) {
        const double tol = i == 4 ? 1e-5 : 1e-6;
        o.require(worst[i] < tol, names[i]);
        o.detail << names[i] << " " << worst[i] << ", ";
    }
    const double secs = seconds_since(t0);
    o.require(secs < 60.0, "runtime");
    o.detail << "worst relative error; " << secs << " s";
    return o;
}

// 3 -------------------------------------------------------------------------
Outcome identity_suite() {
    Outcome o;
    auto extractor = fixtures::toy_extractor(5);
    extractor->to(torch::kFloat32);
    double worst = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto x = fixtures::random_unit({1, 3, 32, 32}, 700 + s, torch::kFloat32);
        for (double v : {mae_loss(x, x).item<double>(), ssim_loss(x, x).item<double>(), msgms_loss(x, x).item<double>(),
                         style_loss(x, x, extractor).item<double>()})
            worst = std::max(worst, std::abs(v));
    }
    o.require(worst < 1e-8, "identity loss above 1e-8");
    o.detail << "max |L(x,x)| = " << worst << " over mae/ssim/msgms/style, 20 images";
    return o;
}

// 4 -------------------------------------------------------------------------
double gradient_error(const std::function<torch::Tensor(const torch::Tensor&, const torch::Tensor&)>& fn,
                      std::uint64_t seed, int coords) {
    auto a = fixtures::random_unit({1, 3, 16, 16}, seed).requires_grad_(true);
    const auto b = fixtures::random_unit({1, 3, 16, 16}, seed + 1);
    fn(a, b).backward();
    const auto grad = a.grad().clone();
    torch::NoGradGuard no_grad;
    const auto base = a.detach().clone();
    std::mt19937 rng(static_cast<unsigned>(seed));
    std::uniform_int_distribution<std::int64_t> pick(0, base.numel() - 1);
    double worst = 0;
    for (int i = 0; i < coords; ++i) {
        const auto k = pick(rng);
        const double h = 1e-6;
        auto p = base.clone(), m = base.clone();
        p.view(-1)[k] += h;
        m.view(-1)[k] -= h;
        const double fd = (fn(p, b).item<double>() - fn(m, b).item<double>()) / (2 * h);
        const double an = grad.view(-1)[k].item<double>();
        worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-10}));
    }
    return worst;
}

Outcome gradient_checks() {
    Outcome o;
    double s = 0, m = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        s = std::max(s, gradient_error([](auto& a, auto& b) { return ssim_loss(a, b); }, seed * 10, 10));
        m = std::max(m, gradient_error([](auto& a, auto& b) { return msgms_loss(a, b); }, seed * 10, 10));
    }
    o.require(s < 1e-3, "ssim");
    o.require(m < 1e-3, "msgms");
    o.detail << "worst relative error ssim " << s << ", msgms " << m << " (30 coordinates each, float64)";
    return o;
}

// 5 -------------------------------------------------------------------------
Outcome mask_invariants() {
    Outcome o;
    const auto pool = build_mask_pool(256, 256, {128, 64, 32}, MaskMode::MultiscaleSquare, 0);
    o.require(pool.size() == 6, "pool size");
    std::size_t checked = 0;
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> u(0, 1);
    for (auto mode : {MaskMode::MultiscaleSquare, MaskMode::Striped, MaskMode::Jumbled})
        for (const auto& [res, scales] : std::vector<std::pair<int, std::vector<int>>>{
                 {256, {128, 64, 32}}, {128, {64, 32, 16}}, {64, {16, 8}}}) {
            const auto p = build_mask_pool(res, res, scales, mode, 9);
            Image x(res, res, 3);
            for (auto& v : x.pixels) v = u(rng);
            for (std::size_t i = 0; i < p.size(); i += 2) {
                const Mask& m = p.masks[i];
                const Mask& mc = p.masks[i + 1];
                o.require(m.count_zeros() * 2 == m.grid.size() && mc.count_zeros() * 2 == mc.grid.size(), "1:1 ratio");
                bool tiles = true;
                for (std::size_t k = 0; k < m.grid.size(); ++k) tiles = tiles && (m.grid[k] ^ mc.grid[k]) == 1;
                o.require(tiles, "complement tiling");
                const Image a = corrupt(x, m), b = corrupt(x, mc);
                bool exact = true;
                for (std::size_t k = 0; k < x.size(); ++k) exact = exact && a.pixels[k] + b.pixels[k] == x.pixels[k];
                o.require(exact, "corrupt sum");
                checked += 2;
            }
        }
    o.detail << "6 masks in {128,64,32} pool; " << checked << " masks checked across 3 modes";
    return o;
}

// 6 -------------------------------------------------------------------------
Outcome bilateral_oracle() {
    Outcome o;
    std::mt19937 rng(66);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const BilateralParams p;
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
        ErrorMap m(16, 16);
        for (auto& v : m.values) v = u(rng) * u(rng);
        const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
        const double step = (*hi - *lo) / 255;
        std::vector<int> levels(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) levels[i] = static_cast<int>(std::lround((m.values[i] - *lo) / step));
        const auto want = oracle::bilateral(levels, 16, 16, p.diameter, p.sigma_intensity, p.sigma_spatial);
        const auto got = smooth_bilateral(m, p);
        for (std::size_t i = 0; i < m.size(); ++i) worst = std::max(worst, std::abs((got.values[i] - *lo) / step - want[i]));
    }
    o.require(worst <= 1.0, "deviation above one level");
    o.detail << "worst deviation " << worst << " levels over 50 maps";
    return o;
}

// 7 -------------------------------------------------------------------------
Outcome metrics_oracle() {
    Outcome o;
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> density(0.0, 0.5);
    ConfusionCounts micro;
    BinaryMap all_pred(0, 0), all_gt(0, 0);
    std::vector<std::uint8_t> cat_pred, cat_gt;
    for (int t = 0; t < 100; ++t) {
        std::bernoulli_distribution bp(density(rng)), bg(density(rng));
        BinaryMap pred(24, 20), gt(24, 20);
        for (auto& v : pred.values) v = bp(rng);
        for (auto& v : gt.values) v = bg(rng);
        std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 20; ++x) {
                const int p = pred.at(y, x), g = gt.at(y, x);
                tp += p & g;
                fp += p & (1 - g);
                fn += (1 - p) & g;
                tn += (1 - p) & (1 - g);
            }
        const auto c = confusion_counts(pred, gt);
        o.require(c == ConfusionCounts{tp, fp, tn, fn}, "counts");
        const auto r = compute_metrics(c);
        const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
        const double rec = tp + fn ? double(tp) / double(tp + fn) : 0.0;
        const double acc = double(tp + tn) / double(tp + tn + fp + fn);
        const double f1 = tp ? 2.0 * double(tp) / double(2 * tp + fp + fn) : 0.0;
        const double iou = tp + fp + fn ? double(tp) / double(tp + fp + fn) : 0.0;
        o.require(r.precision == prec && r.recall == rec && r.accuracy == acc && r.f1 == f1 && r.iou == iou,
                  "metrics on pair " + std::to_string(t));
        micro += c;
        cat_pred.insert(cat_pred.end(), pred.values.begin(), pred.values.end());
        cat_gt.insert(cat_gt.end(), gt.values.begin(), gt.values.end());
    }
    BinaryMap cp(static_cast<int>(cat_pred.size()), 1), cg(static_cast<int>(cat_gt.size()), 1);
    cp.values = cat_pred;
    cg.values = cat_gt;
    const auto whole = confusion_counts(cp, cg);
    o.require(whole == micro, "micro aggregation");
    const auto a = compute_metrics(micro), b = compute_metrics(whole);
    o.require(a.f1 == b.f1 && a.iou == b.iou && a.precision == b.precision && a.recall == b.recall &&
                  a.accuracy == b.accuracy,
              "aggregated metrics");
    o.detail << "100 pairs exact; micro F1 " << a.f1;
    return o;
}

// 8, 9 ----------------------------------------------------------------------
struct DeskResult {
    MetricsReport metrics;
    double auroc = 0;
    double train_seconds = 0;
    int epochs = 0;
};

RunConfig desk_config(const fs::path& work, const std::string& name) {
    RunConfig c = load_config({}, {{"seed", "0"},
                                   {"resolution", "128"},
                                   {"epochs", "30"},
                                   {"no_style", "true"},
                                   {"synth_train", "100"},
                                   {"synth_test", "20"},
                                   {"synth_size", "128"}});
    c.data_root = work / "data";
    c.run_dir = work / name;
    return c;
}

void ensure_synth(const fs::path& work) {
    if (fs::exists(work / "data" / "DONE")) return;
    fs::remove_all(work / "data");
    cmd_synth(desk_config(work, "unused"));
    std::ofstream(work / "data" / "DONE") << "ok\n";
}

DeskResult desk_run(const fs::path& work, const std::string& name, const std::function<void(RunConfig&)>& tweak) {
    ensure_synth(work);
    RunConfig c = desk_config(work, name);
    tweak(c);
    DeskResult r;
    const fs::path stamp = c.run_dir / "train_seconds";
    if (!fs::exists(stamp)) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto fit = cmd_train(c);
        r.train_seconds = seconds_since(t0);
        std::ofstream(stamp) << r.train_seconds << ' ' << fit.stop_epoch << '\n';
    }
    std::ifstream(stamp) >> r.train_seconds >> r.epochs;

    auto restorer = Restorer::from_checkpoint(c.checkpoint_path());
    const auto test = discover_split(c.data_root, Split::Test, c.train.resolution);
    ConfusionCounts counts;
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (const auto& e : test.entries) {
        const Image im = load_image(e.image, c.train.resolution);
        const BinaryMap gt = load_mask(*e.ground_truth, c.train.resolution);
        const auto d = detect(restorer, im, c.detect);
        counts += confusion_counts(d.otsu.binary, gt);
        scores.insert(scores.end(), d.raw.values.begin(), d.raw.values.end());
        labels.insert(labels.end(), gt.values.begin(), gt.values.end());
    }
    r.metrics = compute_metrics(counts, name, test.size());
    r.auroc = auroc(scores, labels);
    return r;
}

const auto kAllLosses = [](RunConfig&) {};
const auto kMaeOnly = [](RunConfig& c) {
    c.train.weights.ssim = c.train.weights.gms = c.train.weights.style = c.train.weights.adv = 0.0;
    c.train.freeze_discriminator = true;
};

Outcome desk_experiment(const fs::path& work) {
    Outcome o;
    const auto r = desk_run(work, "all_losses", kAllLosses);
    o.require(r.metrics.f1 >= 0.40, "F1");
    o.require(r.metrics.iou >= 0.30, "IoU");
    o.require(r.auroc >= 0.85, "AUROC");
    o.require(r.train_seconds <= 3 * 3600, "wall time");
    o.detail << "F1 " << r.metrics.f1 << ", IoU " << r.metrics.iou << ", AUROC " << r.auroc << ", " << r.epochs
             << " epochs in " << r.train_seconds << " s (CPU, no style, direct restoration)";
    return o;
}

Outcome ablation_direction(const fs::path& work) {
    Outcome o;
    const auto all = desk_run(work, "all_losses", kAllLosses);
    const auto mae = desk_run(work, "mae_only", kMaeOnly);
    o.require(all.metrics.f1 >= mae.metrics.f1, "all-losses F1 below MAE-only");
    o.detail << "all-losses (no style) F1 " << all.metrics.f1 << " vs MAE-only F1 " << mae.metrics.f1;
    return o;
}

// 10 ------------------------------------------------------------------------
Outcome reproducibility(const fs::path& work) {
    Outcome o;
    RunConfig base = load_config({}, {{"seed", "5"},
                                      {"resolution", "64"},
                                      {"epochs", "12"},
                                      {"patience", "1"},
                                      {"no_style", "true"},
                                      {"base_width", "16"},
                                      {"disc_base_width", "16"},
                                      {"synth_train", "24"},
                                      {"synth_val", "4"},
                                      {"synth_test", "2"},
                                      {"synth_size", "64"}});
    base.data_root = work / "repro_data";
    fs::remove_all(base.data_root);
    cmd_synth(base);
    RunConfig a = base, b = base;
    a.run_dir = work / "repro_a";
    b.run_dir = work / "repro_b";
    fs::remove_all(a.run_dir);
    fs::remove_all(b.run_dir);
    const auto ra = cmd_train(a), rb = cmd_train(b);
    o.require(ra.history.epochs.size() == rb.history.epochs.size(), "epoch counts");
    o.require(ra.stop_epoch == rb.stop_epoch, "stop epochs");
    double worst = 0;
    for (std::size_t e = 0; e < std::min(ra.history.epochs.size(), rb.history.epochs.size()); ++e) {
        const auto x = ra.history.epochs[e].to_row(), y = rb.history.epochs[e].to_row();
        for (std::size_t k = 1; k + 1 < x.size(); ++k) worst = std::max(worst, std::abs(x[k] - y[k]));
    }
    o.require(worst <= 1e-5, "loss drift");
    o.detail << ra.history.epochs.size() << " epochs each, stop epoch " << ra.stop_epoch << "/" << rb.stop_epoch
             << ", max per-epoch loss difference " << worst;
    return o;
}

// 11 ------------------------------------------------------------------------
Outcome end_to_end(const fs::path& work, const std::string& cli) {
    Outcome o;
    const fs::path root = work / "smoke";
    fs::remove_all(root);
    const std::string common = " --data-root " + (root / "data").string() + " --run-dir " + (root / "run").string() +
                               " --resolution 128 --no-style";
    const std::string steps[] = {
        "synth --synth-train 20 --synth-test 5 --synth-size 128",
        "train --epochs 2",
        "detect",
        "eval --report " + (root / "metrics.csv").string(),
    };
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& s : steps) {
        const int status = std::system((cli + " " + s + common + " > " + (work / "smoke.log").string() + " 2>&1").c_str());
        o.require(WIFEXITED(status) && WEXITSTATUS(status) == 0, "exit code of '" + s + "'");
        if (!o.pass) break;
    }
    const double secs = seconds_since(t0);
    o.require(secs < 300, "runtime");
    std::ifstream in(root / "metrics.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    o.require(header == "dataset,n_images,precision,recall,accuracy,f1,iou", "CSV header");
    int fields = 0;
    std::stringstream ss(row);
    for (std::string f; std::getline(ss, f, ',');) {
        if (fields >= 2) {
            char* end = nullptr;
            const double v = std::strtod(f.c_str(), &end);
            o.require(end && *end == '\0' && v >= 0 && v <= 100, "metric value '" + f + "'");
        }
        ++fields;
    }
    o.require(fields == 7, "CSV width");
    o.detail << "synth/train/detect/eval in " << secs << " s; row: " << row;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <criterion 1-11> [work_dir]\n");
        return 2;
    }
    const int n = std::atoi(argv[1]);
    const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "crackres_acceptance";
    fs::create_directories(work);
    Outcome o;
    try {
        switch (n) {
            case 1: o = otsu_oracle(); break;
            case 2: o = loss_oracles(); break;
            case 3: o = identity_suite(); break;
            case 4: o = gradient_checks(); break;
            case 5: o = mask_invariants(); break;
            case 6: o = bilateral_oracle(); break;
            case 7: o = metrics_oracle(); break;
            case 8: o = desk_experiment(work); break;
            case 9: o = ablation_direction(work); break;
            case 10: o = reproducibility(work); break;
            case 11: o = end_to_end(work, CRACKRES_CLI); break;
            default:
                std::fprintf(stderr, "unknown criterion %d\n", n);
                return 2;
        }
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << "exception: " << e.what();
    }
    std::printf("criterion %d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.str().c_str());
    return o.pass ? 0 : 1;
}
