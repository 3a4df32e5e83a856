#include "crackres/commands.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include "crackres/checkpoint.hpp"
#include "crackres/datapipe.hpp"
#include "crackres/errors.hpp"

namespace crackres {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "cli";

void require_data_root(const RunConfig& c) {
    if (c.data_root.empty()) throw ConfigError(kModule, "--data-root is required");
}

Image overlay(const Image& image, const BinaryMap& pred, const BinaryMap& gt) {
    Image out = image;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const bool p = pred.at(y, x), g = gt.at(y, x);
            float rgb[3];
            if (p && g) {
                rgb[0] = 0, rgb[1] = 1, rgb[2] = 0;
            } else if (p) {
                rgb[0] = 0, rgb[1] = 0, rgb[2] = 1;
            } else if (g) {
                rgb[0] = 1, rgb[1] = 0, rgb[2] = 0;
            } else {
                continue;
            }
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = rgb[c];
        }
    return out;
}

}  // namespace

void cmd_synth(const RunConfig& c) {
    require_data_root(c);
    SynthOptions opt;
    opt.size = c.synth_size;
    opt.n_val = c.synth_val;
    const auto layout = generate_synthetic_dataset(c.data_root, c.synth_train, c.synth_test, c.train.seed, opt);
    std::printf("wrote %zu train, %zu val, %zu test images to %s\n", layout.train.size(), layout.val.size(),
                layout.test.size(), c.data_root.string().c_str());
}

void cmd_masks(const RunConfig& c) {
    const TrainConfig t = c.train.resolved();
    const MaskPool pool = t.make_mask_pool();
    const fs::path dir = c.run_dir / "masks";
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const Mask& m = pool.masks[i];
        BinaryMap b(m.height, m.width);
        b.values = m.grid;
        save_binary_map(dir / ("mask_" + to_string(m.mode) + "_" + std::to_string(m.scale) + "_" + std::to_string(i) + ".png"), b);
    }
    std::printf("wrote %zu masks to %s\n", pool.size(), dir.string().c_str());
}

FitResult cmd_train(const RunConfig& c) {
    require_data_root(c);
    fs::create_directories(c.run_dir);
    write_resolved_config(c, c.run_dir / "config.resolved");
    const auto train = discover_split(c.data_root, Split::TrainUndamaged, c.train.resolution);
    const auto val = discover_split(c.data_root, Split::ValUndamaged, c.train.resolution);
    auto result = fit(c.train, train, val, c.run_dir);
    std::printf("trained %d epochs, best epoch %d (val_res %.6f)\n", result.stop_epoch, result.history.best_epoch,
                result.history.best_val);
    return result;
}

void cmd_detect(const RunConfig& c) {
    require_data_root(c);
    c.detect.bilateral.validate();
    Restorer restorer = Restorer::from_checkpoint(c.checkpoint_path());
    const int resolution = read_checkpoint_info(c.checkpoint_path()).resolution;
    const auto test = discover_split(c.data_root, Split::Test, resolution);
    const fs::path out = c.pred_path();
    fs::create_directories(out);
    write_resolved_config(c, out / "config.resolved");
    std::ofstream summary(out / "summary.csv");
    summary << "image,threshold,no_anomaly,flagged_pixels\n";
    for (const auto& entry : test.entries) {
        const Image image = load_image(entry.image, resolution);
        const Detection d = detect(restorer, image, c.detect);
        const auto stem = entry.image.stem().string();
        save_binary_map(out / (stem + ".png"), d.otsu.binary);
        if (c.write_error_maps) {
            const auto q = quantize_min_max(d.raw);
            save_gray8(out / "error" / (stem + ".png"), q.height, q.width, q.levels);
        }
        if (c.write_overlays && entry.ground_truth) {
            const auto gt = load_mask(*entry.ground_truth, resolution);
            save_image(out / "overlay" / (stem + ".png"), overlay(image, d.otsu.binary, gt));
        }
        summary << stem << ',' << d.otsu.threshold << ',' << (d.otsu.no_anomaly ? 1 : 0) << ','
                << d.otsu.binary.count_ones() << '\n';
    }
    std::printf("detected %zu images into %s\n", test.size(), out.string().c_str());
}

MetricsReport cmd_eval(const RunConfig& c) {
    require_data_root(c);
    const auto test = discover_split(c.data_root, Split::Test, 0);
    const fs::path pred_dir = c.pred_path();
    if (!fs::is_directory(pred_dir)) throw LayoutError(kModule, "prediction directory not found: " + pred_dir.string());

    std::map<std::string, fs::path> preds;
    for (const auto& e : fs::directory_iterator(pred_dir))
        if (e.is_regular_file() && e.path().extension() == ".png") preds[e.path().stem().string()] = e.path();
    std::size_t labelled = 0;
    for (const auto& entry : test.entries)
        if (entry.ground_truth) ++labelled;
    if (labelled == 0) throw PairingError("evalkit", "no ground-truth masks under " + (c.data_root / "test" / "masks").string());
    if (preds.size() != labelled)
        throw PairingError("evalkit", std::to_string(preds.size()) + " predictions but " + std::to_string(labelled) +
                                          " ground-truth masks");

    ConfusionCounts total;
    for (const auto& entry : test.entries) {
        if (!entry.ground_truth) continue;
        const auto it = preds.find(entry.image.stem().string());
        if (it == preds.end())
            throw PairingError("evalkit", "no prediction for " + entry.image.stem().string());
        const BinaryMap pred = load_mask(it->second);
        const BinaryMap gt = load_mask(*entry.ground_truth, pred.height == pred.width ? pred.height : 0);
        total += confusion_counts(pred, gt);
    }
    auto report = compute_metrics(total, c.data_root.filename().string(), labelled);
    const std::vector<MetricsReport> reports{report};
    write_report(reports, c.report_path());
    if (report.has_nan()) throw NumericError("evalkit", "a metric evaluated to NaN");
    std::printf("precision %s  recall %s  accuracy %s  f1 %s  iou %s\n", format_percent(report.precision).c_str(),
                format_percent(report.recall).c_str(), format_percent(report.accuracy).c_str(),
                format_percent(report.f1).c_str(), format_percent(report.iou).c_str());
    return report;
}

std::vector<AblationCase> ablation_cases(const RunConfig& base) {
    std::vector<AblationCase> cases;
    if (base.ablate_mode == "masks") {
        for (auto mode : {MaskMode::Jumbled, MaskMode::Striped, MaskMode::MultiscaleSquare}) {
            AblationCase a{to_string(mode), base};
            a.config.train.mask_mode = mode;
            cases.push_back(std::move(a));
        }
        return cases;
    }
    // ssim, msgms, style, adv toggles; MAE always on.
    const bool rows[][4] = {{0, 0, 0, 0}, {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1},
                            {1, 1, 0, 0}, {1, 1, 1, 0}, {1, 1, 0, 1}, {1, 1, 1, 1}};
    const LossWeights defaults = base.train.weights;
    for (const auto& r : rows) {
        if (r[2] && !base.train.use_style) continue;
        AblationCase a{"mae", base};
        auto& w = a.config.train.weights;
        w.mae = defaults.mae;
        w.ssim = r[0] ? defaults.ssim : 0.0;
        w.gms = r[1] ? defaults.gms : 0.0;
        w.style = r[2] ? defaults.style : 0.0;
        w.adv = r[3] ? defaults.adv : 0.0;
        a.config.train.freeze_discriminator = !r[3];
        if (r[0]) a.name += "+ssim";
        if (r[1]) a.name += "+msgms";
        if (r[2]) a.name += "+style";
        if (r[3]) a.name += "+adv";
        cases.push_back(std::move(a));
    }
    return cases;
}

void cmd_ablate(const RunConfig& base) {
    require_data_root(base);
    fs::create_directories(base.run_dir);
    write_resolved_config(base, base.run_dir / "config.resolved");
    const fs::path csv_path = base.run_dir / "ablation.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw IoError(kModule, "cannot write " + csv_path.string());
    csv << (base.ablate_mode == "masks" ? "mode" : "mae,ssim,msgms,style,adv")
        << ",precision,recall,accuracy,f1,iou\n";
    for (const auto& a : ablation_cases(base)) {
        RunConfig c = a.config;
        c.run_dir = base.run_dir / a.name;
        c.checkpoint.clear();
        c.pred_dir.clear();
        c.report.clear();
        std::printf("== %s\n", a.name.c_str());
        cmd_train(c);
        cmd_detect(c);
        const auto r = cmd_eval(c);
        if (base.ablate_mode == "masks") {
            csv << a.name;
        } else {
            const auto& w = c.train.weights;
            csv << (w.mae != 0) << ',' << (w.ssim != 0) << ',' << (w.gms != 0) << ',' << (w.style != 0) << ','
                << (w.adv != 0);
        }
        csv << ',' << format_percent(r.precision) << ',' << format_percent(r.recall) << ','
            << format_percent(r.accuracy) << ',' << format_percent(r.f1) << ',' << format_percent(r.iou) << '\n';
        csv.flush();
    }
    std::printf("ablation table written to %s\n", csv_path.string().c_str());
}

int run_subcommand(const std::string& name, const RunConfig& config) {
    try {
        if (name == "synth")
            cmd_synth(config);
        else if (name == "masks")
            cmd_masks(config);
        else if (name == "train")
            cmd_train(config);
        else if (name == "detect")
            cmd_detect(config);
        else if (name == "eval")
            cmd_eval(config);
        else if (name == "ablate")
            cmd_ablate(config);
        else {
            std::fprintf(stderr, "error: unknown subcommand '%s'\n", name.c_str());
            return 2;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error [%s]: %s\n", e.module().c_str(), e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", e.module().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace crackres
