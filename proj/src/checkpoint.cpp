#include "crackres/checkpoint.hpp"

#include "crackres/errors.hpp"

namespace crackres {

namespace {

constexpr const char* kModule = "model";
using torch::serialize::InputArchive;
using torch::serialize::OutputArchive;

void put_int(OutputArchive& a, const std::string& key, std::int64_t v) { a.write(key, c10::IValue(v)); }
void put_double(OutputArchive& a, const std::string& key, double v) { a.write(key, c10::IValue(v)); }

std::int64_t get_int(InputArchive& a, const std::string& key) {
    c10::IValue v;
    if (!a.try_read(key, v) || !v.isInt()) throw FormatError(kModule, "checkpoint is missing integer '" + key + "'");
    return v.toInt();
}

double get_double(InputArchive& a, const std::string& key) {
    c10::IValue v;
    if (!a.try_read(key, v) || !v.isDouble()) throw FormatError(kModule, "checkpoint is missing real '" + key + "'");
    return v.toDouble();
}

InputArchive open(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw StateError(kModule, "checkpoint not found: " + path.string());
    InputArchive a;
    try {
        a.load_from(path.string());
    } catch (const c10::Error& e) {
        throw FormatError(kModule, "cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
    const std::int64_t version = get_int(a, "format_version");
    if (version != kCheckpointFormatVersion)
        throw FormatError(kModule, "checkpoint " + path.string() + " has format_version " + std::to_string(version) +
                                       ", this build reads version " + std::to_string(kCheckpointFormatVersion));
    return a;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointInfo& info, Generator& generator,
                     Discriminator& discriminator, torch::optim::Optimizer* opt_g, torch::optim::Optimizer* opt_d) {
    OutputArchive a;
    put_int(a, "format_version", kCheckpointFormatVersion);

    const auto& g = info.generator;
    put_int(a, "g_input_channels", g.input_channels);
    put_int(a, "g_output_channels", g.output_channels);
    put_int(a, "g_base_width", g.base_width);
    put_int(a, "g_max_width", g.max_width);
    put_int(a, "g_depth", g.depth);
    put_double(a, "g_dropout_rate", g.dropout_rate);
    put_int(a, "g_dropout_blocks", g.dropout_blocks);
    put_double(a, "g_leaky_slope", g.leaky_slope);

    const auto& d = info.discriminator;
    put_int(a, "d_condition_channels", d.condition_channels);
    put_int(a, "d_candidate_channels", d.candidate_channels);
    put_int(a, "d_base_width", d.base_width);
    put_int(a, "d_num_downsample_blocks", d.num_downsample_blocks);
    put_double(a, "d_leaky_slope", d.leaky_slope);

    put_int(a, "epoch", info.epoch);
    put_double(a, "best_val_loss", info.best_val_loss);
    put_int(a, "best_epoch", info.best_epoch);
    put_int(a, "run_seed", static_cast<std::int64_t>(info.run_seed));
    put_int(a, "resolution", info.resolution);
    put_int(a, "mask_mode", static_cast<std::int64_t>(info.mask_mode));
    {
        std::vector<std::int64_t> scales(info.mask_scales.begin(), info.mask_scales.end());
        a.write("mask_scales", torch::tensor(scales, torch::kInt64), /*is_buffer=*/true);
    }
    {
        const std::int64_t rows = static_cast<std::int64_t>(info.history.size());
        const std::int64_t cols = rows > 0 ? static_cast<std::int64_t>(info.history.front().size()) : 0;
        auto h = torch::zeros({rows, cols}, torch::kFloat64);
        auto acc = h.accessor<double, 2>();
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c) acc[r][c] = info.history[r][c];
        a.write("history", h, /*is_buffer=*/true);
    }

    OutputArchive ga, da;
    generator->save(ga);
    discriminator->save(da);
    a.write("generator", ga);
    a.write("discriminator", da);
    if (opt_g && opt_d) {
        OutputArchive oga, oda;
        opt_g->save(oga);
        opt_d->save(oda);
        a.write("opt_g", oga);
        a.write("opt_d", oda);
        put_int(a, "has_optimizer_state", 1);
    } else {
        put_int(a, "has_optimizer_state", 0);
    }

    const auto tmp = path.string() + ".tmp";
    try {
        a.save_to(tmp);
    } catch (const c10::Error& e) {
        throw IoError(kModule, "cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
    std::filesystem::rename(tmp, path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
    InputArchive a = open(path);
    CheckpointInfo info;
    info.format_version = get_int(a, "format_version");

    auto& g = info.generator;
    g.input_channels = static_cast<int>(get_int(a, "g_input_channels"));
    g.output_channels = static_cast<int>(get_int(a, "g_output_channels"));
    g.base_width = static_cast<int>(get_int(a, "g_base_width"));
    g.max_width = static_cast<int>(get_int(a, "g_max_width"));
    g.depth = static_cast<int>(get_int(a, "g_depth"));
    g.dropout_rate = get_double(a, "g_dropout_rate");
    g.dropout_blocks = static_cast<int>(get_int(a, "g_dropout_blocks"));
    g.leaky_slope = get_double(a, "g_leaky_slope");

    auto& d = info.discriminator;
    d.condition_channels = static_cast<int>(get_int(a, "d_condition_channels"));
    d.candidate_channels = static_cast<int>(get_int(a, "d_candidate_channels"));
    d.base_width = static_cast<int>(get_int(a, "d_base_width"));
    d.num_downsample_blocks = static_cast<int>(get_int(a, "d_num_downsample_blocks"));
    d.leaky_slope = get_double(a, "d_leaky_slope");

    info.epoch = get_int(a, "epoch");
    info.best_val_loss = get_double(a, "best_val_loss");
    info.best_epoch = get_int(a, "best_epoch");
    info.run_seed = static_cast<std::uint64_t>(get_int(a, "run_seed"));
    info.resolution = static_cast<int>(get_int(a, "resolution"));
    info.mask_mode = static_cast<MaskMode>(get_int(a, "mask_mode"));

    torch::Tensor scales, history;
    if (!a.try_read("mask_scales", scales, true) || !a.try_read("history", history, true))
        throw FormatError(kModule, "checkpoint is missing mask scales or history");
    for (std::int64_t i = 0; i < scales.numel(); ++i) info.mask_scales.push_back(static_cast<int>(scales[i].item<std::int64_t>()));
    if (history.dim() == 2) {
        auto acc = history.accessor<double, 2>();
        for (std::int64_t r = 0; r < history.size(0); ++r) {
            std::vector<double> row(static_cast<std::size_t>(history.size(1)));
            for (std::int64_t c = 0; c < history.size(1); ++c) row[c] = acc[r][c];
            info.history.push_back(std::move(row));
        }
    }
    return info;
}

void restore_checkpoint(const std::filesystem::path& path, Generator& generator, Discriminator& discriminator,
                        torch::optim::Optimizer* opt_g, torch::optim::Optimizer* opt_d) {
    InputArchive a = open(path);
    InputArchive ga, da;
    if (!a.try_read("generator", ga) || !a.try_read("discriminator", da))
        throw FormatError(kModule, "checkpoint has no model parameters");
    try {
        generator->load(ga);
        discriminator->load(da);
    } catch (const c10::Error& e) {
        throw FormatError(kModule, "checkpoint parameters do not match the model: " +
                                       std::string(e.what_without_backtrace()));
    }
    if (opt_g || opt_d) {
        if (get_int(a, "has_optimizer_state") == 0)
            throw FormatError(kModule, "checkpoint " + path.string() + " carries no optimizer state");
        InputArchive oga, oda;
        a.try_read("opt_g", oga);
        a.try_read("opt_d", oda);
        if (opt_g) opt_g->load(oga);
        if (opt_d) opt_d->load(oda);
    }
}

LoadedModels load_models(const std::filesystem::path& path) {
    LoadedModels m;
    m.info = read_checkpoint_info(path);
    m.generator = Generator(m.info.generator);
    m.discriminator = Discriminator(m.info.discriminator);
    restore_checkpoint(path, m.generator, m.discriminator);
    return m;
}

}  // namespace crackres
