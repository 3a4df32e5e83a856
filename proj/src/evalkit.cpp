#include "crackres/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "crackres/errors.hpp"

namespace crackres {

namespace {

constexpr const char* kModule = "evalkit";

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionCounts confusion_counts(const BinaryMap& pred, const BinaryMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width || pred.size() != gt.size())
        throw ArgumentError(kModule, "prediction and ground truth differ in shape");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const std::uint8_t p = pred.values[i], g = gt.values[i];
        if (p > 1 || g > 1) throw ArgumentError(kModule, "maps must be strictly binary");
        if (p && g)
            ++c.tp;
        else if (p)
            ++c.fp;
        else if (g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

bool MetricsReport::has_nan() const {
    return std::isnan(precision) || std::isnan(recall) || std::isnan(accuracy) || std::isnan(f1) || std::isnan(iou);
}

MetricsReport compute_metrics(const ConfusionCounts& c, std::string dataset_id, std::size_t n_images) {
    if (c.total() == 0) throw ArgumentError(kModule, "cannot compute metrics over zero pixels");
    MetricsReport r;
    r.dataset_id = std::move(dataset_id);
    r.n_images = n_images;
    r.precision = ratio(c.tp, c.tp + c.fp);
    r.recall = ratio(c.tp, c.tp + c.fn);
    r.accuracy = ratio(c.tp + c.tn, c.total());
    r.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    r.iou = ratio(c.tp, c.tp + c.fp + c.fn);
    return r;
}

std::string format_percent(double fraction) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", fraction * 100.0);
    return buf;
}

void write_report(std::span<const MetricsReport> reports, const std::filesystem::path& path) {
    if (reports.empty()) throw ArgumentError(kModule, "no metrics to report");
    std::ofstream out(path);
    if (!out) throw IoError(kModule, "cannot write report " + path.string());
    out << "dataset,n_images,precision,recall,accuracy,f1,iou\n";
    for (const auto& r : reports)
        out << r.dataset_id << ',' << r.n_images << ',' << format_percent(r.precision) << ','
            << format_percent(r.recall) << ',' << format_percent(r.accuracy) << ',' << format_percent(r.f1) << ','
            << format_percent(r.iou) << '\n';
    if (!out) throw IoError(kModule, "failed writing report " + path.string());
}

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw ArgumentError(kModule, "scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Mann-Whitney U with midranks for ties.
    double rank_sum_pos = 0;
    std::uint64_t n_pos = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) {
                rank_sum_pos += midrank;
                ++n_pos;
            }
        i = j;
    }
    const std::uint64_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw ArgumentError(kModule, "AUROC needs both classes");
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace crackres
