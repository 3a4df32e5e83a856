#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crackres/image.hpp"

namespace crackres {

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Pixel-wise counts with crack (1) as the positive class.
ConfusionCounts confusion_counts(const BinaryMap& pred, const BinaryMap& gt);

struct MetricsReport {
    double precision = 0, recall = 0, accuracy = 0, f1 = 0, iou = 0;
    std::string dataset_id;
    std::size_t n_images = 0;

    bool has_nan() const;
};

/// Ratios of micro-averaged counts. A ratio whose denominator is zero is
/// reported as 0.
MetricsReport compute_metrics(const ConfusionCounts& counts, std::string dataset_id = "", std::size_t n_images = 0);

/// Percentage with three decimals, e.g. 0.61808 -> "61.808".
std::string format_percent(double fraction);

/// CSV: dataset,n_images,precision,recall,accuracy,f1,iou (percentages).
void write_report(std::span<const MetricsReport> reports, const std::filesystem::path& path);

/// Area under the ROC curve of real scores against {0,1} labels, with tied
/// scores counted as half.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace crackres
