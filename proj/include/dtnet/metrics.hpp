#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtnet/tensor.hpp"

namespace dtnet {

struct MetricCounts {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    int64_t total() const { return tp + fp + fn + tn; }
    MetricCounts& operator+=(const MetricCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

enum class AverageMode { Micro, Macro };

struct MetricReport {
    Real iou = 0.0, f1 = 0.0, recall = 0.0, precision = 0.0;
    AverageMode mode = AverageMode::Micro;
};

// Pixelwise counts with prediction = (p >= threshold).
MetricCounts confusion_counts(const Tensor& p, const Tensor& t, Real threshold = 0.5);

// Degenerate denominators: empty union -> IOU 1; zero precision/recall
// denominator -> 1 when TP = 0.
MetricReport metrics_from_counts(const MetricCounts& c);

// Micro pools counts over all images; macro averages per-image metrics.
MetricReport evaluate_set(const std::vector<Tensor>& predictions,
                          const std::vector<Tensor>& targets, AverageMode mode,
                          Real threshold = 0.5);

// Percentages, two decimals, columns ordered IOU / F1 / Recall / Precision.
std::string report_row(const std::string& label, const MetricReport& r);
std::string report_header(const std::string& label_col);
std::string report_kv(const MetricReport& r, const std::string& prefix = "");

}  // namespace dtnet
