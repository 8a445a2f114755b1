#include "dtnet/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace dtnet {

MetricCounts confusion_counts(const Tensor& p, const Tensor& t, Real threshold) {
    if (!p.same_shape(t))
        throw std::invalid_argument("confusion_counts: shape mismatch " + p.shape_str() + " vs " +
                                    t.shape_str());
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("confusion_counts: threshold must be in (0,1)");
    MetricCounts c;
    for (size_t i = 0; i < p.size(); ++i) {
        const bool pred = p.v[i] >= threshold;
        const bool pos = t.v[i] >= 0.5;
        if (pred && pos)
            ++c.tp;
        else if (pred && !pos)
            ++c.fp;
        else if (!pred && pos)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

MetricReport metrics_from_counts(const MetricCounts& c) {
    MetricReport r;
    const int64_t uni = c.tp + c.fp + c.fn;
    r.iou = uni == 0 ? 1.0 : Real(c.tp) / Real(uni);
    r.precision = (c.tp + c.fp) == 0 ? (c.tp == 0 ? 1.0 : 0.0) : Real(c.tp) / Real(c.tp + c.fp);
    r.recall = (c.tp + c.fn) == 0 ? (c.tp == 0 ? 1.0 : 0.0) : Real(c.tp) / Real(c.tp + c.fn);
    const Real pr = r.precision + r.recall;
    r.f1 = pr == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / pr;
    return r;
}

MetricReport evaluate_set(const std::vector<Tensor>& predictions,
                          const std::vector<Tensor>& targets, AverageMode mode, Real threshold) {
    if (predictions.empty()) throw std::invalid_argument("evaluate_set: empty set");
    if (predictions.size() != targets.size())
        throw std::invalid_argument("evaluate_set: prediction/target count mismatch");

    if (mode == AverageMode::Micro) {
        MetricCounts pooled;
        for (size_t i = 0; i < predictions.size(); ++i)
            pooled += confusion_counts(predictions[i], targets[i], threshold);
        MetricReport r = metrics_from_counts(pooled);
        r.mode = AverageMode::Micro;
        return r;
    }
    MetricReport acc;
    acc.mode = AverageMode::Macro;
    for (size_t i = 0; i < predictions.size(); ++i) {
        MetricReport r = metrics_from_counts(confusion_counts(predictions[i], targets[i], threshold));
        acc.iou += r.iou;
        acc.f1 += r.f1;
        acc.recall += r.recall;
        acc.precision += r.precision;
    }
    const Real n = Real(predictions.size());
    acc.iou /= n;
    acc.f1 /= n;
    acc.recall /= n;
    acc.precision /= n;
    return acc;
}

std::string report_header(const std::string& label_col) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-36s %8s %8s %8s %10s", label_col.c_str(), "IOU", "F1",
                  "Recall", "Precision");
    return buf;
}

std::string report_row(const std::string& label, const MetricReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-36s %8.2f %8.2f %8.2f %10.2f", label.c_str(),
                  100.0 * r.iou, 100.0 * r.f1, 100.0 * r.recall, 100.0 * r.precision);
    return buf;
}

std::string report_kv(const MetricReport& r, const std::string& prefix) {
    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "%siou=%.2f\n%sf1=%.2f\n%srecall=%.2f\n%sprecision=%.2f\n", prefix.c_str(),
                  100.0 * r.iou, prefix.c_str(), 100.0 * r.f1, prefix.c_str(), 100.0 * r.recall,
                  prefix.c_str(), 100.0 * r.precision);
    return buf;
}

}  // namespace dtnet
