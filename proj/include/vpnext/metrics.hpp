#pragma once

#include <cstdint>
#include <vector>

#include "vpnext/seg.hpp"

namespace vpnext {

/// Dataset-accumulated confusion matrix. Counts are integers, so shard
/// merging by addition is exact, associative and commutative.
class ConfusionMatrix {
  public:
    explicit ConfusionMatrix(int num_classes) : num_classes_(num_classes),
                                                counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
        require(num_classes >= 2, "confusion matrix: need at least 2 classes, got " + std::to_string(num_classes));
    }

    void add(const ClassMask& pred, const ClassMask& truth) {
        require_shape(pred.b == truth.b && pred.h == truth.h && pred.w == truth.w,
                      "confusion matrix: prediction and truth shapes differ");
        for (std::size_t i = 0; i < truth.labels.size(); ++i) {
            std::uint8_t t = truth.labels[i];
            if (t == ClassMask::kIgnore) continue;
            std::uint8_t p = pred.labels[i];
            require(t < num_classes_ && p < num_classes_, "confusion matrix: label out of range");
            counts_[static_cast<std::size_t>(t) * num_classes_ + p]++;
        }
    }

    void merge(const ConfusionMatrix& other) {
        require(other.num_classes_ == num_classes_, "confusion matrix: class count mismatch in merge");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    }

    std::int64_t count(int truth, int pred) const {
        return counts_[static_cast<std::size_t>(truth) * num_classes_ + pred];
    }

    struct IouResult {
        double miou = 0.0;
        std::vector<double> per_class;   // NaN-free: absent classes hold 0 and valid[c]=false
        std::vector<bool> valid;         // class appears in pred or truth
    };

    /// Per-class IoU = TP/(TP+FP+FN); classes absent from both prediction and
    /// truth are excluded from the mean.
    IouResult iou() const {
        IouResult r;
        r.per_class.assign(static_cast<std::size_t>(num_classes_), 0.0);
        r.valid.assign(static_cast<std::size_t>(num_classes_), false);
        double sum = 0.0;
        int n = 0;
        for (int c = 0; c < num_classes_; ++c) {
            std::int64_t tp = count(c, c);
            std::int64_t row = 0, col = 0;
            for (int j = 0; j < num_classes_; ++j) {
                row += count(c, j);
                col += count(j, c);
            }
            std::int64_t denom = row + col - tp;
            if (denom == 0) continue;
            double iou = static_cast<double>(tp) / static_cast<double>(denom);
            r.per_class[static_cast<std::size_t>(c)] = iou;
            r.valid[static_cast<std::size_t>(c)] = true;
            sum += iou;
            ++n;
        }
        r.miou = n > 0 ? sum / n : 0.0;
        return r;
    }

    int num_classes() const { return num_classes_; }

  private:
    int num_classes_;
    std::vector<std::int64_t> counts_;
};

struct MiouResult {
    double miou;
    std::vector<double> per_class;
    std::vector<bool> valid;
};

inline MiouResult miou(const ClassMask& pred, const ClassMask& truth, int num_classes) {
    ConfusionMatrix cm(num_classes);
    cm.add(pred, truth);
    auto r = cm.iou();
    return {r.miou, r.per_class, r.valid};
}

}  // namespace vpnext
