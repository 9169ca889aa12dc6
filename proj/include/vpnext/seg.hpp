#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpnext/ops.hpp"
#include "vpnext/sampling.hpp"

namespace vpnext {

/// Integer label grid; 255 marks ignored pixels.
struct ClassMask {
    static constexpr std::uint8_t kIgnore = 255;

    int b = 0, h = 0, w = 0;
    std::vector<std::uint8_t> labels;

    ClassMask() = default;
    ClassMask(int b_, int h_, int w_) : b(b_), h(h_), w(w_), labels(static_cast<std::size_t>(b_) * h_ * w_, 0) {}

    std::uint8_t& at(int bi, int y, int x) { return labels[(static_cast<std::size_t>(bi) * h + y) * w + x]; }
    std::uint8_t at(int bi, int y, int x) const { return labels[(static_cast<std::size_t>(bi) * h + y) * w + x]; }
    std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }

    void validate(int num_classes) const {
        for (std::uint8_t v : labels)
            require(v < num_classes || v == kIgnore,
                    "mask label " + std::to_string(v) + " outside [0," + std::to_string(num_classes) + ") and not ignore");
    }
};

struct LossWeights {
    double focal = 1.0;
    double dice = 1.0;
    double ce = 1.0;
    double focal_gamma = 2.0;

    void validate() const {
        require(focal >= 0 && dice >= 0 && ce >= 0, "loss weights must be non-negative");
        require(focal + dice + ce > 0, "at least one loss weight must be positive");
        require(focal_gamma >= 0, "focal gamma must be non-negative");
    }
};

/// Classifier head: 1x1 projection to class logits, then bilinear resize of
/// the logits (not the labels) to the target resolution.
template <typename T>
Var<T> seg_head(Var<T> feat, Var<T> weight, Var<T> bias, int out_h, int out_w) {
    const auto& vf = feat.value();
    require_shape(vf.rank() == 4, "seg_head: expected [b,h,w,c], got " + shape_str(vf.shape));
    const auto& vw = weight.value();
    require_shape(vw.rank() == 2 && vw.shape[0] == vf.shape[3],
                  "seg_head: weight " + shape_str(vw.shape) + " incompatible with feature " + shape_str(vf.shape));
    int num_classes = vw.shape[1];
    require(num_classes >= 2, "seg_head: need at least 2 classes, got " + std::to_string(num_classes));
    int b = vf.shape[0], h = vf.shape[1], w = vf.shape[2], c = vf.shape[3];
    Var<T> logits = add_rowvec(matmul(reshape(feat, {b, h * w, c}), weight), bias);
    return resize_bilinear(reshape(logits, {b, h, w, num_classes}), out_h, out_w);
}

template <typename T>
struct CompositeLossResult {
    Var<T> total;
    bool all_ignored = false;
};

/// Mask loss: ce*CE + focal*Focal(gamma) + dice*(1 - mean per-class soft
/// dice). All terms mean-reduced over valid pixels; ignore-index pixels are
/// excluded everywhere. Dice averages over classes present in the ground
/// truth (absent classes carry no dice signal; CE/focal still penalize any
/// mass placed on them). When every pixel is ignored the loss is defined as
/// zero and all_ignored is flagged.
template <typename T>
CompositeLossResult<T> composite_loss(Var<T> logits, const ClassMask& mask, const LossWeights& w) {
    w.validate();
    const auto& vl = logits.value();
    require_shape(vl.rank() == 4, "composite_loss: expected [b,H,W,C] logits, got " + shape_str(vl.shape));
    require_shape(vl.shape[0] == mask.b && vl.shape[1] == mask.h && vl.shape[2] == mask.w,
                  "composite_loss: logits " + shape_str(vl.shape) + " do not match mask [" + std::to_string(mask.b) +
                      "," + std::to_string(mask.h) + "," + std::to_string(mask.w) + "]");
    int num_classes = vl.shape[3];
    mask.validate(num_classes);
    std::int64_t pixels = mask.size();

    std::int64_t n_valid = 0;
    for (std::uint8_t v : mask.labels)
        if (v != ClassMask::kIgnore) ++n_valid;
    if (n_valid == 0) return {logits.tape->constant(TensorData<T>::scalar(T(0))), true};

    int p = static_cast<int>(pixels);
    Var<T> flat = reshape(logits, {p, num_classes});

    // constants shared by the loss terms
    std::vector<int> target(static_cast<std::size_t>(p), 0);
    TensorData<T> valid({p});
    TensorData<T> onehot({p, num_classes});
    std::vector<std::int64_t> class_pixels(static_cast<std::size_t>(num_classes), 0);
    for (std::int64_t i = 0; i < pixels; ++i) {
        std::uint8_t lab = mask.labels[static_cast<std::size_t>(i)];
        if (lab == ClassMask::kIgnore) continue;
        target[static_cast<std::size_t>(i)] = lab;
        valid.data[static_cast<std::size_t>(i)] = T(1);
        onehot.data[static_cast<std::size_t>(i) * num_classes + lab] = T(1);
        ++class_pixels[lab];
    }
    Var<T> valid_c = logits.tape->constant(valid);
    T inv_valid = T(1) / static_cast<T>(n_valid);

    Var<T> logp = log_softmax_rows(flat);
    Var<T> logp_t = gather_cols(logp, target);  // [p]; ignored rows masked below

    Var<T> total = logits.tape->constant(TensorData<T>::scalar(T(0)));
    if (w.ce > 0) {
        Var<T> ce = scale(sum_all(mul(logp_t, valid_c)), -inv_valid);
        total = add(total, scale(ce, static_cast<T>(w.ce)));
    }
    if (w.focal > 0) {
        Var<T> pt = exp_v(logp_t);
        Var<T> mod = pow_const(add_scalar(scale(pt, T(-1)), T(1)), static_cast<T>(w.focal_gamma));
        Var<T> focal = scale(sum_all(mul(mul(mod, logp_t), valid_c)), -inv_valid);
        total = add(total, scale(focal, static_cast<T>(w.focal)));
    }
    if (w.dice > 0) {
        Var<T> probs = softmax_rows(flat);
        TensorData<T> ones_row({1, p});
        std::fill(ones_row.data.begin(), ones_row.data.end(), T(1));
        Var<T> ones = logits.tape->constant(ones_row);
        Var<T> inter = matmul(ones, mul(probs, logits.tape->constant(onehot)));  // [1,C]
        // predicted mass per class over valid pixels
        TensorData<T> valid_rep({p, num_classes});
        for (int i = 0; i < p; ++i)
            for (int c = 0; c < num_classes; ++c)
                valid_rep.data[static_cast<std::size_t>(i) * num_classes + c] = valid.data[static_cast<std::size_t>(i)];
        Var<T> psum = matmul(ones, mul(probs, logits.tape->constant(valid_rep)));  // [1,C]
        TensorData<T> ysum({1, num_classes});
        TensorData<T> present({1, num_classes});
        int n_present = 0;
        for (int c = 0; c < num_classes; ++c) {
            ysum.data[static_cast<std::size_t>(c)] = static_cast<T>(class_pixels[static_cast<std::size_t>(c)]);
            if (class_pixels[static_cast<std::size_t>(c)] > 0) {
                present.data[static_cast<std::size_t>(c)] = T(1);
                ++n_present;
            }
        }
        Var<T> denom = add(psum, logits.tape->constant(ysum));
        Var<T> dice_per_class = div(scale(inter, T(2)), denom);
        Var<T> mean_dice = scale(sum_all(mul(dice_per_class, logits.tape->constant(present))),
                                 T(1) / static_cast<T>(n_present));
        Var<T> dice_loss = add_scalar(scale(mean_dice, T(-1)), T(1));
        total = add(total, scale(dice_loss, static_cast<T>(w.dice)));
    }
    return {total, false};
}

/// Per-pixel argmax of [b,H,W,C] logits (first maximum wins).
template <typename T>
ClassMask logits_to_mask(const TensorData<T>& logits) {
    require_shape(logits.rank() == 4, "logits_to_mask: expected [b,H,W,C]");
    int b = logits.shape[0], h = logits.shape[1], w = logits.shape[2], c = logits.shape[3];
    ClassMask m(b, h, w);
    const T* p = logits.ptr();
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(b) * h * w; ++i) {
        const T* row = p + i * c;
        int best = 0;
        for (int j = 1; j < c; ++j)
            if (row[j] > row[best]) best = j;
        m.labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best);
    }
    return m;
}

}  // namespace vpnext
