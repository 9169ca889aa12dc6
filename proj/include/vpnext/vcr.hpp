#pragma once

#include <string>
#include <vector>

#include "vpnext/deformable.hpp"
#include "vpnext/params.hpp"
#include "vpnext/seg.hpp"

namespace vpnext {

/// Visual context replay settings. Replay is training-only; the inference
/// graph never contains a replay branch.
struct VcrConfig {
    int num_replay_layers = 2;           // best ablation setting
    double aux_loss_weight = 0.4;
    bool detach_replayed_context = true; // tap losses must not deform the final context

    void validate(int tap_count) const {
        require(num_replay_layers >= 1 && num_replay_layers <= 3,
                "vcr: num_replay_layers must be in [1,3], got " + std::to_string(num_replay_layers));
        require(num_replay_layers <= tap_count,
                "vcr: num_replay_layers " + std::to_string(num_replay_layers) + " exceeds tap count " +
                    std::to_string(tap_count));
    }
};

/// Final-layer context: learnable offsets, the deformable aggregate, the
/// row-stochastic pixel affinity, and the decoder feature the main head
/// consumes.
template <typename T>
struct FinalContext {
    Var<T> sigma;    // offset field [b,gh,gw,2*kh*kw]
    Var<T> gamma;    // deformable output [b,gh,gw,d]
    Var<T> lambda;   // affinity [b,t,t], rows sum to 1
    Var<T> feature;  // lambda · V(gamma), [b,gh,gw,d]
};

inline constexpr int kDeformKernel = 3;

template <typename T>
void register_final_context_params(ParamStore<T>& ps, int d, const Rng& rng) {
    int taps = kDeformKernel * kDeformKernel;
    // offset predictor zero-initialized: training starts from plain conv
    ps.add("final_ctx.offset_pred.kernel", TensorData<T>({kDeformKernel, kDeformKernel, d, 2 * taps}));
    ps.add("final_ctx.offset_pred.bias", TensorData<T>({2 * taps}), false);
    ps.add("final_ctx.deform.kernel",
           glorot_init<T>({kDeformKernel, kDeformKernel, d, d}, taps * d, d, rng, "final_ctx.deform.kernel"));
    ps.add("final_ctx.deform.bias", TensorData<T>({d}), false);
    // q and k share their init so the affinity starts as a feature-similarity
    // gram matrix: intra-class positions attend to each other from step one
    ps.add("final_ctx.wq", glorot_init<T>({d, d}, d, d, rng, "final_ctx.wq"));
    ps.add("final_ctx.wk", glorot_init<T>({d, d}, d, d, rng, "final_ctx.wq"));
    ps.add("final_ctx.wv", glorot_init<T>({d, d}, d, d, rng, "final_ctx.wv"));
}

template <typename T>
void register_replay_params(ParamStore<T>& ps, int d, int num_taps, const Rng& rng) {
    int taps = kDeformKernel * kDeformKernel;
    for (int i = 0; i < num_taps; ++i) {
        std::string p = "replay.tap" + std::to_string(i) + ".";
        ps.add(p + "ln.gamma", TensorData<T>::full({d}, T(1)), false);
        ps.add(p + "ln.beta", TensorData<T>({d}), false);
        ps.add(p + "deform.kernel", glorot_init<T>({kDeformKernel, kDeformKernel, d, d}, taps * d, d, rng, p + "deform.kernel"));
        ps.add(p + "deform.bias", TensorData<T>({d}), false);
        ps.add(p + "phi", glorot_init<T>({d, d}, d, d, rng, p + "phi"));
    }
}

/// sigma_z = offset_pred(x_z); gamma_z = Deformable(x_z, sigma_z);
/// Lambda_z = softmax(Q Kᵀ / sqrt(d)) over gamma_z with fresh single-head
/// projections; the main head consumes the affinity-aggregated feature
/// Lambda_z · V(gamma_z) through a residual sum with gamma_z. Without the
/// residual a freshly initialized affinity is near uniform and the decoder
/// feature degenerates to the spatial mean.
template <typename T>
FinalContext<T> final_context(Var<T> xz, Bound<T>& P) {
    const auto& s = xz.value().shape;
    require_shape(s.size() == 4, "final_context: expected [b,gh,gw,d], got " + shape_str(xz.value().shape));
    int b = s[0], gh = s[1], gw = s[2], d = s[3];
    int t = gh * gw;
    FinalContext<T> fc;
    fc.sigma = conv2d(xz, P["final_ctx.offset_pred.kernel"], P["final_ctx.offset_pred.bias"], 1,
                      Padding::symmetric(kDeformKernel / 2));
    fc.gamma = deformable_conv(xz, fc.sigma, P["final_ctx.deform.kernel"], P["final_ctx.deform.bias"]);
    Var<T> flat = reshape(fc.gamma, {b, t, d});
    Var<T> q = matmul(flat, P["final_ctx.wq"]);
    Var<T> k = matmul(flat, P["final_ctx.wk"]);
    fc.lambda = softmax_rows(scale(matmul(q, k, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)))));
    Var<T> v = matmul(flat, P["final_ctx.wv"]);
    fc.feature = reshape(add(flat, matmul(fc.lambda, v)), {b, gh, gw, d});
    return fc;
}

/// Local+global context replay onto one intermediate tap:
/// y_i = Lambda_z · phi_i(Deformable(norm(x_i), sigma_z)). With the detach
/// flag the replayed context enters as a constant, so tap losses cannot
/// reach the final layer's context parameters.
template <typename T>
Var<T> replay(Var<T> x_tap, Var<T> sigma, Var<T> lambda, Bound<T>& P, int tap_index, bool detach) {
    const auto& s = x_tap.value().shape;
    require_shape(s.size() == 4, "replay: expected [b,gh,gw,d] tap, got " + shape_str(x_tap.value().shape));
    int b = s[0], gh = s[1], gw = s[2], d = s[3];
    int t = gh * gw;
    require_shape(sigma.value().shape[1] == gh && sigma.value().shape[2] == gw,
                  "replay: tap grid " + shape_str(x_tap.value().shape) + " does not match offset grid " +
                      shape_str(sigma.value().shape));
    require_shape(lambda.value().shape == Shape{b, t, t},
                  "replay: affinity " + shape_str(lambda.value().shape) + " does not match tap grid " +
                      shape_str(x_tap.value().shape));
    Var<T> sig = detach ? stop_gradient(sigma) : sigma;
    Var<T> lam = detach ? stop_gradient(lambda) : lambda;
    std::string p = "replay.tap" + std::to_string(tap_index) + ".";
    Var<T> normed = layer_norm(x_tap, P[p + "ln.gamma"], P[p + "ln.beta"]);
    Var<T> gam = deformable_conv(normed, sig, P[p + "deform.kernel"], P[p + "deform.bias"]);
    Var<T> phi = matmul(reshape(gam, {b, t, d}), P[p + "phi"]);
    return reshape(matmul(lam, phi), {b, gh, gw, d});
}

/// Shared auxiliary classifier on replayed (or raw) tap features: layer norm
/// then 1x1 projection, logits resized to the label grid. When
/// `with_classifier` is false only the norm is registered (the caller ties
/// the projection to the main head).
template <typename T>
void register_aux_head_params(ParamStore<T>& ps, int d, int num_classes, const Rng& rng,
                              bool with_classifier = true) {
    ps.add("aux_head.ln.gamma", TensorData<T>::full({d}, T(1)), false);
    ps.add("aux_head.ln.beta", TensorData<T>({d}), false);
    if (with_classifier) {
        ps.add("aux_head.w", glorot_init<T>({d, num_classes}, d, num_classes, rng, "aux_head.w"));
        ps.add("aux_head.b", TensorData<T>({num_classes}), false);
    }
}

template <typename T>
Var<T> aux_head_logits(Var<T> feat, Bound<T>& P, int out_h, int out_w) {
    Var<T> normed = layer_norm(feat, P["aux_head.ln.gamma"], P["aux_head.ln.beta"]);
    return seg_head(normed, P["aux_head.w"], P["aux_head.b"], out_h, out_w);
}

/// Per-tap auxiliary segmentation losses (same composite as the main head),
/// summed and scaled by aux_loss_weight. The classifier is passed in; the
/// model ties it to the main head so every replayed tap aligns with the
/// final classification geometry.
template <typename T>
Var<T> vcr_loss(const std::vector<Var<T>>& y_taps, const ClassMask& labels, Var<T> head_w, Var<T> head_b,
                Bound<T>& P, const LossWeights& lw, const VcrConfig& cfg) {
    require(!y_taps.empty(), "vcr_loss: need at least one replayed tap");
    for (const auto& y : y_taps)
        require_shape(y.value().shape[0] == labels.b,
                      "vcr_loss: tap batch " + shape_str(y.value().shape) + " does not match labels");
    Tape<T>* tape = y_taps[0].tape;
    Var<T> total = tape->constant(TensorData<T>::scalar(T(0)));
    for (const auto& y : y_taps) {
        Var<T> normed = layer_norm(y, P["aux_head.ln.gamma"], P["aux_head.ln.beta"]);
        Var<T> logits = seg_head(normed, head_w, head_b, labels.h, labels.w);
        total = add(total, composite_loss(logits, labels, lw).total);
    }
    return scale(total, static_cast<T>(cfg.aux_loss_weight));
}

/// Baseline alignment loss: sum of MSE(x_z, x_i) over the taps.
template <typename T>
Var<T> naive_align_loss(const std::vector<Var<T>>& taps, Var<T> xz) {
    require(!taps.empty(), "naive_align_loss: need at least one tap");
    Var<T> total = mse_mean(xz, taps[0]);
    for (std::size_t i = 1; i < taps.size(); ++i) total = add(total, mse_mean(xz, taps[i]));
    return total;
}

}  // namespace vpnext
