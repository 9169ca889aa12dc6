#pragma once

#include <optional>
#include <string>

#include "vpnext/deformable.hpp"
#include "vpnext/params.hpp"

namespace vpnext {

enum class UpsamplerKind { Bilinear, MockPyramid, RealPyramid };

inline const char* to_string(UpsamplerKind k) {
    switch (k) {
        case UpsamplerKind::Bilinear: return "bilinear";
        case UpsamplerKind::MockPyramid: return "mock";
        case UpsamplerKind::RealPyramid: return "real";
    }
    return "?";
}

struct HiclrConfig {
    int iterations = 3;        // best ablation setting
    int refiner_kernel = 3;
    int fuse_channels = 64;
    bool plain_conv_refiner = false;  // ablation: 3x3 conv instead of deformable
    bool share_weights = false;       // one refiner reused across iterations

    void validate() const {
        require(iterations >= 0 && iterations <= 5, "hiclr: iterations must be in [0,5], got " + std::to_string(iterations));
        require(refiner_kernel % 2 == 1, "hiclr: refiner kernel must be odd");
        require(fuse_channels >= 1, "hiclr: fuse_channels must be positive");
    }
};

template <typename T>
void register_upsampler_params(ParamStore<T>& ps, UpsamplerKind kind, const HiclrConfig& cfg, int d, const Rng& rng) {
    cfg.validate();
    int fuse = cfg.fuse_channels;
    int rk = cfg.refiner_kernel;
    int rtaps = rk * rk;
    auto add_hiclr_stage = [&](const std::string& p) {
        ps.add(p + "offset_pred.kernel", TensorData<T>({rk, rk, d, 2 * rtaps}));
        ps.add(p + "offset_pred.bias", TensorData<T>({2 * rtaps}), false);
        ps.add(p + "deform.kernel", glorot_init<T>({rk, rk, fuse, fuse}, rtaps * fuse, fuse, rng, p + "deform.kernel"));
        ps.add(p + "deform.bias", TensorData<T>({fuse}), false);
        ps.add(p + "ln.gamma", TensorData<T>::full({fuse}, T(1)), false);
        ps.add(p + "ln.beta", TensorData<T>({fuse}), false);
    };
    if (kind == UpsamplerKind::Bilinear) return;  // parameter-free path
    if (kind == UpsamplerKind::MockPyramid) {
        ps.add("mock.stage1.kernel", glorot_init<T>({3, 3, d, fuse}, 9 * d, fuse, rng, "mock.stage1.kernel"));
        ps.add("mock.stage1.bias", TensorData<T>({fuse}), false);
        ps.add("mock.stage2.kernel", glorot_init<T>({3, 3, fuse, fuse}, 9 * fuse, fuse, rng, "mock.stage2.kernel"));
        ps.add("mock.stage2.bias", TensorData<T>({fuse}), false);
    } else {
        ps.add("hiclr.proj.kernel", glorot_init<T>({d, fuse}, d, fuse, rng, "hiclr.proj.kernel"));
        ps.add("hiclr.proj.bias", TensorData<T>({fuse}), false);
        ps.add("hiclr.proj.ln.gamma", TensorData<T>::full({fuse}, T(1)), false);
        ps.add("hiclr.proj.ln.beta", TensorData<T>({fuse}), false);
    }
    int stages = cfg.share_weights ? (cfg.iterations > 0 ? 1 : 0) : cfg.iterations;
    for (int i = 0; i < stages; ++i) add_hiclr_stage("hiclr.it" + std::to_string(i) + ".");
}

/// Projects the hidden 1/4-resolution pyramid feature to the fuse width.
template <typename T>
Var<T> extract_hidden_pyramid(const std::optional<Var<T>>& hires, Bound<T>& P) {
    require(hires.has_value(), "extract_hidden_pyramid: encoder ran at stride 16, no hidden pyramid feature");
    Var<T> x = *hires;
    int b = x.value().shape[0], h = x.value().shape[1], w = x.value().shape[2], d = x.value().shape[3];
    Var<T> proj = add_rowvec(matmul(reshape(x, {b, h * w, d}), P["hiclr.proj.kernel"]), P["hiclr.proj.bias"]);
    int fuse = proj.value().shape.back();
    proj = layer_norm(proj, P["hiclr.proj.ln.gamma"], P["hiclr.proj.ln.beta"]);
    return reshape(proj, {b, h, w, fuse});
}

/// Learned x4 upscaling of the final feature (two transposed-style x2
/// stages); a pyramid mock-up with no access to native high-resolution detail.
template <typename T>
Var<T> mock_pyramid(Var<T> xz, Bound<T>& P) {
    Var<T> s1 = gelu(conv2d(zero_upsample(xz, 2), P["mock.stage1.kernel"], P["mock.stage1.bias"], 1, Padding::symmetric(1)));
    return gelu(conv2d(zero_upsample(s1, 2), P["mock.stage2.kernel"], P["mock.stage2.bias"], 1, Padding::symmetric(1)));
}

/// One high-level-context local refinement: resize the high-level map onto
/// the current grid, predict an offset field from it, refine `current` with
/// a deformable pass, then residual-add and normalize.
template <typename T>
Var<T> hiclr_step(Var<T> high_level, Var<T> current, Bound<T>& P, int stage, const HiclrConfig& cfg) {
    const auto& cs = current.value().shape;
    require_shape(cs.size() == 4, "hiclr_step: expected [b,h,w,c] current, got " + shape_str(current.value().shape));
    int h = cs[1], w = cs[2];
    std::string p = "hiclr.it" + std::to_string(cfg.share_weights ? 0 : stage) + ".";
    Var<T> ctx = resize_bilinear(high_level, h, w);
    Var<T> refined;
    if (cfg.plain_conv_refiner) {
        refined = conv2d(current, P[p + "deform.kernel"], P[p + "deform.bias"], 1, Padding::symmetric(cfg.refiner_kernel / 2));
    } else {
        Var<T> off = conv2d(ctx, P[p + "offset_pred.kernel"], P[p + "offset_pred.bias"], 1,
                            Padding::symmetric(cfg.refiner_kernel / 2));
        refined = deformable_conv(current, off, P[p + "deform.kernel"], P[p + "deform.bias"]);
    }
    return layer_norm(add(current, refined), P[p + "ln.gamma"], P[p + "ln.beta"]);
}

template <typename T>
struct UpsampleResult {
    Var<T> feature;       // 1/4-grid decoder feature
    int hiclr_steps = 0;  // instrumentation: refinement invocations
};

/// Decoder upsampling to the 1/4 grid.
///   bilinear: plain resize of the high-level feature, no parameters.
///   mock: learned x4 upscale of the high-level feature + refinement steps.
///   real: starts from the hidden pyramid feature; every step consumes the
///         high-level context, later steps consume the previous output.
template <typename T>
UpsampleResult<T> upsample(Var<T> high_level, const std::optional<Var<T>>& hires, Bound<T>& P,
                           UpsamplerKind kind, const HiclrConfig& cfg) {
    cfg.validate();
    const auto& s = high_level.value().shape;
    require_shape(s.size() == 4, "upsample: expected [b,gh,gw,d], got " + shape_str(high_level.value().shape));
    int qh = s[1] * 4, qw = s[2] * 4;
    UpsampleResult<T> r;
    switch (kind) {
        case UpsamplerKind::Bilinear:
            r.feature = resize_bilinear(high_level, qh, qw);
            return r;
        case UpsamplerKind::MockPyramid: {
            Var<T> cur = mock_pyramid(high_level, P);
            for (int i = 0; i < cfg.iterations; ++i, ++r.hiclr_steps) cur = hiclr_step(high_level, cur, P, i, cfg);
            r.feature = cur;
            return r;
        }
        case UpsamplerKind::RealPyramid: {
            require(hires.has_value(), "upsample: real pyramid requires the stride<kernel hidden feature");
            Var<T> cur = extract_hidden_pyramid(hires, P);
            require_shape(cur.value().shape[1] == qh && cur.value().shape[2] == qw,
                          "upsample: hidden pyramid grid " + shape_str(cur.value().shape) +
                              " is not 4x the token grid " + shape_str(high_level.value().shape));
            for (int i = 0; i < cfg.iterations; ++i, ++r.hiclr_steps) cur = hiclr_step(high_level, cur, P, i, cfg);
            r.feature = cur;
            return r;
        }
    }
    throw ValueError("upsample: unknown kind");
}

}  // namespace vpnext
