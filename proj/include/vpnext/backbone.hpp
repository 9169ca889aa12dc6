#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vpnext/conv.hpp"
#include "vpnext/params.hpp"
#include "vpnext/sampling.hpp"

namespace vpnext {

/// Patch embedding convolution with kernel and stride decoupled. Running the
/// 16px kernel at stride 4 yields a 1/4-resolution map whose stride-4
/// subsample reproduces the stride-16 embedding exactly, because windows are
/// anchored at 0 and the zero pad sits only on the trailing edges.
struct PatchEmbedConfig {
    int kernel = 16;
    int stride = 16;
    int embed_dim = 64;
    int pad_right_bottom = 0;

    static PatchEmbedConfig make(int kernel, int stride, int embed_dim) {
        PatchEmbedConfig c;
        c.kernel = kernel;
        c.stride = stride;
        c.embed_dim = embed_dim;
        c.pad_right_bottom = stride < kernel ? kernel - stride : 0;
        c.validate();
        return c;
    }

    void validate() const {
        require(stride >= 1 && stride <= kernel,
                "patch embed: need 1 <= stride <= kernel, got stride " + std::to_string(stride) + ", kernel " +
                    std::to_string(kernel));
        int want = stride < kernel ? kernel - stride : 0;
        require(pad_right_bottom == want,
                "patch embed: pad_right_bottom must be " + std::to_string(want) + ", got " +
                    std::to_string(pad_right_bottom));
    }

    bool produces_hires() const { return stride < kernel; }
};

struct EncoderConfig {
    int num_layers = 8;
    int heads = 4;
    int embed_dim = 64;
    float mlp_ratio = 4.0f;
    std::vector<int> tap_indices = {3, 6};  // 1-based block index, strictly before the last block

    void validate() const {
        require(num_layers >= 2, "encoder: need at least 2 layers");
        require(embed_dim % heads == 0, "encoder: embed_dim must divide by heads");
        require(!tap_indices.empty(), "encoder: need at least one tap");
        int prev = 0;
        for (int t : tap_indices) {
            require(t >= 1 && t < num_layers,
                    "encoder: tap index " + std::to_string(t) + " out of range [1," + std::to_string(num_layers - 1) + "]");
            require(t > prev, "encoder: tap indices must be strictly increasing");
            prev = t;
        }
    }
};

template <typename T>
struct EncoderOutputs {
    Var<T> tokens;                 // x_z after the final norm, [b, gh, gw, d] on the 1/16 grid
    Var<T> final_raw;              // last block output before the final norm; scale-matched to taps
    std::vector<Var<T>> taps;      // x_a, x_b, ..., same shape as tokens
    std::optional<Var<T>> hires;   // x_0, [b, 4*gh, 4*gw, d]; present when stride < kernel
    std::vector<Var<T>> attn_rows; // per-block attention weights [b*heads, t, t]
};

/// Registers patch-embedding + encoder parameters.
template <typename T>
void register_backbone_params(ParamStore<T>& ps, const EncoderConfig& ec, const PatchEmbedConfig& pc,
                              int grid_tokens, const Rng& rng) {
    int d = ec.embed_dim;
    int fan_patch = pc.kernel * pc.kernel * 3;
    ps.add("patch_embed.kernel", glorot_init<T>({pc.kernel, pc.kernel, 3, d}, fan_patch, d, rng, "patch_embed.kernel"));
    ps.add("patch_embed.bias", TensorData<T>({d}), false);
    ps.add("pos_embed", normal_init<T>({grid_tokens, d}, 0.02, rng, "pos_embed"), false);
    int hidden = static_cast<int>(d * ec.mlp_ratio);
    for (int i = 1; i <= ec.num_layers; ++i) {
        std::string p = "block" + std::to_string(i) + ".";
        ps.add(p + "ln1.gamma", TensorData<T>::full({d}, T(1)), false);
        ps.add(p + "ln1.beta", TensorData<T>({d}), false);
        for (const char* w : {"wq", "wk", "wv", "wo"})
            ps.add(p + "attn." + w, glorot_init<T>({d, d}, d, d, rng, p + "attn." + w));
        for (const char* b : {"bq", "bk", "bv", "bo"}) ps.add(p + "attn." + b, TensorData<T>({d}), false);
        ps.add(p + "ln2.gamma", TensorData<T>::full({d}, T(1)), false);
        ps.add(p + "ln2.beta", TensorData<T>({d}), false);
        ps.add(p + "mlp.w1", glorot_init<T>({d, hidden}, d, hidden, rng, p + "mlp.w1"));
        ps.add(p + "mlp.b1", TensorData<T>({hidden}), false);
        ps.add(p + "mlp.w2", glorot_init<T>({hidden, d}, hidden, d, rng, p + "mlp.w2"));
        ps.add(p + "mlp.b2", TensorData<T>({d}), false);
    }
    ps.add("final_ln.gamma", TensorData<T>::full({d}, T(1)), false);
    ps.add("final_ln.beta", TensorData<T>({d}), false);
}

/// Tokenizing convolution. With stride==kernel the output grid is H/16 x W/16;
/// with stride<kernel (trailing-edge pad of kernel-stride) it is H/s x W/s.
template <typename T>
Var<T> patch_embed(Var<T> img, Var<T> kernel, Var<T> bias, const PatchEmbedConfig& cfg) {
    cfg.validate();
    const auto& s = img.value().shape;
    require_shape(s.size() == 4 && s[3] == 3, "patch_embed: expected [b,H,W,3], got " + shape_str(img.value().shape));
    require(s[1] % cfg.kernel == 0 && s[2] % cfg.kernel == 0,
            "patch_embed: image extents " + std::to_string(s[1]) + "x" + std::to_string(s[2]) +
                " not divisible by " + std::to_string(cfg.kernel));
    return conv2d(img, kernel, bias, cfg.stride, Padding::right_bottom(cfg.pad_right_bottom));
}

template <typename T>
Var<T> add_pos_embed(Var<T> tokens, Var<T> pos) {
    int b = tokens.value().shape[0];
    int t = tokens.value().shape[1];
    int d = tokens.value().shape[2];
    require_shape(pos.value().shape == Shape{t, d},
                  "pos embed shape " + shape_str(pos.value().shape) + " does not match tokens " +
                      shape_str(tokens.value().shape));
    auto flat = add_rowvec(reshape(tokens, {b, t * d}), reshape(pos, {t * d}));
    return reshape(flat, {b, t, d});
}

template <typename T>
struct AttentionResult {
    Var<T> out;
    Var<T> probs;  // [b*heads, t, t]
};

template <typename T>
AttentionResult<T> multi_head_attention(Var<T> x, Bound<T>& P, const std::string& prefix, int heads) {
    int b = x.value().shape[0], t = x.value().shape[1], d = x.value().shape[2];
    int dh = d / heads;
    auto proj = [&](const char* w, const char* bias) {
        return add_rowvec(matmul(x, P[prefix + w]), P[prefix + bias]);
    };
    auto split = [&](Var<T> m) {
        return reshape(transpose(reshape(m, {b, t, heads, dh}), {0, 2, 1, 3}), {b * heads, t, dh});
    };
    Var<T> q = split(proj("wq", "bq"));
    Var<T> k = split(proj("wk", "bk"));
    Var<T> v = split(proj("wv", "bv"));
    Var<T> scores = scale(matmul(q, k, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
    Var<T> probs = softmax_rows(scores);
    Var<T> ctx = matmul(probs, v);  // [b*heads, t, dh]
    Var<T> merged = reshape(transpose(reshape(ctx, {b, heads, t, dh}), {0, 2, 1, 3}), {b, t, d});
    Var<T> out = add_rowvec(matmul(merged, P[prefix + "wo"]), P[prefix + "bo"]);
    return {out, probs};
}

/// Full encoder pass. Patch embedding runs once at the configured stride; the
/// token stream is always on the 1/16 grid regardless of stride, so the
/// receptive field of every block is stride-invariant.
template <typename T>
EncoderOutputs<T> encode(Var<T> img, Bound<T>& P, const EncoderConfig& ec, const PatchEmbedConfig& pc) {
    ec.validate();
    Var<T> emb = patch_embed(img, P["patch_embed.kernel"], P["patch_embed.bias"], pc);
    EncoderOutputs<T> outs;
    Var<T> grid16 = emb;
    if (pc.produces_hires()) {
        outs.hires = emb;
        grid16 = subsample_grid(emb, pc.kernel / pc.stride);
    }
    int b = grid16.value().shape[0], gh = grid16.value().shape[1], gw = grid16.value().shape[2];
    int d = ec.embed_dim;
    int t = gh * gw;
    Var<T> x = add_pos_embed(reshape(grid16, {b, t, d}), P["pos_embed"]);

    std::size_t next_tap = 0;
    for (int i = 1; i <= ec.num_layers; ++i) {
        std::string p = "block" + std::to_string(i) + ".";
        Var<T> normed = layer_norm(x, P[p + "ln1.gamma"], P[p + "ln1.beta"]);
        auto attn = multi_head_attention(normed, P, p + "attn.", ec.heads);
        outs.attn_rows.push_back(attn.probs);
        x = add(x, attn.out);
        Var<T> normed2 = layer_norm(x, P[p + "ln2.gamma"], P[p + "ln2.beta"]);
        Var<T> h = gelu(add_rowvec(matmul(normed2, P[p + "mlp.w1"]), P[p + "mlp.b1"]));
        Var<T> m = add_rowvec(matmul(h, P[p + "mlp.w2"]), P[p + "mlp.b2"]);
        x = add(x, m);
        if (next_tap < ec.tap_indices.size() && ec.tap_indices[next_tap] == i) {
            outs.taps.push_back(reshape(x, {b, gh, gw, d}));
            ++next_tap;
        }
    }
    outs.final_raw = reshape(x, {b, gh, gw, d});
    Var<T> xz = layer_norm(x, P["final_ln.gamma"], P["final_ln.beta"]);
    outs.tokens = reshape(xz, {b, gh, gw, d});
    return outs;
}

}  // namespace vpnext
