#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vpnext/backbone.hpp"
#include "vpnext/cost.hpp"
#include "vpnext/metrics.hpp"
#include "vpnext/vcr.hpp"
#include "vpnext/vitup.hpp"

namespace vpnext {

enum class Supervision { DeepSupervision, NaiveAlign, Vcr };

inline const char* to_string(Supervision s) {
    switch (s) {
        case Supervision::DeepSupervision: return "ds";
        case Supervision::NaiveAlign: return "naive";
        case Supervision::Vcr: return "vcr";
    }
    return "?";
}

struct ModelConfig {
    int image_size = 64;
    int num_classes = 5;
    int patch_kernel = 16;
    EncoderConfig encoder;
    Supervision supervision = Supervision::Vcr;
    VcrConfig vcr;
    UpsamplerKind upsampler = UpsamplerKind::RealPyramid;
    HiclrConfig hiclr;
    LossWeights loss;

    /// Real pyramid needs the hidden 1/4 feature; other upsamplers keep the
    /// standard stride-16 tokenizer.
    int patch_stride() const { return upsampler == UpsamplerKind::RealPyramid ? 4 : 16; }

    PatchEmbedConfig patch_config() const {
        return PatchEmbedConfig::make(patch_kernel, patch_stride(), encoder.embed_dim);
    }

    int token_grid() const { return image_size / patch_kernel; }
    int quarter_grid() const { return image_size / 4; }
    int head_channels() const {
        return upsampler == UpsamplerKind::Bilinear ? encoder.embed_dim : hiclr.fuse_channels;
    }
    bool vcr_ties_main_head() const { return head_channels() == encoder.embed_dim; }
    int replayed_taps() const {
        return supervision == Supervision::Vcr ? vcr.num_replay_layers : static_cast<int>(encoder.tap_indices.size());
    }

    void validate() const {
        require(image_size % 16 == 0, "image size must be divisible by 16, got " + std::to_string(image_size));
        require(num_classes >= 2 && num_classes < 255, "num_classes must be in [2,255)");
        encoder.validate();
        hiclr.validate();
        loss.validate();
        if (supervision == Supervision::Vcr) vcr.validate(static_cast<int>(encoder.tap_indices.size()));
    }

    std::string variant_name() const {
        std::string s = to_string(supervision);
        if (supervision == Supervision::Vcr) s += std::to_string(vcr.num_replay_layers);
        s += "+";
        s += to_string(upsampler);
        if (upsampler == UpsamplerKind::RealPyramid) s += std::to_string(hiclr.iterations);
        return s;
    }

    static ModelConfig from_variant(const std::string& name) { return from_variant(name, ModelConfig{}); }

    /// Parses names like "ds+bilinear", "naive+bilinear", "vcr2+real3",
    /// "vcr1+mock". Tap indices follow the supervised-layer count.
    static ModelConfig from_variant(const std::string& name, const ModelConfig& base) {
        auto plus = name.find('+');
        require(plus != std::string::npos, "variant '" + name + "' must look like '<supervision>+<upsampler>'");
        std::string sup = name.substr(0, plus);
        std::string up = name.substr(plus + 1);
        ModelConfig cfg = base;
        int n = cfg.encoder.num_layers;
        auto at_depth = [n](double frac) {
            int idx = static_cast<int>(std::ceil(frac * n));
            return std::min(std::max(idx, 1), n - 1);
        };
        // explicitly configured taps win when their count fits the variant;
        // otherwise taps are placed by depth fraction
        auto place_taps = [&](int count) {
            if (static_cast<int>(cfg.encoder.tap_indices.size()) == count) return;
            if (count == 1)
                cfg.encoder.tap_indices = {at_depth(2.0 / 3)};
            else if (count == 2)
                cfg.encoder.tap_indices = {at_depth(1.0 / 3), at_depth(2.0 / 3)};
            else
                cfg.encoder.tap_indices = {at_depth(0.25), at_depth(0.5), at_depth(0.75)};
        };
        if (sup == "ds") {
            cfg.supervision = Supervision::DeepSupervision;
            place_taps(2);
        } else if (sup == "naive") {
            cfg.supervision = Supervision::NaiveAlign;
            place_taps(2);
        } else if (sup.rfind("vcr", 0) == 0 && sup.size() == 4) {
            cfg.supervision = Supervision::Vcr;
            int k = sup[3] - '0';
            if (k < 1 || k > 3) throw ValueError("variant '" + name + "': vcr layer count must be 1..3");
            cfg.vcr.num_replay_layers = k;
            place_taps(k);
        } else {
            throw ValueError("variant '" + name + "': unknown supervision '" + sup + "'");
        }
        if (up == "bilinear") {
            cfg.upsampler = UpsamplerKind::Bilinear;
        } else if (up == "mock") {
            cfg.upsampler = UpsamplerKind::MockPyramid;
            cfg.hiclr.iterations = 2;
        } else if (up.rfind("real", 0) == 0 && up.size() == 5) {
            cfg.upsampler = UpsamplerKind::RealPyramid;
            cfg.hiclr.iterations = up[4] - '0';
        } else {
            throw ValueError("variant '" + name + "': unknown upsampler '" + up + "'");
        }
        cfg.validate();
        return cfg;
    }
};

template <typename T>
struct ForwardMain {
    EncoderOutputs<T> enc;
    FinalContext<T> fc;
    UpsampleResult<T> up;
    Var<T> logits;  // full resolution
};

template <typename T>
struct TrainGraph {
    ForwardMain<T> main;
    Var<T> main_loss;
    Var<T> aux_loss;  // already scaled; zero constant when no aux branch fires
    Var<T> total;
    bool all_ignored = false;
};

template <typename T>
class VPNextModel {
  public:
    ModelConfig cfg;
    ParamStore<T> params;

    static VPNextModel build(ModelConfig cfg, std::uint64_t seed) {
        cfg.validate();
        VPNextModel m;
        m.cfg = cfg;
        Rng rng(seed);
        int grid = cfg.token_grid();
        register_backbone_params(m.params, cfg.encoder, cfg.patch_config(), grid * grid, rng);
        register_final_context_params(m.params, cfg.encoder.embed_dim, rng);
        register_upsampler_params(m.params, cfg.upsampler, cfg.hiclr, cfg.encoder.embed_dim, rng);
        int hc = cfg.head_channels();
        m.params.add("head.w", glorot_init<T>({hc, cfg.num_classes}, hc, cfg.num_classes, rng, "head.w"));
        m.params.add("head.b", TensorData<T>({cfg.num_classes}), false);
        if (cfg.supervision == Supervision::Vcr) {
            register_replay_params(m.params, cfg.encoder.embed_dim, cfg.vcr.num_replay_layers, rng);
            // replay taps classify through the main head when widths agree,
            // aligning them with the final classification geometry
            register_aux_head_params(m.params, cfg.encoder.embed_dim, cfg.num_classes, rng,
                                     !m.cfg.vcr_ties_main_head());
        } else if (cfg.supervision == Supervision::DeepSupervision) {
            register_aux_head_params(m.params, cfg.encoder.embed_dim, cfg.num_classes, rng);
        }
        return m;
    }

    /// Shared by training and inference so the main-head logits are
    /// bit-identical between the two graphs.
    ForwardMain<T> forward_main(Bound<T>& P, Var<T> images) const {
        const auto& s = images.value().shape;
        require_shape(s.size() == 4 && s[1] == cfg.image_size && s[2] == cfg.image_size && s[3] == 3,
                      "model: expected [b," + std::to_string(cfg.image_size) + "," + std::to_string(cfg.image_size) +
                          ",3] images, got " + shape_str(images.value().shape));
        ForwardMain<T> f;
        f.enc = encode(images, P, cfg.encoder, cfg.patch_config());
        f.fc = final_context(f.enc.tokens, P);
        f.up = upsample(f.fc.feature, f.enc.hires, P, cfg.upsampler, cfg.hiclr);
        f.logits = seg_head(f.up.feature, P["head.w"], P["head.b"], cfg.image_size, cfg.image_size);
        return f;
    }

    Var<T> infer_logits(Tape<T>& tape, const TensorData<T>& images) {
        Bound<T> P(params, tape, false);
        return forward_main(P, tape.constant(images)).logits;
    }

    TrainGraph<T> forward_train(Bound<T>& P, Var<T> images, const ClassMask& labels) const {
        require(!stripped_, "model: replay/aux branches were stripped; training graph unavailable");
        TrainGraph<T> g;
        g.main = forward_main(P, images);
        auto main = composite_loss(g.main.logits, labels, cfg.loss);
        g.main_loss = main.total;
        g.all_ignored = main.all_ignored;
        Tape<T>* tape = images.tape;

        switch (cfg.supervision) {
            case Supervision::DeepSupervision: {
                Var<T> aux = tape->constant(TensorData<T>::scalar(T(0)));
                for (const auto& tap : g.main.enc.taps) {
                    Var<T> logits = aux_head_logits(tap, P, labels.h, labels.w);
                    aux = add(aux, composite_loss(logits, labels, cfg.loss).total);
                }
                g.aux_loss = scale(aux, static_cast<T>(cfg.vcr.aux_loss_weight));
                break;
            }
            case Supervision::NaiveAlign: {
                // raw final feature: scale-matched to the raw tap streams
                g.aux_loss = scale(naive_align_loss(g.main.enc.taps, g.main.enc.final_raw),
                                   static_cast<T>(cfg.vcr.aux_loss_weight));
                break;
            }
            case Supervision::Vcr: {
                std::vector<Var<T>> ys;
                for (int i = 0; i < cfg.vcr.num_replay_layers; ++i)
                    ys.push_back(replay(g.main.enc.taps[static_cast<std::size_t>(i)], g.main.fc.sigma,
                                        g.main.fc.lambda, P, i, cfg.vcr.detach_replayed_context));
                bool tied = cfg.vcr_ties_main_head();
                Var<T> hw = tied ? P["head.w"] : P["aux_head.w"];
                Var<T> hb = tied ? P["head.b"] : P["aux_head.b"];
                g.aux_loss = vcr_loss(ys, labels, hw, hb, P, cfg.loss, cfg.vcr);
                break;
            }
        }
        g.total = add(g.main_loss, g.aux_loss);
        return g;
    }

    /// Inference model: same config and main-path weights, with every
    /// training-only branch (replay heads, aux classifier) removed.
    VPNextModel strip_for_inference() const {
        VPNextModel m;
        m.cfg = cfg;
        m.stripped_ = true;
        for (const auto& e : params.entries()) {
            if (is_training_only(e.name)) continue;
            m.params.add(e.name, e.value, e.decay);
        }
        return m;
    }

    bool stripped() const { return stripped_; }

    static bool is_training_only(const std::string& name) {
        return name.rfind("replay.", 0) == 0 || name.rfind("aux_head.", 0) == 0;
    }

    // ------------------------------------------------------------------
    // analytic cost model (per image, batch 1)
    // ------------------------------------------------------------------

    std::vector<CostItem> cost_items(bool training, int image_size = 0) const {
        if (image_size == 0) image_size = cfg.image_size;
        require(image_size % 16 == 0, "cost: image size must be divisible by 16");
        int d = cfg.encoder.embed_dim;
        std::int64_t g = image_size / cfg.patch_kernel;
        std::int64_t t = g * g;
        std::int64_t q = image_size / 4;
        std::int64_t qq = q * q;
        int fuse = cfg.hiclr.fuse_channels;
        int C = cfg.num_classes;
        std::int64_t hidden = static_cast<std::int64_t>(d * cfg.encoder.mlp_ratio);
        std::vector<CostItem> v;

        std::int64_t emb_grid = image_size / cfg.patch_stride();
        v.push_back({"patch_embed", OpKind::Conv2d, cfg.patch_kernel, cfg.patch_kernel, 3, d, emb_grid, emb_grid});

        for (int i = 0; i < cfg.encoder.num_layers; ++i) {
            v.push_back({"encoder", OpKind::LayerNorm, t * d});
            v.push_back({"encoder", OpKind::Attention, t, d});
            v.push_back({"encoder", OpKind::Elementwise, t * d});
            v.push_back({"encoder", OpKind::LayerNorm, t * d});
            v.push_back({"encoder", OpKind::Matmul, t, d, hidden});
            v.push_back({"encoder", OpKind::Gelu, t * hidden});
            v.push_back({"encoder", OpKind::Matmul, t, hidden, d});
            v.push_back({"encoder", OpKind::Elementwise, t * d});
        }
        v.push_back({"encoder", OpKind::LayerNorm, t * d});

        v.push_back({"final_context", OpKind::Conv2d, 3, 3, d, 18, g, g});
        v.push_back({"final_context", OpKind::BilinearSample, t * 9, d});
        v.push_back({"final_context", OpKind::Matmul, t, 9 * d, d});
        for (int i = 0; i < 3; ++i) v.push_back({"final_context", OpKind::Matmul, t, d, d});  // q, k, v
        v.push_back({"final_context", OpKind::Matmul, t, d, t});  // scores
        v.push_back({"final_context", OpKind::Softmax, t * t});
        v.push_back({"final_context", OpKind::Matmul, t, t, d});  // apply

        auto hiclr_items = [&]() {
            v.push_back({"upsampler", OpKind::Resize, qq * d});
            v.push_back({"upsampler", OpKind::Conv2d, 3, 3, d, 18, q, q});
            v.push_back({"upsampler", OpKind::BilinearSample, qq * 9, fuse});
            v.push_back({"upsampler", OpKind::Matmul, qq, 9 * fuse, fuse});
            v.push_back({"upsampler", OpKind::Elementwise, qq * fuse});
            v.push_back({"upsampler", OpKind::LayerNorm, qq * fuse});
        };
        switch (cfg.upsampler) {
            case UpsamplerKind::Bilinear:
                v.push_back({"upsampler", OpKind::Resize, qq * d});
                break;
            case UpsamplerKind::MockPyramid: {
                std::int64_t h2 = 2 * g;
                v.push_back({"upsampler", OpKind::Conv2d, 3, 3, d, fuse, h2, h2});
                v.push_back({"upsampler", OpKind::Gelu, h2 * h2 * fuse});
                v.push_back({"upsampler", OpKind::Conv2d, 3, 3, fuse, fuse, q, q});
                v.push_back({"upsampler", OpKind::Gelu, qq * fuse});
                for (int i = 0; i < cfg.hiclr.iterations; ++i) hiclr_items();
                break;
            }
            case UpsamplerKind::RealPyramid: {
                v.push_back({"upsampler", OpKind::Matmul, qq, d, fuse});
                v.push_back({"upsampler", OpKind::LayerNorm, qq * fuse});
                for (int i = 0; i < cfg.hiclr.iterations; ++i) hiclr_items();
                break;
            }
        }

        v.push_back({"seg_head", OpKind::Matmul, qq, cfg.head_channels(), C});
        v.push_back({"seg_head", OpKind::Resize, static_cast<std::int64_t>(image_size) * image_size * C});

        if (training) {
            std::int64_t full = static_cast<std::int64_t>(image_size) * image_size * C;
            v.push_back({"loss", OpKind::Softmax, full});
            v.push_back({"loss", OpKind::Elementwise, 4 * full});
            switch (cfg.supervision) {
                case Supervision::Vcr:
                    for (int i = 0; i < cfg.vcr.num_replay_layers; ++i) {
                        v.push_back({"replay", OpKind::LayerNorm, t * d});
                        v.push_back({"replay", OpKind::BilinearSample, t * 9, d});
                        v.push_back({"replay", OpKind::Matmul, t, 9 * d, d});
                        v.push_back({"replay", OpKind::Matmul, t, d, d});  // phi
                        v.push_back({"replay", OpKind::Matmul, t, t, d});  // affinity apply
                        v.push_back({"aux_head", OpKind::LayerNorm, t * d});
                        v.push_back({"aux_head", OpKind::Matmul, t, d, C});
                        v.push_back({"aux_head", OpKind::Resize, full});
                        v.push_back({"loss", OpKind::Softmax, full});
                        v.push_back({"loss", OpKind::Elementwise, 4 * full});
                    }
                    break;
                case Supervision::DeepSupervision:
                    for (std::size_t i = 0; i < cfg.encoder.tap_indices.size(); ++i) {
                        v.push_back({"aux_head", OpKind::LayerNorm, t * d});
                        v.push_back({"aux_head", OpKind::Matmul, t, d, C});
                        v.push_back({"aux_head", OpKind::Resize, full});
                        v.push_back({"loss", OpKind::Softmax, full});
                        v.push_back({"loss", OpKind::Elementwise, 4 * full});
                    }
                    break;
                case Supervision::NaiveAlign:
                    v.push_back({"naive_align", OpKind::Elementwise,
                                 3 * t * d * static_cast<std::int64_t>(cfg.encoder.tap_indices.size())});
                    break;
            }
        }
        return v;
    }

    std::map<std::string, std::int64_t> module_params(bool training) const {
        auto module_of = [](const std::string& name) -> std::string {
            if (name.rfind("patch_embed.", 0) == 0) return "patch_embed";
            if (name.rfind("final_ctx.", 0) == 0) return "final_context";
            if (name.rfind("mock.", 0) == 0 || name.rfind("hiclr.", 0) == 0) return "upsampler";
            if (name.rfind("head.", 0) == 0) return "seg_head";
            if (name.rfind("replay.", 0) == 0) return "replay";
            if (name.rfind("aux_head.", 0) == 0) return "aux_head";
            return "encoder";  // pos_embed, blocks, final_ln
        };
        std::map<std::string, std::int64_t> m;
        for (const auto& e : params.entries()) {
            if (!training && is_training_only(e.name)) continue;
            m[module_of(e.name)] += e.value.size();
        }
        return m;
    }

    CostReport cost(bool training, int image_size = 0) const {
        return count_cost(cost_items(training, image_size), module_params(training));
    }

    std::int64_t param_count(bool training = true) const {
        std::int64_t n = 0;
        for (const auto& e : params.entries()) {
            if (!training && is_training_only(e.name)) continue;
            n += e.value.size();
        }
        return n;
    }

  private:
    bool stripped_ = false;
};

}  // namespace vpnext
