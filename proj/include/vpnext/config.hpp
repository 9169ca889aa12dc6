#pragma once

#include <string>

#include <json.hpp>

#include "vpnext/model.hpp"
#include "vpnext/synth.hpp"

namespace vpnext {

struct TrainConfig {
    int batch_size = 16;
    int steps = 300;
    double base_lr = 4e-3;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    double poly_power = 0.9;
    int warmup_steps = 0;  // linear LR ramp before the poly decay
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 1;
    int eval_every = 50;

    void validate() const {
        require(batch_size >= 1, "train: batch_size must be >= 1");
        require(steps >= 1, "train: steps must be >= 1");
        require(clip_norm > 0, "train: clip_norm must be positive");
        require(eval_every >= 1, "train: eval_every must be >= 1");
        require(warmup_steps >= 0 && warmup_steps < steps, "train: warmup_steps must be in [0, steps)");
    }
};

// json field helpers: read-if-present so configs stay sparse
namespace cfgio {

template <typename T>
void get(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace cfgio

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    cfgio::get(j, "num_train", s.num_train);
    cfgio::get(j, "num_eval", s.num_eval);
    cfgio::get(j, "image_size", s.image_size);
    cfgio::get(j, "seed", s.seed);
    cfgio::get(j, "min_class_frac", s.min_class_frac);
    cfgio::get(j, "min_radius", s.min_radius);
    cfgio::get(j, "max_radius", s.max_radius);
    cfgio::get(j, "min_shapes", s.min_shapes);
    cfgio::get(j, "max_shapes", s.max_shapes);
    if (j.contains("shape_kinds")) {
        s.shape_kinds = j.at("shape_kinds").get<std::vector<std::string>>();
        s.num_classes = static_cast<int>(s.shape_kinds.size()) + 1;
    }
    cfgio::get(j, "num_classes", s.num_classes);
    s.validate();
    return s;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig t;
    cfgio::get(j, "batch_size", t.batch_size);
    cfgio::get(j, "steps", t.steps);
    cfgio::get(j, "base_lr", t.base_lr);
    cfgio::get(j, "weight_decay", t.weight_decay);
    cfgio::get(j, "clip_norm", t.clip_norm);
    cfgio::get(j, "poly_power", t.poly_power);
    cfgio::get(j, "warmup_steps", t.warmup_steps);
    cfgio::get(j, "beta1", t.beta1);
    cfgio::get(j, "beta2", t.beta2);
    cfgio::get(j, "eps", t.eps);
    cfgio::get(j, "seed", t.seed);
    cfgio::get(j, "eval_every", t.eval_every);
    t.validate();
    return t;
}

inline nlohmann::json train_config_to_json(const TrainConfig& t) {
    return {{"batch_size", t.batch_size}, {"steps", t.steps},     {"base_lr", t.base_lr},
            {"weight_decay", t.weight_decay}, {"clip_norm", t.clip_norm}, {"poly_power", t.poly_power},
            {"warmup_steps", t.warmup_steps},
            {"beta1", t.beta1},           {"beta2", t.beta2},     {"eps", t.eps},
            {"seed", t.seed},             {"eval_every", t.eval_every}};
}

/// Model knobs shared by every variant; the variant string picks supervision
/// and upsampler on top of this base.
inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig m;
    cfgio::get(j, "image_size", m.image_size);
    cfgio::get(j, "num_classes", m.num_classes);
    cfgio::get(j, "num_layers", m.encoder.num_layers);
    cfgio::get(j, "embed_dim", m.encoder.embed_dim);
    cfgio::get(j, "heads", m.encoder.heads);
    cfgio::get(j, "mlp_ratio", m.encoder.mlp_ratio);
    if (j.contains("tap_indices")) m.encoder.tap_indices = j.at("tap_indices").get<std::vector<int>>();
    cfgio::get(j, "fuse_channels", m.hiclr.fuse_channels);
    cfgio::get(j, "hiclr_iterations", m.hiclr.iterations);
    cfgio::get(j, "plain_conv_refiner", m.hiclr.plain_conv_refiner);
    cfgio::get(j, "share_hiclr_weights", m.hiclr.share_weights);
    cfgio::get(j, "aux_loss_weight", m.vcr.aux_loss_weight);
    cfgio::get(j, "detach_replayed_context", m.vcr.detach_replayed_context);
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        cfgio::get(l, "focal", m.loss.focal);
        cfgio::get(l, "dice", m.loss.dice);
        cfgio::get(l, "ce", m.loss.ce);
        cfgio::get(l, "focal_gamma", m.loss.focal_gamma);
    }
    return m;
}

inline nlohmann::json model_config_to_json(const ModelConfig& m) {
    return {{"image_size", m.image_size},
            {"num_classes", m.num_classes},
            {"num_layers", m.encoder.num_layers},
            {"embed_dim", m.encoder.embed_dim},
            {"heads", m.encoder.heads},
            {"mlp_ratio", m.encoder.mlp_ratio},
            {"tap_indices", m.encoder.tap_indices},
            {"fuse_channels", m.hiclr.fuse_channels},
            {"hiclr_iterations", m.hiclr.iterations},
            {"aux_loss_weight", m.vcr.aux_loss_weight},
            {"detach_replayed_context", m.vcr.detach_replayed_context},
            {"variant", m.variant_name()},
            {"loss",
             {{"focal", m.loss.focal}, {"dice", m.loss.dice}, {"ce", m.loss.ce}, {"focal_gamma", m.loss.focal_gamma}}}};
}

}  // namespace vpnext
