#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "vpnext/config.hpp"
#include "vpnext/metrics.hpp"
#include "vpnext/optim.hpp"
#include "vpnext/threading.hpp"

#ifndef VPNX_CODE_VERSION
#define VPNX_CODE_VERSION "unversioned"
#endif

namespace vpnext {

struct RunManifest {
    std::string code_version = VPNX_CODE_VERSION;
    nlohmann::json config;
    std::vector<double> step_losses;
    std::vector<std::pair<int, double>> eval_history;  // (step, miou)
    double final_miou = 0.0;
    std::vector<double> per_class_iou;
    double best_miou = 0.0;
    int best_step = -1;
    CostReport train_cost, infer_cost;
    double wall_seconds = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["code_version"] = code_version;
        j["config"] = config;
        j["step_losses"] = step_losses;
        nlohmann::json hist = nlohmann::json::array();
        for (auto& [s, m] : eval_history) hist.push_back({{"step", s}, {"miou", m}});
        j["eval_history"] = hist;
        j["final_miou"] = final_miou;
        j["per_class_iou"] = per_class_iou;
        j["best_miou"] = best_miou;
        j["best_step"] = best_step;
        j["train_cost"] = train_cost.to_json();
        j["infer_cost"] = infer_cost.to_json();
        j["wall_seconds"] = wall_seconds;
        return j;
    }
};

/// Whole-split mIoU from a dataset-accumulated confusion matrix. Per-image
/// matrices merge by integer addition, so the result is schedule-independent.
inline ConfusionMatrix::IouResult evaluate(VPNextModel<float>& model, const DatasetSplit& split, int num_classes,
                                           int threads) {
    std::vector<ConfusionMatrix> cms(split.size(), ConfusionMatrix(num_classes));
    parallel_for(static_cast<int>(split.size()), threads, [&](int i) {
        Tape<float> tape;
        auto logits = model.infer_logits(tape, split.images[static_cast<std::size_t>(i)]);
        cms[static_cast<std::size_t>(i)].add(logits_to_mask(logits.value()), split.masks[static_cast<std::size_t>(i)]);
    });
    ConfusionMatrix total(num_classes);
    for (const auto& cm : cms) total.merge(cm);
    return total.iou();
}

struct TrainResult {
    RunManifest manifest;
    std::vector<TensorData<float>> best_params;  // snapshot in registration order
};

/// Runs the decoupled-weight-decay update with global-norm clipping and
/// polynomial LR decay. Per-sample graphs run in parallel; gradients are
/// reduced in sample order, so the result is independent of the schedule and
/// bit-reproducible for a fixed (config, seed).
inline TrainResult train(VPNextModel<float>& model, const Dataset& data, const TrainConfig& tc, int threads) {
    tc.validate();
    require(!data.train.images.empty(), "train: empty training split");
    auto t0 = std::chrono::steady_clock::now();

    TrainResult res;
    res.manifest.config = {{"train", train_config_to_json(tc)}, {"model", model_config_to_json(model.cfg)}};
    res.manifest.train_cost = model.cost(true);
    res.manifest.infer_cost = model.cost(false);

    AdamW opt(tc.beta1, tc.beta2, tc.eps, tc.weight_decay);
    Rng data_rng = Rng(tc.seed).fork(0xDA7A);

    int n_train = static_cast<int>(data.train.images.size());
    std::vector<int> order(static_cast<std::size_t>(n_train));
    for (int i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;
    int cursor = n_train;  // forces a shuffle on first use

    auto next_batch = [&]() {
        std::vector<int> batch;
        batch.reserve(static_cast<std::size_t>(tc.batch_size));
        for (int k = 0; k < tc.batch_size; ++k) {
            if (cursor >= n_train) {
                for (int i = n_train - 1; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(data_rng.uniform_int(0, i))]);
                cursor = 0;
            }
            batch.push_back(order[static_cast<std::size_t>(cursor++)]);
        }
        return batch;
    };

    auto snapshot = [&]() {
        std::vector<TensorData<float>> snap;
        snap.reserve(model.params.count());
        for (const auto& e : model.params.entries()) snap.push_back(e.value);
        return snap;
    };

    std::size_t n_params = model.params.count();
    for (int step = 0; step < tc.steps; ++step) {
        std::vector<int> batch = next_batch();
        int bs = static_cast<int>(batch.size());
        std::vector<std::vector<TensorData<float>>> sample_grads(static_cast<std::size_t>(bs));
        std::vector<double> sample_loss(static_cast<std::size_t>(bs), 0.0);
        try {
            parallel_for(bs, threads, [&](int i) {
                int idx = batch[static_cast<std::size_t>(i)];
                Tape<float> tape;
                Bound<float> P(model.params, tape, true);
                auto g = model.forward_train(P, tape.constant(data.train.images[static_cast<std::size_t>(idx)]),
                                             data.train.masks[static_cast<std::size_t>(idx)]);
                tape.backward(g.total);
                sample_loss[static_cast<std::size_t>(i)] = static_cast<double>(g.total.value().data[0]);
                sample_grads[static_cast<std::size_t>(i)] = P.collect_grads();
            });
        } catch (const NonFiniteError& e) {
            throw NonFiniteError("training aborted at step " + std::to_string(step) + ": " + e.what());
        }

        double loss = 0;
        for (double l : sample_loss) loss += l;
        loss /= bs;
        if (!std::isfinite(loss))
            throw NonFiniteError("training aborted at step " + std::to_string(step) + ": non-finite batch loss");
        res.manifest.step_losses.push_back(loss);

        // sample-ordered reduction keeps the update bit-deterministic
        std::vector<TensorData<float>> grads = std::move(sample_grads[0]);
        for (int i = 1; i < bs; ++i)
            for (std::size_t k = 0; k < n_params; ++k) {
                auto& dst = grads[k].data;
                const auto& src = sample_grads[static_cast<std::size_t>(i)][k].data;
                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
            }
        float inv_bs = 1.0f / static_cast<float>(bs);
        for (auto& g : grads)
            for (auto& v : g.data) v *= inv_bs;

        clip_global_norm(grads, tc.clip_norm);
        double lr = step < tc.warmup_steps
                        ? tc.base_lr * static_cast<double>(step + 1) / tc.warmup_steps
                        : poly_lr(tc.base_lr, step - tc.warmup_steps, tc.steps - tc.warmup_steps, tc.poly_power);
        opt.step(model.params, grads, lr);

        if ((step + 1) % tc.eval_every == 0 && step + 1 < tc.steps) {
            auto iou = evaluate(model, data.eval, data.num_classes, threads);
            res.manifest.eval_history.push_back({step + 1, iou.miou});
            if (iou.miou > res.manifest.best_miou) {
                res.manifest.best_miou = iou.miou;
                res.manifest.best_step = step + 1;
                res.best_params = snapshot();
            }
        }
    }

    auto final_iou = evaluate(model, data.eval, data.num_classes, threads);
    res.manifest.eval_history.push_back({tc.steps, final_iou.miou});
    res.manifest.final_miou = final_iou.miou;
    res.manifest.per_class_iou = final_iou.per_class;
    if (final_iou.miou >= res.manifest.best_miou) {
        res.manifest.best_miou = final_iou.miou;
        res.manifest.best_step = tc.steps;
        res.best_params = snapshot();
    }
    res.manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

/// Copies a parameter snapshot back into a model (used to restore the
/// best-mIoU state before checkpointing).
inline void restore_params(VPNextModel<float>& model, const std::vector<TensorData<float>>& snap) {
    require(snap.size() == model.params.count(), "restore: snapshot size mismatch");
    auto& entries = model.params.entries();
    for (std::size_t i = 0; i < snap.size(); ++i) {
        require_shape(entries[i].value.shape == snap[i].shape, "restore: shape mismatch for " + entries[i].name);
        entries[i].value.data = snap[i].data;
    }
}

}  // namespace vpnext
