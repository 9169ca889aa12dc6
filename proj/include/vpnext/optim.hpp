#pragma once

#include <cmath>
#include <vector>

#include "vpnext/params.hpp"

namespace vpnext {

/// Polynomial decay: lr(step) = base * (1 - step/total)^power
inline double poly_lr(double base, int step, int total_steps, double power) {
    double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
    if (frac < 0) frac = 0;
    return base * std::pow(frac, power);
}

/// Scales gradients so the global L2 norm is at most max_norm.
/// Returns the pre-clip norm.
inline double clip_global_norm(std::vector<TensorData<float>>& grads, double max_norm) {
    require(max_norm > 0, "clip_global_norm: max_norm must be positive");
    double sq = 0;
    for (const auto& g : grads)
        for (float v : g.data) sq += static_cast<double>(v) * v;
    double norm = std::sqrt(sq);
    if (norm > max_norm) {
        float s = static_cast<float>(max_norm / norm);
        for (auto& g : grads)
            for (auto& v : g.data) v *= s;
    }
    return norm;
}

/// Adam with decoupled weight decay. The decay term is scaled by the current
/// learning rate, so lr = 0 leaves parameters untouched entirely. Decay
/// applies only to entries registered with decay=true (kernels and weight
/// matrices; never norms, biases or positional embeddings).
class AdamW {
  public:
    AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.01)
        : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

    void step(ParamStore<float>& params, const std::vector<TensorData<float>>& grads, double lr) {
        auto& entries = params.entries();
        require(grads.size() == entries.size(), "adamw: gradient count mismatch");
        if (m_.empty()) {
            m_.resize(entries.size());
            v_.resize(entries.size());
            for (std::size_t i = 0; i < entries.size(); ++i) {
                m_[i].assign(entries[i].value.data.size(), 0.0);
                v_[i].assign(entries[i].value.data.size(), 0.0);
            }
        }
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < entries.size(); ++i) {
            auto& p = entries[i].value.data;
            const auto& g = grads[i].data;
            require_shape(g.size() == p.size(), "adamw: gradient shape mismatch for " + entries[i].name);
            double wd = entries[i].decay ? weight_decay_ : 0.0;
            for (std::size_t j = 0; j < p.size(); ++j) {
                double gj = g[j];
                m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * gj;
                v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * gj * gj;
                double mhat = m_[i][j] / bc1;
                double vhat = v_[i][j] / bc2;
                p[j] = static_cast<float>(p[j] - lr * (mhat / (std::sqrt(vhat) + eps_) + wd * p[j]));
            }
        }
    }

    int steps_taken() const { return t_; }

  private:
    double beta1_, beta2_, eps_, weight_decay_;
    int t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace vpnext
