#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpnext/tensor.hpp"

namespace vpnext {

struct UnsupportedOpError : std::runtime_error {
    explicit UnsupportedOpError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Op kinds the analytic counter understands. Anything else is an explicit
/// error, never a silent skip.
enum class OpKind {
    Conv2d,          // a=kh, b=kw, c=cin, d=cout, e=oh, f=ow
    Matmul,          // a=m, b=k, c=n
    Attention,       // a=tokens, b=dim (q/k/v/out projections + scores + apply)
    BilinearSample,  // a=points, b=channels
    Resize,          // a=output elements
    LayerNorm,       // a=elements
    Gelu,            // a=elements
    Softmax,         // a=elements
    Elementwise,     // a=elements
};

struct CostItem {
    std::string module;
    OpKind kind;
    std::int64_t a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;
};

/// Multiply-add style FLOP count per item. Conventions:
///   conv:      2*kh*kw*cin*cout*oh*ow
///   matmul:    2*m*k*n
///   attention: 4 projections at 2*t*d*d plus scores and apply at 2*t*t*d each
///   bilinear:  8 ops per sampled point per channel
///   resize:    8 per output element; norm 8/elem, gelu 10/elem, softmax
///              5/elem, elementwise 1/elem
inline std::int64_t flops_of(const CostItem& it) {
    switch (it.kind) {
        case OpKind::Conv2d: return 2 * it.a * it.b * it.c * it.d * it.e * it.f;
        case OpKind::Matmul: return 2 * it.a * it.b * it.c;
        case OpKind::Attention: return 4 * (2 * it.a * it.b * it.b) + 2 * (2 * it.a * it.a * it.b);
        case OpKind::BilinearSample: return 8 * it.a * it.b;
        case OpKind::Resize: return 8 * it.a;
        case OpKind::LayerNorm: return 8 * it.a;
        case OpKind::Gelu: return 10 * it.a;
        case OpKind::Softmax: return 5 * it.a;
        case OpKind::Elementwise: return it.a;
    }
    throw UnsupportedOpError("unsupported op kind " + std::to_string(static_cast<int>(it.kind)) +
                             " in module '" + it.module + "'");
}

struct CostReport {
    struct ModuleCost {
        std::int64_t flops = 0;
        std::int64_t params = 0;
    };

    std::int64_t flops = 0;
    std::int64_t params = 0;
    std::map<std::string, ModuleCost> breakdown;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["flops"] = flops;
        j["params"] = params;
        nlohmann::json b = nlohmann::json::object();
        for (const auto& [name, mc] : breakdown) b[name] = {{"flops", mc.flops}, {"params", mc.params}};
        j["breakdown"] = b;
        return j;
    }
};

/// Folds per-op items and per-module parameter counts into a report whose
/// total always equals the sum of its breakdown.
inline CostReport count_cost(const std::vector<CostItem>& items,
                             const std::map<std::string, std::int64_t>& module_params) {
    CostReport r;
    for (const auto& it : items) {
        std::int64_t f = flops_of(it);
        r.breakdown[it.module].flops += f;
        r.flops += f;
    }
    for (const auto& [name, p] : module_params) {
        r.breakdown[name].params += p;
        r.params += p;
    }
    return r;
}

}  // namespace vpnext
