#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vpnext/ops.hpp"
#include "vpnext/rng.hpp"

namespace vpnext {

struct GradCheckReport {
    double max_rel_err = 0.0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    int worst_input = -1;
    std::int64_t worst_elem = -1;
    bool pass = false;

    std::string to_string() const {
        return "max_rel_err=" + std::to_string(max_rel_err) + " at input " + std::to_string(worst_input) +
               " elem " + std::to_string(worst_elem) + " (analytic=" + std::to_string(worst_analytic) +
               ", numeric=" + std::to_string(worst_numeric) + ")";
    }
};

/// Central finite-difference check of a scalar-valued graph builder.
/// `build` receives a fresh tape plus leaf vars for each input and must
/// return a scalar Var. Relative error uses |a|+|n| in the denominator with
/// an absolute floor so near-zero gradients compare by absolute difference.
inline GradCheckReport finite_diff_check(
    std::vector<TensorData<double>> inputs,
    const std::function<Var<double>(Tape<double>&, std::vector<Var<double>>&)>& build,
    double eps = 1e-5, double tol = 1e-6, double abs_floor = 1e-7) {
    auto eval = [&](const std::vector<TensorData<double>>& xs) {
        Tape<double> tape;
        std::vector<Var<double>> vars;
        vars.reserve(xs.size());
        for (const auto& x : xs) vars.push_back(tape.leaf(x, false));
        std::vector<Var<double>> copy = vars;
        Var<double> y = build(tape, copy);
        return y.value().data[0];
    };

    // analytic gradients in one reverse pass
    Tape<double> tape;
    std::vector<Var<double>> vars;
    vars.reserve(inputs.size());
    for (const auto& x : inputs) vars.push_back(tape.leaf(x, true));
    std::vector<Var<double>> copy = vars;
    Var<double> y = build(tape, copy);
    require_shape(y.value().size() == 1, "finite_diff_check: build must return a scalar");
    tape.backward(y);

    GradCheckReport rep;
    rep.pass = true;
    for (std::size_t vi = 0; vi < inputs.size(); ++vi) {
        TensorData<double> analytic = tape.grad(vars[vi]);
        for (std::int64_t e = 0; e < inputs[vi].size(); ++e) {
            double keep = inputs[vi].data[static_cast<std::size_t>(e)];
            inputs[vi].data[static_cast<std::size_t>(e)] = keep + eps;
            double fp = eval(inputs);
            inputs[vi].data[static_cast<std::size_t>(e)] = keep - eps;
            double fm = eval(inputs);
            inputs[vi].data[static_cast<std::size_t>(e)] = keep;
            double numeric = (fp - fm) / (2.0 * eps);
            double a = analytic.data[static_cast<std::size_t>(e)];
            double denom = std::abs(a) + std::abs(numeric);
            double rel = std::abs(a - numeric) / (denom > abs_floor ? denom : 1.0);
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_analytic = a;
                rep.worst_numeric = numeric;
                rep.worst_input = static_cast<int>(vi);
                rep.worst_elem = e;
            }
        }
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

inline TensorData<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    TensorData<double> t(std::move(s));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace vpnext
