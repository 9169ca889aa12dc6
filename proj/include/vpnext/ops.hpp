#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "vpnext/tape.hpp"

namespace vpnext {

// ---------------------------------------------------------------------------
// gemm kernels. Row-major, accumulate flag. Inner loops run over contiguous
// output columns so they vectorize without reordering the k-summation; every
// C[i,j] accumulates k in ascending order, which keeps results reproducible
// and lets naive-loop oracles match bit for bit.
// ---------------------------------------------------------------------------

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, T(0));
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * k;
        T* crow = c + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            T av = arow[l];
            const T* brow = b + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

/// C (+)= Aᵀ·B with A stored [k,m]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, T(0));
    for (int l = 0; l < k; ++l) {
        const T* arow = a + static_cast<std::size_t>(l) * m;
        const T* brow = b + static_cast<std::size_t>(l) * n;
        for (int i = 0; i < m; ++i) {
            T av = arow[i];
            T* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

/// C (+)= A·Bᵀ with B stored [n,k]; materializes Bᵀ so the inner loop stays
/// contiguous.
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    std::vector<T> bt(static_cast<std::size_t>(k) * n);
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < k; ++l) bt[static_cast<std::size_t>(l) * n + j] = b[static_cast<std::size_t>(j) * k + l];
    gemm_nn(a, bt.data(), c, m, k, n, accumulate);
}

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void check_same_shape(const char* op, const TensorData<T>& a, const TensorData<T>& b) {
    if (a.shape != b.shape)
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

}  // namespace detail

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    detail::check_same_shape("add", a.value(), b.value());
    TensorData<T> out(a.shape());
    const T* pa = a.value().ptr();
    const T* pb = b.value().ptr();
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] = pa[i] + pb[i];
    int ia = a.id, ib = b.id;
    return a.tape->make("add", std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* ga = t.grad_acc(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        if (T* gb = t.grad_acc(ib))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    detail::check_same_shape("sub", a.value(), b.value());
    TensorData<T> out(a.shape());
    const T* pa = a.value().ptr();
    const T* pb = b.value().ptr();
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] = pa[i] - pb[i];
    int ia = a.id, ib = b.id;
    return a.tape->make("sub", std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* ga = t.grad_acc(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        if (T* gb = t.grad_acc(ib))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    detail::check_same_shape("mul", a.value(), b.value());
    TensorData<T> out(a.shape());
    const T* pa = a.value().ptr();
    const T* pb = b.value().ptr();
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] = pa[i] * pb[i];
    int ia = a.id, ib = b.id;
    return a.tape->make("mul", std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        const T* pa = t.value(ia).ptr();
        const T* pb = t.value(ib).ptr();
        if (T* ga = t.grad_acc(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * pb[i];
        if (T* gb = t.grad_acc(ib))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * pa[i];
    });
}

template <typename T>
Var<T> div(Var<T> a, Var<T> b) {
    detail::check_same_shape("div", a.value(), b.value());
    TensorData<T> out(a.shape());
    const T* pa = a.value().ptr();
    const T* pb = b.value().ptr();
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] = pa[i] / pb[i];
    int ia = a.id, ib = b.id;
    return a.tape->make("div", std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        const T* pa = t.value(ia).ptr();
        const T* pb = t.value(ib).ptr();
        if (T* ga = t.grad_acc(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / pb[i];
        if (T* gb = t.grad_acc(ib))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * pa[i] / (pb[i] * pb[i]);
    });
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
    TensorData<T> out(a.shape());
    const T* pa = a.value().ptr();
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] = pa[i] * c;
    int ia = a.id;
    return a.tape->make("scale", std::move(out), {ia}, [ia, c](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* ga = t.grad_acc(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T c) {
    TensorData<T> out(a.shape());
    const T* pa = a.value().ptr();
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] = pa[i] + c;
    int ia = a.id;
    return a.tape->make("add_scalar", std::move(out), {ia}, [ia](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* ga = t.grad_acc(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

template <typename T>
Var<T> exp_v(Var<T> a) {
    TensorData<T> out(a.shape());
    const T* pa = a.value().ptr();
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] = std::exp(pa[i]);
    int ia = a.id;
    return a.tape->make("exp", std::move(out), {ia}, [ia](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        const T* po = t.value(self).ptr();
        if (T* ga = t.grad_acc(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * po[i];
    });
}

template <typename T>
Var<T> log_v(Var<T> a) {
    TensorData<T> out(a.shape());
    const T* pa = a.value().ptr();
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] = std::log(pa[i]);
    int ia = a.id;
    return a.tape->make("log", std::move(out), {ia}, [ia](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        const T* pa = t.value(ia).ptr();
        if (T* ga = t.grad_acc(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / pa[i];
    });
}

template <typename T>
Var<T> pow_const(Var<T> a, T p) {
    TensorData<T> out(a.shape());
    const T* pa = a.value().ptr();
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] = std::pow(pa[i], p);
    int ia = a.id;
    return a.tape->make("pow_const", std::move(out), {ia}, [ia, p](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        const T* pa = t.value(ia).ptr();
        if (T* ga = t.grad_acc(ia)) {
            if (p == T(0)) return;  // exact: d/dx 1 = 0
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * p * std::pow(pa[i], p - T(1));
        }
    });
}

template <typename T>
Var<T> gelu(Var<T> a) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    TensorData<T> out(a.shape());
    const T* pa = a.value().ptr();
    for (std::int64_t i = 0; i < out.size(); ++i) {
        double x = static_cast<double>(pa[i]);
        out.data[static_cast<std::size_t>(i)] = static_cast<T>(0.5 * x * (1.0 + std::erf(x * inv_sqrt2)));
    }
    int ia = a.id;
    return a.tape->make("gelu", std::move(out), {ia}, [ia](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        const T* pa = t.value(ia).ptr();
        if (T* ga = t.grad_acc(ia)) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                double x = static_cast<double>(pa[i]);
                double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                ga[i] += g[i] * static_cast<T>(cdf + x * pdf);
            }
        }
    });
}

/// a[..., n] + v[n], broadcast over leading axes (bias add)
template <typename T>
Var<T> add_rowvec(Var<T> a, Var<T> v) {
    const auto& va = a.value();
    const auto& vv = v.value();
    require_shape(vv.rank() == 1 && va.rank() >= 1 && va.shape.back() == vv.shape[0],
                  "add_rowvec: shape mismatch " + shape_str(va.shape) + " vs " + shape_str(vv.shape));
    int n = vv.shape[0];
    std::int64_t rows = va.size() / n;
    TensorData<T> out(va.shape);
    for (std::int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < n; ++j)
            out.data[static_cast<std::size_t>(r * n + j)] = va.data[static_cast<std::size_t>(r * n + j)] + vv.data[static_cast<std::size_t>(j)];
    int ia = a.id, iv = v.id;
    return a.tape->make("add_rowvec", std::move(out), {ia, iv}, [ia, iv, rows, n](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* ga = t.grad_acc(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        if (T* gv = t.grad_acc(iv))
            for (std::int64_t r = 0; r < rows; ++r)
                for (int j = 0; j < n; ++j) gv[j] += g[static_cast<std::size_t>(r * n + j)];
    });
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

/// Matrix product. a is [m,k] or [B,m,k]; b is [k,n] (shared across batch) or
/// [B,k,n]. With trans_b, b is given as [n,k] / [B,n,k]. Backward produces
/// grad_a = g·bᵀ and grad_b = aᵀ·g (transposed variants accordingly).
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b, bool trans_b = false) {
    const auto& va = a.value();
    const auto& vb = b.value();
    require_shape(va.rank() == 2 || va.rank() == 3, "matmul: lhs must be rank 2 or 3, got " + shape_str(va.shape));
    require_shape(vb.rank() == 2 || vb.rank() == 3, "matmul: rhs must be rank 2 or 3, got " + shape_str(vb.shape));
    int batch = va.rank() == 3 ? va.shape[0] : 1;
    int m = va.shape[va.rank() - 2];
    int k = va.shape[va.rank() - 1];
    int bk = trans_b ? vb.shape.back() : vb.shape[vb.rank() - 2];
    int n = trans_b ? vb.shape[vb.rank() - 2] : vb.shape.back();
    bool shared_b = vb.rank() == 2;
    if (bk != k || (!shared_b && (va.rank() != 3 || vb.shape[0] != batch)))
        throw ShapeError("matmul: shape mismatch " + shape_str(va.shape) + " vs " + shape_str(vb.shape) +
                         (trans_b ? " (rhs transposed)" : ""));

    Shape os = va.rank() == 3 ? Shape{batch, m, n} : Shape{m, n};
    TensorData<T> out(os);
    std::int64_t a_step = static_cast<std::int64_t>(m) * k;
    std::int64_t b_step = shared_b ? 0 : static_cast<std::int64_t>(k) * n;
    std::int64_t o_step = static_cast<std::int64_t>(m) * n;
    for (int bi = 0; bi < batch; ++bi) {
        const T* pa = va.ptr() + bi * a_step;
        const T* pb = vb.ptr() + bi * b_step;
        T* po = out.ptr() + bi * o_step;
        if (trans_b)
            gemm_nt(pa, pb, po, m, k, n, false);
        else
            gemm_nn(pa, pb, po, m, k, n, false);
    }

    int ia = a.id, ib = b.id;
    return a.tape->make("matmul", std::move(out), {ia, ib},
                        [ia, ib, batch, m, k, n, shared_b, trans_b, a_step, b_step, o_step](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        const T* pa_all = t.value(ia).ptr();
        const T* pb_all = t.value(ib).ptr();
        T* ga = t.grad_acc(ia);
        T* gb = t.grad_acc(ib);
        for (int bi = 0; bi < batch; ++bi) {
            const T* pg = g.data() + bi * o_step;
            const T* pa = pa_all + bi * a_step;
            const T* pb = pb_all + bi * b_step;
            if (ga) {
                T* pga = ga + bi * a_step;
                // dA = g·bEffᵀ; with trans_b, bEffᵀ is b itself
                if (trans_b)
                    gemm_nn(pg, pb, pga, m, n, k, true);
                else
                    gemm_nt(pg, pb, pga, m, n, k, true);
            }
            if (gb) {
                T* pgb = gb + bi * b_step;
                // dB = aᵀ·g (or gᵀ·a when trans_b); shared b accumulates over batch
                if (trans_b)
                    gemm_tn(pg, pa, pgb, n, m, k, true);
                else
                    gemm_tn(pa, pg, pgb, k, m, n, true);
            }
        }
    });
}

// ---------------------------------------------------------------------------
// data movement
// ---------------------------------------------------------------------------

template <typename T>
Var<T> reshape(Var<T> a, Shape s) {
    require_shape(numel(s) == a.value().size(),
                  "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(s));
    TensorData<T> out(std::move(s), a.value().data);
    int ia = a.id;
    return a.tape->make("reshape", std::move(out), {ia}, [ia](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* ga = t.grad_acc(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

namespace detail {

inline std::vector<std::int64_t> row_major_strides(const Shape& s) {
    std::vector<std::int64_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[static_cast<std::size_t>(i)] = st[static_cast<std::size_t>(i) + 1] * s[static_cast<std::size_t>(i) + 1];
    return st;
}

/// dst[idx] = src[perm(idx)] walker shared by transpose fwd/bwd
template <typename T>
void permute_copy(const T* src, const Shape& src_shape, const std::vector<int>& perm, T* dst, bool accumulate) {
    int r = static_cast<int>(src_shape.size());
    Shape dst_shape(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) dst_shape[static_cast<std::size_t>(i)] = src_shape[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    auto sst = row_major_strides(src_shape);
    std::vector<std::int64_t> stride_for_dst_axis(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) stride_for_dst_axis[static_cast<std::size_t>(i)] = sst[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    std::int64_t total = numel(dst_shape);
    std::vector<int> idx(static_cast<std::size_t>(r), 0);
    std::int64_t soff = 0;
    for (std::int64_t o = 0; o < total; ++o) {
        if (accumulate)
            dst[o] += src[soff];
        else
            dst[o] = src[soff];
        for (int ax = r - 1; ax >= 0; --ax) {
            idx[static_cast<std::size_t>(ax)]++;
            soff += stride_for_dst_axis[static_cast<std::size_t>(ax)];
            if (idx[static_cast<std::size_t>(ax)] < dst_shape[static_cast<std::size_t>(ax)]) break;
            soff -= stride_for_dst_axis[static_cast<std::size_t>(ax)] * dst_shape[static_cast<std::size_t>(ax)];
            idx[static_cast<std::size_t>(ax)] = 0;
        }
    }
}

}  // namespace detail

template <typename T>
Var<T> transpose(Var<T> a, std::vector<int> perm) {
    const auto& va = a.value();
    require_shape(perm.size() == va.shape.size(), "transpose: perm rank mismatch for " + shape_str(va.shape));
    Shape os(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) os[i] = va.shape[static_cast<std::size_t>(perm[i])];
    TensorData<T> out(os);
    detail::permute_copy(va.ptr(), va.shape, perm, out.ptr(), false);
    int ia = a.id;
    Shape in_shape = va.shape;
    return a.tape->make("transpose", std::move(out), {ia}, [ia, perm, in_shape](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* ga = t.grad_acc(ia)) {
            // inverse permutation maps dst grads back onto src layout
            std::vector<int> inv(perm.size());
            for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
            Shape gshape(perm.size());
            for (std::size_t i = 0; i < perm.size(); ++i) gshape[i] = in_shape[static_cast<std::size_t>(perm[i])];
            detail::permute_copy(g.data(), gshape, inv, ga, true);
        }
    });
}

template <typename T>
Var<T> stop_gradient(Var<T> a) {
    TensorData<T> out = a.value();
    return a.tape->make("stop_gradient", std::move(out), {}, nullptr);
}

// ---------------------------------------------------------------------------
// normalizations and reductions
// ---------------------------------------------------------------------------

/// Softmax over the last axis, max-subtracted for stability.
template <typename T>
Var<T> softmax_rows(Var<T> a) {
    const auto& va = a.value();
    require_shape(va.rank() >= 1, "softmax_rows: rank must be >= 1");
    int c = va.shape.back();
    std::int64_t rows = va.size() / c;
    TensorData<T> out(va.shape);
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* x = va.ptr() + r * c;
        T* y = out.ptr() + r * c;
        T mx = x[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
        T s = T(0);
        for (int j = 0; j < c; ++j) {
            y[j] = std::exp(x[j] - mx);
            s += y[j];
        }
        T inv = T(1) / s;
        for (int j = 0; j < c; ++j) y[j] *= inv;
    }
    int ia = a.id;
    return a.tape->make("softmax_rows", std::move(out), {ia}, [ia, rows, c](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        const T* y = t.value(self).ptr();
        if (T* ga = t.grad_acc(ia)) {
            for (std::int64_t r = 0; r < rows; ++r) {
                const T* gr = g.data() + r * c;
                const T* yr = y + r * c;
                T dot = T(0);
                for (int j = 0; j < c; ++j) dot += gr[j] * yr[j];
                T* gar = ga + r * c;
                for (int j = 0; j < c; ++j) gar[j] += yr[j] * (gr[j] - dot);
            }
        }
    });
}

/// log(softmax) over the last axis; stable for any logit spread.
template <typename T>
Var<T> log_softmax_rows(Var<T> a) {
    const auto& va = a.value();
    int c = va.shape.back();
    std::int64_t rows = va.size() / c;
    TensorData<T> out(va.shape);
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* x = va.ptr() + r * c;
        T* y = out.ptr() + r * c;
        T mx = x[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
        T s = T(0);
        for (int j = 0; j < c; ++j) s += std::exp(x[j] - mx);
        T lse = mx + std::log(s);
        for (int j = 0; j < c; ++j) y[j] = x[j] - lse;
    }
    int ia = a.id;
    return a.tape->make("log_softmax_rows", std::move(out), {ia}, [ia, rows, c](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        const T* y = t.value(self).ptr();
        if (T* ga = t.grad_acc(ia)) {
            for (std::int64_t r = 0; r < rows; ++r) {
                const T* gr = g.data() + r * c;
                const T* yr = y + r * c;
                T gsum = T(0);
                for (int j = 0; j < c; ++j) gsum += gr[j];
                T* gar = ga + r * c;
                for (int j = 0; j < c; ++j) gar[j] += gr[j] - std::exp(yr[j]) * gsum;
            }
        }
    });
}

/// Normalizes the last (channel) axis to zero mean / unit variance per
/// position, then applies learnable scale and shift.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
    const auto& vx = x.value();
    int c = vx.shape.back();
    require_shape(gamma.value().shape == Shape{c} && beta.value().shape == Shape{c},
                  "layer_norm: scale/shift must be [" + std::to_string(c) + "], got " +
                      shape_str(gamma.value().shape) + " and " + shape_str(beta.value().shape));
    std::int64_t rows = vx.size() / c;
    TensorData<T> out(vx.shape);
    const T* pg = gamma.value().ptr();
    const T* pb = beta.value().ptr();
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* xr = vx.ptr() + r * c;
        T* yr = out.ptr() + r * c;
        T mean = T(0);
        for (int j = 0; j < c; ++j) mean += xr[j];
        mean /= static_cast<T>(c);
        T var = T(0);
        for (int j = 0; j < c; ++j) {
            T d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<T>(c);
        T w = T(1) / std::sqrt(var + eps);
        for (int j = 0; j < c; ++j) yr[j] = pg[j] * ((xr[j] - mean) * w) + pb[j];
    }
    int ix = x.id, ig = gamma.id, ib = beta.id;
    return x.tape->make("layer_norm", std::move(out), {ix, ig, ib}, [ix, ig, ib, rows, c, eps](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        const T* px = t.value(ix).ptr();
        const T* pgam = t.value(ig).ptr();
        T* gx = t.grad_acc(ix);
        T* ggam = t.grad_acc(ig);
        T* gbeta = t.grad_acc(ib);
        std::vector<T> xhat(static_cast<std::size_t>(c));
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* xr = px + r * c;
            const T* gr = g.data() + r * c;
            T mean = T(0);
            for (int j = 0; j < c; ++j) mean += xr[j];
            mean /= static_cast<T>(c);
            T var = T(0);
            for (int j = 0; j < c; ++j) {
                T d = xr[j] - mean;
                var += d * d;
            }
            var /= static_cast<T>(c);
            T w = T(1) / std::sqrt(var + eps);
            for (int j = 0; j < c; ++j) xhat[static_cast<std::size_t>(j)] = (xr[j] - mean) * w;
            if (gbeta)
                for (int j = 0; j < c; ++j) gbeta[j] += gr[j];
            if (ggam)
                for (int j = 0; j < c; ++j) ggam[j] += gr[j] * xhat[static_cast<std::size_t>(j)];
            if (gx) {
                T m1 = T(0), m2 = T(0);
                for (int j = 0; j < c; ++j) {
                    T gh = gr[j] * pgam[j];
                    m1 += gh;
                    m2 += gh * xhat[static_cast<std::size_t>(j)];
                }
                m1 /= static_cast<T>(c);
                m2 /= static_cast<T>(c);
                T* gxr = gx + r * c;
                for (int j = 0; j < c; ++j) {
                    T gh = gr[j] * pgam[j];
                    gxr[j] += w * (gh - m1 - xhat[static_cast<std::size_t>(j)] * m2);
                }
            }
        }
    });
}

template <typename T>
Var<T> sum_all(Var<T> a) {
    T s = T(0);
    for (T v : a.value().data) s += v;
    int ia = a.id;
    return a.tape->make("sum_all", TensorData<T>::scalar(s), {ia}, [ia](Tape<T>& t, int self) {
        T g = t.grad_of(self)[0];
        if (T* ga = t.grad_acc(ia)) {
            std::size_t n = t.value(ia).data.size();
            for (std::size_t i = 0; i < n; ++i) ga[i] += g;
        }
    });
}

template <typename T>
Var<T> mean_all(Var<T> a) {
    return scale(sum_all(a), T(1) / static_cast<T>(a.value().size()));
}

/// Mean of squared element differences.
template <typename T>
Var<T> mse_mean(Var<T> a, Var<T> b) {
    detail::check_same_shape("mse_mean", a.value(), b.value());
    Var<T> d = sub(a, b);
    return mean_all(mul(d, d));
}

/// Per-row column pick: a is [r,c], idx has r entries; out[i] = a[i, idx[i]].
template <typename T>
Var<T> gather_cols(Var<T> a, std::vector<int> idx) {
    const auto& va = a.value();
    require_shape(va.rank() == 2, "gather_cols: expected rank 2, got " + shape_str(va.shape));
    int r = va.shape[0], c = va.shape[1];
    require_shape(static_cast<int>(idx.size()) == r, "gather_cols: index count mismatch");
    TensorData<T> out({r});
    for (int i = 0; i < r; ++i) out.data[static_cast<std::size_t>(i)] = va.data[static_cast<std::size_t>(i) * c + idx[static_cast<std::size_t>(i)]];
    int ia = a.id;
    return a.tape->make("gather_cols", std::move(out), {ia}, [ia, idx, c](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* ga = t.grad_acc(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i * c + static_cast<std::size_t>(idx[i])] += g[i];
    });
}

// operator sugar
template <typename T>
Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <typename T>
Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <typename T>
Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }
template <typename T>
Var<T> operator*(Var<T> a, T c) { return scale(a, c); }
template <typename T>
Var<T> operator*(T c, Var<T> a) { return scale(a, c); }

}  // namespace vpnext
