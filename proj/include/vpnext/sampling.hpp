#pragma once

#include <cmath>

#include "vpnext/ops.hpp"

namespace vpnext {

/// Bilinear point sampling. x is [b,h,w,c]; points is [b,n,2] in continuous
/// pixel coordinates ordered (y,x). Reads outside the map return zero, so
/// sampling matches zero-padding semantics. Differentiable in both x and the
/// point coordinates.
template <typename T>
Var<T> bilinear_sample(Var<T> x, Var<T> points) {
    const auto& vx = x.value();
    const auto& vp = points.value();
    require_shape(vx.rank() == 4, "bilinear_sample: expected [b,h,w,c], got " + shape_str(vx.shape));
    require_shape(vp.rank() == 3 && vp.shape[2] == 2 && vp.shape[0] == vx.shape[0],
                  "bilinear_sample: points " + shape_str(vp.shape) + " incompatible with map " + shape_str(vx.shape));
    int b = vx.shape[0], h = vx.shape[1], w = vx.shape[2], c = vx.shape[3];
    int n = vp.shape[1];
    TensorData<T> out({b, n, c});

    auto fetch = [&](const T* xb, int y, int xc, int ci) -> T {
        if (y < 0 || y >= h || xc < 0 || xc >= w) return T(0);
        return xb[(static_cast<std::size_t>(y) * w + xc) * c + ci];
    };

    for (int bi = 0; bi < b; ++bi) {
        const T* xb = vx.ptr() + static_cast<std::size_t>(bi) * h * w * c;
        for (int i = 0; i < n; ++i) {
            T py = vp.data[(static_cast<std::size_t>(bi) * n + i) * 2 + 0];
            T px = vp.data[(static_cast<std::size_t>(bi) * n + i) * 2 + 1];
            T fy = std::floor(py), fx = std::floor(px);
            int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            T wy = py - fy, wx = px - fx;
            T* dst = out.ptr() + (static_cast<std::size_t>(bi) * n + i) * c;
            for (int ci = 0; ci < c; ++ci) {
                T v00 = fetch(xb, y0, x0, ci), v01 = fetch(xb, y0, x0 + 1, ci);
                T v10 = fetch(xb, y0 + 1, x0, ci), v11 = fetch(xb, y0 + 1, x0 + 1, ci);
                dst[ci] = (T(1) - wy) * ((T(1) - wx) * v00 + wx * v01) + wy * ((T(1) - wx) * v10 + wx * v11);
            }
        }
    }

    int ix = x.id, ip = points.id;
    return x.tape->make("bilinear_sample", std::move(out), {ix, ip}, [ix, ip, b, h, w, c, n](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        const auto& vx = t.value(ix);
        const auto& vp = t.value(ip);
        T* gx = t.grad_acc(ix);
        T* gp = t.grad_acc(ip);
        auto fetch = [&](const T* xb, int y, int xc, int ci) -> T {
            if (y < 0 || y >= h || xc < 0 || xc >= w) return T(0);
            return xb[(static_cast<std::size_t>(y) * w + xc) * c + ci];
        };
        for (int bi = 0; bi < b; ++bi) {
            const T* xb = vx.ptr() + static_cast<std::size_t>(bi) * h * w * c;
            T* gxb = gx ? gx + static_cast<std::size_t>(bi) * h * w * c : nullptr;
            for (int i = 0; i < n; ++i) {
                T py = vp.data[(static_cast<std::size_t>(bi) * n + i) * 2 + 0];
                T px = vp.data[(static_cast<std::size_t>(bi) * n + i) * 2 + 1];
                T fy = std::floor(py), fx = std::floor(px);
                int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
                T wy = py - fy, wx = px - fx;
                const T* gi = g.data() + (static_cast<std::size_t>(bi) * n + i) * c;
                T dy = T(0), dx = T(0);
                for (int ci = 0; ci < c; ++ci) {
                    T go = gi[ci];
                    if (gxb) {
                        auto scatter = [&](int y, int xc, T wgt) {
                            if (y < 0 || y >= h || xc < 0 || xc >= w) return;
                            gxb[(static_cast<std::size_t>(y) * w + xc) * c + ci] += go * wgt;
                        };
                        scatter(y0, x0, (T(1) - wy) * (T(1) - wx));
                        scatter(y0, x0 + 1, (T(1) - wy) * wx);
                        scatter(y0 + 1, x0, wy * (T(1) - wx));
                        scatter(y0 + 1, x0 + 1, wy * wx);
                    }
                    if (gp) {
                        T v00 = fetch(xb, y0, x0, ci), v01 = fetch(xb, y0, x0 + 1, ci);
                        T v10 = fetch(xb, y0 + 1, x0, ci), v11 = fetch(xb, y0 + 1, x0 + 1, ci);
                        dy += go * ((v10 - v00) * (T(1) - wx) + (v11 - v01) * wx);
                        dx += go * ((v01 - v00) * (T(1) - wy) + (v11 - v10) * wy);
                    }
                }
                if (gp) {
                    gp[(static_cast<std::size_t>(bi) * n + i) * 2 + 0] += dy;
                    gp[(static_cast<std::size_t>(bi) * n + i) * 2 + 1] += dx;
                }
            }
        }
    });
}

namespace detail {

struct ResizeAxis {
    std::vector<int> i0, i1;
    std::vector<double> w1;  // weight of i1; i0 gets 1-w1
};

/// align_corners=false source coordinates, clamped to the valid range.
inline ResizeAxis resize_axis(int in, int out) {
    ResizeAxis ax;
    ax.i0.resize(static_cast<std::size_t>(out));
    ax.i1.resize(static_cast<std::size_t>(out));
    ax.w1.resize(static_cast<std::size_t>(out));
    double s = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
        double src = (i + 0.5) * s - 0.5;
        if (src < 0) src = 0;
        if (src > in - 1) src = in - 1;
        int lo = static_cast<int>(std::floor(src));
        if (lo > in - 1) lo = in - 1;
        int hi = lo + 1 < in ? lo + 1 : lo;
        ax.i0[static_cast<std::size_t>(i)] = lo;
        ax.i1[static_cast<std::size_t>(i)] = hi;
        ax.w1[static_cast<std::size_t>(i)] = src - lo;
    }
    return ax;
}

}  // namespace detail

/// Separable bilinear resize, align_corners=false. Same-size resize is the
/// identity bit for bit.
template <typename T>
Var<T> resize_bilinear(Var<T> x, int out_h, int out_w) {
    const auto& vx = x.value();
    require_shape(vx.rank() == 4, "resize_bilinear: expected [b,h,w,c], got " + shape_str(vx.shape));
    require(out_h >= 1 && out_w >= 1, "resize_bilinear: output extents must be >= 1");
    int b = vx.shape[0], h = vx.shape[1], w = vx.shape[2], c = vx.shape[3];
    auto ay = detail::resize_axis(h, out_h);
    auto axx = detail::resize_axis(w, out_w);
    TensorData<T> out({b, out_h, out_w, c});
    for (int bi = 0; bi < b; ++bi) {
        const T* xb = vx.ptr() + static_cast<std::size_t>(bi) * h * w * c;
        for (int oy = 0; oy < out_h; ++oy) {
            int y0 = ay.i0[static_cast<std::size_t>(oy)], y1 = ay.i1[static_cast<std::size_t>(oy)];
            T vy = static_cast<T>(ay.w1[static_cast<std::size_t>(oy)]);
            for (int ox = 0; ox < out_w; ++ox) {
                int x0 = axx.i0[static_cast<std::size_t>(ox)], x1 = axx.i1[static_cast<std::size_t>(ox)];
                T vxw = static_cast<T>(axx.w1[static_cast<std::size_t>(ox)]);
                const T* p00 = xb + (static_cast<std::size_t>(y0) * w + x0) * c;
                const T* p01 = xb + (static_cast<std::size_t>(y0) * w + x1) * c;
                const T* p10 = xb + (static_cast<std::size_t>(y1) * w + x0) * c;
                const T* p11 = xb + (static_cast<std::size_t>(y1) * w + x1) * c;
                T* dst = out.ptr() + ((static_cast<std::size_t>(bi) * out_h + oy) * out_w + ox) * c;
                for (int ci = 0; ci < c; ++ci)
                    dst[ci] = (T(1) - vy) * ((T(1) - vxw) * p00[ci] + vxw * p01[ci]) +
                              vy * ((T(1) - vxw) * p10[ci] + vxw * p11[ci]);
            }
        }
    }
    int ix = x.id;
    return x.tape->make("resize_bilinear", std::move(out), {ix}, [ix, b, h, w, c, out_h, out_w, ay, axx](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* gx = t.grad_acc(ix)) {
            for (int bi = 0; bi < b; ++bi) {
                T* gxb = gx + static_cast<std::size_t>(bi) * h * w * c;
                for (int oy = 0; oy < out_h; ++oy) {
                    int y0 = ay.i0[static_cast<std::size_t>(oy)], y1 = ay.i1[static_cast<std::size_t>(oy)];
                    T vy = static_cast<T>(ay.w1[static_cast<std::size_t>(oy)]);
                    for (int ox = 0; ox < out_w; ++ox) {
                        int x0 = axx.i0[static_cast<std::size_t>(ox)], x1 = axx.i1[static_cast<std::size_t>(ox)];
                        T vxw = static_cast<T>(axx.w1[static_cast<std::size_t>(ox)]);
                        const T* gi = g.data() + ((static_cast<std::size_t>(bi) * out_h + oy) * out_w + ox) * c;
                        T* p00 = gxb + (static_cast<std::size_t>(y0) * w + x0) * c;
                        T* p01 = gxb + (static_cast<std::size_t>(y0) * w + x1) * c;
                        T* p10 = gxb + (static_cast<std::size_t>(y1) * w + x0) * c;
                        T* p11 = gxb + (static_cast<std::size_t>(y1) * w + x1) * c;
                        for (int ci = 0; ci < c; ++ci) {
                            T go = gi[ci];
                            p00[ci] += go * (T(1) - vy) * (T(1) - vxw);
                            p01[ci] += go * (T(1) - vy) * vxw;
                            p10[ci] += go * vy * (T(1) - vxw);
                            p11[ci] += go * vy * vxw;
                        }
                    }
                }
            }
        }
    });
}

}  // namespace vpnext
