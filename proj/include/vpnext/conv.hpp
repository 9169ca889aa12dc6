#pragma once

#include <string>

#include "vpnext/ops.hpp"

namespace vpnext {

/// Asymmetric zero padding in pixels. Feature maps are [b,h,w,c].
struct Padding {
    int top = 0;
    int left = 0;
    int bottom = 0;
    int right = 0;

    static Padding none() { return {}; }
    static Padding symmetric(int p) { return {p, p, p, p}; }
    /// pads only the trailing edges; keeps window starts anchored at 0
    static Padding right_bottom(int p) { return {0, 0, p, p}; }
};

inline int conv_out_extent(int in, int k, int stride, int pad_total) {
    return (in + pad_total - k) / stride + 1;
}

/// Unfolds kh×kw patches into rows: x[b,h,w,c] -> [b, oh*ow, kh*kw*c], with
/// zeros where a window overlaps the padding. Column order is (ky,kx,c) so a
/// [kh,kw,cin,cout] kernel flattens to a matching [kh*kw*cin, cout] matrix.
template <typename T>
Var<T> im2col(Var<T> x, int kh, int kw, int stride, Padding pad) {
    const auto& vx = x.value();
    require_shape(vx.rank() == 4, "im2col: expected [b,h,w,c], got " + shape_str(vx.shape));
    require(stride >= 1, "im2col: stride must be positive, got " + std::to_string(stride));
    int b = vx.shape[0], h = vx.shape[1], w = vx.shape[2], c = vx.shape[3];
    int ph = h + pad.top + pad.bottom;
    int pw = w + pad.left + pad.right;
    require(kh <= ph && kw <= pw, "im2col: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                                      " larger than padded input " + std::to_string(ph) + "x" + std::to_string(pw));
    int oh = conv_out_extent(h, kh, stride, pad.top + pad.bottom);
    int ow = conv_out_extent(w, kw, stride, pad.left + pad.right);
    int patch = kh * kw * c;
    TensorData<T> out({b, oh * ow, patch});
    const T* px = vx.ptr();
    T* po = out.ptr();
    for (int bi = 0; bi < b; ++bi) {
        const T* xb = px + static_cast<std::size_t>(bi) * h * w * c;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                T* row = po + ((static_cast<std::size_t>(bi) * oh + oy) * ow + ox) * patch;
                int y0 = oy * stride - pad.top;
                int x0 = ox * stride - pad.left;
                for (int ky = 0; ky < kh; ++ky) {
                    int y = y0 + ky;
                    for (int kx = 0; kx < kw; ++kx) {
                        int xcol = x0 + kx;
                        T* cell = row + (ky * kw + kx) * c;
                        if (y < 0 || y >= h || xcol < 0 || xcol >= w) {
                            for (int ci = 0; ci < c; ++ci) cell[ci] = T(0);
                        } else {
                            const T* src = xb + (static_cast<std::size_t>(y) * w + xcol) * c;
                            for (int ci = 0; ci < c; ++ci) cell[ci] = src[ci];
                        }
                    }
                }
            }
        }
    }
    int ix = x.id;
    return x.tape->make("im2col", std::move(out), {ix}, [ix, b, h, w, c, kh, kw, stride, pad, oh, ow, patch](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* gx = t.grad_acc(ix)) {
            for (int bi = 0; bi < b; ++bi) {
                T* gxb = gx + static_cast<std::size_t>(bi) * h * w * c;
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        const T* row = g.data() + ((static_cast<std::size_t>(bi) * oh + oy) * ow + ox) * patch;
                        int y0 = oy * stride - pad.top;
                        int x0 = ox * stride - pad.left;
                        for (int ky = 0; ky < kh; ++ky) {
                            int y = y0 + ky;
                            if (y < 0 || y >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                int xcol = x0 + kx;
                                if (xcol < 0 || xcol >= w) continue;
                                const T* cell = row + (ky * kw + kx) * c;
                                T* dst = gxb + (static_cast<std::size_t>(y) * w + xcol) * c;
                                for (int ci = 0; ci < c; ++ci) dst[ci] += cell[ci];
                            }
                        }
                    }
                }
            }
        }
    });
}

/// 2D cross-correlation (no kernel flip). kernel is [kh,kw,cin,cout];
/// output extent per axis is floor((in + padTotal - k)/stride) + 1.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, int stride, Padding pad) {
    const auto& vk = kernel.value();
    require_shape(vk.rank() == 4, "conv2d: kernel must be [kh,kw,cin,cout], got " + shape_str(vk.shape));
    const auto& vx = x.value();
    require_shape(vx.rank() == 4 && vx.shape[3] == vk.shape[2],
                  "conv2d: input " + shape_str(vx.shape) + " incompatible with kernel " + shape_str(vk.shape));
    require(stride >= 1, "conv2d: stride must be positive, got " + std::to_string(stride));
    int kh = vk.shape[0], kw = vk.shape[1], cin = vk.shape[2], cout = vk.shape[3];
    int b = vx.shape[0];
    int oh = conv_out_extent(vx.shape[1], kh, stride, pad.top + pad.bottom);
    int ow = conv_out_extent(vx.shape[2], kw, stride, pad.left + pad.right);
    Var<T> col = im2col(x, kh, kw, stride, pad);                     // [b, oh*ow, kh*kw*cin]
    Var<T> wmat = reshape(kernel, {kh * kw * cin, cout});
    Var<T> out = matmul(col, wmat);                                  // [b, oh*ow, cout]
    return reshape(out, {b, oh, ow, cout});
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, Var<T> bias, int stride, Padding pad) {
    const auto& vk = kernel.value();
    require_shape(vk.rank() == 4, "conv2d: kernel must be [kh,kw,cin,cout], got " + shape_str(vk.shape));
    int kh = vk.shape[0], kw = vk.shape[1], cin = vk.shape[2], cout = vk.shape[3];
    const auto& vx = x.value();
    require_shape(vx.rank() == 4 && vx.shape[3] == cin,
                  "conv2d: input " + shape_str(vx.shape) + " incompatible with kernel " + shape_str(vk.shape));
    require(stride >= 1, "conv2d: stride must be positive, got " + std::to_string(stride));
    int b = vx.shape[0];
    int oh = conv_out_extent(vx.shape[1], kh, stride, pad.top + pad.bottom);
    int ow = conv_out_extent(vx.shape[2], kw, stride, pad.left + pad.right);
    Var<T> col = im2col(x, kh, kw, stride, pad);
    Var<T> out = matmul(col, reshape(kernel, {kh * kw * cin, cout}));
    out = add_rowvec(out, bias);
    return reshape(out, {b, oh, ow, cout});
}

/// Keeps positions {0, step, 2·step, ...} on both spatial axes;
/// output extent = ceil(extent/step).
template <typename T>
Var<T> subsample_grid(Var<T> x, int step) {
    const auto& vx = x.value();
    require_shape(vx.rank() == 4, "subsample_grid: expected [b,h,w,c], got " + shape_str(vx.shape));
    require(step >= 1, "subsample_grid: step must be >= 1, got " + std::to_string(step));
    int b = vx.shape[0], h = vx.shape[1], w = vx.shape[2], c = vx.shape[3];
    int oh = (h + step - 1) / step;
    int ow = (w + step - 1) / step;
    TensorData<T> out({b, oh, ow, c});
    for (int bi = 0; bi < b; ++bi)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const T* src = vx.ptr() + ((static_cast<std::size_t>(bi) * h + oy * step) * w + ox * step) * c;
                T* dst = out.ptr() + ((static_cast<std::size_t>(bi) * oh + oy) * ow + ox) * c;
                for (int ci = 0; ci < c; ++ci) dst[ci] = src[ci];
            }
    int ix = x.id;
    return x.tape->make("subsample_grid", std::move(out), {ix}, [ix, b, h, w, c, oh, ow, step](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* gx = t.grad_acc(ix)) {
            for (int bi = 0; bi < b; ++bi)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const T* src = g.data() + ((static_cast<std::size_t>(bi) * oh + oy) * ow + ox) * c;
                        T* dst = gx + ((static_cast<std::size_t>(bi) * h + oy * step) * w + ox * step) * c;
                        for (int ci = 0; ci < c; ++ci) dst[ci] += src[ci];
                    }
        }
    });
}

/// Inverse of subsample_grid: places x at stride `factor` and zeros elsewhere.
/// Paired with a following conv this forms a transposed-convolution stage.
template <typename T>
Var<T> zero_upsample(Var<T> x, int factor) {
    const auto& vx = x.value();
    require_shape(vx.rank() == 4, "zero_upsample: expected [b,h,w,c], got " + shape_str(vx.shape));
    require(factor >= 1, "zero_upsample: factor must be >= 1, got " + std::to_string(factor));
    int b = vx.shape[0], h = vx.shape[1], w = vx.shape[2], c = vx.shape[3];
    int oh = h * factor, ow = w * factor;
    TensorData<T> out({b, oh, ow, c});
    for (int bi = 0; bi < b; ++bi)
        for (int y = 0; y < h; ++y)
            for (int x2 = 0; x2 < w; ++x2) {
                const T* src = vx.ptr() + ((static_cast<std::size_t>(bi) * h + y) * w + x2) * c;
                T* dst = out.ptr() + ((static_cast<std::size_t>(bi) * oh + y * factor) * ow + x2 * factor) * c;
                for (int ci = 0; ci < c; ++ci) dst[ci] = src[ci];
            }
    int ix = x.id;
    return x.tape->make("zero_upsample", std::move(out), {ix}, [ix, b, h, w, c, oh, ow, factor](Tape<T>& t, int self) {
        const auto& g = t.grad_of(self);
        if (T* gx = t.grad_acc(ix)) {
            for (int bi = 0; bi < b; ++bi)
                for (int y = 0; y < h; ++y)
                    for (int x2 = 0; x2 < w; ++x2) {
                        const T* src = g.data() + ((static_cast<std::size_t>(bi) * oh + y * factor) * ow + x2 * factor) * c;
                        T* dst = gx + ((static_cast<std::size_t>(bi) * h + y) * w + x2) * c;
                        for (int ci = 0; ci < c; ++ci) dst[ci] += src[ci];
                    }
        }
    });
}

}  // namespace vpnext
