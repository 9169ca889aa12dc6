#pragma once

#include <string>

#include "vpnext/conv.hpp"
#include "vpnext/sampling.hpp"

namespace vpnext {

/// Builds the constant base sampling grid for a kh x kw deformable kernel on
/// a [b,h,w] lattice: for each position p and tap k the nominal sample point
/// p + d_k, ordered tap-major as (y,x) pairs. Offsets add onto this grid.
template <typename T>
TensorData<T> deformable_base_grid(int b, int h, int w, int kh, int kw) {
    int taps = kh * kw;
    TensorData<T> grid({b, h * w * taps, 2});
    T cy = static_cast<T>((kh - 1) / 2);
    T cx = static_cast<T>((kw - 1) / 2);
    std::size_t i = 0;
    for (int bi = 0; bi < b; ++bi)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        grid.data[i++] = static_cast<T>(y) + static_cast<T>(ky) - cy;
                        grid.data[i++] = static_cast<T>(x) + static_cast<T>(kx) - cx;
                    }
    return grid;
}

/// Deformable convolution: each output position samples the input at
/// p + d_k + offset(p,k) (bilinear, zero outside the map) and applies the
/// kernel. offsets is [b,h,w,2*kh*kw] with (dy,dx) per tap in grid cells.
/// With all-zero offsets this reduces exactly to a same-padded conv2d.
template <typename T>
Var<T> deformable_conv(Var<T> x, Var<T> offsets, Var<T> kernel, Var<T> bias) {
    const auto& vx = x.value();
    const auto& vo = offsets.value();
    const auto& vk = kernel.value();
    require_shape(vx.rank() == 4, "deformable_conv: expected [b,h,w,c], got " + shape_str(vx.shape));
    require_shape(vk.rank() == 4 && vk.shape[2] == vx.shape[3],
                  "deformable_conv: kernel " + shape_str(vk.shape) + " incompatible with input " + shape_str(vx.shape));
    int b = vx.shape[0], h = vx.shape[1], w = vx.shape[2], cin = vx.shape[3];
    int kh = vk.shape[0], kw = vk.shape[1], cout = vk.shape[3];
    int taps = kh * kw;
    require_shape(vo.rank() == 4 && vo.shape[0] == b && vo.shape[1] == h && vo.shape[2] == w,
                  "deformable_conv: offset grid " + shape_str(vo.shape) + " does not match input " + shape_str(vx.shape));
    require_shape(vo.shape[3] == 2 * taps,
                  "deformable_conv: offset channels must be 2*kh*kw=" + std::to_string(2 * taps) + ", got " +
                      std::to_string(vo.shape[3]));

    Var<T> base = x.tape->constant(deformable_base_grid<T>(b, h, w, kh, kw));
    Var<T> pts = add(base, reshape(offsets, {b, h * w * taps, 2}));
    Var<T> sampled = bilinear_sample(x, pts);                      // [b, h*w*taps, cin]
    Var<T> col = reshape(sampled, {b, h * w, taps * cin});
    Var<T> out = matmul(col, reshape(kernel, {taps * cin, cout}));
    out = add_rowvec(out, bias);
    return reshape(out, {b, h, w, cout});
}

}  // namespace vpnext
