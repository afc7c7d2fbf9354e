#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "foldcraft/tensor.hpp"

// Low-level network kernels. Templated on the scalar type: production code
// instantiates float, the finite-difference harness instantiates double.
namespace foldcraft::nn {

inline int conv_out_size(int in, int stride) { return (in + stride - 1) / stride; }

// Zero padding with "same" semantics: out = ceil(in / stride), extra padding
// goes to the bottom/right when the total is odd.
inline int conv_pad_begin(int in, int k, int stride) {
    const int out = conv_out_size(in, stride);
    const int total = std::max(0, (out - 1) * stride + k - in);
    return total / 2;
}

template <typename T>
void conv2d_forward(const TensorT<T>& in, const KernelT<T>& ker, const std::vector<T>& bias, int stride,
                    TensorT<T>& out) {
    const int oh = conv_out_size(in.h, stride);
    const int ow = conv_out_size(in.w, stride);
    const int pad_y = conv_pad_begin(in.h, ker.k, stride);
    const int pad_x = conv_pad_begin(in.w, ker.k, stride);
    out = TensorT<T>(ker.oc, oh, ow);

    for (int oc = 0; oc < ker.oc; ++oc) {
        const T b = bias[oc];
        for (int oy = 0; oy < oh; ++oy) {
            T* orow = out.row(oc, oy);
            for (int ox = 0; ox < ow; ++ox) orow[ox] = b;
        }
        for (int ic = 0; ic < ker.ic; ++ic) {
            for (int ky = 0; ky < ker.k; ++ky) {
                const int oy0 = std::max(0, (pad_y - ky + stride - 1) / stride);
                const int oy1 = std::min(oh, (in.h - 1 - ky + pad_y) / stride + 1);
                for (int kx = 0; kx < ker.k; ++kx) {
                    const T w = ker.at(oc, ic, ky, kx);
                    if (w == T(0)) continue;
                    const int ox0 = std::max(0, (pad_x - kx + stride - 1) / stride);
                    const int ox1 = std::min(ow, (in.w - 1 - kx + pad_x) / stride + 1);
                    const int x_off = kx - pad_x;
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const T* irow = in.row(ic, oy * stride + ky - pad_y);
                        T* orow = out.row(oc, oy);
                        if (stride == 1) {
                            const T* ip = irow + x_off;
                            for (int ox = ox0; ox < ox1; ++ox) orow[ox] += w * ip[ox];
                        } else {
                            for (int ox = ox0; ox < ox1; ++ox) orow[ox] += w * irow[ox * stride + x_off];
                        }
                    }
                }
            }
        }
    }
}

// Accumulates into din / dker / dbias (caller provides zeroed buffers sized
// like in / ker / bias).
template <typename T>
void conv2d_backward(const TensorT<T>& in, const KernelT<T>& ker, int stride, const TensorT<T>& dout,
                     TensorT<T>& din, KernelT<T>& dker, std::vector<T>& dbias) {
    const int oh = dout.h, ow = dout.w;
    const int pad_y = conv_pad_begin(in.h, ker.k, stride);
    const int pad_x = conv_pad_begin(in.w, ker.k, stride);

    for (int oc = 0; oc < ker.oc; ++oc) {
        T acc_b = T(0);
        for (int oy = 0; oy < oh; ++oy) {
            const T* drow = dout.row(oc, oy);
            for (int ox = 0; ox < ow; ++ox) acc_b += drow[ox];
        }
        dbias[oc] += acc_b;

        for (int ic = 0; ic < ker.ic; ++ic) {
            for (int ky = 0; ky < ker.k; ++ky) {
                const int oy0 = std::max(0, (pad_y - ky + stride - 1) / stride);
                const int oy1 = std::min(oh, (in.h - 1 - ky + pad_y) / stride + 1);
                for (int kx = 0; kx < ker.k; ++kx) {
                    const int ox0 = std::max(0, (pad_x - kx + stride - 1) / stride);
                    const int ox1 = std::min(ow, (in.w - 1 - kx + pad_x) / stride + 1);
                    const int x_off = kx - pad_x;
                    T acc_w = T(0);
                    const T w = ker.at(oc, ic, ky, kx);
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const int iy = oy * stride + ky - pad_y;
                        const T* irow = in.row(ic, iy);
                        T* dirow = din.row(ic, iy);
                        const T* drow = dout.row(oc, oy);
                        if (stride == 1) {
                            const T* ip = irow + x_off;
                            T* dip = dirow + x_off;
                            for (int ox = ox0; ox < ox1; ++ox) {
                                acc_w += drow[ox] * ip[ox];
                                dip[ox] += w * drow[ox];
                            }
                        } else {
                            for (int ox = ox0; ox < ox1; ++ox) {
                                acc_w += drow[ox] * irow[ox * stride + x_off];
                                dirow[ox * stride + x_off] += w * drow[ox];
                            }
                        }
                    }
                    dker.at(oc, ic, ky, kx) += acc_w;
                }
            }
        }
    }
}

template <typename T>
void relu_inplace(TensorT<T>& t) {
    for (T& x : t.v)
        if (x < T(0)) x = T(0);
}

// dpre = dpost where the stored (post-ReLU) activation is positive.
template <typename T>
void relu_backward_inplace(const TensorT<T>& post, TensorT<T>& d) {
    for (std::size_t i = 0; i < post.v.size(); ++i)
        if (post.v[i] <= T(0)) d.v[i] = T(0);
}

namespace detail {
// Source taps for 2x bilinear upsampling, half-pixel-centers convention:
// output y samples the input at y/2 - 0.25, edges clamped.
struct Tap {
    int i0, i1;
    double w0, w1;
};
inline Tap up2_tap(int y, int in_size) {
    const double v = 0.5 * y - 0.25;
    int i0 = static_cast<int>(std::floor(v));
    const double f = v - i0;
    int i1 = i0 + 1;
    double w0 = 1.0 - f, w1 = f;
    if (i0 < 0) {
        i0 = 0;
        i1 = 0;
        w0 = 1.0;
        w1 = 0.0;
    } else if (i1 > in_size - 1) {
        i0 = in_size - 1;
        i1 = in_size - 1;
        w0 = 1.0;
        w1 = 0.0;
    }
    return {i0, i1, w0, w1};
}
}  // namespace detail

template <typename T>
void upsample2_forward(const TensorT<T>& in, TensorT<T>& out) {
    out = TensorT<T>(in.ch, in.h * 2, in.w * 2);
    for (int c = 0; c < in.ch; ++c) {
        for (int y = 0; y < out.h; ++y) {
            const auto ty = detail::up2_tap(y, in.h);
            const T* r0 = in.row(c, ty.i0);
            const T* r1 = in.row(c, ty.i1);
            T* orow = out.row(c, y);
            for (int x = 0; x < out.w; ++x) {
                const auto tx = detail::up2_tap(x, in.w);
                const T top = static_cast<T>(tx.w0) * r0[tx.i0] + static_cast<T>(tx.w1) * r0[tx.i1];
                const T bot = static_cast<T>(tx.w0) * r1[tx.i0] + static_cast<T>(tx.w1) * r1[tx.i1];
                orow[x] = static_cast<T>(ty.w0) * top + static_cast<T>(ty.w1) * bot;
            }
        }
    }
}

template <typename T>
void upsample2_backward(const TensorT<T>& dout, TensorT<T>& din) {
    // din must be zeroed to (ch, dout.h/2, dout.w/2) by the caller.
    for (int c = 0; c < din.ch; ++c) {
        for (int y = 0; y < dout.h; ++y) {
            const auto ty = detail::up2_tap(y, din.h);
            T* r0 = din.row(c, ty.i0);
            T* r1 = din.row(c, ty.i1);
            const T* drow = dout.row(c, y);
            for (int x = 0; x < dout.w; ++x) {
                const auto tx = detail::up2_tap(x, din.w);
                const T g = drow[x];
                r0[tx.i0] += static_cast<T>(ty.w0 * tx.w0) * g;
                r0[tx.i1] += static_cast<T>(ty.w0 * tx.w1) * g;
                r1[tx.i0] += static_cast<T>(ty.w1 * tx.w0) * g;
                r1[tx.i1] += static_cast<T>(ty.w1 * tx.w1) * g;
            }
        }
    }
}

// Standard Huber value and derivative w.r.t. pred.
template <typename T>
std::pair<T, T> huber_loss(T pred, T target, T delta = T(1)) {
    const T e = pred - target;
    const T ae = std::abs(e);
    if (ae <= delta) return {T(0.5) * e * e, e};
    return {delta * (ae - T(0.5) * delta), e > T(0) ? delta : -delta};
}

}  // namespace foldcraft::nn
