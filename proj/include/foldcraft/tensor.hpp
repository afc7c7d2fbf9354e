#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace foldcraft {

// Channel-major (C, H, W) tensor, row-major within a channel.
template <typename T>
struct TensorT {
    int ch = 0, h = 0, w = 0;
    std::vector<T> v;

    TensorT() = default;
    TensorT(int c_, int h_, int w_, T fill = T(0))
        : ch(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, fill) {}

    T& at(int c, int y, int x) { return v[(static_cast<std::size_t>(c) * h + y) * w + x]; }
    T at(int c, int y, int x) const { return v[(static_cast<std::size_t>(c) * h + y) * w + x]; }
    T* row(int c, int y) { return &v[(static_cast<std::size_t>(c) * h + y) * w]; }
    const T* row(int c, int y) const { return &v[(static_cast<std::size_t>(c) * h + y) * w]; }

    std::size_t size() const { return v.size(); }
    void fill(T value) { std::fill(v.begin(), v.end(), value); }

    bool operator==(const TensorT&) const = default;
};

// Convolution kernel bank, laid out (out_ch, in_ch, k, k).
template <typename T>
struct KernelT {
    int oc = 0, ic = 0, k = 0;
    std::vector<T> v;

    KernelT() = default;
    KernelT(int oc_, int ic_, int k_)
        : oc(oc_), ic(ic_), k(k_), v(static_cast<std::size_t>(oc_) * ic_ * k_ * k_, T(0)) {}

    T& at(int o, int i, int ky, int kx) {
        return v[((static_cast<std::size_t>(o) * ic + i) * k + ky) * k + kx];
    }
    T at(int o, int i, int ky, int kx) const {
        return v[((static_cast<std::size_t>(o) * ic + i) * k + ky) * k + kx];
    }
    std::size_t size() const { return v.size(); }
};

using Tensor = TensorT<float>;

template <typename From, typename To>
TensorT<To> tensor_cast(const TensorT<From>& t) {
    TensorT<To> out(t.ch, t.h, t.w);
    for (std::size_t i = 0; i < t.v.size(); ++i) out.v[i] = static_cast<To>(t.v[i]);
    return out;
}

}  // namespace foldcraft
