#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "foldcraft/nn_ops.hpp"
#include "foldcraft/rng.hpp"
#include "foldcraft/tensor.hpp"

namespace foldcraft {

// Fully convolutional, goal-conditioned Q-network.
//
// Encoder: 4 conv layers, 32 filters of size 5, strides 2/2/2/1.
// Head: three 2x bilinear upsampling stages interleaved with two 3x3 conv
// layers (32 filters) and a final 1x1 projection, restoring the input
// resolution. Input is the state image channel-wise concatenated with the
// goal image (6 channels, values in [0,1]); output is one Q-value heatmap at
// input resolution (head_channels > 1 yields one heatmap per distance bin
// for the no-scale variant).
inline constexpr int kNumConvLayers = 7;

template <typename T>
struct ConvLayerT {
    KernelT<T> w;
    std::vector<T> b;
    int stride = 1;
    bool relu = true;
};

template <typename T>
struct QNetworkGradsT {
    std::array<KernelT<T>, kNumConvLayers> w;
    std::array<std::vector<T>, kNumConvLayers> b;
};

// Intermediate activations of one forward pass, kept for the backward pass.
template <typename T>
struct ForwardCacheT {
    std::array<TensorT<T>, kNumConvLayers> conv_in;   // input of each conv layer
    std::array<TensorT<T>, kNumConvLayers> conv_out;  // post-activation output
};

template <typename T>
struct QNetworkT {
    int head_channels = 1;
    std::array<ConvLayerT<T>, kNumConvLayers> layers;

    // Upsampling stages sit before conv indices 4, 5 and 6.
    static bool upsample_before(int layer) { return layer >= 4; }

    static QNetworkT he_init(std::uint64_t seed, int head_channels = 1);

    TensorT<T> forward(const TensorT<T>& input) const;
    TensorT<T> forward(const TensorT<T>& input, ForwardCacheT<T>& cache) const;

    // Gradient of g * output(channel, row, col) w.r.t. all parameters; the
    // gradient at every other output pixel is zero.
    QNetworkGradsT<T> backward(const ForwardCacheT<T>& cache, int channel, int row, int col, T g) const;

    QNetworkGradsT<T> zero_grads() const;
    std::size_t parameter_count() const;
};

using QNetwork = QNetworkT<float>;
using QNetworkGrads = QNetworkGradsT<float>;
using ForwardCache = ForwardCacheT<float>;

template <typename T>
QNetworkT<T> network_cast_from_float(const QNetworkT<float>& net);
QNetwork network_cast_to_float(const QNetworkT<double>& net);

// Spec-level convenience: single-pixel backward on a fresh forward pass.
QNetworkGrads backward_at_pixel(const QNetwork& net, const Tensor& input, int row, int col, float grad_value);

// Adam with bias-corrected moments (beta1 0.9, beta2 0.999, eps 1e-8).
// Throws std::runtime_error on non-finite gradients.
struct AdamState {
    QNetworkGrads m;
    QNetworkGrads v;
    std::int64_t step = 0;
    explicit AdamState(const QNetwork& net) : m(net.zero_grads()), v(net.zero_grads()) {}
};
void adam_step(QNetwork& net, const QNetworkGrads& grads, AdamState& state, float lr);

// Checkpoint file: magic, config echo (resolution + layer spec), then raw
// little-endian float32 parameter blob. Layout documented in the README.
void save_checkpoint(const std::string& path, const QNetwork& net, int trained_resolution);
QNetwork load_checkpoint(const std::string& path, int* trained_resolution = nullptr);

// Backward-vs-central-finite-difference comparison per layer type plus the
// full network, run in double precision with eps 1e-3.
struct GradientCheckReport {
    double conv_stride1 = 0.0;
    double conv_stride2 = 0.0;
    double upsample = 0.0;
    double huber = 0.0;
    double full_net = 0.0;
    double float_vs_double = 0.0;  // float backward against the double oracle
    double seconds = 0.0;
    bool ok = false;
};
GradientCheckReport gradient_check(std::uint64_t seed = 7);

}  // namespace foldcraft
