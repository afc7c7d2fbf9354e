#include "foldcraft/qfcn.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace foldcraft {

namespace {

struct LayerShape {
    int in_ch, out_ch, ksize, stride;
    bool relu;
};

std::array<LayerShape, kNumConvLayers> layer_shapes(int head_channels) {
    return {{{6, 32, 5, 2, true},
             {32, 32, 5, 2, true},
             {32, 32, 5, 2, true},
             {32, 32, 5, 1, true},
             {32, 32, 3, 1, true},
             {32, 32, 3, 1, true},
             {32, head_channels, 1, 1, false}}};
}

template <typename T>
void check_input(const QNetworkT<T>& net, const TensorT<T>& input) {
    (void)net;
    if (input.ch != 6) throw std::invalid_argument("qfcn: input must have 6 channels (state || goal)");
    if (input.h != input.w) throw std::invalid_argument("qfcn: input must be square");
    if (input.h % 8 != 0 || input.h <= 0) throw std::invalid_argument("qfcn: resolution must be divisible by 8");
}

}  // namespace

template <typename T>
QNetworkT<T> QNetworkT<T>::he_init(std::uint64_t seed, int head_channels) {
    QNetworkT<T> net;
    net.head_channels = head_channels;
    Rng rng(mix_seed(seed, 0x9fc0ull));
    const auto shapes = layer_shapes(head_channels);
    for (int l = 0; l < kNumConvLayers; ++l) {
        const auto& s = shapes[l];
        ConvLayerT<T>& layer = net.layers[l];
        layer.w = KernelT<T>(s.out_ch, s.in_ch, s.ksize);
        layer.b.assign(s.out_ch, T(0));
        layer.stride = s.stride;
        layer.relu = s.relu;
        const double std_dev = std::sqrt(2.0 / (s.in_ch * s.ksize * s.ksize));
        for (auto& w : layer.w.v) w = static_cast<T>(rng.normal() * std_dev);
    }
    return net;
}

template <typename T>
TensorT<T> QNetworkT<T>::forward(const TensorT<T>& input, ForwardCacheT<T>& cache) const {
    check_input(*this, input);
    TensorT<T> x = input;
    for (int l = 0; l < kNumConvLayers; ++l) {
        if (upsample_before(l)) {
            TensorT<T> up;
            nn::upsample2_forward(x, up);
            x = std::move(up);
        }
        cache.conv_in[l] = x;
        TensorT<T> out;
        nn::conv2d_forward(x, layers[l].w, layers[l].b, layers[l].stride, out);
        if (layers[l].relu) nn::relu_inplace(out);
        cache.conv_out[l] = out;
        x = std::move(out);
    }
    return x;
}

template <typename T>
TensorT<T> QNetworkT<T>::forward(const TensorT<T>& input) const {
    ForwardCacheT<T> cache;
    return forward(input, cache);
}

template <typename T>
QNetworkGradsT<T> QNetworkT<T>::zero_grads() const {
    QNetworkGradsT<T> g;
    for (int l = 0; l < kNumConvLayers; ++l) {
        g.w[l] = KernelT<T>(layers[l].w.oc, layers[l].w.ic, layers[l].w.k);
        g.b[l].assign(layers[l].b.size(), T(0));
    }
    return g;
}

template <typename T>
std::size_t QNetworkT<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

template <typename T>
QNetworkGradsT<T> QNetworkT<T>::backward(const ForwardCacheT<T>& cache, int channel, int row, int col,
                                         T g) const {
    const TensorT<T>& out = cache.conv_out[kNumConvLayers - 1];
    if (channel < 0 || channel >= out.ch || row < 0 || row >= out.h || col < 0 || col >= out.w)
        throw std::invalid_argument("qfcn backward: pixel out of bounds");

    QNetworkGradsT<T> grads = zero_grads();
    TensorT<T> d(out.ch, out.h, out.w);
    d.at(channel, row, col) = g;

    for (int l = kNumConvLayers - 1; l >= 0; --l) {
        if (layers[l].relu) nn::relu_backward_inplace(cache.conv_out[l], d);
        const TensorT<T>& in = cache.conv_in[l];
        TensorT<T> din(in.ch, in.h, in.w);
        nn::conv2d_backward(in, layers[l].w, layers[l].stride, d, din, grads.w[l], grads.b[l]);
        if (upsample_before(l)) {
            TensorT<T> dpre(din.ch, din.h / 2, din.w / 2);
            nn::upsample2_backward(din, dpre);
            d = std::move(dpre);
        } else {
            d = std::move(din);
        }
    }
    return grads;
}

template struct QNetworkT<float>;
template struct QNetworkT<double>;

template <typename T>
QNetworkT<T> network_cast_from_float(const QNetworkT<float>& net) {
    QNetworkT<T> out;
    out.head_channels = net.head_channels;
    for (int l = 0; l < kNumConvLayers; ++l) {
        const auto& src = net.layers[l];
        auto& dst = out.layers[l];
        dst.w = KernelT<T>(src.w.oc, src.w.ic, src.w.k);
        for (std::size_t i = 0; i < src.w.v.size(); ++i) dst.w.v[i] = static_cast<T>(src.w.v[i]);
        dst.b.assign(src.b.begin(), src.b.end());
        dst.stride = src.stride;
        dst.relu = src.relu;
    }
    return out;
}
template QNetworkT<double> network_cast_from_float<double>(const QNetworkT<float>&);

QNetwork network_cast_to_float(const QNetworkT<double>& net) {
    QNetwork out;
    out.head_channels = net.head_channels;
    for (int l = 0; l < kNumConvLayers; ++l) {
        const auto& src = net.layers[l];
        auto& dst = out.layers[l];
        dst.w = KernelT<float>(src.w.oc, src.w.ic, src.w.k);
        for (std::size_t i = 0; i < src.w.v.size(); ++i) dst.w.v[i] = static_cast<float>(src.w.v[i]);
        dst.b.assign(src.b.begin(), src.b.end());
        dst.stride = src.stride;
        dst.relu = src.relu;
    }
    return out;
}

QNetworkGrads backward_at_pixel(const QNetwork& net, const Tensor& input, int row, int col, float grad_value) {
    ForwardCache cache;
    net.forward(input, cache);
    return net.backward(cache, 0, row, col, grad_value);
}

void adam_step(QNetwork& net, const QNetworkGrads& grads, AdamState& state, float lr) {
    constexpr float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
    state.step += 1;
    const float bc1 = 1.0f - std::pow(beta1, static_cast<float>(state.step));
    const float bc2 = 1.0f - std::pow(beta2, static_cast<float>(state.step));

    auto update = [&](float& w, float g, float& m, float& v) {
        if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient (divergence)");
        m = beta1 * m + (1.0f - beta1) * g;
        v = beta2 * v + (1.0f - beta2) * g * g;
        const float mhat = m / bc1;
        const float vhat = v / bc2;
        w -= lr * mhat / (std::sqrt(vhat) + eps);
    };

    for (int l = 0; l < kNumConvLayers; ++l) {
        auto& layer = net.layers[l];
        for (std::size_t i = 0; i < layer.w.v.size(); ++i)
            update(layer.w.v[i], grads.w[l].v[i], state.m.w[l].v[i], state.v.w[l].v[i]);
        for (std::size_t i = 0; i < layer.b.size(); ++i)
            update(layer.b[i], grads.b[l][i], state.m.b[l][i], state.v.b[l][i]);
    }
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {
constexpr char kCkptMagic[4] = {'F', 'Q', 'C', 'N'};

template <typename V>
void write_raw(std::FILE* f, const V& v) {
    if (std::fwrite(&v, sizeof(V), 1, f) != 1) throw std::runtime_error("checkpoint: write failed");
}
template <typename V>
void read_raw(std::FILE* f, V& v) {
    if (std::fread(&v, sizeof(V), 1, f) != 1) throw std::runtime_error("checkpoint: truncated file");
}
}  // namespace

void save_checkpoint(const std::string& path, const QNetwork& net, int trained_resolution) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    std::fwrite(kCkptMagic, 1, 4, f);
    write_raw(f, std::uint32_t{1});
    write_raw(f, static_cast<std::uint32_t>(trained_resolution));
    write_raw(f, static_cast<std::uint32_t>(net.head_channels));
    write_raw(f, std::uint32_t{kNumConvLayers});
    for (const auto& l : net.layers) {
        write_raw(f, static_cast<std::uint32_t>(l.w.oc));
        write_raw(f, static_cast<std::uint32_t>(l.w.ic));
        write_raw(f, static_cast<std::uint32_t>(l.w.k));
        write_raw(f, static_cast<std::uint32_t>(l.stride));
        write_raw(f, static_cast<std::uint8_t>(l.relu ? 1 : 0));
    }
    for (const auto& l : net.layers) {
        if (!l.w.v.empty() && std::fwrite(l.w.v.data(), sizeof(float), l.w.v.size(), f) != l.w.v.size())
            throw std::runtime_error("save_checkpoint: write failed");
        if (!l.b.empty() && std::fwrite(l.b.data(), sizeof(float), l.b.size(), f) != l.b.size())
            throw std::runtime_error("save_checkpoint: write failed");
    }
    std::fclose(f);
}

QNetwork load_checkpoint(const std::string& path, int* trained_resolution) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    try {
        char magic[4];
        if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kCkptMagic, 4) != 0)
            throw std::runtime_error("load_checkpoint: bad magic in " + path);
        std::uint32_t version, resolution, head, n_layers;
        read_raw(f, version);
        if (version != 1) throw std::runtime_error("load_checkpoint: unsupported version");
        read_raw(f, resolution);
        read_raw(f, head);
        read_raw(f, n_layers);
        if (n_layers != kNumConvLayers) throw std::runtime_error("load_checkpoint: unexpected layer count");

        QNetwork net;
        net.head_channels = static_cast<int>(head);
        for (auto& l : net.layers) {
            std::uint32_t oc, ic, k, stride;
            std::uint8_t relu;
            read_raw(f, oc);
            read_raw(f, ic);
            read_raw(f, k);
            read_raw(f, stride);
            read_raw(f, relu);
            l.w = KernelT<float>(static_cast<int>(oc), static_cast<int>(ic), static_cast<int>(k));
            l.b.assign(oc, 0.0f);
            l.stride = static_cast<int>(stride);
            l.relu = relu != 0;
        }
        for (auto& l : net.layers) {
            if (!l.w.v.empty() && std::fread(l.w.v.data(), sizeof(float), l.w.v.size(), f) != l.w.v.size())
                throw std::runtime_error("load_checkpoint: truncated parameter blob");
            if (!l.b.empty() && std::fread(l.b.data(), sizeof(float), l.b.size(), f) != l.b.size())
                throw std::runtime_error("load_checkpoint: truncated parameter blob");
        }
        std::fclose(f);
        if (trained_resolution) *trained_resolution = static_cast<int>(resolution);
        return net;
    } catch (...) {
        std::fclose(f);
        throw;
    }
}

// ---------------------------------------------------------------------------
// Gradient check

namespace {

double rel_err(double analytic, double fd) {
    const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-6});
    return std::abs(analytic - fd) / scale;
}

// FD check of a single conv layer: loss = sum(out * proj).
double check_conv_layer(int stride, std::uint64_t seed) {
    Rng rng(seed);
    const int in_ch = 3, out_ch = 4, k = stride == 1 ? 3 : 5, hw = 8;
    TensorT<double> in(in_ch, hw, hw);
    for (auto& v : in.v) v = rng.uniform(-1.0, 1.0);
    KernelT<double> ker(out_ch, in_ch, k);
    for (auto& v : ker.v) v = rng.normal() * 0.3;
    std::vector<double> bias(out_ch);
    for (auto& v : bias) v = rng.uniform(-0.1, 0.1);

    TensorT<double> out;
    nn::conv2d_forward(in, ker, bias, stride, out);
    TensorT<double> proj(out.ch, out.h, out.w);
    for (auto& v : proj.v) v = rng.uniform(-1.0, 1.0);

    TensorT<double> din(in.ch, in.h, in.w);
    KernelT<double> dker(out_ch, in_ch, k);
    std::vector<double> dbias(out_ch, 0.0);
    nn::conv2d_backward(in, ker, stride, proj, din, dker, dbias);

    auto loss = [&]() {
        TensorT<double> o;
        nn::conv2d_forward(in, ker, bias, stride, o);
        double s = 0.0;
        for (std::size_t i = 0; i < o.v.size(); ++i) s += o.v[i] * proj.v[i];
        return s;
    };

    const double eps = 1e-3;
    double worst = 0.0;
    auto probe = [&](double& param, double analytic) {
        const double keep = param;
        param = keep + eps;
        const double lp = loss();
        param = keep - eps;
        const double lm = loss();
        param = keep;
        worst = std::max(worst, rel_err(analytic, (lp - lm) / (2.0 * eps)));
    };
    for (std::size_t i = 0; i < ker.v.size(); ++i) probe(ker.v[i], dker.v[i]);
    for (int i = 0; i < out_ch; ++i) probe(bias[i], dbias[i]);
    for (std::size_t i = 0; i < in.v.size(); ++i) probe(in.v[i], din.v[i]);
    return worst;
}

double check_upsample(std::uint64_t seed) {
    Rng rng(seed);
    TensorT<double> in(2, 6, 6);
    for (auto& v : in.v) v = rng.uniform(-1.0, 1.0);
    TensorT<double> out;
    nn::upsample2_forward(in, out);
    TensorT<double> proj(out.ch, out.h, out.w);
    for (auto& v : proj.v) v = rng.uniform(-1.0, 1.0);

    TensorT<double> din(in.ch, in.h, in.w);
    nn::upsample2_backward(proj, din);

    auto loss = [&]() {
        TensorT<double> o;
        nn::upsample2_forward(in, o);
        double s = 0.0;
        for (std::size_t i = 0; i < o.v.size(); ++i) s += o.v[i] * proj.v[i];
        return s;
    };
    const double eps = 1e-3;
    double worst = 0.0;
    for (std::size_t i = 0; i < in.v.size(); ++i) {
        const double keep = in.v[i];
        in.v[i] = keep + eps;
        const double lp = loss();
        in.v[i] = keep - eps;
        const double lm = loss();
        in.v[i] = keep;
        worst = std::max(worst, rel_err(din.v[i], (lp - lm) / (2.0 * eps)));
    }
    return worst;
}

double check_huber() {
    const double eps = 1e-4;
    double worst = 0.0;
    for (double pred : {0.3, -0.2, 1.7, -2.5}) {
        for (double target : {0.0, 0.5}) {
            const auto [loss, grad] = nn::huber_loss(pred, target);
            const auto lp = nn::huber_loss(pred + eps, target).first;
            const auto lm = nn::huber_loss(pred - eps, target).first;
            worst = std::max(worst, rel_err(grad, (lp - lm) / (2.0 * eps)));
        }
    }
    return worst;
}

struct ParamRef {
    int layer;
    std::size_t index;
    bool is_bias;
};

double& param_at(QNetworkT<double>& net, const ParamRef& r) {
    return r.is_bias ? net.layers[r.layer].b[r.index] : net.layers[r.layer].w.v[r.index];
}

std::pair<double, double> check_full_net(std::uint64_t seed, double* float_vs_double) {
    const int res = 16;
    QNetworkT<double> net = QNetworkT<double>::he_init(seed, 1);
    Rng rng(mix_seed(seed, 21));
    TensorT<double> input(6, res, res);
    for (auto& v : input.v) v = rng.uniform();
    const int row = rng.uniform_int(res);
    const int col = rng.uniform_int(res);

    ForwardCacheT<double> cache;
    net.forward(input, cache);
    const QNetworkGradsT<double> grads = net.backward(cache, 0, row, col, 1.0);

    // Sample 100 parameters across all layers for the FD probe.
    std::vector<ParamRef> probes;
    for (int i = 0; i < 100; ++i) {
        const int layer = rng.uniform_int(kNumConvLayers);
        const bool is_bias = rng.uniform() < 0.1;
        const std::size_t n = is_bias ? net.layers[layer].b.size() : net.layers[layer].w.v.size();
        probes.push_back({layer, static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n))), is_bias});
    }

    auto value_at_pixel = [&]() {
        const TensorT<double> out = net.forward(input);
        return out.at(0, row, col);
    };
    const double eps = 1e-3;
    double worst = 0.0;
    for (const ParamRef& p : probes) {
        double& param = param_at(net, p);
        const double analytic = p.is_bias ? grads.b[p.layer][p.index] : grads.w[p.layer].v[p.index];
        const double keep = param;
        param = keep + eps;
        const double lp = value_at_pixel();
        param = keep - eps;
        const double lm = value_at_pixel();
        param = keep;
        worst = std::max(worst, rel_err(analytic, (lp - lm) / (2.0 * eps)));
    }

    // Production (float) backward against the double-precision oracle.
    if (float_vs_double) {
        const QNetwork fnet = network_cast_to_float(net);
        Tensor finput = tensor_cast<double, float>(input);
        ForwardCache fcache;
        fnet.forward(finput, fcache);
        const QNetworkGrads fgrads = fnet.backward(fcache, 0, row, col, 1.0f);
        double gmax = 0.0;
        for (int l = 0; l < kNumConvLayers; ++l)
            for (double g : grads.w[l].v) gmax = std::max(gmax, std::abs(g));
        double worst_f = 0.0;
        for (int l = 0; l < kNumConvLayers; ++l) {
            for (std::size_t i = 0; i < grads.w[l].v.size(); ++i) {
                const double a = grads.w[l].v[i];
                const double b = fgrads.w[l].v[i];
                worst_f = std::max(worst_f, std::abs(a - b) / std::max(std::abs(a), 1e-3 * gmax));
            }
        }
        *float_vs_double = worst_f;
    }
    return {worst, 0.0};
}

}  // namespace

GradientCheckReport gradient_check(std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    GradientCheckReport rep;
    rep.conv_stride1 = check_conv_layer(1, mix_seed(seed, 1));
    rep.conv_stride2 = check_conv_layer(2, mix_seed(seed, 2));
    rep.upsample = check_upsample(mix_seed(seed, 3));
    rep.huber = check_huber();
    rep.full_net = check_full_net(mix_seed(seed, 4), &rep.float_vs_double).first;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.ok = rep.conv_stride1 < 1e-4 && rep.conv_stride2 < 1e-4 && rep.upsample < 1e-6 &&
             rep.huber < 1e-4 && rep.full_net < 1e-4;
    return rep;
}

}  // namespace foldcraft
