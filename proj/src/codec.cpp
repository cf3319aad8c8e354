#include "ppf/codec.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "ppf/errors.hpp"
#include "ppf/rng.hpp"

namespace ppf {

namespace {

constexpr double kBaseStep = 0.02;
constexpr double kProxySlope = 0.1;

struct DctBasis {
    // c[u][n] = a(u) * cos((2n+1) u pi / 16)
    double c[8][8];
    DctBasis() {
        for (int u = 0; u < 8; ++u) {
            const double a = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
            for (int n = 0; n < 8; ++n)
                c[u][n] = a * std::cos((2 * n + 1) * u * std::numbers::pi / 16.0);
        }
    }
};

const DctBasis& basis() {
    static const DctBasis b;
    return b;
}

}  // namespace

QpLevel::QpLevel(int qp) : qp_(qp) {
    if (std::find(kQpValues.begin(), kQpValues.end(), qp) == kQpValues.end())
        throw ConfigError("qp must be one of {22, 27, 32, 37, 42, 47, 52}, got " +
                          std::to_string(qp));
}

int QpLevel::index() const {
    for (std::size_t i = 0; i < kQpValues.size(); ++i)
        if (kQpValues[i] == qp_) return static_cast<int>(i);
    return -1;  // unreachable, constructor validates
}

double quant_step(QpLevel qp) { return kBaseStep * std::exp2((qp.value() - 22) / 6.0); }

std::array<double, 64> forward_dct_8x8(const std::array<double, 64>& block) {
    const DctBasis& b = basis();
    double t[64];
    for (int y = 0; y < 8; ++y)
        for (int u = 0; u < 8; ++u) {
            double s = 0.0;
            for (int x = 0; x < 8; ++x) s += b.c[u][x] * block[y * 8 + x];
            t[y * 8 + u] = s;
        }
    std::array<double, 64> out{};
    for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) {
            double s = 0.0;
            for (int y = 0; y < 8; ++y) s += b.c[v][y] * t[y * 8 + u];
            out[v * 8 + u] = s;
        }
    return out;
}

std::array<double, 64> inverse_dct_8x8(const std::array<double, 64>& coeffs) {
    const DctBasis& b = basis();
    double t[64];
    for (int u = 0; u < 8; ++u)
        for (int y = 0; y < 8; ++y) {
            double s = 0.0;
            for (int v = 0; v < 8; ++v) s += b.c[v][y] * coeffs[v * 8 + u];
            t[y * 8 + u] = s;
        }
    std::array<double, 64> out{};
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            double s = 0.0;
            for (int u = 0; u < 8; ++u) s += b.c[u][x] * t[y * 8 + u];
            out[y * 8 + x] = s;
        }
    return out;
}

std::array<long long, 64> quantize_coeffs(const std::array<double, 64>& coeffs, QpLevel qp) {
    const double q = quant_step(qp);
    std::array<long long, 64> out{};
    for (int i = 0; i < 64; ++i) out[i] = std::llround(coeffs[i] / q);
    return out;
}

CodecResult encode_decode(const ImagePlane& image, QpLevel qp) {
    if (image.h % 8 || image.w % 8)
        throw ShapeError("encode_decode: dims " + image.shape_str() +
                         " must be multiples of 8 (pad before calling)");
    const double q = quant_step(qp);
    ImagePlane rec(image.h, image.w);
    std::map<long long, long long> hist;

    std::array<double, 64> block{};
    for (int by = 0; by < image.h; by += 8)
        for (int bx = 0; bx < image.w; bx += 8) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) block[y * 8 + x] = image.at(by + y, bx + x);
            const std::array<double, 64> coeffs = forward_dct_8x8(block);
            std::array<double, 64> deq{};
            for (int i = 0; i < 64; ++i) {
                const long long sym = std::llround(coeffs[i] / q);
                ++hist[sym];
                deq[i] = static_cast<double>(sym) * q;
            }
            const std::array<double, 64> pix = inverse_dct_8x8(deq);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    rec.at(by + y, bx + x) = std::clamp(pix[y * 8 + x], 0.0, 1.0);
        }

    const double total = static_cast<double>(image.count());
    double rate = 0.0;
    for (const auto& [sym, cnt] : hist) {
        (void)sym;
        rate -= static_cast<double>(cnt) * std::log2(static_cast<double>(cnt) / total);
    }
    if (rate < 0.0) rate = 0.0;  // guard against -0 rounding
    return CodecResult{std::move(rec), rate, qp};
}

CodecResult encode_decode_padded(const ImagePlane& image, QpLevel qp) {
    const int ph = (image.h + 7) / 8 * 8;
    const int pw = (image.w + 7) / 8 * 8;
    if (ph == image.h && pw == image.w) return encode_decode(image, qp);
    CodecResult r = encode_decode(replicate_pad(image, ph, pw), qp);
    return CodecResult{crop(r.reconstruction, image.h, image.w), r.rate_bits, qp};
}

Metric parse_metric(const std::string& name) {
    if (name == "mse") return Metric::mse;
    if (name == "proxy") return Metric::proxy;
    throw ConfigError("unknown metric '" + name + "' (expected mse or proxy)");
}

const char* metric_name(Metric m) { return m == Metric::mse ? "mse" : "proxy"; }

ProxyExtractor::ProxyExtractor(std::uint64_t seed) {
    l1_ = LayerParams::make(4, 1, 3, 1);
    l2_ = LayerParams::make(4, 4, 3, 1);
    Rng rng(seed);
    for (LayerParams* l : {&l1_, &l2_}) {
        const double sd = std::sqrt(2.0 / (l->in_ch * l->k * l->k));
        for (double& x : l->kernel) x = sd * rng.normal();
    }
}

Tensor4 ProxyExtractor::features(const Tensor4& in) const {
    return conv_forward(leaky_relu_forward(conv_forward(in, l1_), kProxySlope), l2_);
}

Tensor4 ProxyExtractor::input_grad(const Tensor4& in, const Tensor4& upstream) const {
    const Tensor4 pre = conv_forward(in, l1_);
    const Tensor4 act = leaky_relu_forward(pre, kProxySlope);
    LayerGrads sink1 = LayerGrads::zeros_like(l1_);
    LayerGrads sink2 = LayerGrads::zeros_like(l2_);
    const Tensor4 d_act = conv_backward(act, l2_, upstream, sink2);
    const Tensor4 d_pre = leaky_relu_backward(pre, d_act, kProxySlope);
    return conv_backward(in, l1_, d_pre, sink1);
}

const ProxyExtractor& ProxyExtractor::shared() {
    static const ProxyExtractor instance;
    return instance;
}

double distortion(const ImagePlane& a, const ImagePlane& b, Metric m) {
    require_same_shape(a, b, "distortion");
    if (m == Metric::mse) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.count(); ++i) {
            const double d = a.v[i] - b.v[i];
            acc += d * d;
        }
        return acc / static_cast<double>(a.count());
    }
    const ProxyExtractor& px = ProxyExtractor::shared();
    const Tensor4 fa = px.features(tensor_from_plane(a));
    const Tensor4 fb = px.features(tensor_from_plane(b));
    double acc = 0.0;
    for (std::size_t i = 0; i < fa.count(); ++i) {
        const double d = fa.v[i] - fb.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(fa.count());
}

double distortion_with_grad(const ImagePlane& a, const ImagePlane& b, Metric m,
                            ImagePlane& grad_a) {
    require_same_shape(a, b, "distortion");
    grad_a = ImagePlane(a.h, a.w);
    if (m == Metric::mse) {
        const double inv = 1.0 / static_cast<double>(a.count());
        double acc = 0.0;
        for (std::size_t i = 0; i < a.count(); ++i) {
            const double d = a.v[i] - b.v[i];
            acc += d * d;
            grad_a.v[i] = 2.0 * d * inv;
        }
        return acc * inv;
    }
    const ProxyExtractor& px = ProxyExtractor::shared();
    const Tensor4 ta = tensor_from_plane(a);
    const Tensor4 fa = px.features(ta);
    const Tensor4 fb = px.features(tensor_from_plane(b));
    const double inv = 1.0 / static_cast<double>(fa.count());
    Tensor4 up(fa.n, fa.c, fa.h, fa.w);
    double acc = 0.0;
    for (std::size_t i = 0; i < fa.count(); ++i) {
        const double d = fa.v[i] - fb.v[i];
        acc += d * d;
        up.v[i] = 2.0 * d * inv;
    }
    const Tensor4 ig = px.input_grad(ta, up);
    grad_a.v = ig.v;
    return acc * inv;
}

}  // namespace ppf
