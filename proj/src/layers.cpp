#include "ppf/layers.hpp"

#include <algorithm>

#include "ppf/errors.hpp"

namespace ppf {

namespace {

// floor/ceil division for positive divisors and any sign of numerator
inline int div_ceil(int a, int b) { return a > 0 ? (a + b - 1) / b : a / b; }
inline int div_floor(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

void check_layer(const Tensor4& in, const LayerParams& p, const char* where) {
    if (p.kernel.size() != p.kernel_count() ||
        p.bias.size() != static_cast<std::size_t>(p.out_ch))
        throw ConfigError(std::string(where) + ": layer storage inconsistent with dims " +
                          p.shape_str());
    if (in.c != p.in_ch)
        throw ShapeError(std::string(where) + ": input " + in.shape_str() +
                         " incompatible with kernel " + p.shape_str());
    if (p.mode == LayerMode::conv && p.stride > 1 && (in.h % p.stride || in.w % p.stride))
        throw ShapeError(std::string(where) + ": input dims " + in.shape_str() +
                         " not divisible by stride " + std::to_string(p.stride));
}

struct OutDims {
    int h, w;
};

OutDims output_dims(const Tensor4& in, const LayerParams& p) {
    if (p.mode == LayerMode::transposed) return {in.h * p.stride, in.w * p.stride};
    if (p.stride == 1) return {in.h, in.w};
    return {in.h / p.stride, in.w / p.stride};
}

}  // namespace

LayerParams LayerParams::make(int out_ch, int in_ch, int k, int stride, LayerMode mode) {
    if (out_ch < 1 || in_ch < 1)
        throw ConfigError("LayerParams: channel counts must be >= 1");
    if (k < 1 || k % 2 == 0)
        throw ConfigError("LayerParams: kernel size must be odd and >= 1, got " +
                          std::to_string(k));
    if (stride < 1) throw ConfigError("LayerParams: stride must be >= 1");
    LayerParams p;
    p.out_ch = out_ch;
    p.in_ch = in_ch;
    p.k = k;
    p.stride = stride;
    p.mode = mode;
    p.kernel.assign(p.kernel_count(), 0.0);
    p.bias.assign(static_cast<std::size_t>(out_ch), 0.0);
    return p;
}

std::string LayerParams::shape_str() const {
    return std::to_string(out_ch) + "x" + std::to_string(in_ch) + "x" + std::to_string(k) +
           "x" + std::to_string(k) + (mode == LayerMode::transposed ? "t" : "") + "/s" +
           std::to_string(stride);
}

LayerGrads LayerGrads::zeros_like(const LayerParams& p) {
    LayerGrads g;
    g.kernel.assign(p.kernel_count(), 0.0);
    g.bias.assign(static_cast<std::size_t>(p.out_ch), 0.0);
    return g;
}

// The reduction for every output element accumulates in a fixed order:
// channels outermost, then kernel rows, then kernel columns. Keeping this
// order makes results bit-reproducible run to run.
Tensor4 conv_forward(const Tensor4& in, const LayerParams& p) {
    check_layer(in, p, "conv_forward");
    const auto [out_h, out_w] = output_dims(in, p);
    const int s = p.stride, pad = (p.k - 1) / 2;
    Tensor4 out(in.n, p.out_ch, out_h, out_w);

    for (int i = 0; i < in.n; ++i)
        for (int oc = 0; oc < p.out_ch; ++oc)
            std::fill(&out.v[out.idx(i, oc, 0, 0)],
                      &out.v[out.idx(i, oc, 0, 0)] + static_cast<std::size_t>(out_h) * out_w,
                      p.bias[oc]);

    if (p.mode == LayerMode::conv) {
        for (int i = 0; i < in.n; ++i)
            for (int oc = 0; oc < p.out_ch; ++oc)
                for (int ic = 0; ic < p.in_ch; ++ic)
                    for (int ky = 0; ky < p.k; ++ky) {
                        const int oy_lo = std::max(0, div_ceil(pad - ky, s));
                        const int oy_hi = std::min(out_h - 1, div_floor(in.h - 1 - ky + pad, s));
                        for (int kx = 0; kx < p.k; ++kx) {
                            const double wgt = p.kernel[p.kidx(oc, ic, ky, kx)];
                            const int ox_lo = std::max(0, div_ceil(pad - kx, s));
                            const int ox_hi =
                                std::min(out_w - 1, div_floor(in.w - 1 - kx + pad, s));
                            const int off = kx - pad;
                            for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                                const int y = oy * s + ky - pad;
                                const double* in_row = &in.v[in.idx(i, ic, y, 0)];
                                double* out_row = &out.v[out.idx(i, oc, oy, 0)];
                                for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                    out_row[ox] += wgt * in_row[ox * s + off];
                            }
                        }
                    }
    } else {
        // transposed: input pixel (ih, iw) contributes to output
        // (ih*s + ky - pad, iw*s + kx - pad)
        for (int i = 0; i < in.n; ++i)
            for (int oc = 0; oc < p.out_ch; ++oc)
                for (int ic = 0; ic < p.in_ch; ++ic)
                    for (int ky = 0; ky < p.k; ++ky) {
                        const int ih_lo = std::max(0, div_ceil(pad - ky, s));
                        const int ih_hi = std::min(in.h - 1, div_floor(out_h - 1 - ky + pad, s));
                        for (int kx = 0; kx < p.k; ++kx) {
                            const double wgt = p.kernel[p.kidx(oc, ic, ky, kx)];
                            const int iw_lo = std::max(0, div_ceil(pad - kx, s));
                            const int iw_hi =
                                std::min(in.w - 1, div_floor(out_w - 1 - kx + pad, s));
                            const int off = kx - pad;
                            for (int ih = ih_lo; ih <= ih_hi; ++ih) {
                                const int oh = ih * s + ky - pad;
                                const double* in_row = &in.v[in.idx(i, ic, ih, 0)];
                                double* out_row = &out.v[out.idx(i, oc, oh, 0)];
                                for (int iw = iw_lo; iw <= iw_hi; ++iw)
                                    out_row[iw * s + off] += wgt * in_row[iw];
                            }
                        }
                    }
    }
    return out;
}

Tensor4 conv_backward(const Tensor4& in, const LayerParams& p, const Tensor4& upstream,
                      LayerGrads& pg) {
    check_layer(in, p, "conv_backward");
    const auto [out_h, out_w] = output_dims(in, p);
    if (upstream.n != in.n || upstream.c != p.out_ch || upstream.h != out_h ||
        upstream.w != out_w)
        throw ShapeError("conv_backward: upstream " + upstream.shape_str() +
                         " does not match output dims " + std::to_string(in.n) + "x" +
                         std::to_string(p.out_ch) + "x" + std::to_string(out_h) + "x" +
                         std::to_string(out_w));
    if (pg.kernel.size() != p.kernel_count() ||
        pg.bias.size() != static_cast<std::size_t>(p.out_ch))
        throw ShapeError("conv_backward: gradient buffers not shaped like layer " +
                         p.shape_str());

    const int s = p.stride, pad = (p.k - 1) / 2;
    Tensor4 in_grad(in.n, in.c, in.h, in.w);

    for (int i = 0; i < in.n; ++i)
        for (int oc = 0; oc < p.out_ch; ++oc) {
            double acc = 0.0;
            const double* up_base = &upstream.v[upstream.idx(i, oc, 0, 0)];
            const std::size_t cnt = static_cast<std::size_t>(out_h) * out_w;
            for (std::size_t t = 0; t < cnt; ++t) acc += up_base[t];
            pg.bias[oc] += acc;
        }

    if (p.mode == LayerMode::conv) {
        for (int i = 0; i < in.n; ++i)
            for (int oc = 0; oc < p.out_ch; ++oc)
                for (int ic = 0; ic < p.in_ch; ++ic)
                    for (int ky = 0; ky < p.k; ++ky) {
                        const int oy_lo = std::max(0, div_ceil(pad - ky, s));
                        const int oy_hi = std::min(out_h - 1, div_floor(in.h - 1 - ky + pad, s));
                        for (int kx = 0; kx < p.k; ++kx) {
                            const double wgt = p.kernel[p.kidx(oc, ic, ky, kx)];
                            const int ox_lo = std::max(0, div_ceil(pad - kx, s));
                            const int ox_hi =
                                std::min(out_w - 1, div_floor(in.w - 1 - kx + pad, s));
                            const int off = kx - pad;
                            double acc = 0.0;
                            for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                                const int y = oy * s + ky - pad;
                                const double* up_row = &upstream.v[upstream.idx(i, oc, oy, 0)];
                                const double* in_row = &in.v[in.idx(i, ic, y, 0)];
                                double* ig_row = &in_grad.v[in_grad.idx(i, ic, y, 0)];
                                for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                                    const double u = up_row[ox];
                                    acc += u * in_row[ox * s + off];
                                    ig_row[ox * s + off] += wgt * u;
                                }
                            }
                            pg.kernel[p.kidx(oc, ic, ky, kx)] += acc;
                        }
                    }
    } else {
        for (int i = 0; i < in.n; ++i)
            for (int oc = 0; oc < p.out_ch; ++oc)
                for (int ic = 0; ic < p.in_ch; ++ic)
                    for (int ky = 0; ky < p.k; ++ky) {
                        const int ih_lo = std::max(0, div_ceil(pad - ky, s));
                        const int ih_hi = std::min(in.h - 1, div_floor(out_h - 1 - ky + pad, s));
                        for (int kx = 0; kx < p.k; ++kx) {
                            const double wgt = p.kernel[p.kidx(oc, ic, ky, kx)];
                            const int iw_lo = std::max(0, div_ceil(pad - kx, s));
                            const int iw_hi =
                                std::min(in.w - 1, div_floor(out_w - 1 - kx + pad, s));
                            const int off = kx - pad;
                            double acc = 0.0;
                            for (int ih = ih_lo; ih <= ih_hi; ++ih) {
                                const int oh = ih * s + ky - pad;
                                const double* up_row = &upstream.v[upstream.idx(i, oc, oh, 0)];
                                const double* in_row = &in.v[in.idx(i, ic, ih, 0)];
                                double* ig_row = &in_grad.v[in_grad.idx(i, ic, ih, 0)];
                                for (int iw = iw_lo; iw <= iw_hi; ++iw) {
                                    const double u = up_row[iw * s + off];
                                    acc += u * in_row[iw];
                                    ig_row[iw] += wgt * u;
                                }
                            }
                            pg.kernel[p.kidx(oc, ic, ky, kx)] += acc;
                        }
                    }
    }
    return in_grad;
}

Tensor4 leaky_relu_forward(const Tensor4& in, double slope) {
    if (!(slope >= 0.0 && slope < 1.0))
        throw ConfigError("leaky_relu: slope must be in [0, 1), got " + std::to_string(slope));
    Tensor4 out = in;
    out.g.clear();
    for (double& x : out.v)
        if (x < 0.0) x *= slope;
    return out;
}

Tensor4 leaky_relu_backward(const Tensor4& in, const Tensor4& upstream, double slope) {
    if (!(slope >= 0.0 && slope < 1.0))
        throw ConfigError("leaky_relu: slope must be in [0, 1), got " + std::to_string(slope));
    require_same_shape(in, upstream, "leaky_relu_backward");
    Tensor4 out = upstream;
    out.g.clear();
    for (std::size_t i = 0; i < out.v.size(); ++i)
        if (in.v[i] < 0.0) out.v[i] *= slope;
    return out;
}

}  // namespace ppf
