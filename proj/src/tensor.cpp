#include "ppf/tensor.hpp"

#include <algorithm>

#include "ppf/errors.hpp"

namespace ppf {

ImagePlane::ImagePlane(int h_, int w_, double fill)
    : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {
    if (h_ < 1 || w_ < 1) throw ShapeError("ImagePlane: dims must be >= 1, got " + shape_str());
}

std::string ImagePlane::shape_str() const {
    return std::to_string(h) + "x" + std::to_string(w);
}

Tensor4::Tensor4(int n_, int c_, int h_, int w_, double fill)
    : n(n_), c(c_), h(h_), w(w_),
      v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {
    if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
        throw ShapeError("Tensor4: dims must be >= 1, got " + shape_str());
}

std::string Tensor4::shape_str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
}

void Tensor4::ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), 0.0);
}

void Tensor4::zero_grad() { g.assign(v.size(), 0.0); }

ImagePlane plane_from_tensor(const Tensor4& t, int batch, int chan) {
    ImagePlane p(t.h, t.w);
    const double* src = &t.v[t.idx(batch, chan, 0, 0)];
    std::copy(src, src + p.count(), p.v.begin());
    return p;
}

Tensor4 tensor_from_plane(const ImagePlane& p) {
    Tensor4 t(1, 1, p.h, p.w);
    t.v = p.v;
    return t;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw ShapeError("concat_channels: incompatible shapes " + a.shape_str() + " vs " +
                         b.shape_str());
    Tensor4 out(a.n, a.c + b.c, a.h, a.w);
    const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
    for (int i = 0; i < a.n; ++i) {
        std::copy(&a.v[a.idx(i, 0, 0, 0)], &a.v[a.idx(i, 0, 0, 0)] + plane * a.c,
                  &out.v[out.idx(i, 0, 0, 0)]);
        std::copy(&b.v[b.idx(i, 0, 0, 0)], &b.v[b.idx(i, 0, 0, 0)] + plane * b.c,
                  &out.v[out.idx(i, a.c, 0, 0)]);
    }
    return out;
}

void split_channels(const Tensor4& t, int c_first, Tensor4& first, Tensor4& rest) {
    if (c_first < 1 || c_first >= t.c)
        throw ShapeError("split_channels: split " + std::to_string(c_first) + " outside " +
                         t.shape_str());
    first = Tensor4(t.n, c_first, t.h, t.w);
    rest = Tensor4(t.n, t.c - c_first, t.h, t.w);
    const std::size_t plane = static_cast<std::size_t>(t.h) * t.w;
    for (int i = 0; i < t.n; ++i) {
        std::copy(&t.v[t.idx(i, 0, 0, 0)], &t.v[t.idx(i, 0, 0, 0)] + plane * c_first,
                  &first.v[first.idx(i, 0, 0, 0)]);
        std::copy(&t.v[t.idx(i, c_first, 0, 0)],
                  &t.v[t.idx(i, c_first, 0, 0)] + plane * (t.c - c_first),
                  &rest.v[rest.idx(i, 0, 0, 0)]);
    }
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
    require_same_shape(a, b, "add");
    Tensor4 out = a;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
    return out;
}

void add_inplace(Tensor4& a, const Tensor4& b) {
    require_same_shape(a, b, "add_inplace");
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* where) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

void require_same_shape(const ImagePlane& a, const ImagePlane& b, const char* where) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

ImagePlane replicate_pad(const ImagePlane& p, int new_h, int new_w) {
    if (new_h < p.h || new_w < p.w)
        throw ShapeError("replicate_pad: target " + std::to_string(new_h) + "x" +
                         std::to_string(new_w) + " smaller than " + p.shape_str());
    if (new_h == p.h && new_w == p.w) return p;
    ImagePlane out(new_h, new_w);
    for (int y = 0; y < new_h; ++y) {
        const int sy = std::min(y, p.h - 1);
        for (int x = 0; x < new_w; ++x) out.at(y, x) = p.at(sy, std::min(x, p.w - 1));
    }
    return out;
}

ImagePlane crop(const ImagePlane& p, int h, int w) {
    if (h > p.h || w > p.w)
        throw ShapeError("crop: target " + std::to_string(h) + "x" + std::to_string(w) +
                         " larger than " + p.shape_str());
    if (h == p.h && w == p.w) return p;
    ImagePlane out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x) = p.at(y, x);
    return out;
}

ImagePlane copy_block(const ImagePlane& p, int y0, int x0, int bh, int bw) {
    ImagePlane out(bh, bw);
    for (int y = 0; y < bh; ++y)
        for (int x = 0; x < bw; ++x) out.at(y, x) = p.at(y0 + y, x0 + x);
    return out;
}

void paste_block(ImagePlane& dst, const ImagePlane& block, int y0, int x0) {
    for (int y = 0; y < block.h; ++y)
        for (int x = 0; x < block.w; ++x) dst.at(y0 + y, x0 + x) = block.at(y, x);
}

}  // namespace ppf
