#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ppf {

// Single-channel raster with samples nominally in [0, 1].
struct ImagePlane {
    int h = 0, w = 0;
    std::vector<double> v;

    ImagePlane() = default;
    ImagePlane(int h_, int w_, double fill = 0.0);

    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
    std::size_t count() const { return v.size(); }
    bool same_shape(const ImagePlane& o) const { return h == o.h && w == o.w; }
    std::string shape_str() const;
};

// Rank-4 array in NCHW layout. `g` is optional gradient storage paired
// with `v`; when present it has the same length.
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;
    std::vector<double> g;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0);

    std::size_t count() const { return v.size(); }
    std::size_t idx(int i, int j, int y, int x) const {
        return ((static_cast<std::size_t>(i) * c + j) * h + y) * w + x;
    }
    double& at(int i, int j, int y, int x) { return v[idx(i, j, y, x)]; }
    double at(int i, int j, int y, int x) const { return v[idx(i, j, y, x)]; }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const;

    void ensure_grad();  // allocate zeroed grad storage
    void zero_grad();
};

ImagePlane plane_from_tensor(const Tensor4& t, int batch = 0, int chan = 0);
Tensor4 tensor_from_plane(const ImagePlane& p);

// Concatenate along the channel dimension; batch and spatial dims must match.
Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
// Split the first `c_first` channels off a gradient (or value) tensor.
void split_channels(const Tensor4& t, int c_first, Tensor4& first, Tensor4& rest);

Tensor4 add(const Tensor4& a, const Tensor4& b);
void add_inplace(Tensor4& a, const Tensor4& b);

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* where);
void require_same_shape(const ImagePlane& a, const ImagePlane& b, const char* where);

// Edge-replication pad to new_h x new_w (>= current dims).
ImagePlane replicate_pad(const ImagePlane& p, int new_h, int new_w);
// Top-left crop to h x w (<= current dims).
ImagePlane crop(const ImagePlane& p, int h, int w);
ImagePlane copy_block(const ImagePlane& p, int y0, int x0, int bh, int bw);
void paste_block(ImagePlane& dst, const ImagePlane& block, int y0, int x0);

}  // namespace ppf
