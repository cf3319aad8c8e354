#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ppf/tensor.hpp"

namespace ppf {

enum class LayerMode { conv, transposed };

// One convolution layer. Kernel layout is (out_ch, in_ch, k, k), one bias
// per output channel, odd square kernels only.
//
// Spatial contract:
//   conv, stride 1:       "same" zero padding, output dims = input dims
//   conv, stride s:       output dims = input dims / s (input dims must be
//                         divisible by s)
//   transposed, stride s: output dims = input dims * s
struct LayerParams {
    int out_ch = 0, in_ch = 0, k = 1, stride = 1;
    LayerMode mode = LayerMode::conv;
    std::vector<double> kernel;
    std::vector<double> bias;

    static LayerParams make(int out_ch, int in_ch, int k, int stride,
                            LayerMode mode = LayerMode::conv);

    std::size_t kidx(int oc, int ic, int ky, int kx) const {
        return ((static_cast<std::size_t>(oc) * in_ch + ic) * k + ky) * k + kx;
    }
    std::size_t kernel_count() const {
        return static_cast<std::size_t>(out_ch) * in_ch * k * k;
    }
    std::string shape_str() const;
};

// Gradient buffers shaped like a layer's kernel and bias.
struct LayerGrads {
    std::vector<double> kernel, bias;
    static LayerGrads zeros_like(const LayerParams& p);
};

Tensor4 conv_forward(const Tensor4& in, const LayerParams& p);

// Exact gradients of conv_forward. Parameter gradients are accumulated
// into `pg` (sized via LayerGrads::zeros_like); returns the input gradient.
Tensor4 conv_backward(const Tensor4& in, const LayerParams& p, const Tensor4& upstream,
                      LayerGrads& pg);

// Elementwise max(x, slope * x), slope in [0, 1).
Tensor4 leaky_relu_forward(const Tensor4& in, double slope);
Tensor4 leaky_relu_backward(const Tensor4& in, const Tensor4& upstream, double slope);

}  // namespace ppf
