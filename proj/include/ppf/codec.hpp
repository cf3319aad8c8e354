#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ppf/layers.hpp"
#include "ppf/tensor.hpp"

namespace ppf {

// Quantization parameters supported by the codec.
inline constexpr std::array<int, 7> kQpValues{22, 27, 32, 37, 42, 47, 52};

// Strong type for a valid quantization parameter.
class QpLevel {
public:
    explicit QpLevel(int qp);
    int value() const { return qp_; }
    int index() const;  // position within kQpValues
    bool operator==(const QpLevel& o) const { return qp_ == o.qp_; }

private:
    int qp_;
};

struct CodecResult {
    ImagePlane reconstruction;
    double rate_bits;
    QpLevel qp;
};

// Quantizer step: 0.02 at qp 22, doubling every 6 qp steps.
double quant_step(QpLevel qp);

// Orthonormal 8x8 DCT-II (row-major blocks) and its inverse.
std::array<double, 64> forward_dct_8x8(const std::array<double, 64>& block);
std::array<double, 64> inverse_dct_8x8(const std::array<double, 64>& coeffs);
std::array<long long, 64> quantize_coeffs(const std::array<double, 64>& coeffs, QpLevel qp);

// Block-DCT transform codec: per 8x8 block forward DCT, uniform
// quantization, inverse DCT, clip to [0, 1]. The rate is the zero-order
// entropy of the quantized coefficient symbols over the whole image.
// Dims must be multiples of 8.
CodecResult encode_decode(const ImagePlane& image, QpLevel qp);
// Pads by edge replication to multiples of 8 and crops the reconstruction.
CodecResult encode_decode_padded(const ImagePlane& image, QpLevel qp);

enum class Metric { mse, proxy };
Metric parse_metric(const std::string& name);
const char* metric_name(Metric m);

// Frozen random two-layer feature extractor backing Metric::proxy. Never
// trained; weights are a pure function of the seed.
class ProxyExtractor {
public:
    static constexpr std::uint64_t kWeightSeed = 0x70726f7879ull;  // "proxy"

    explicit ProxyExtractor(std::uint64_t seed = kWeightSeed);
    Tensor4 features(const Tensor4& in) const;
    // d(loss)/d(input) for an upstream gradient at the feature level.
    Tensor4 input_grad(const Tensor4& in, const Tensor4& upstream) const;

    static const ProxyExtractor& shared();

private:
    LayerParams l1_, l2_;
};

double distortion(const ImagePlane& a, const ImagePlane& b, Metric m);
// Also computes d(distortion)/d(a).
double distortion_with_grad(const ImagePlane& a, const ImagePlane& b, Metric m,
                            ImagePlane& grad_a);

}  // namespace ppf
