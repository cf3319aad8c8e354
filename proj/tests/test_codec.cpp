#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "ppf/codec.hpp"
#include "ppf/errors.hpp"
#include "ppf/image_io.hpp"
#include "ppf/rng.hpp"

using namespace ppf;

namespace {

// Independent direct 2-D DCT straight from the definition (four nested
// loops, explicit cosines).
std::array<double, 64> direct_dct(const std::array<double, 64>& block) {
    std::array<double, 64> out{};
    for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) {
            const double au = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
            const double av = v == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
            double s = 0.0;
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    s += block[y * 8 + x] *
                         std::cos((2 * x + 1) * u * std::numbers::pi / 16.0) *
                         std::cos((2 * y + 1) * v * std::numbers::pi / 16.0);
            out[v * 8 + u] = au * av * s;
        }
    return out;
}

ImagePlane random_image(int h, int w, Rng& rng) {
    ImagePlane img(h, w);
    for (double& x : img.v) x = rng.uniform01();
    return img;
}

ImagePlane textured_image(int h, int w, Rng& rng) {
    ImagePlane img(h, w);
    const int period = 2 + static_cast<int>(rng.uniform_int(3));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(y, x) = 0.5 + ((x / period + y / period) % 2 ? 0.35 : -0.35);
    return img;
}

}  // namespace

TEST_CASE("dct round trip is the identity") {
    Rng rng(31);
    std::array<double, 64> block{};
    for (double& x : block) x = rng.uniform01();
    const std::array<double, 64> back = inverse_dct_8x8(forward_dct_8x8(block));
    for (int i = 0; i < 64; ++i) CHECK(back[i] == doctest::Approx(block[i]).epsilon(1e-12));
}

TEST_CASE("ramp block quantization matches the direct DCT oracle exactly") {
    std::array<double, 64> block{};
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) block[y * 8 + x] = x / 8.0;
    const QpLevel qp(37);
    const std::array<long long, 64> got = quantize_coeffs(forward_dct_8x8(block), qp);

    const std::array<double, 64> ref = direct_dct(block);
    const double q = quant_step(qp);
    for (int i = 0; i < 64; ++i) CHECK(got[i] == std::llround(ref[i] / q));
}

TEST_CASE("quantizer step doubles every six qp steps") {
    CHECK(quant_step(QpLevel(22)) == doctest::Approx(0.02));
    CHECK(quant_step(QpLevel(52)) == doctest::Approx(0.02 * 32.0));
    CHECK(quant_step(QpLevel(27)) > quant_step(QpLevel(22)));
}

TEST_CASE("qp levels outside the set are rejected") {
    CHECK_THROWS_AS(QpLevel(23), ConfigError);
    CHECK_THROWS_AS(QpLevel(0), ConfigError);
    CHECK(QpLevel(42).index() == 4);
}

TEST_CASE("constant image survives coding within one DC quantization step") {
    const ImagePlane img(16, 16, 0.4);
    for (int qp_value : {22, 37, 52}) {
        const QpLevel qp(qp_value);
        const CodecResult r = encode_decode(img, qp);
        REQUIRE(r.reconstruction.same_shape(img));
        // only the DC coefficient is nonzero; its rounding error spreads
        // uniformly over the 64 samples of each block
        const double bound = quant_step(qp) / 16.0 + 1e-12;
        for (double x : r.reconstruction.v) CHECK(std::fabs(x - 0.4) <= bound);
        CHECK(r.rate_bits >= 0.0);
        CHECK(r.rate_bits < 64.0);  // near-degenerate symbol histogram
    }
}

TEST_CASE("rate and distortion are monotone in qp") {
    Rng rng(32);
    for (int trial = 0; trial < 2; ++trial) {
        const ImagePlane img =
            trial == 0 ? random_image(16, 16, rng) : textured_image(16, 16, rng);
        double prev_rate = -1.0, prev_mse = -1.0;
        bool first = true;
        for (int qp_value : kQpValues) {
            const CodecResult r = encode_decode(img, QpLevel(qp_value));
            const double mse = distortion(r.reconstruction, img, Metric::mse);
            if (!first) {
                CHECK(r.rate_bits <= prev_rate);
                CHECK(mse >= prev_mse);
            }
            prev_rate = r.rate_bits;
            prev_mse = mse;
            first = false;
        }
    }
}

TEST_CASE("re-encoding a reconstruction stays near the original") {
    Rng rng(33);
    const ImagePlane img = textured_image(16, 16, rng);
    for (int qp_value : {27, 42}) {
        const QpLevel qp(qp_value);
        const CodecResult once = encode_decode(img, qp);
        const CodecResult twice = encode_decode(once.reconstruction, qp);
        const double mse1 = distortion(once.reconstruction, img, Metric::mse);
        const double mse2 = distortion(twice.reconstruction, img, Metric::mse);
        CHECK(std::fabs(mse2 - mse1) < mse1);
    }
}

TEST_CASE("entropy estimate is zero only for a degenerate symbol stream") {
    const CodecResult zero = encode_decode(ImagePlane(8, 8, 0.0), QpLevel(52));
    CHECK(zero.rate_bits == 0.0);

    Rng rng(34);
    const CodecResult busy = encode_decode(random_image(8, 8, rng), QpLevel(22));
    CHECK(busy.rate_bits > 0.0);
}

TEST_CASE("codec rejects dims that are not multiples of 8") {
    CHECK_THROWS_AS(encode_decode(ImagePlane(12, 16, 0.5), QpLevel(22)), ShapeError);
    const CodecResult r = encode_decode_padded(ImagePlane(12, 20, 0.5), QpLevel(22));
    CHECK(r.reconstruction.h == 12);
    CHECK(r.reconstruction.w == 20);
}

TEST_CASE("distortion basics") {
    const ImagePlane a(8, 8, 0.0);
    const ImagePlane b(8, 8, 0.1);
    CHECK(distortion(a, a, Metric::mse) == 0.0);
    CHECK(distortion(a, a, Metric::proxy) == 0.0);
    CHECK(distortion(a, b, Metric::mse) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK_THROWS_AS(distortion(a, ImagePlane(8, 4, 0.0), Metric::mse), ShapeError);
}

TEST_CASE("proxy distance is frozen by its seed") {
    Rng rng(35);
    const ImagePlane a = random_image(8, 8, rng);
    const ImagePlane b = random_image(8, 8, rng);

    const double d1 = distortion(a, b, Metric::proxy);
    const double d2 = distortion(a, b, Metric::proxy);
    CHECK(d1 == d2);
    CHECK(d1 > 0.0);

    const ProxyExtractor same_seed(ProxyExtractor::kWeightSeed);
    const ProxyExtractor other_seed(12345);
    const Tensor4 ta = tensor_from_plane(a);
    const Tensor4 f_default = ProxyExtractor::shared().features(ta);
    const Tensor4 f_same = same_seed.features(ta);
    const Tensor4 f_other = other_seed.features(ta);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < f_default.v.size(); ++i) {
        same = same && f_default.v[i] == f_same.v[i];
        differs = differs || f_default.v[i] != f_other.v[i];
    }
    CHECK(same);
    CHECK(differs);
}

TEST_CASE("proxy gradient matches finite differences") {
    Rng rng(36);
    ImagePlane a = random_image(8, 8, rng);
    const ImagePlane b = random_image(8, 8, rng);
    ImagePlane grad;
    distortion_with_grad(a, b, Metric::proxy, grad);
    const double h = 1e-6;
    for (std::size_t i = 0; i < a.count(); i += 7) {
        const double old = a.v[i];
        a.v[i] = old + h;
        const double fp = distortion(a, b, Metric::proxy);
        a.v[i] = old - h;
        const double fm = distortion(a, b, Metric::proxy);
        a.v[i] = old;
        CHECK(grad.v[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("pgm write/read round trip at 8-bit precision") {
    Rng rng(37);
    const ImagePlane img = random_image(9, 13, rng);
    const std::filesystem::path dir = std::filesystem::path("tmp_codec_test");
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "roundtrip.pgm").string();
    write_pgm(img, path);
    const ImagePlane back = read_pgm(path);
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.count(); ++i) {
        const double quantized = std::lround(img.v[i] * 255.0) / 255.0;
        CHECK(back.v[i] == doctest::Approx(quantized).epsilon(1e-12));
    }
    CHECK_THROWS_AS(read_pgm((dir / "missing.pgm").string()), IoError);
}
