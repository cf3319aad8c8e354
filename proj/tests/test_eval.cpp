#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ppf/dataset.hpp"
#include "ppf/errors.hpp"
#include "ppf/eval.hpp"
#include "ppf/rng.hpp"

using namespace ppf;

namespace {

RdCurve synthetic_curve(double top_rate, double ratio, double q0, double dq, int n = 7) {
    RdCurve c;
    double rate = top_rate;
    for (int i = 0; i < n; ++i) {
        c.qp.push_back(kQpValues[static_cast<std::size_t>(i)]);
        c.points.push_back(RdPoint{rate, q0 + dq * i});
        rate *= ratio;
    }
    return c;
}

RdCurve scale_rates(RdCurve c, double factor) {
    for (RdPoint& p : c.points) p.rate_bpp *= factor;
    return c;
}

FilterArch tiny_arch() {
    FilterArch a;
    a.base_channels = 2;
    a.res_blocks = 1;
    return a;
}

FilterBank offset_bank(const FilterArch& arch, const std::vector<double>& biases) {
    FilterBank bank;
    bank.arch = arch;
    for (std::size_t j = 0; j < biases.size(); ++j) {
        FilterParams f;
        f.layers = make_filter_layers(arch);
        f.id = static_cast<int>(j) + 1;
        f.layers.back().bias[0] = biases[j];
        bank.filters.push_back(std::move(f));
    }
    return bank;
}

std::vector<ImagePlane> small_dataset(int n, int size, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ImagePlane> out;
    for (int i = 0; i < n; ++i)
        out.push_back(i % 2 ? make_texture_image(size, rng) : make_smooth_image(size, rng));
    return out;
}

}  // namespace

TEST_CASE("psnr formula and cap") {
    const ImagePlane a(8, 8, 0.25);
    CHECK(psnr(a, a) == 100.0);

    ImagePlane b = a;
    for (double& x : b.v) x += 0.01;  // mse 1e-4
    CHECK(psnr(a, b) == doctest::Approx(40.0).epsilon(1e-9));

    ImagePlane c = a;
    for (double& x : c.v) x += 0.1;  // mse 1e-2
    CHECK(psnr(a, c) == doctest::Approx(20.0).epsilon(1e-9));

    CHECK(psnr_from_mse(1e-30) == 100.0);  // capped
}

TEST_CASE("bd-rate of identical curves is zero") {
    const RdCurve c = synthetic_curve(4.0, 0.5, 30.0, 3.0);
    CHECK(std::fabs(bd_rate(c, c)) <= 1e-9);
}

TEST_CASE("constant rate scaling gives the closed-form bd-rate") {
    const RdCurve anchor = synthetic_curve(4.0, 0.5, 30.0, 3.0);
    CHECK(bd_rate(anchor, scale_rates(anchor, 2.0)) == doctest::Approx(100.0).epsilon(1e-3));
    CHECK(bd_rate(anchor, scale_rates(anchor, 0.5)) == doctest::Approx(-50.0).epsilon(1e-3));
}

TEST_CASE("bd-rate sign flips when anchor and test swap") {
    const RdCurve anchor = synthetic_curve(4.0, 0.55, 28.0, 3.0);
    RdCurve test = synthetic_curve(4.0, 0.55, 28.0, 3.0);
    for (std::size_t i = 0; i < test.points.size(); ++i) {
        test.points[i].rate_bpp *= 1.0 + 0.08 * static_cast<double>(i);
        test.points[i].quality += 0.4;
    }
    const double forward = bd_rate(anchor, test);
    const double backward = bd_rate(test, anchor);
    CHECK(forward > 0.0);
    CHECK(backward < 0.0);
}

TEST_CASE("bd-rate rejects invalid inputs") {
    RdCurve three = synthetic_curve(4.0, 0.5, 30.0, 3.0, 3);
    CHECK_THROWS_AS(bd_rate(three, three), EvalError);

    const RdCurve lo = synthetic_curve(4.0, 0.5, 10.0, 2.0);
    const RdCurve hi = synthetic_curve(4.0, 0.5, 50.0, 2.0);
    CHECK_THROWS_AS(bd_rate(lo, hi), EvalError);

    RdCurve rising = synthetic_curve(4.0, 0.5, 30.0, 3.0);
    rising.points[3].rate_bpp = rising.points[2].rate_bpp * 2.0;
    CHECK_THROWS_AS(bd_rate(rising, rising), EvalError);

    RdCurve flat_quality = synthetic_curve(4.0, 0.5, 30.0, 0.0);
    CHECK_THROWS_AS(bd_rate(flat_quality, flat_quality), EvalError);
}

TEST_CASE("usage rows live on the simplex") {
    const FilterArch arch = tiny_arch();
    const FilterBank bank = offset_bank(arch, {0.0, 0.02, -0.02});
    const std::vector<ImagePlane> images = small_dataset(3, 16, 91);
    const UsageTable table = usage_stats(images, bank, 8, Metric::mse, {22, 37, 52});
    REQUIRE(table.rows.size() == 3);
    for (const std::vector<double>& row : table.rows) {
        double sum = 0.0;
        for (double x : row) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("a lone filter gets full usage, a dominated rival none") {
    const FilterArch arch = tiny_arch();
    const std::vector<ImagePlane> images = small_dataset(2, 16, 92);

    const FilterBank solo = offset_bank(arch, {0.0});
    const UsageTable solo_table = usage_stats(images, solo, 8, Metric::mse, {27, 47});
    for (const auto& row : solo_table.rows) CHECK(row[0] == 1.0);

    const FilterBank pair = offset_bank(arch, {0.0, 0.6});
    const UsageTable pair_table = usage_stats(images, pair, 8, Metric::mse, {27, 47});
    for (const auto& row : pair_table.rows) {
        CHECK(row[0] == 1.0);
        CHECK(row[1] == 0.0);
    }
    // cross-check one case exhaustively per block
    const QpLevel qp(27);
    for (const ImagePlane& img : images) {
        const CodecResult coded = encode_decode_padded(img, qp);
        const FilterIndexMap map =
            select_filters(img, coded.reconstruction, qp, pair, 8, Metric::mse);
        for (int r = 0; r < map.rows; ++r)
            for (int c = 0; c < map.cols; ++c) {
                const ImagePlane bx = copy_block(img, r * 8, c * 8, 8, 8);
                const ImagePlane brec =
                    copy_block(coded.reconstruction, r * 8, c * 8, 8, 8);
                const double l0 = distortion(
                    filter_apply_padded(brec, qp, pair.filters[0], arch), bx, Metric::mse);
                const double l1 = distortion(
                    filter_apply_padded(brec, qp, pair.filters[1], arch), bx, Metric::mse);
                CHECK(l0 <= l1);
                CHECK(map.at(r, c) == 0);
            }
    }
}

TEST_CASE("anchor curves decrease in rate as qp rises; filtered rates line up") {
    const std::vector<ImagePlane> images = small_dataset(4, 16, 93);
    const RdCurve anchor =
        build_rd_curve(images, RdMode::anchor, BankSelection{}, 0, Metric::mse);
    anchor.validate();
    for (std::size_t i = 1; i < anchor.points.size(); ++i)
        CHECK(anchor.points[i].rate_bpp < anchor.points[i - 1].rate_bpp);

    const FilterArch arch = tiny_arch();
    const FilterBank bank = offset_bank(arch, {0.0, 0.01, -0.01, 0.02});
    BankSelection sel;
    sel.bank = &bank;

    // whole-image filtering signals nothing, so rates match the anchor
    const RdCurve whole =
        build_rd_curve(images, RdMode::whole_image, sel, 0, Metric::mse);
    for (std::size_t i = 0; i < whole.points.size(); ++i)
        CHECK(whole.points[i].rate_bpp == anchor.points[i].rate_bpp);

    // block-wise adds exactly rows*cols*2 bits per image for M=4
    const RdCurve blockwise =
        build_rd_curve(images, RdMode::block_wise, sel, 8, Metric::mse);
    const double pixels = 4.0 * 16.0 * 16.0;
    const double side_bpp = 4.0 * (2 * 2 * 2) / pixels;
    for (std::size_t i = 0; i < blockwise.points.size(); ++i)
        CHECK(blockwise.points[i].rate_bpp - anchor.points[i].rate_bpp ==
              doctest::Approx(side_bpp).epsilon(1e-12));
}

TEST_CASE("independent banks pick the whole-image filter by qp range") {
    const FilterArch arch = tiny_arch();
    // the {52} range filter shifts everything, all others are identities
    const FilterBank bank = offset_bank(arch, {0.0, 0.0, 0.0, 0.4});
    BankSelection sel;
    sel.bank = &bank;
    sel.by_qp_range = true;

    const std::vector<ImagePlane> images = small_dataset(2, 16, 94);
    const QpLevel qp52(52);
    const CodecResult coded = encode_decode_padded(images[0], qp52);

    // the designated filter is used even when it is worse than a rival
    const ImagePlane shifted =
        filter_apply_padded(coded.reconstruction, qp52, bank.filters[3], arch);
    const RdCurve curve = build_rd_curve({images[0]}, RdMode::whole_image, sel, 0,
                                         Metric::mse, QualityAxis::psnr);
    const double expect_quality =
        psnr_from_mse(distortion(shifted, images[0], Metric::mse));
    CHECK(curve.points.back().quality == doctest::Approx(expect_quality).epsilon(1e-12));
}

TEST_CASE("empty datasets are rejected") {
    const FilterArch arch = tiny_arch();
    const FilterBank bank = offset_bank(arch, {0.0});
    CHECK_THROWS_AS(usage_stats({}, bank, 8, Metric::mse), EvalError);
    CHECK_THROWS_AS(build_rd_curve({}, RdMode::anchor, BankSelection{}, 0, Metric::mse),
                    EvalError);
}
