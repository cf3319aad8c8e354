#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ppf/blockwise.hpp"
#include "ppf/codec.hpp"
#include "ppf/filter.hpp"
#include "ppf/tensor.hpp"
#include "ppf/trainer.hpp"

namespace ppf {

struct RdPoint {
    double rate_bpp;  // codec rate plus side information, per pixel
    double quality;   // increasing-is-better (PSNR dB, or negated proxy distance)
};

// One point per qp, ordered by ascending qp; rates must be strictly
// decreasing along the curve.
struct RdCurve {
    std::vector<int> qp;
    std::vector<RdPoint> points;
    void validate() const;
};

constexpr double kPsnrCap = 100.0;

// Peak-1.0 PSNR in dB, capped for (near-)identical inputs.
double psnr(const ImagePlane& a, const ImagePlane& b, double cap = kPsnrCap);
double psnr_from_mse(double mse, double cap = kPsnrCap);

// Average percentage rate difference between two curves at equal quality:
// least-squares cubics of log rate over quality, integrated over the
// overlapping quality interval. Negative means `test` saves rate.
double bd_rate(const RdCurve& anchor, const RdCurve& test);

struct UsageTable {
    std::vector<int> qps;
    std::vector<std::vector<double>> rows;  // per qp, per filter, sums to 1
};

// Block selection statistics over a dataset: fraction of blocks each
// filter wins at every qp.
UsageTable usage_stats(const std::vector<ImagePlane>& images, const FilterBank& bank,
                       int block, Metric metric,
                       const std::vector<int>& qps = {22, 27, 32, 37, 42, 47, 52});

enum class RdMode { anchor, whole_image, block_wise };

enum class QualityAxis { psnr, neg_proxy };

// How a bank picks the filter for whole-image application: lowest loss per
// image, or the filter designated by the qp range (independent banks).
struct BankSelection {
    const FilterBank* bank = nullptr;
    bool by_qp_range = false;
    QpRangePartition partition = default_qp_partition();
};

RdCurve build_rd_curve(const std::vector<ImagePlane>& images, RdMode mode,
                       const BankSelection& sel, int block, Metric metric,
                       QualityAxis axis = QualityAxis::psnr,
                       const std::vector<int>& qps = {22, 27, 32, 37, 42, 47, 52});

}  // namespace ppf
