#include "ppf/eval.hpp"

#include <algorithm>
#include <cmath>

#include "ppf/errors.hpp"

namespace ppf {

void RdCurve::validate() const {
    if (qp.size() != points.size()) throw EvalError("rd curve: qp/point count mismatch");
    if (points.size() < 4)
        throw EvalError("rd curve: need at least 4 points for the cubic fit, got " +
                        std::to_string(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!(points[i].rate_bpp > 0.0))
            throw EvalError("rd curve: non-positive rate at qp " + std::to_string(qp[i]));
        if (i) {
            if (qp[i] <= qp[i - 1]) throw EvalError("rd curve: qp values must be ascending");
            if (!(points[i].rate_bpp < points[i - 1].rate_bpp))
                throw EvalError("rd curve: rate must strictly decrease as qp increases (qp " +
                                std::to_string(qp[i]) + ")");
        }
    }
}

double psnr_from_mse(double mse, double cap) {
    if (mse <= 0.0) return cap;
    return std::min(cap, -10.0 * std::log10(mse));
}

double psnr(const ImagePlane& a, const ImagePlane& b, double cap) {
    return psnr_from_mse(distortion(a, b, Metric::mse), cap);
}

namespace {

// cubic least squares of y over a centered/scaled abscissa
struct CubicFit {
    double mid = 0.0, half = 1.0;
    double coef[4] = {0, 0, 0, 0};

    double integral(double qa, double qb) const {
        // antiderivative of the polynomial in u, scaled back to q
        auto anti = [&](double u) {
            return coef[0] * u + coef[1] * u * u / 2.0 + coef[2] * u * u * u / 3.0 +
                   coef[3] * u * u * u * u / 4.0;
        };
        const double ua = (qa - mid) / half;
        const double ub = (qb - mid) / half;
        return half * (anti(ub) - anti(ua));
    }
};

CubicFit fit_cubic(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    CubicFit fit;
    fit.mid = (*lo_it + *hi_it) / 2.0;
    fit.half = (*hi_it - *lo_it) / 2.0;
    if (!(fit.half > 0.0)) throw EvalError("bd_rate: degenerate quality range in fit");

    double s[7] = {0, 0, 0, 0, 0, 0, 0};
    double b[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (xs[i] - fit.mid) / fit.half;
        double up = 1.0;
        for (int p = 0; p < 7; ++p) {
            s[p] += up;
            if (p < 4) b[p] += ys[i] * up;
            up *= u;
        }
    }
    double a[4][5];
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) a[r][c] = s[r + c];
        a[r][4] = b[r];
    }
    // Gaussian elimination with partial pivoting
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (std::fabs(a[piv][col]) < 1e-12)
            throw EvalError("bd_rate: ill-conditioned polynomial fit");
        if (piv != col)
            for (int c = 0; c < 5; ++c) std::swap(a[piv][c], a[col][c]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 5; ++c) a[r][c] -= f * a[col][c];
        }
    }
    for (int r = 0; r < 4; ++r) fit.coef[r] = a[r][4] / a[r][r];
    return fit;
}

}  // namespace

double bd_rate(const RdCurve& anchor, const RdCurve& test) {
    anchor.validate();
    test.validate();

    auto log_rates = [](const RdCurve& c) {
        std::vector<double> ys;
        ys.reserve(c.points.size());
        for (const RdPoint& p : c.points) ys.push_back(std::log(p.rate_bpp));
        return ys;
    };
    auto qualities = [](const RdCurve& c) {
        std::vector<double> xs;
        xs.reserve(c.points.size());
        for (const RdPoint& p : c.points) xs.push_back(p.quality);
        return xs;
    };

    const std::vector<double> qa = qualities(anchor), qt = qualities(test);
    const double lo = std::max(*std::min_element(qa.begin(), qa.end()),
                               *std::min_element(qt.begin(), qt.end()));
    const double hi = std::min(*std::max_element(qa.begin(), qa.end()),
                               *std::max_element(qt.begin(), qt.end()));
    if (!(hi > lo)) throw EvalError("bd_rate: quality ranges do not overlap");

    const CubicFit fa = fit_cubic(qa, log_rates(anchor));
    const CubicFit ft = fit_cubic(qt, log_rates(test));
    const double avg = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
    return (std::exp(avg) - 1.0) * 100.0;
}

UsageTable usage_stats(const std::vector<ImagePlane>& images, const FilterBank& bank,
                       int block, Metric metric, const std::vector<int>& qps) {
    if (images.empty()) throw EvalError("usage_stats: empty dataset");
    if (qps.empty()) throw EvalError("usage_stats: empty qp list");
    UsageTable table;
    table.qps = qps;
    for (int qp_value : qps) {
        const QpLevel qp(qp_value);
        std::vector<double> counts(static_cast<std::size_t>(bank.size()), 0.0);
        double total = 0.0;
        for (const ImagePlane& img : images) {
            const CodecResult coded = encode_decode_padded(img, qp);
            const FilterIndexMap map =
                select_filters(img, coded.reconstruction, qp, bank, block, metric);
            for (std::uint8_t j : map.indices) {
                counts[j] += 1.0;
                total += 1.0;
            }
        }
        for (double& c : counts) c /= total;
        table.rows.push_back(std::move(counts));
    }
    return table;
}

RdCurve build_rd_curve(const std::vector<ImagePlane>& images, RdMode mode,
                       const BankSelection& sel, int block, Metric metric, QualityAxis axis,
                       const std::vector<int>& qps) {
    if (images.empty()) throw EvalError("build_rd_curve: empty dataset");
    if (mode != RdMode::anchor && (sel.bank == nullptr || sel.bank->size() < 1))
        throw EvalError("build_rd_curve: filtered modes need a filter bank");
    if (sel.by_qp_range) validate_partition(sel.partition);

    RdCurve curve;
    for (int qp_value : qps) {
        const QpLevel qp(qp_value);
        double bits = 0.0;
        double sq_err = 0.0;       // pooled squared error (psnr axis)
        double proxy_sum = 0.0;    // pixel-weighted proxy distance (proxy axis)
        double pixels = 0.0;

        for (const ImagePlane& img : images) {
            const CodecResult coded = encode_decode_padded(img, qp);
            bits += coded.rate_bits;
            ImagePlane out = coded.reconstruction;
            if (mode == RdMode::whole_image) {
                if (sel.by_qp_range) {
                    const int j = partition_index(sel.partition, qp);
                    out = filter_apply_padded(out, qp, sel.bank->filters[j], sel.bank->arch);
                } else {
                    int best = 0;
                    double best_loss = 0.0;
                    ImagePlane best_out;
                    for (int j = 0; j < sel.bank->size(); ++j) {
                        ImagePlane cand =
                            filter_apply_padded(out, qp, sel.bank->filters[j], sel.bank->arch);
                        const double l = distortion(cand, img, metric);
                        if (j == 0 || l < best_loss) {
                            best = j;
                            best_loss = l;
                            best_out = std::move(cand);
                        }
                    }
                    (void)best;
                    out = std::move(best_out);
                }
            } else if (mode == RdMode::block_wise) {
                const FilterIndexMap map =
                    select_filters(img, coded.reconstruction, qp, *sel.bank, block, metric);
                out = apply_blockwise(coded.reconstruction, qp, *sel.bank, map, block);
                bits += static_cast<double>(map.bit_cost());
            }
            const double n = static_cast<double>(img.count());
            if (axis == QualityAxis::psnr)
                sq_err += distortion(out, img, Metric::mse) * n;
            else
                proxy_sum += distortion(out, img, Metric::proxy) * n;
            pixels += n;
        }

        RdPoint pt;
        pt.rate_bpp = bits / pixels;
        pt.quality = axis == QualityAxis::psnr ? psnr_from_mse(sq_err / pixels)
                                               : -(proxy_sum / pixels);
        curve.qp.push_back(qp_value);
        curve.points.push_back(pt);
    }
    curve.validate();
    return curve;
}

}  // namespace ppf
