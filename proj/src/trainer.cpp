#include "ppf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ppf/errors.hpp"
#include "ppf/rng.hpp"

namespace ppf {

namespace {

// Pinned temperature realizing the hard-min objective as the near-zero
// limit of the weighted relaxation.
constexpr double kHardMinTemperature = 1e-8;

std::string fmt_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string range_str(const std::vector<int>& qps) {
    std::string s = "{";
    for (std::size_t i = 0; i < qps.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(qps[i]);
    }
    return s + "}";
}

}  // namespace

AssignmentWeights alpha_weights(const std::vector<double>& losses, double T) {
    if (!(T > 0.0))
        throw ConfigError("alpha_weights: temperature must be positive, got " + fmt_g17(T));
    if (losses.empty()) throw ConfigError("alpha_weights: empty loss vector");
    for (std::size_t j = 0; j < losses.size(); ++j)
        if (!std::isfinite(losses[j]))
            throw NumericError("alpha_weights: non-finite loss at index " + std::to_string(j));

    const double lmin = *std::min_element(losses.begin(), losses.end());
    AssignmentWeights w;
    w.alpha.resize(losses.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < losses.size(); ++j) {
        w.alpha[j] = std::exp(-(losses[j] - lmin) / T);
        sum += w.alpha[j];
    }
    for (double& a : w.alpha) a /= sum;
    return w;
}

double temperature(double t0, double beta, int drop_step, int epoch) {
    if (!(t0 > 0.0)) throw ConfigError("temperature: t0 must be positive");
    if (!(beta > 0.0)) throw ConfigError("temperature: beta must be positive");
    if (drop_step < 1) throw ConfigError("temperature: drop step must be >= 1");
    if (epoch < 0) throw ConfigError("temperature: epoch must be >= 0");
    const int drops = epoch / drop_step;
    return t0 / std::pow(beta, static_cast<double>(drops));
}

QpRangePartition default_qp_partition() { return {{22, 27}, {32, 37}, {42, 47}, {52}}; }

void validate_partition(const QpRangePartition& part) {
    if (part.empty()) throw ConfigError("qp partition: no ranges");
    std::vector<int> seen;
    for (const auto& range : part) {
        if (range.empty()) throw ConfigError("qp partition: empty range");
        for (int qp : range) {
            QpLevel check(qp);  // validates membership in the qp set
            if (std::find(seen.begin(), seen.end(), qp) != seen.end())
                throw ConfigError("qp partition: qp " + std::to_string(qp) +
                                  " appears in more than one range");
            seen.push_back(qp);
        }
    }
    if (seen.size() != kQpValues.size())
        throw ConfigError("qp partition: ranges must jointly cover all " +
                          std::to_string(kQpValues.size()) + " qp values");
}

int partition_index(const QpRangePartition& part, QpLevel qp) {
    for (std::size_t f = 0; f < part.size(); ++f)
        if (std::find(part[f].begin(), part[f].end(), qp.value()) != part[f].end())
            return static_cast<int>(f);
    throw ConfigError("qp partition: qp " + std::to_string(qp.value()) + " not covered");
}

TrainMode parse_train_mode(const std::string& name) {
    if (name == "joint") return TrainMode::joint;
    if (name == "independent") return TrainMode::independent;
    if (name == "single") return TrainMode::single;
    if (name == "hard-min" || name == "hard_min") return TrainMode::hard_min;
    throw ConfigError("unknown training mode '" + name + "'");
}

const char* train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::joint: return "joint";
        case TrainMode::independent: return "independent";
        case TrainMode::single: return "single";
        case TrainMode::hard_min: return "hard-min";
    }
    return "?";
}

int TrainConfig::effective_filters() const {
    if (mode == TrainMode::single) return 1;
    if (mode == TrainMode::independent) return static_cast<int>(partition.size());
    return filters;
}

void TrainConfig::validate() const {
    arch.validate();
    if (filters < 1) throw ConfigError("train config: filters must be >= 1");
    if (!(t0 > 0.0)) throw ConfigError("train config: t0 must be > 0");
    if (!(beta > 1.0)) throw ConfigError("train config: beta must be > 1");
    if (drop_step < 1) throw ConfigError("train config: drop step must be >= 1");
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("train config: lr must be > 0");
    if (batch < 1) throw ConfigError("train config: batch must be >= 1");
    if (patch < 8 || patch % 8)
        throw ConfigError("train config: patch must be a positive multiple of 8");
    if (patch % arch.spatial_divisor())
        throw ConfigError("train config: patch " + std::to_string(patch) +
                          " not divisible by 2^depth = " +
                          std::to_string(arch.spatial_divisor()));
    if (mode == TrainMode::independent) {
        validate_partition(partition);
        if (filters != static_cast<int>(partition.size()))
            throw ConfigError("train config: independent mode needs filters == number of qp "
                              "ranges (" +
                              std::to_string(partition.size()) + "), got " +
                              std::to_string(filters));
    }
}

FilterAdam make_filter_adam(const FilterParams& f, double lr) {
    FilterAdam opt(f.layers.size());
    for (LayerAdam& la : opt) {
        la.kernel.lr = lr;
        la.bias.lr = lr;
    }
    return opt;
}

void apply_filter_adam(FilterParams& f, const FilterGrads& grads, FilterAdam& opt,
                       const FilterArch& arch, int filter_id) {
    for (std::size_t li = 0; li < f.layers.size(); ++li) {
        const std::string where =
            "filter " + std::to_string(filter_id) + " " + filter_layer_name(arch, li);
        adam_step(f.layers[li].kernel, grads[li].kernel, opt[li].kernel, where + ".kernel");
        adam_step(f.layers[li].bias, grads[li].bias, opt[li].bias, where + ".bias");
    }
}

StepResult joint_train_step(const std::vector<TrainingSample>& samples,
                            const std::vector<int>& batch, FilterBank& bank, double T,
                            std::vector<FilterAdam>& opt, Metric metric) {
    const int m = bank.size();
    if (batch.empty()) throw ConfigError("joint_train_step: empty batch");
    if (static_cast<int>(opt.size()) != m)
        throw ConfigError("joint_train_step: optimizer states do not match bank size");

    StepResult res;
    res.losses.assign(batch.size(), std::vector<double>(m, 0.0));
    res.alphas.assign(batch.size(), std::vector<double>(m, 0.0));

    std::vector<FilterGrads> grads;
    grads.reserve(static_cast<std::size_t>(m));
    for (const FilterParams& f : bank.filters) grads.push_back(zero_grads(f));

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    std::vector<FilterTrace> traces(static_cast<std::size_t>(m));
    std::vector<ImagePlane> grad_planes(static_cast<std::size_t>(m));

    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const TrainingSample& s = samples[static_cast<std::size_t>(batch[bi])];
        const Tensor4 rec = tensor_from_plane(s.xhat);
        std::vector<double>& lrow = res.losses[bi];
        for (int j = 0; j < m; ++j) {
            const Tensor4 out =
                filter_forward_traced(rec, s.qp, bank.filters[j], bank.arch, traces[j]);
            const ImagePlane outp = plane_from_tensor(out);
            lrow[j] = distortion_with_grad(outp, s.x, metric, grad_planes[j]);
            if (!std::isfinite(lrow[j]))
                throw NumericError("joint_train_step: non-finite loss for sample " +
                                   std::to_string(batch[bi]) + ", filter " +
                                   std::to_string(bank.filters[j].id));
        }
        const AssignmentWeights aw = alpha_weights(lrow, T);
        res.alphas[bi] = aw.alpha;
        // alphas are constants here: no gradient flows through the
        // weight allocation
        for (int j = 0; j < m; ++j) {
            const double scale = aw.alpha[j] * inv_batch;
            if (scale == 0.0) continue;  // underflowed weight, exact zero gradient
            Tensor4 up = tensor_from_plane(grad_planes[j]);
            for (double& u : up.v) u *= scale;
            filter_backward(traces[j], up, bank.filters[j], bank.arch, grads[j]);
        }
    }

    for (int j = 0; j < m; ++j)
        apply_filter_adam(bank.filters[j], grads[j], opt[j], bank.arch, bank.filters[j].id);
    return res;
}

namespace {

TrainResult train_independent(const TrainConfig& cfg,
                              const std::vector<TrainingSample>& samples, FilterBank bank) {
    const QpRangePartition& part = cfg.partition;
    const int m = bank.size();
    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(m));
    for (std::size_t i = 0; i < samples.size(); ++i)
        buckets[static_cast<std::size_t>(partition_index(part, samples[i].qp))].push_back(
            static_cast<int>(i));
    for (int f = 0; f < m; ++f)
        if (buckets[f].empty())
            throw ConfigError("independent mode: qp range " + range_str(part[f]) +
                              " has no samples");

    std::vector<FilterAdam> opt;
    std::vector<Rng> rngs;
    for (int f = 0; f < m; ++f) {
        opt.push_back(make_filter_adam(bank.filters[f], cfg.lr));
        rngs.emplace_back(mix_seed(cfg.seed, 0x1d50ull + static_cast<std::uint64_t>(f)));
    }

    TrainLog log;
    log.filters = m;
    const double total = static_cast<double>(samples.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochLog row;
        row.epoch = epoch;
        row.temperature = 0.0;  // no annealing in this mode
        row.mean_loss.assign(static_cast<std::size_t>(m), 0.0);
        row.share.assign(static_cast<std::size_t>(m), 0.0);
        for (int f = 0; f < m; ++f) {
            std::vector<int>& order = buckets[f];
            rngs[f].shuffle(order);
            double loss_sum = 0.0;
            for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
                const std::size_t stop = std::min(order.size(), start + cfg.batch);
                FilterGrads grads = zero_grads(bank.filters[f]);
                const double inv = 1.0 / static_cast<double>(stop - start);
                for (std::size_t t = start; t < stop; ++t) {
                    const TrainingSample& s = samples[static_cast<std::size_t>(order[t])];
                    FilterTrace trace;
                    const Tensor4 out = filter_forward_traced(
                        tensor_from_plane(s.xhat), s.qp, bank.filters[f], bank.arch, trace);
                    ImagePlane grad_plane;
                    const double l = distortion_with_grad(plane_from_tensor(out), s.x,
                                                          cfg.metric, grad_plane);
                    if (!std::isfinite(l))
                        throw NumericError("independent train: non-finite loss for sample " +
                                           std::to_string(order[t]) + ", filter " +
                                           std::to_string(bank.filters[f].id));
                    loss_sum += l;
                    Tensor4 up = tensor_from_plane(grad_plane);
                    for (double& u : up.v) u *= inv;
                    filter_backward(trace, up, bank.filters[f], bank.arch, grads);
                }
                apply_filter_adam(bank.filters[f], grads, opt[f], bank.arch,
                                  bank.filters[f].id);
            }
            row.mean_loss[f] = loss_sum / static_cast<double>(order.size());
            row.share[f] = static_cast<double>(order.size()) / total;
        }
        log.rows.push_back(std::move(row));
    }
    return TrainResult{std::move(bank), std::move(log)};
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<TrainingSample>& samples) {
    cfg.validate();
    if (samples.empty()) throw ConfigError("train: dataset is empty");
    const int m = cfg.effective_filters();
    FilterBank bank = init_bank(cfg.arch, m, cfg.seed, cfg.distinct_seeds);
    if (cfg.mode == TrainMode::independent)
        return train_independent(cfg, samples, std::move(bank));

    std::vector<FilterAdam> opt;
    for (const FilterParams& f : bank.filters) opt.push_back(make_filter_adam(f, cfg.lr));

    Rng order_rng(mix_seed(cfg.seed, 0x0edeull));
    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    TrainLog log;
    log.filters = m;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double T = cfg.mode == TrainMode::hard_min
                             ? kHardMinTemperature
                             : temperature(cfg.t0, cfg.beta, cfg.drop_step, epoch);
        order_rng.shuffle(order);
        std::vector<double> loss_sum(static_cast<std::size_t>(m), 0.0);
        std::vector<double> alpha_sum(static_cast<std::size_t>(m), 0.0);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch);
            const std::vector<int> chunk(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            const StepResult sr = joint_train_step(samples, chunk, bank, T, opt, cfg.metric);
            for (std::size_t bi = 0; bi < chunk.size(); ++bi)
                for (int j = 0; j < m; ++j) {
                    loss_sum[j] += sr.losses[bi][j];
                    alpha_sum[j] += sr.alphas[bi][j];
                }
        }
        EpochLog row;
        row.epoch = epoch;
        row.temperature = T;
        const double inv_n = 1.0 / static_cast<double>(samples.size());
        for (int j = 0; j < m; ++j) {
            row.mean_loss.push_back(loss_sum[j] * inv_n);
            row.share.push_back(alpha_sum[j] * inv_n);
        }
        log.rows.push_back(std::move(row));
    }
    return TrainResult{std::move(bank), std::move(log)};
}

void write_train_log_csv(std::ostream& os, const TrainLog& log) {
    os << "epoch,temperature";
    for (int j = 0; j < log.filters; ++j) os << ",loss_" << j;
    for (int j = 0; j < log.filters; ++j) os << ",share_" << j;
    os << "\n";
    for (const EpochLog& row : log.rows) {
        os << row.epoch << "," << fmt_g17(row.temperature);
        for (double x : row.mean_loss) os << "," << fmt_g17(x);
        for (double x : row.share) os << "," << fmt_g17(x);
        os << "\n";
    }
}

TrainLog parse_train_log_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("train log: empty input");
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
    }
    if (cols.size() < 4 || cols[0] != "epoch" || cols[1] != "temperature" ||
        (cols.size() - 2) % 2)
        throw ParseError("train log: unexpected header '" + line + "'");
    TrainLog log;
    log.filters = static_cast<int>((cols.size() - 2) / 2);
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(ss, tok, ',')) {
            try {
                vals.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw ParseError("train log: bad value '" + tok + "' on line " +
                                 std::to_string(lineno));
            }
        }
        if (vals.size() != cols.size())
            throw ParseError("train log: wrong column count on line " + std::to_string(lineno));
        EpochLog row;
        row.epoch = static_cast<int>(vals[0]);
        row.temperature = vals[1];
        row.mean_loss.assign(vals.begin() + 2, vals.begin() + 2 + log.filters);
        row.share.assign(vals.begin() + 2 + log.filters, vals.end());
        log.rows.push_back(std::move(row));
    }
    return log;
}

double sample_loss(const TrainingSample& s, const FilterParams& f, const FilterArch& arch,
                   Metric metric) {
    return distortion(filter_apply_padded(s.xhat, s.qp, f, arch), s.x, metric);
}

std::vector<int> assign_argmin(const FilterBank& bank,
                               const std::vector<TrainingSample>& samples, Metric metric) {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const TrainingSample& s : samples) {
        int best = 0;
        double best_loss = sample_loss(s, bank.filters[0], bank.arch, metric);
        for (int j = 1; j < bank.size(); ++j) {
            const double l = sample_loss(s, bank.filters[j], bank.arch, metric);
            if (l < best_loss) {
                best = j;
                best_loss = l;
            }
        }
        out.push_back(best);
    }
    return out;
}

double mean_argmin_distortion(const FilterBank& bank,
                              const std::vector<TrainingSample>& samples, Metric metric) {
    if (samples.empty()) throw ConfigError("mean_argmin_distortion: empty sample set");
    double acc = 0.0;
    for (const TrainingSample& s : samples) {
        double best = sample_loss(s, bank.filters[0], bank.arch, metric);
        for (int j = 1; j < bank.size(); ++j)
            best = std::min(best, sample_loss(s, bank.filters[j], bank.arch, metric));
        acc += best;
    }
    return acc / static_cast<double>(samples.size());
}

}  // namespace ppf
