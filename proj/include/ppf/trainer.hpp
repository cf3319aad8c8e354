#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ppf/adam.hpp"
#include "ppf/codec.hpp"
#include "ppf/filter.hpp"
#include "ppf/tensor.hpp"

namespace ppf {

// Per-sample filter weights on the M-simplex.
struct AssignmentWeights {
    std::vector<double> alpha;
};

// Softmax of the negated losses with temperature T, computed in the
// max-shifted form so T down to 1e-8 cannot overflow. Lower loss means
// higher weight; T -> infinity gives uniform weights, T -> 0 one-hot.
AssignmentWeights alpha_weights(const std::vector<double>& losses, double T);

// Staircase cooling schedule: T0 * beta^(-floor(epoch / drop_step)).
double temperature(double t0, double beta, int drop_step, int epoch);

// Disjoint qp buckets jointly covering the full qp set; used by the
// independent (per-quality-range) training mode.
using QpRangePartition = std::vector<std::vector<int>>;
QpRangePartition default_qp_partition();  // {22,27} {32,37} {42,47} {52}
void validate_partition(const QpRangePartition& part);
int partition_index(const QpRangePartition& part, QpLevel qp);

enum class TrainMode { joint, independent, single, hard_min };
TrainMode parse_train_mode(const std::string& name);
const char* train_mode_name(TrainMode m);

struct TrainConfig {
    FilterArch arch;
    int filters = 4;  // M; forced to 1 in single mode, partition size in independent mode
    double t0 = 1.0;
    double beta = 10.0;
    int drop_step = 5;  // K, in epochs
    int epochs = 30;
    double lr = 2e-4;
    int batch = 8;
    int patch = 32;
    Metric metric = Metric::mse;
    std::uint64_t seed = 1;
    TrainMode mode = TrainMode::joint;
    QpRangePartition partition = default_qp_partition();
    bool distinct_seeds = true;  // per-filter init seed = seed + filter id

    int effective_filters() const;
    void validate() const;
};

struct TrainingSample {
    ImagePlane x;     // clean patch
    ImagePlane xhat;  // codec reconstruction of x at qp
    QpLevel qp;
};

// Adam over one filter: one state per layer kernel and bias.
struct LayerAdam {
    AdamState kernel, bias;
};
using FilterAdam = std::vector<LayerAdam>;
FilterAdam make_filter_adam(const FilterParams& f, double lr);
void apply_filter_adam(FilterParams& f, const FilterGrads& grads, FilterAdam& opt,
                       const FilterArch& arch, int filter_id);

struct StepResult {
    std::vector<std::vector<double>> losses;  // [batch][M]
    std::vector<std::vector<double>> alphas;  // [batch][M]
};

// One competitive step: evaluates every filter on every sample in the
// batch, weights the per-sample losses with alpha_weights(losses, T)
// treated as constants, and takes one Adam step per filter on the batch
// mean of its weighted gradient. Filters whose weight underflows to zero
// still get their Adam step (with zero gradient).
StepResult joint_train_step(const std::vector<TrainingSample>& samples,
                            const std::vector<int>& batch, FilterBank& bank, double T,
                            std::vector<FilterAdam>& opt, Metric metric);

struct EpochLog {
    int epoch;
    double temperature;
    std::vector<double> mean_loss;  // per filter, over the whole epoch
    std::vector<double> share;      // per filter, mean assignment weight
};

struct TrainLog {
    int filters = 0;
    std::vector<EpochLog> rows;
};

void write_train_log_csv(std::ostream& os, const TrainLog& log);
TrainLog parse_train_log_csv(std::istream& is);

struct TrainResult {
    FilterBank bank;
    TrainLog log;
};

// Runs the configured training mode over the sample set. Epochs iterate
// the full set in a seeded shuffled order.
TrainResult train(const TrainConfig& cfg, const std::vector<TrainingSample>& samples);

// Loss of one filter on one sample under the configured metric.
double sample_loss(const TrainingSample& s, const FilterParams& f, const FilterArch& arch,
                   Metric metric);
// Index of the lowest-loss filter per sample (ties toward lower index).
std::vector<int> assign_argmin(const FilterBank& bank,
                               const std::vector<TrainingSample>& samples, Metric metric);
// Mean over samples of the winning filter's loss.
double mean_argmin_distortion(const FilterBank& bank,
                              const std::vector<TrainingSample>& samples, Metric metric);

}  // namespace ppf
