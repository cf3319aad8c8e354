#pragma once

#include <map>
#include <string>
#include <vector>

#include "ppf/dataset.hpp"
#include "ppf/eval.hpp"
#include "ppf/trainer.hpp"

namespace ppf {

enum class QpAssign { cycle, all };

// Full experiment description: dataset, training hyperparameters, and
// evaluation setup.
struct ExperimentConfig {
    std::string dataset_dir;
    std::string out_dir;
    TrainConfig train;
    std::vector<TrainMode> modes = {TrainMode::single, TrainMode::independent,
                                    TrainMode::joint, TrainMode::hard_min};
    std::vector<int> block_sizes = {16, 32};
    std::vector<int> qps = {22, 27, 32, 37, 42, 47, 52};
    QpAssign qp_assign = QpAssign::cycle;
    double test_fraction = 0.1;
    int synthetic_n = 0;  // when > 0, generate this many images per class
    int synthetic_size = 32;

    void validate() const;
};

// Flat key=value file with '#' comments. Unknown keys are errors.
ExperimentConfig parse_config_file(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& key,
                       const std::string& value);
std::string render_config(const ExperimentConfig& cfg);

struct BuiltSamples {
    std::vector<TrainingSample> samples;
    std::vector<int> source;  // manifest entry index per sample
};

// Compresses deterministic patch crops of the selected manifest entries.
// qp_assign == cycle gives image i the i-th qp (mod list size); all pairs
// every image with every qp.
BuiltSamples build_training_samples(const DatasetManifest& manifest,
                                    const std::vector<int>& indices,
                                    const ExperimentConfig& cfg);

std::vector<ImagePlane> load_images(const DatasetManifest& manifest,
                                    const std::vector<int>& indices);

struct MethodResult {
    std::string label;
    TrainMode mode;
    int block;  // 0 = whole image
    double bd_rate_percent;
};

struct ExperimentReport {
    std::vector<MethodResult> rows;
    std::string out_dir;
};

// Trains every requested mode, builds anchor/whole-image/block-wise rate
// curves on the test split, computes BD-rates against the anchor, and
// writes banks, logs, rd_curves.csv, bd_rate.json, usage.csv and a
// summary table. On failure a FAILED.txt marker is left next to any
// partial artifacts.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace ppf
