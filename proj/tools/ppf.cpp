// Command line front end: dataset synthesis, filter bank training, RD
// evaluation, block selection statistics, and the full method comparison.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ppf/dataset.hpp"
#include "ppf/errors.hpp"
#include "ppf/eval.hpp"
#include "ppf/experiment.hpp"
#include "ppf/image_io.hpp"

namespace fs = std::filesystem;
using namespace ppf;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string data_dir;
    std::string out;
    std::string mode;
    std::string metric;
    std::vector<int> block_sizes;
    std::uint64_t seed = 0;
    int synthetic = -1;
    int epochs = -1;
    int filters = -1;

    CLI::Option* config_opt = nullptr;
    CLI::Option* data_opt = nullptr;
    CLI::Option* out_opt = nullptr;
    CLI::Option* mode_opt = nullptr;
    CLI::Option* metric_opt = nullptr;
    CLI::Option* block_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* synthetic_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;
    CLI::Option* filters_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_training) {
    o.config_opt = cmd->add_option("--config", o.config_path, "key=value config file");
    o.data_opt = cmd->add_option("--data", o.data_dir, "dataset directory (binary PGM)");
    o.out_opt = cmd->add_option("--out", o.out, "output directory");
    o.metric_opt = cmd->add_option("--metric", o.metric, "distortion metric: mse or proxy");
    o.block_opt = cmd->add_option("--block-size", o.block_sizes, "block sizes to evaluate");
    o.seed_opt = cmd->add_option("--seed", o.seed, "experiment seed");
    if (with_training) {
        o.mode_opt = cmd->add_option("--mode", o.mode,
                                     "training mode: single, independent, joint, hard-min");
        o.synthetic_opt = cmd->add_option("--synthetic", o.synthetic,
                                          "generate N synthetic images per class instead of "
                                          "reading --data");
        o.epochs_opt = cmd->add_option("--epochs", o.epochs, "training epochs");
        o.filters_opt = cmd->add_option("--filters", o.filters, "number of filters M");
    }
}

ExperimentConfig resolve_config(const CommonOpts& o) {
    ExperimentConfig cfg;
    if (o.config_opt->count()) cfg = parse_config_file(o.config_path);
    if (o.data_opt->count()) cfg.dataset_dir = o.data_dir;
    if (o.out_opt->count()) cfg.out_dir = o.out;
    if (o.metric_opt->count()) cfg.train.metric = parse_metric(o.metric);
    if (o.block_opt->count()) cfg.block_sizes = o.block_sizes;
    if (o.seed_opt->count()) cfg.train.seed = o.seed;
    if (o.mode_opt && o.mode_opt->count()) cfg.train.mode = parse_train_mode(o.mode);
    if (o.synthetic_opt && o.synthetic_opt->count()) cfg.synthetic_n = o.synthetic;
    if (o.epochs_opt && o.epochs_opt->count()) cfg.train.epochs = o.epochs;
    if (o.filters_opt && o.filters_opt->count()) cfg.train.filters = o.filters;
    return cfg;
}

// Dataset for the standalone train/eval/stats commands: all images, no split.
std::vector<ImagePlane> load_all(const std::string& dir) {
    const DatasetManifest m = ingest(dir);
    std::vector<ImagePlane> out;
    out.reserve(m.entries.size());
    for (const ImageEntry& e : m.entries) out.push_back(read_pgm(e.path));
    return out;
}

int cmd_synth(const std::string& out, int n, int size, std::uint64_t seed) {
    synthesize_dataset(out, n, size, seed);
    std::cout << "wrote " << 2 * n << " images (" << size << "x" << size << ") to " << out
              << "\n";
    return 0;
}

int cmd_train(const CommonOpts& o) {
    ExperimentConfig cfg = resolve_config(o);
    if (cfg.out_dir.empty()) throw ConfigError("train: --out is required");
    fs::create_directories(cfg.out_dir);
    if (cfg.synthetic_n > 0) {
        const fs::path dir = fs::path(cfg.out_dir) / "synthetic_data";
        synthesize_dataset(dir.string(), cfg.synthetic_n, cfg.synthetic_size, cfg.train.seed);
        cfg.dataset_dir = dir.string();
    }
    if (cfg.dataset_dir.empty()) throw ConfigError("train: --data or --synthetic is required");

    DatasetManifest manifest = ingest(cfg.dataset_dir);
    std::vector<int> all(manifest.entries.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    const BuiltSamples built = build_training_samples(manifest, all, cfg);

    const TrainResult tr = train(cfg.train, built.samples);
    const std::string tag = train_mode_name(cfg.train.mode);
    const fs::path bank_path = fs::path(cfg.out_dir) / ("bank_" + tag + ".fbnk");
    save_bank_file(bank_path.string(), tr.bank);
    {
        std::ofstream logf(fs::path(cfg.out_dir) / ("train_" + tag + ".csv"),
                           std::ios::trunc);
        write_train_log_csv(logf, tr.log);
    }
    std::cout << "trained " << tr.bank.size() << " filter(s) on " << built.samples.size()
              << " samples; bank written to " << bank_path.string() << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& bank_path, bool qp_range_select) {
    ExperimentConfig cfg = resolve_config(o);
    if (cfg.dataset_dir.empty()) throw ConfigError("eval: --data is required");
    if (cfg.out_dir.empty()) throw ConfigError("eval: --out is required");
    fs::create_directories(cfg.out_dir);

    const FilterBank bank = load_bank_file(bank_path);
    const std::vector<ImagePlane> images = load_all(cfg.dataset_dir);

    BankSelection sel;
    sel.bank = &bank;
    sel.by_qp_range = qp_range_select;

    std::vector<std::pair<std::string, RdCurve>> curves;
    const RdCurve anchor = build_rd_curve(images, RdMode::anchor, BankSelection{}, 0,
                                          cfg.train.metric, QualityAxis::psnr, cfg.qps);
    curves.emplace_back("anchor", anchor);
    curves.emplace_back("whole", build_rd_curve(images, RdMode::whole_image, sel, 0,
                                                cfg.train.metric, QualityAxis::psnr, cfg.qps));
    for (int b : cfg.block_sizes)
        curves.emplace_back("block" + std::to_string(b),
                            build_rd_curve(images, RdMode::block_wise, sel, b,
                                           cfg.train.metric, QualityAxis::psnr, cfg.qps));

    std::ofstream csv(fs::path(cfg.out_dir) / "rd_curves.csv", std::ios::trunc);
    csv << "mode,qp,rate_bpp,quality\n";
    char buf[64];
    for (const auto& [label, curve] : curves)
        for (std::size_t i = 0; i < curve.points.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", curve.points[i].rate_bpp,
                          curve.points[i].quality);
            csv << label << "," << curve.qp[i] << "," << buf << "\n";
        }

    nlohmann::ordered_json j;
    j["anchor"] = "codec without post-processing";
    j["results"] = nlohmann::ordered_json::array();
    for (std::size_t ci = 1; ci < curves.size(); ++ci) {
        nlohmann::ordered_json row;
        row["curve"] = curves[ci].first;
        row["bd_rate_percent"] = bd_rate(anchor, curves[ci].second);
        j["results"].push_back(std::move(row));
        std::cout << curves[ci].first << ": BD-rate "
                  << j["results"].back()["bd_rate_percent"].get<double>() << "%\n";
    }
    std::ofstream jf(fs::path(cfg.out_dir) / "bd_rate.json", std::ios::trunc);
    jf << j.dump(2) << "\n";
    return 0;
}

int cmd_stats(const CommonOpts& o, const std::string& bank_path,
              const std::string& out_file) {
    ExperimentConfig cfg = resolve_config(o);
    if (cfg.dataset_dir.empty()) throw ConfigError("stats: --data is required");
    const FilterBank bank = load_bank_file(bank_path);
    const std::vector<ImagePlane> images = load_all(cfg.dataset_dir);
    const int block = cfg.block_sizes.front();
    const UsageTable usage = usage_stats(images, bank, block, cfg.train.metric, cfg.qps);

    std::ofstream f(out_file, std::ios::trunc);
    if (!f) throw IoError("cannot open file for writing: " + out_file);
    f << "qp,filter,fraction\n";
    char buf[40];
    for (std::size_t r = 0; r < usage.rows.size(); ++r)
        for (std::size_t j = 0; j < usage.rows[r].size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", usage.rows[r][j]);
            f << usage.qps[r] << "," << j << "," << buf << "\n";
        }
    std::cout << "usage table (" << usage.qps.size() << " qps x " << bank.size()
              << " filters) written to " << out_file << "\n";
    return 0;
}

int cmd_compare(const CommonOpts& o) {
    const ExperimentConfig cfg = resolve_config(o);
    const ExperimentReport report = run_experiment(cfg);
    std::cout << "BD-rate vs anchor (PSNR axis):\n";
    for (const MethodResult& r : report.rows) {
        char bd[32];
        std::snprintf(bd, sizeof bd, "%+.2f%%", r.bd_rate_percent);
        std::cout << "  " << r.label << ": " << bd << "\n";
    }
    std::cout << "artifacts in " << report.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Content-adaptive post-processing filter banks for a block-transform codec"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a synthetic two-class dataset");
    std::string synth_out;
    int synth_n = 100, synth_size = 32;
    std::uint64_t synth_seed = 1;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--n", synth_n, "images per class");
    synth->add_option("--size", synth_size, "image side (multiple of 8)");
    synth->add_option("--seed", synth_seed, "generator seed");

    auto* train_cmd = app.add_subcommand("train", "train one filter bank");
    CommonOpts train_opts;
    add_common(train_cmd, train_opts, true);

    auto* eval_cmd = app.add_subcommand("eval", "RD curves and BD-rate for a trained bank");
    CommonOpts eval_opts;
    add_common(eval_cmd, eval_opts, false);
    std::string eval_bank;
    bool eval_qp_range = false;
    eval_cmd->add_option("--bank", eval_bank, "filter bank file")->required();
    eval_cmd->add_flag("--qp-range-select", eval_qp_range,
                       "pick the whole-image filter by qp range (independent banks)");

    auto* stats_cmd = app.add_subcommand("stats", "per-qp filter usage statistics");
    CommonOpts stats_opts;
    add_common(stats_cmd, stats_opts, false);
    std::string stats_bank, stats_out = "usage.csv";
    stats_cmd->add_option("--bank", stats_bank, "filter bank file")->required();
    stats_cmd->add_option("--out-file", stats_out, "output csv path");

    auto* compare_cmd =
        app.add_subcommand("compare", "train all modes and compare BD-rates against the anchor");
    CommonOpts compare_opts;
    add_common(compare_cmd, compare_opts, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(synth_out, synth_n, synth_size, synth_seed);
        if (train_cmd->parsed()) return cmd_train(train_opts);
        if (eval_cmd->parsed()) return cmd_eval(eval_opts, eval_bank, eval_qp_range);
        if (stats_cmd->parsed()) return cmd_stats(stats_opts, stats_bank, stats_out);
        if (compare_cmd->parsed()) return cmd_compare(compare_opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
