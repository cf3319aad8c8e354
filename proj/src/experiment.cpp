#include "ppf/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ppf/errors.hpp"
#include "ppf/image_io.hpp"

namespace fs = std::filesystem;

namespace ppf {

namespace {

std::string fmt_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

int parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const int x = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer '" + v + "' for key " + key);
    }
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number '" + v + "' for key " + key);
    }
}

std::string mode_file_tag(TrainMode m) {
    std::string tag = train_mode_name(m);
    std::replace(tag.begin(), tag.end(), '-', '_');
    return tag;
}

std::string method_label(TrainMode mode, int filters, int block) {
    std::string base;
    switch (mode) {
        case TrainMode::single: base = "one-filter"; break;
        case TrainMode::independent:
            base = std::to_string(filters) + " independent-filters";
            break;
        case TrainMode::joint: base = std::to_string(filters) + " joint-filters"; break;
        case TrainMode::hard_min:
            base = std::to_string(filters) + " hard-min-filters";
            break;
    }
    if (block > 0)
        base += " (block-wise, " + std::to_string(block) + "x" + std::to_string(block) + ")";
    return base;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open file for writing: " + path.string());
    f << text;
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace

void ExperimentConfig::validate() const {
    train.validate();
    if (out_dir.empty()) throw ConfigError("config: out_dir is required");
    if (synthetic_n == 0 && dataset_dir.empty())
        throw ConfigError("config: dataset_dir is required unless synthetic > 0");
    if (modes.empty()) throw ConfigError("config: at least one training mode is required");
    if (block_sizes.empty()) throw ConfigError("config: at least one block size is required");
    for (int b : block_sizes)
        if (b < 8) throw ConfigError("config: block size must be >= 8");
    if (qps.empty()) throw ConfigError("config: qp list is empty");
    for (int qp : qps) QpLevel check(qp);
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("config: test_fraction must be in (0, 1)");
    if (synthetic_n < 0) throw ConfigError("config: synthetic must be >= 0");
    if (synthetic_n > 0 && (synthetic_size < 8 || synthetic_size % 8))
        throw ConfigError("config: synthetic_size must be a positive multiple of 8");
}

void apply_config_line(ExperimentConfig& cfg, const std::string& key,
                       const std::string& value) {
    if (key == "dataset_dir") cfg.dataset_dir = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "modes") {
        cfg.modes.clear();
        for (const std::string& m : split_csv(value)) cfg.modes.push_back(parse_train_mode(m));
    } else if (key == "block_sizes") {
        cfg.block_sizes.clear();
        for (const std::string& b : split_csv(value))
            cfg.block_sizes.push_back(parse_int(b, key));
    } else if (key == "qps") {
        cfg.qps.clear();
        for (const std::string& q : split_csv(value)) cfg.qps.push_back(parse_int(q, key));
    } else if (key == "qp_assign") {
        if (value == "cycle") cfg.qp_assign = QpAssign::cycle;
        else if (value == "all") cfg.qp_assign = QpAssign::all;
        else throw ConfigError("config: qp_assign must be cycle or all, got '" + value + "'");
    } else if (key == "metric") cfg.train.metric = parse_metric(value);
    else if (key == "seed") cfg.train.seed = static_cast<std::uint64_t>(
                                std::stoull(value));
    else if (key == "test_fraction") cfg.test_fraction = parse_double(value, key);
    else if (key == "synthetic") cfg.synthetic_n = parse_int(value, key);
    else if (key == "synthetic_size") cfg.synthetic_size = parse_int(value, key);
    else if (key == "filters") cfg.train.filters = parse_int(value, key);
    else if (key == "epochs") cfg.train.epochs = parse_int(value, key);
    else if (key == "batch") cfg.train.batch = parse_int(value, key);
    else if (key == "patch") cfg.train.patch = parse_int(value, key);
    else if (key == "lr") cfg.train.lr = parse_double(value, key);
    else if (key == "t0") cfg.train.t0 = parse_double(value, key);
    else if (key == "beta") cfg.train.beta = parse_double(value, key);
    else if (key == "drop_step") cfg.train.drop_step = parse_int(value, key);
    else if (key == "mode") cfg.train.mode = parse_train_mode(value);
    else if (key == "base_channels") cfg.train.arch.base_channels = parse_int(value, key);
    else if (key == "depth") cfg.train.arch.depth = parse_int(value, key);
    else if (key == "res_blocks") cfg.train.arch.res_blocks = parse_int(value, key);
    else throw ConfigError("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path);
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key=value on line " + std::to_string(lineno) +
                              " of " + path);
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

std::string render_config(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "dataset_dir = " << cfg.dataset_dir << "\n";
    os << "out_dir = " << cfg.out_dir << "\n";
    os << "modes = ";
    for (std::size_t i = 0; i < cfg.modes.size(); ++i)
        os << (i ? "," : "") << train_mode_name(cfg.modes[i]);
    os << "\n";
    os << "block_sizes = ";
    for (std::size_t i = 0; i < cfg.block_sizes.size(); ++i)
        os << (i ? "," : "") << cfg.block_sizes[i];
    os << "\n";
    os << "qps = ";
    for (std::size_t i = 0; i < cfg.qps.size(); ++i) os << (i ? "," : "") << cfg.qps[i];
    os << "\n";
    os << "qp_assign = " << (cfg.qp_assign == QpAssign::cycle ? "cycle" : "all") << "\n";
    os << "metric = " << metric_name(cfg.train.metric) << "\n";
    os << "seed = " << cfg.train.seed << "\n";
    os << "test_fraction = " << fmt_g17(cfg.test_fraction) << "\n";
    os << "synthetic = " << cfg.synthetic_n << "\n";
    os << "synthetic_size = " << cfg.synthetic_size << "\n";
    os << "filters = " << cfg.train.filters << "\n";
    os << "epochs = " << cfg.train.epochs << "\n";
    os << "batch = " << cfg.train.batch << "\n";
    os << "patch = " << cfg.train.patch << "\n";
    os << "lr = " << fmt_g17(cfg.train.lr) << "\n";
    os << "t0 = " << fmt_g17(cfg.train.t0) << "\n";
    os << "beta = " << fmt_g17(cfg.train.beta) << "\n";
    os << "drop_step = " << cfg.train.drop_step << "\n";
    os << "base_channels = " << cfg.train.arch.base_channels << "\n";
    os << "depth = " << cfg.train.arch.depth << "\n";
    os << "res_blocks = " << cfg.train.arch.res_blocks << "\n";
    return os.str();
}

BuiltSamples build_training_samples(const DatasetManifest& manifest,
                                    const std::vector<int>& indices,
                                    const ExperimentConfig& cfg) {
    if (indices.empty()) throw ConfigError("build_training_samples: no images selected");
    const int patch = cfg.train.patch;
    BuiltSamples out;
    Rng crop_rng(mix_seed(cfg.train.seed, 0xc209));
    for (std::size_t pos = 0; pos < indices.size(); ++pos) {
        const ImageEntry& e = manifest.entries[static_cast<std::size_t>(indices[pos])];
        const ImagePlane img = read_pgm(e.path);
        if (img.h < patch || img.w < patch)
            throw ConfigError("image smaller than patch size " + std::to_string(patch) + ": " +
                              e.path);
        const int oy =
            static_cast<int>(crop_rng.uniform_int(static_cast<std::uint64_t>(img.h - patch + 1)));
        const int ox =
            static_cast<int>(crop_rng.uniform_int(static_cast<std::uint64_t>(img.w - patch + 1)));
        const ImagePlane x = copy_block(img, oy, ox, patch, patch);
        if (cfg.qp_assign == QpAssign::cycle) {
            const QpLevel qp(cfg.qps[pos % cfg.qps.size()]);
            CodecResult coded = encode_decode(x, qp);
            out.samples.push_back(TrainingSample{x, std::move(coded.reconstruction), qp});
            out.source.push_back(indices[pos]);
        } else {
            for (int qp_value : cfg.qps) {
                const QpLevel qp(qp_value);
                CodecResult coded = encode_decode(x, qp);
                out.samples.push_back(TrainingSample{x, std::move(coded.reconstruction), qp});
                out.source.push_back(indices[pos]);
            }
        }
    }
    return out;
}

std::vector<ImagePlane> load_images(const DatasetManifest& manifest,
                                    const std::vector<int>& indices) {
    std::vector<ImagePlane> out;
    out.reserve(indices.size());
    for (int i : indices)
        out.push_back(read_pgm(manifest.entries[static_cast<std::size_t>(i)].path));
    return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    try {
        ExperimentConfig resolved = cfg;
        if (cfg.synthetic_n > 0) {
            const fs::path data_dir = out / "synthetic_data";
            synthesize_dataset(data_dir.string(), cfg.synthetic_n, cfg.synthetic_size,
                               cfg.train.seed);
            resolved.dataset_dir = data_dir.string();
        }
        write_text_file(out / "resolved_config.txt", render_config(resolved));

        DatasetManifest manifest = ingest(resolved.dataset_dir);
        split_manifest(manifest, resolved.train.seed, resolved.test_fraction);
        const BuiltSamples built =
            build_training_samples(manifest, manifest.train_idx, resolved);
        const std::vector<ImagePlane> test_images = load_images(manifest, manifest.test_idx);

        std::vector<std::pair<std::string, RdCurve>> curves;
        const RdCurve anchor = build_rd_curve(test_images, RdMode::anchor, BankSelection{}, 0,
                                              resolved.train.metric, QualityAxis::psnr,
                                              resolved.qps);
        curves.emplace_back("anchor", anchor);

        ExperimentReport report;
        report.out_dir = out.string();
        bool usage_written = false;

        for (TrainMode mode : resolved.modes) {
            TrainConfig tc = resolved.train;
            tc.mode = mode;
            const TrainResult tr = train(tc, built.samples);
            const std::string tag = mode_file_tag(mode);
            save_bank_file((out / ("bank_" + tag + ".fbnk")).string(), tr.bank);
            {
                std::ofstream logf(out / ("train_" + tag + ".csv"), std::ios::trunc);
                write_train_log_csv(logf, tr.log);
            }

            BankSelection sel;
            sel.bank = &tr.bank;
            sel.by_qp_range = mode == TrainMode::independent;
            sel.partition = tc.partition;

            const int m = tc.effective_filters();
            const RdCurve whole =
                build_rd_curve(test_images, RdMode::whole_image, sel, 0, tc.metric,
                               QualityAxis::psnr, resolved.qps);
            curves.emplace_back(tag + "_whole", whole);
            report.rows.push_back(MethodResult{method_label(mode, m, 0), mode, 0,
                                               bd_rate(anchor, whole)});

            for (int block : resolved.block_sizes) {
                const RdCurve bw =
                    build_rd_curve(test_images, RdMode::block_wise, sel, block, tc.metric,
                                   QualityAxis::psnr, resolved.qps);
                curves.emplace_back(tag + "_block" + std::to_string(block), bw);
                report.rows.push_back(MethodResult{method_label(mode, m, block), mode, block,
                                                   bd_rate(anchor, bw)});
            }

            if (!usage_written &&
                (mode == TrainMode::joint || mode == TrainMode::hard_min)) {
                const UsageTable usage =
                    usage_stats(test_images, tr.bank, resolved.block_sizes.front(), tc.metric,
                                resolved.qps);
                std::ostringstream os;
                os << "qp,filter,fraction\n";
                for (std::size_t r = 0; r < usage.rows.size(); ++r)
                    for (std::size_t j = 0; j < usage.rows[r].size(); ++j)
                        os << usage.qps[r] << "," << j << "," << fmt_g17(usage.rows[r][j])
                           << "\n";
                write_text_file(out / "usage.csv", os.str());
                usage_written = true;
            }
        }

        {
            std::ostringstream os;
            os << "mode,qp,rate_bpp,quality\n";
            for (const auto& [label, curve] : curves)
                for (std::size_t i = 0; i < curve.points.size(); ++i)
                    os << label << "," << curve.qp[i] << "," << fmt_g17(curve.points[i].rate_bpp)
                       << "," << fmt_g17(curve.points[i].quality) << "\n";
            write_text_file(out / "rd_curves.csv", os.str());
        }

        {
            nlohmann::ordered_json j;
            j["anchor"] = "codec without post-processing";
            j["quality_axis"] = "psnr";
            j["results"] = nlohmann::ordered_json::array();
            for (const MethodResult& r : report.rows) {
                nlohmann::ordered_json row;
                row["method"] = r.label;
                row["mode"] = train_mode_name(r.mode);
                row["processing"] = r.block > 0 ? "block-wise" : "whole-image";
                if (r.block > 0) row["block_size"] = r.block;
                row["bd_rate_percent"] = r.bd_rate_percent;
                j["results"].push_back(std::move(row));
            }
            write_text_file(out / "bd_rate.json", j.dump(2) + "\n");
        }

        {
            std::size_t width = 10;
            for (const MethodResult& r : report.rows) width = std::max(width, r.label.size());
            std::ostringstream os;
            os << "BD-rate against the unfiltered codec (PSNR axis, test split)\n\n";
            for (const MethodResult& r : report.rows) {
                char bd[32];
                std::snprintf(bd, sizeof bd, "%+.2f%%", r.bd_rate_percent);
                os << r.label << std::string(width - r.label.size() + 2, ' ') << bd << "\n";
            }
            write_text_file(out / "summary.txt", os.str());
        }

        return report;
    } catch (const std::exception& e) {
        write_text_file(out / "FAILED.txt", std::string("experiment failed: ") + e.what() + "\n");
        throw;
    }
}

}  // namespace ppf
