#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ppf/errors.hpp"
#include "ppf/experiment.hpp"
#include "ppf/image_io.hpp"

namespace fs = std::filesystem;
using namespace ppf;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::path("tmp_experiment") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

ExperimentConfig desk_config(const fs::path& out) {
    ExperimentConfig cfg;
    cfg.out_dir = out.string();
    cfg.synthetic_n = 6;
    cfg.synthetic_size = 16;
    cfg.modes = {TrainMode::single, TrainMode::joint};
    cfg.block_sizes = {8, 16};
    cfg.test_fraction = 0.25;
    cfg.train.arch.base_channels = 2;
    cfg.train.arch.res_blocks = 1;
    cfg.train.filters = 2;
    cfg.train.epochs = 2;
    cfg.train.batch = 4;
    cfg.train.patch = 16;
    cfg.train.seed = 77;
    return cfg;
}

}  // namespace

TEST_CASE("ingest orders lexicographically and is repeatable") {
    const fs::path dir = fresh_dir("ingest");
    Rng rng(101);
    write_pgm(make_smooth_image(16, rng), (dir / "b.pgm").string());
    write_pgm(make_texture_image(16, rng), (dir / "a.pgm").string());
    write_pgm(make_smooth_image(16, rng), (dir / "c.pgm").string());

    const DatasetManifest m1 = ingest(dir.string());
    const DatasetManifest m2 = ingest(dir.string());
    REQUIRE(m1.entries.size() == 3);
    CHECK(m1.entries[0].path == (dir / "a.pgm").string());
    CHECK(m1.entries[2].path == (dir / "c.pgm").string());
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(m1.entries[i].path == m2.entries[i].path);
        CHECK(m1.entries[i].w == 16);
    }
}

TEST_CASE("ingest rejects empty directories and names corrupt files") {
    const fs::path empty = fresh_dir("ingest_empty");
    CHECK_THROWS_AS(ingest(empty.string()), ConfigError);
    CHECK_THROWS_AS(ingest((empty / "nonexistent").string()), IoError);

    const fs::path dir = fresh_dir("ingest_corrupt");
    Rng rng(102);
    write_pgm(make_smooth_image(16, rng), (dir / "a.pgm").string());
    write_pgm(make_smooth_image(16, rng), (dir / "c.pgm").string());
    {
        std::ofstream f(dir / "b.pgm", std::ios::binary);
        f << "P5\n16 16\n255\nshort";
    }
    try {
        ingest(dir.string());
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("b.pgm") != std::string::npos);
    }
}

TEST_CASE("manifest splits are disjoint, covering and seeded") {
    const fs::path dir = fresh_dir("split");
    Rng rng(103);
    for (int i = 0; i < 10; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "img_%02d.pgm", i);
        write_pgm(make_smooth_image(16, rng), (dir / name).string());
    }
    DatasetManifest m = ingest(dir.string());
    split_manifest(m, 5, 0.2);
    CHECK(m.test_idx.size() == 2);
    CHECK(m.train_idx.size() == 8);
    std::vector<bool> seen(10, false);
    for (int i : m.train_idx) seen[static_cast<std::size_t>(i)] = true;
    for (int i : m.test_idx) {
        CHECK(!seen[static_cast<std::size_t>(i)]);
        seen[static_cast<std::size_t>(i)] = true;
    }
    for (bool s : seen) CHECK(s);

    DatasetManifest m2 = ingest(dir.string());
    split_manifest(m2, 5, 0.2);
    CHECK(m2.test_idx == m.test_idx);
}

TEST_CASE("synthetic generation is deterministic in the seed") {
    const fs::path a = fresh_dir("synth_a");
    const fs::path b = fresh_dir("synth_b");
    synthesize_dataset(a.string(), 3, 16, 9);
    synthesize_dataset(b.string(), 3, 16, 9);
    const DatasetManifest ma = ingest(a.string());
    REQUIRE(ma.entries.size() == 6);
    CHECK(slurp(a / "smooth_000.pgm") == slurp(b / "smooth_000.pgm"));
    CHECK(slurp(a / "texture_002.pgm") == slurp(b / "texture_002.pgm"));
    const fs::path c = fresh_dir("synth_c");
    synthesize_dataset(c.string(), 3, 16, 10);
    CHECK(slurp(a / "smooth_000.pgm") != slurp(c / "smooth_000.pgm"));
}

TEST_CASE("config files parse with comments, overrides and strict keys") {
    const fs::path dir = fresh_dir("config");
    const fs::path path = dir / "exp.cfg";
    {
        std::ofstream f(path);
        f << "# experiment\n";
        f << "out_dir = out\n";
        f << "synthetic = 4\n";
        f << "filters = 2   # M\n";
        f << "lr = 2e-4\n";
        f << "modes = single, joint\n";
        f << "block_sizes = 8\n";
        f << "qp_assign = all\n";
    }
    const ExperimentConfig cfg = parse_config_file(path.string());
    CHECK(cfg.train.filters == 2);
    CHECK(cfg.train.lr == 2e-4);
    CHECK(cfg.synthetic_n == 4);
    CHECK(cfg.qp_assign == QpAssign::all);
    REQUIRE(cfg.modes.size() == 2);
    CHECK(cfg.modes[1] == TrainMode::joint);
    // defaults stay at the reference values
    CHECK(cfg.train.t0 == 1.0);
    CHECK(cfg.train.beta == 10.0);
    CHECK(cfg.train.drop_step == 5);

    {
        std::ofstream f(path, std::ios::app);
        f << "no_such_key = 3\n";
    }
    CHECK_THROWS_AS(parse_config_file(path.string()), ConfigError);
}

TEST_CASE("training samples follow the qp assignment policy") {
    const fs::path dir = fresh_dir("samples");
    synthesize_dataset(dir.string(), 4, 16, 3);
    DatasetManifest m = ingest(dir.string());
    std::vector<int> all;
    for (std::size_t i = 0; i < m.entries.size(); ++i) all.push_back(static_cast<int>(i));

    ExperimentConfig cfg;
    cfg.out_dir = "unused";
    cfg.dataset_dir = dir.string();
    cfg.train.patch = 16;
    cfg.qp_assign = QpAssign::cycle;
    const BuiltSamples cycled = build_training_samples(m, all, cfg);
    REQUIRE(cycled.samples.size() == 8);
    for (std::size_t i = 0; i < cycled.samples.size(); ++i) {
        CHECK(cycled.samples[i].qp.value() == kQpValues[i % 7]);
        CHECK(cycled.source[i] == static_cast<int>(i));
        CHECK(cycled.samples[i].x.same_shape(cycled.samples[i].xhat));
    }

    cfg.qp_assign = QpAssign::all;
    const BuiltSamples paired = build_training_samples(m, all, cfg);
    CHECK(paired.samples.size() == 8 * 7);
}

TEST_CASE("run_experiment emits a complete, deterministic artifact bundle") {
    const fs::path out1 = fresh_dir("run1");
    const fs::path out2 = fresh_dir("run2");
    const ExperimentReport r1 = run_experiment(desk_config(out1));
    const ExperimentReport r2 = run_experiment(desk_config(out2));

    // one whole-image row and one per block size, per mode
    REQUIRE(r1.rows.size() == 6);
    CHECK(r1.rows[0].label == "one-filter");
    CHECK(r1.rows[1].label == "one-filter (block-wise, 8x8)");
    CHECK(r1.rows[3].label == "2 joint-filters");

    for (const char* name :
         {"rd_curves.csv", "bd_rate.json", "summary.txt", "train_single.csv",
          "train_joint.csv", "usage.csv"}) {
        CAPTURE(name);
        CHECK(fs::exists(out1 / name));
        CHECK(slurp(out1 / name) == slurp(out2 / name));
    }
    CHECK(fs::exists(out1 / "resolved_config.txt"));
    CHECK(slurp(out1 / "bank_joint.fbnk") == slurp(out2 / "bank_joint.fbnk"));
    CHECK(!fs::exists(out1 / "FAILED.txt"));

    // parsed-back artifacts satisfy their invariants
    {
        std::ifstream f(out1 / "train_joint.csv");
        const TrainLog log = parse_train_log_csv(f);
        REQUIRE(log.filters == 2);
        for (const EpochLog& row : log.rows) {
            double sum = 0.0;
            for (double s : row.share) sum += s;
            CHECK(std::fabs(sum - 1.0) <= 1e-9);
        }
    }
    {
        const std::string usage = slurp(out1 / "usage.csv");
        CHECK(usage.rfind("qp,filter,fraction\n", 0) == 0);
    }
}

TEST_CASE("single-mode-only runs emit exactly one bank and curve set") {
    const fs::path out = fresh_dir("single_only");
    ExperimentConfig cfg = desk_config(out);
    cfg.modes = {TrainMode::single};
    cfg.block_sizes = {16};
    const ExperimentReport report = run_experiment(cfg);
    REQUIRE(report.rows.size() == 2);
    CHECK(fs::exists(out / "bank_single.fbnk"));
    CHECK(!fs::exists(out / "bank_joint.fbnk"));
    CHECK(!fs::exists(out / "usage.csv"));

    const std::string csv = slurp(out / "rd_curves.csv");
    CHECK(csv.find("anchor,") != std::string::npos);
    CHECK(csv.find("single_whole,") != std::string::npos);
    CHECK(csv.find("single_block16,") != std::string::npos);
    CHECK(csv.find("joint") == std::string::npos);
}

TEST_CASE("failed experiments leave a marker") {
    const fs::path out = fresh_dir("failing");
    ExperimentConfig cfg = desk_config(out);
    cfg.synthetic_n = 0;
    cfg.dataset_dir = (out / "missing_dataset").string();
    CHECK_THROWS(run_experiment(cfg));
    CHECK(fs::exists(out / "FAILED.txt"));
}
