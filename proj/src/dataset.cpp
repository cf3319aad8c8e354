#include "ppf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <numeric>

#include "ppf/errors.hpp"
#include "ppf/image_io.hpp"

namespace fs = std::filesystem;

namespace ppf {

DatasetManifest ingest(const std::string& dataset_dir) {
    if (!fs::is_directory(dataset_dir))
        throw IoError("dataset directory does not exist: " + dataset_dir);
    std::vector<std::string> paths;
    for (const fs::directory_entry& e : fs::directory_iterator(dataset_dir))
        if (e.is_regular_file()) paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ConfigError("dataset directory is empty: " + dataset_dir);

    DatasetManifest m;
    for (const std::string& p : paths) {
        const ImagePlane img = read_pgm(p);  // throws IoError naming the file
        m.entries.push_back(ImageEntry{p, img.w, img.h});
    }
    return m;
}

void split_manifest(DatasetManifest& m, std::uint64_t seed, double test_fraction) {
    const int n = static_cast<int>(m.entries.size());
    if (n < 2) throw ConfigError("split_manifest: need at least 2 images to split");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("split_manifest: test fraction must be in (0, 1)");
    int n_test = static_cast<int>(std::lround(test_fraction * n));
    n_test = std::clamp(n_test, 1, n - 1);

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0x5b17));
    rng.shuffle(order);

    m.split_seed = seed;
    m.test_idx.assign(order.begin(), order.begin() + n_test);
    m.train_idx.assign(order.begin() + n_test, order.end());
    std::sort(m.test_idx.begin(), m.test_idx.end());
    std::sort(m.train_idx.begin(), m.train_idx.end());
}

ImagePlane make_smooth_image(int size, Rng& rng) {
    ImagePlane img(size, size);
    const double base = rng.uniform(0.3, 0.7);
    const double gx = rng.uniform(-0.5, 0.5);
    const double gy = rng.uniform(-0.5, 0.5);
    const double amp = rng.uniform(0.0, 0.12);
    const double fx = rng.uniform(0.5, 1.5);
    const double fy = rng.uniform(0.5, 1.5);
    const double phx = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double phy = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double u = static_cast<double>(x) / (size - 1) - 0.5;
            const double v = static_cast<double>(y) / (size - 1) - 0.5;
            double s = base + gx * u + gy * v +
                       amp * std::sin(2.0 * std::numbers::pi * fx * u + phx) *
                           std::sin(2.0 * std::numbers::pi * fy * v + phy);
            img.at(y, x) = std::clamp(s, 0.02, 0.98);
        }
    return img;
}

ImagePlane make_texture_image(int size, Rng& rng) {
    ImagePlane img(size, size);
    const int kind = static_cast<int>(rng.uniform_int(4));  // h/v stripes, diagonal, checker
    const int period = 2 + static_cast<int>(rng.uniform_int(4));
    const double base = rng.uniform(0.4, 0.6);
    const double amp = rng.uniform(0.25, 0.4);
    const int phase = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(period)));
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            int coord = 0;
            switch (kind) {
                case 0: coord = (x + phase) / period; break;
                case 1: coord = (y + phase) / period; break;
                case 2: coord = (x + y + phase) / period; break;
                default: coord = (x + phase) / period + (y + phase) / period; break;
            }
            const double s = base + (coord % 2 == 0 ? amp : -amp);
            img.at(y, x) = std::clamp(s, 0.02, 0.98);
        }
    return img;
}

void synthesize_dataset(const std::string& dir, int n_per_class, int size,
                        std::uint64_t seed) {
    if (n_per_class < 1) throw ConfigError("synthesize_dataset: need n_per_class >= 1");
    if (size < 8 || size % 8)
        throw ConfigError("synthesize_dataset: size must be a positive multiple of 8");
    fs::create_directories(dir);
    Rng rng(mix_seed(seed, 0x5e17));
    char name[64];
    for (int i = 0; i < n_per_class; ++i) {
        std::snprintf(name, sizeof name, "smooth_%03d.pgm", i);
        write_pgm(make_smooth_image(size, rng), (fs::path(dir) / name).string());
    }
    for (int i = 0; i < n_per_class; ++i) {
        std::snprintf(name, sizeof name, "texture_%03d.pgm", i);
        write_pgm(make_texture_image(size, rng), (fs::path(dir) / name).string());
    }
}

}  // namespace ppf
