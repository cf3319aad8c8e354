#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppf/rng.hpp"
#include "ppf/tensor.hpp"

namespace ppf {

struct ImageEntry {
    std::string path;
    int w = 0, h = 0;
};

struct DatasetManifest {
    std::vector<ImageEntry> entries;  // lexicographic by path
    std::vector<int> train_idx, test_idx;
    std::uint64_t split_seed = 0;
};

// Scans a directory of binary PGM images into a manifest with a
// deterministic (lexicographic) ordering. Every file must load.
DatasetManifest ingest(const std::string& dataset_dir);

// Seeded disjoint train/test split; at least one image on each side.
void split_manifest(DatasetManifest& m, std::uint64_t seed, double test_fraction);

// Seeded synthetic images: smooth gradients and hard-edged
// stripe/checker textures.
ImagePlane make_smooth_image(int size, Rng& rng);
ImagePlane make_texture_image(int size, Rng& rng);

// Writes n_per_class smooth_###.pgm and texture_###.pgm files.
void synthesize_dataset(const std::string& dir, int n_per_class, int size,
                        std::uint64_t seed);

}  // namespace ppf
