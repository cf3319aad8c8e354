#pragma once

#include <cstdint>
#include <vector>

#include "ppf/codec.hpp"
#include "ppf/filter.hpp"
#include "ppf/tensor.hpp"

namespace ppf {

// Partition geometry for one image at block size B: the image is
// replication-padded to rows*B x cols*B before blocks are cut.
struct BlockGrid {
    int block = 0;
    int rows = 0, cols = 0;
    int pad_bottom = 0, pad_right = 0;

    static BlockGrid for_image(int h, int w, int block);
};

// Per-block filter choices for one image.
struct FilterIndexMap {
    int block = 0;
    int rows = 0, cols = 0;
    int filters = 0;  // M
    std::vector<std::uint8_t> indices;  // row-major, each < filters

    std::uint8_t at(int r, int c) const {
        return indices[static_cast<std::size_t>(r) * cols + c];
    }
    // signalled side information in bits: rows * cols * ceil(log2 M)
    long long bit_cost() const;
};

int bits_per_index(int filters);

// Encoder-side selection: every block is filtered by every candidate and
// the lowest-distortion filter wins (ties toward the smaller index).
// Blocks are filtered independently, replication-padded to the filter's
// dim-divisibility requirement.
FilterIndexMap select_filters(const ImagePlane& x, const ImagePlane& xhat, QpLevel qp,
                              const FilterBank& bank, int block, Metric metric);

// Decoder-side application of a selected map.
ImagePlane apply_blockwise(const ImagePlane& xhat, QpLevel qp, const FilterBank& bank,
                           const FilterIndexMap& map, int block);

// Bitstream ("FIDX"): header magic, version u8, block u16, rows u16,
// cols u16, M u8; indices packed row-major, ceil(log2 M) bits each,
// MSB-first within bytes, zero-padded to a byte boundary.
std::vector<std::uint8_t> serialize_map(const FilterIndexMap& map);
FilterIndexMap parse_map(const std::vector<std::uint8_t>& bytes);

}  // namespace ppf
