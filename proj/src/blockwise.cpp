#include "ppf/blockwise.hpp"

#include <bit>

#include "ppf/errors.hpp"

namespace ppf {

BlockGrid BlockGrid::for_image(int h, int w, int block) {
    if (block < 1) throw ConfigError("BlockGrid: block size must be >= 1");
    if (h < 1 || w < 1) throw ShapeError("BlockGrid: empty image");
    BlockGrid g;
    g.block = block;
    g.rows = (h + block - 1) / block;
    g.cols = (w + block - 1) / block;
    g.pad_bottom = g.rows * block - h;
    g.pad_right = g.cols * block - w;
    return g;
}

int bits_per_index(int filters) {
    if (filters < 1) throw ConfigError("bits_per_index: filters must be >= 1");
    return filters == 1 ? 0 : std::bit_width(static_cast<unsigned>(filters - 1));
}

long long FilterIndexMap::bit_cost() const {
    return static_cast<long long>(rows) * cols * bits_per_index(filters);
}

FilterIndexMap select_filters(const ImagePlane& x, const ImagePlane& xhat, QpLevel qp,
                              const FilterBank& bank, int block, Metric metric) {
    require_same_shape(x, xhat, "select_filters");
    if (bank.size() < 1) throw ConfigError("select_filters: empty filter bank");
    const BlockGrid grid = BlockGrid::for_image(xhat.h, xhat.w, block);
    const ImagePlane px = replicate_pad(x, grid.rows * block, grid.cols * block);
    const ImagePlane prec = replicate_pad(xhat, grid.rows * block, grid.cols * block);

    FilterIndexMap map;
    map.block = block;
    map.rows = grid.rows;
    map.cols = grid.cols;
    map.filters = bank.size();
    map.indices.resize(static_cast<std::size_t>(grid.rows) * grid.cols);

    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            const ImagePlane bx = copy_block(px, r * block, c * block, block, block);
            const ImagePlane brec = copy_block(prec, r * block, c * block, block, block);
            int best = 0;
            double best_loss = 0.0;
            for (int j = 0; j < bank.size(); ++j) {
                const ImagePlane out =
                    filter_apply_padded(brec, qp, bank.filters[j], bank.arch);
                const double l = distortion(out, bx, metric);
                if (j == 0 || l < best_loss) {
                    best = j;
                    best_loss = l;
                }
            }
            map.indices[static_cast<std::size_t>(r) * grid.cols + c] =
                static_cast<std::uint8_t>(best);
        }
    return map;
}

ImagePlane apply_blockwise(const ImagePlane& xhat, QpLevel qp, const FilterBank& bank,
                           const FilterIndexMap& map, int block) {
    const BlockGrid grid = BlockGrid::for_image(xhat.h, xhat.w, block);
    if (map.block != block || map.rows != grid.rows || map.cols != grid.cols)
        throw ShapeError("apply_blockwise: map " + std::to_string(map.rows) + "x" +
                         std::to_string(map.cols) + " @" + std::to_string(map.block) +
                         " does not fit image " + xhat.shape_str() + " @" +
                         std::to_string(block));
    if (map.filters != bank.size())
        throw ShapeError("apply_blockwise: map expects " + std::to_string(map.filters) +
                         " filters, bank has " + std::to_string(bank.size()));

    const ImagePlane prec = replicate_pad(xhat, grid.rows * block, grid.cols * block);
    ImagePlane out(prec.h, prec.w);
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            const std::uint8_t j = map.at(r, c);
            if (j >= bank.size())
                throw ShapeError("apply_blockwise: index " + std::to_string(j) +
                                 " out of range for bank of " + std::to_string(bank.size()));
            const ImagePlane brec = copy_block(prec, r * block, c * block, block, block);
            paste_block(out, filter_apply_padded(brec, qp, bank.filters[j], bank.arch),
                        r * block, c * block);
        }
    return crop(out, xhat.h, xhat.w);
}

namespace {
constexpr std::uint8_t kMapFormatVersion = 1;
}

std::vector<std::uint8_t> serialize_map(const FilterIndexMap& map) {
    if (map.rows < 1 || map.cols < 1 || map.filters < 1 || map.block < 1)
        throw ConfigError("serialize_map: invalid map header");
    if (map.indices.size() != static_cast<std::size_t>(map.rows) * map.cols)
        throw ShapeError("serialize_map: index count does not match grid");
    for (std::uint8_t i : map.indices)
        if (i >= map.filters)
            throw ConfigError("serialize_map: index " + std::to_string(i) +
                              " out of range for " + std::to_string(map.filters) + " filters");

    ByteWriter w;
    w.tag("FIDX");
    w.u8(kMapFormatVersion);
    w.u16(static_cast<std::uint16_t>(map.block));
    w.u16(static_cast<std::uint16_t>(map.rows));
    w.u16(static_cast<std::uint16_t>(map.cols));
    w.u8(static_cast<std::uint8_t>(map.filters));

    const int bits = bits_per_index(map.filters);
    std::uint32_t acc = 0;
    int nbits = 0;
    for (std::uint8_t i : map.indices) {
        acc = (acc << bits) | i;
        nbits += bits;
        while (nbits >= 8) {
            w.u8(static_cast<std::uint8_t>((acc >> (nbits - 8)) & 0xff));
            nbits -= 8;
        }
    }
    if (nbits > 0) w.u8(static_cast<std::uint8_t>((acc << (8 - nbits)) & 0xff));
    return w.take();
}

FilterIndexMap parse_map(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    r.expect_tag("FIDX", "index map");
    const std::size_t ver_at = r.offset();
    const std::uint8_t version = r.u8();
    if (version != kMapFormatVersion)
        throw ParseError("index map: unsupported version " + std::to_string(version) +
                         " at offset " + std::to_string(ver_at));
    FilterIndexMap map;
    map.block = r.u16();
    map.rows = r.u16();
    map.cols = r.u16();
    map.filters = r.u8();
    if (map.block < 1 || map.rows < 1 || map.cols < 1 || map.filters < 1)
        throw ParseError("index map: invalid header fields at offset 5");

    const int bits = bits_per_index(map.filters);
    const long long total = static_cast<long long>(map.rows) * map.cols;
    const std::size_t payload = static_cast<std::size_t>((total * bits + 7) / 8);
    if (r.remaining() < payload)
        throw ParseError("index map: truncated payload at offset " +
                         std::to_string(r.offset()) + ": need " + std::to_string(payload) +
                         " bytes, have " + std::to_string(r.remaining()));

    map.indices.resize(static_cast<std::size_t>(total));
    std::uint32_t acc = 0;
    int nbits = 0;
    for (long long t = 0; t < total; ++t) {
        if (bits == 0) {
            map.indices[static_cast<std::size_t>(t)] = 0;
            continue;
        }
        while (nbits < bits) {
            acc = (acc << 8) | r.u8();
            nbits += 8;
        }
        const std::uint8_t idx =
            static_cast<std::uint8_t>((acc >> (nbits - bits)) & ((1u << bits) - 1));
        nbits -= bits;
        if (idx >= map.filters)
            throw ParseError("index map: index " + std::to_string(idx) + " >= " +
                             std::to_string(map.filters) + " at offset " +
                             std::to_string(r.offset() - 1));
        map.indices[static_cast<std::size_t>(t)] = idx;
    }
    return map;
}

}  // namespace ppf
