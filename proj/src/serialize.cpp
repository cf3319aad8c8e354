#include "ppf/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ppf/errors.hpp"

namespace ppf {

namespace {
constexpr std::uint32_t kLayerFormatVersion = 1;
constexpr std::uint32_t kMaxLayers = 1u << 16;
constexpr std::uint32_t kMaxDim = 1u << 20;
}  // namespace

void ByteWriter::u16(std::uint16_t x) {
    buf_.push_back(static_cast<std::uint8_t>(x & 0xff));
    buf_.push_back(static_cast<std::uint8_t>(x >> 8));
}

void ByteWriter::u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>((x >> (8 * i)) & 0xff));
}

void ByteWriter::u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>((x >> (8 * i)) & 0xff));
}

void ByteWriter::f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }

void ByteWriter::bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
}

void ByteReader::need(std::size_t n) {
    if (pos_ + n > buf_.size())
        throw ParseError("truncated input at offset " + std::to_string(pos_) + ": need " +
                         std::to_string(n) + " bytes, have " + std::to_string(buf_.size() - pos_));
}

std::uint8_t ByteReader::u8() {
    need(1);
    return buf_[pos_++];
}

std::uint16_t ByteReader::u16() {
    need(2);
    std::uint16_t x = static_cast<std::uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
    pos_ += 2;
    return x;
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return x;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return x;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

void ByteReader::expect_tag(const char (&magic)[5], const char* what) {
    const std::size_t at = pos_;
    need(4);
    if (std::memcmp(&buf_[pos_], magic, 4) != 0)
        throw ParseError(std::string(what) + ": bad magic at offset " + std::to_string(at));
    pos_ += 4;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (f.bad()) throw IoError("read failed: " + path);
    return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open file for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

void save_layers(ByteWriter& w, const std::vector<LayerParams>& layers) {
    w.tag("FBNN");
    w.u32(kLayerFormatVersion);
    w.u32(static_cast<std::uint32_t>(layers.size()));
    for (const LayerParams& p : layers) {
        w.u32(static_cast<std::uint32_t>(p.out_ch));
        w.u32(static_cast<std::uint32_t>(p.in_ch));
        w.u32(static_cast<std::uint32_t>(p.k));
        w.u32(static_cast<std::uint32_t>(p.stride));
        w.u8(p.mode == LayerMode::transposed ? 1 : 0);
        for (double x : p.kernel) w.f64(x);
        for (double x : p.bias) w.f64(x);
    }
}

std::vector<LayerParams> load_layers(ByteReader& r) {
    r.expect_tag("FBNN", "layer file");
    const std::size_t ver_at = r.offset();
    const std::uint32_t version = r.u32();
    if (version != kLayerFormatVersion)
        throw ParseError("layer file: unsupported version " + std::to_string(version) +
                         " at offset " + std::to_string(ver_at));
    const std::size_t count_at = r.offset();
    const std::uint32_t count = r.u32();
    if (count > kMaxLayers)
        throw ParseError("layer file: implausible layer count " + std::to_string(count) +
                         " at offset " + std::to_string(count_at));
    std::vector<LayerParams> layers;
    layers.reserve(count);
    for (std::uint32_t li = 0; li < count; ++li) {
        const std::size_t at = r.offset();
        const std::uint32_t out_ch = r.u32();
        const std::uint32_t in_ch = r.u32();
        const std::uint32_t k = r.u32();
        const std::uint32_t stride = r.u32();
        const std::uint8_t mode = r.u8();
        if (out_ch < 1 || in_ch < 1 || k < 1 || stride < 1 || out_ch > kMaxDim ||
            in_ch > kMaxDim || k > 1024 || k % 2 == 0 || mode > 1)
            throw ParseError("layer file: invalid layer header for layer " + std::to_string(li) +
                             " at offset " + std::to_string(at));
        LayerParams p = LayerParams::make(static_cast<int>(out_ch), static_cast<int>(in_ch),
                                          static_cast<int>(k), static_cast<int>(stride),
                                          mode ? LayerMode::transposed : LayerMode::conv);
        for (double& x : p.kernel) x = r.f64();
        for (double& x : p.bias) x = r.f64();
        layers.push_back(std::move(p));
    }
    return layers;
}

}  // namespace ppf
