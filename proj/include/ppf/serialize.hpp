#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppf/layers.hpp"

namespace ppf {

// Little-endian byte buffer writer.
class ByteWriter {
public:
    void u8(std::uint8_t x) { buf_.push_back(x); }
    void u16(std::uint16_t x);
    void u32(std::uint32_t x);
    void u64(std::uint64_t x);
    void f64(double x);  // IEEE-754 bit pattern, little-endian
    void bytes(const void* p, std::size_t n);
    void tag(const char (&magic)[5]) { bytes(magic, 4); }

    const std::vector<std::uint8_t>& data() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

// Reader with offset-carrying errors.
class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    void expect_tag(const char (&magic)[5], const char* what);

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    void need(std::size_t n);
    const std::vector<std::uint8_t>& buf_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

// Layer-list container ("FBNN"): header with per-layer dims, then raw
// little-endian doubles. Round-trips bit-exactly.
void save_layers(ByteWriter& w, const std::vector<LayerParams>& layers);
std::vector<LayerParams> load_layers(ByteReader& r);

}  // namespace ppf
