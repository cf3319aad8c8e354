#pragma once

#include <string>

#include "ppf/tensor.hpp"

namespace ppf {

// Binary PGM (P5, maxval 255). Samples map 0..255 <-> [0, 1].
ImagePlane read_pgm(const std::string& path);
void write_pgm(const ImagePlane& img, const std::string& path);

}  // namespace ppf
