#include "ppf/image_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include "ppf/errors.hpp"

namespace ppf {

namespace {

// next whitespace-delimited token, skipping '#' comments
std::string next_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

int parse_int(const std::string& tok, const std::string& path, const char* what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw IoError("malformed PGM " + std::string(what) + " in " + path);
    }
}

}  // namespace

ImagePlane read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open image: " + path);
    if (next_token(f) != "P5") throw IoError("not a binary PGM (P5): " + path);
    const int w = parse_int(next_token(f), path, "width");
    const int h = parse_int(next_token(f), path, "height");
    const int maxval = parse_int(next_token(f), path, "maxval");
    if (w < 1 || h < 1) throw IoError("invalid PGM dimensions in " + path);
    if (maxval != 255) throw IoError("unsupported PGM maxval " + std::to_string(maxval) +
                                     " in " + path + " (expected 255)");
    std::vector<char> raw(static_cast<std::size_t>(w) * h);
    f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(f.gcount()) != raw.size())
        throw IoError("truncated PGM payload in " + path);
    ImagePlane img(h, w);
    for (std::size_t i = 0; i < raw.size(); ++i)
        img.v[i] = static_cast<double>(static_cast<unsigned char>(raw[i])) / 255.0;
    return img;
}

void write_pgm(const ImagePlane& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open image for writing: " + path);
    f << "P5\n" << img.w << " " << img.h << "\n255\n";
    std::vector<char> raw(img.count());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        double x = img.v[i];
        if (x < 0.0) x = 0.0;
        if (x > 1.0) x = 1.0;
        raw[i] = static_cast<char>(static_cast<unsigned char>(std::lround(x * 255.0)));
    }
    f.write(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace ppf
