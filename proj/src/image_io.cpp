#include "pnen/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

namespace pnen {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw DataError("truncated image header: " + path);
    return tok;
}

int parse_int(const std::string& tok, const std::string& path) {
    try {
        size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw DataError("bad image header token '" + tok + "': " + path);
    }
}

}  // namespace

uint8_t quantize_u8(double v) {
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    return static_cast<uint8_t>(std::lround(v * 255.0));  // lround: half away from zero
}

template <class T>
TensorT<T> read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path);
    std::string magic = next_token(in, path);
    int channels;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw DataError("unsupported image magic '" + magic + "': " + path);
    int w = parse_int(next_token(in, path), path);
    int h = parse_int(next_token(in, path), path);
    int maxval = parse_int(next_token(in, path), path);
    if (w < 1 || h < 1) throw DataError("bad image dimensions: " + path);
    if (maxval != 255) throw DataError("only maxval 255 supported: " + path);
    // Exactly one whitespace byte separates the header from the payload; the
    // token reader has already consumed it.
    std::vector<uint8_t> raw(size_t(w) * h * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw DataError("truncated image payload: " + path);
    TensorT<T> img(1, channels, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < channels; ++ch)
                img.at(0, ch, y, x) = T(raw[(size_t(y) * w + x) * channels + ch] / 255.0);
    return img;
}

template <class T>
void write_image(const TensorT<T>& img, const std::string& path) {
    if (img.n != 1 || (img.c != 1 && img.c != 3))
        throw ConfigError("write_image: expected single gray or color image, got " +
                          img.shape_str());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write image: " + path);
    out << (img.c == 1 ? "P5" : "P6") << "\n" << img.w << " " << img.h << "\n255\n";
    std::vector<uint8_t> raw(size_t(img.w) * img.h * img.c);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch)
                raw[(size_t(y) * img.w + x) * img.c + ch] =
                    quantize_u8(double(img.at(0, ch, y, x)));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError("short write on image: " + path);
}

template TensorT<float> read_image<float>(const std::string&);
template TensorT<double> read_image<double>(const std::string&);
template void write_image<float>(const TensorT<float>&, const std::string&);
template void write_image<double>(const TensorT<double>&, const std::string&);

}  // namespace pnen
