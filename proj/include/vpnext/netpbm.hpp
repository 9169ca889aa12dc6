#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "vpnext/tensor.hpp"

namespace vpnext {

struct PixelBuffer {
    int width = 0;
    int height = 0;
    int channels = 0;  // 3 for PPM, 1 for PGM
    std::vector<std::uint8_t> bytes;

    std::uint8_t& at(int y, int x, int c) { return bytes[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    std::uint8_t at(int y, int x, int c) const { return bytes[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

namespace detail {

inline int pnm_read_token(std::istream& in) {
    // skips whitespace and '#' comments per the netpbm header grammar
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF) throw IoError("pnm: unexpected end of header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

inline PixelBuffer read_pnm(const std::string& path, const char* magic, int channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("pnm: cannot open " + path);
    char m[2];
    in.read(m, 2);
    if (!in || m[0] != magic[0] || m[1] != magic[1])
        throw IoError("pnm: " + path + " is not a binary " + magic + " file");
    PixelBuffer buf;
    buf.width = pnm_read_token(in);
    buf.height = pnm_read_token(in);
    int maxval = pnm_read_token(in);
    if (maxval != 255) throw IoError("pnm: " + path + " maxval " + std::to_string(maxval) + ", expected 255");
    buf.channels = channels;
    buf.bytes.resize(static_cast<std::size_t>(buf.width) * buf.height * channels);
    in.read(reinterpret_cast<char*>(buf.bytes.data()), static_cast<std::streamsize>(buf.bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.bytes.size())
        throw IoError("pnm: " + path + " truncated pixel payload");
    return buf;
}

inline void write_pnm(const std::string& path, const PixelBuffer& buf, const char* magic) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("pnm: cannot write " + path);
    out << magic << "\n" << buf.width << " " << buf.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(buf.bytes.data()), static_cast<std::streamsize>(buf.bytes.size()));
    if (!out) throw IoError("pnm: short write to " + path);
}

}  // namespace detail

inline PixelBuffer read_ppm(const std::string& path) { return detail::read_pnm(path, "P6", 3); }
inline PixelBuffer read_pgm(const std::string& path) { return detail::read_pnm(path, "P5", 1); }

inline void write_ppm(const std::string& path, const PixelBuffer& buf) {
    require(buf.channels == 3, "ppm: buffer must have 3 channels");
    detail::write_pnm(path, buf, "P6");
}

inline void write_pgm(const std::string& path, const PixelBuffer& buf) {
    require(buf.channels == 1, "pgm: buffer must have 1 channel");
    detail::write_pnm(path, buf, "P5");
}

/// [h,w,3] bytes -> [1,h,w,3] floats in [0,1]
template <typename T>
TensorData<T> image_to_tensor(const PixelBuffer& buf) {
    require(buf.channels == 3, "image_to_tensor: expected 3 channels");
    TensorData<T> t({1, buf.height, buf.width, 3});
    for (std::size_t i = 0; i < buf.bytes.size(); ++i)
        t.data[i] = static_cast<T>(buf.bytes[i]) / T(255);
    return t;
}

}  // namespace vpnext
