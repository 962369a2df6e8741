#pragma once

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "attrcrit/errors.hpp"
#include "attrcrit/tensor.hpp"

namespace attrcrit {

// Raw-tensor file (.rt): versioned text header, then packed little-endian
// 32-bit floats in row-major order.
//
//   RTENSOR 1
//   shape <e1> [e2 ...]
//   data
//   <binary>

inline constexpr int kRawTensorVersion = 1;

inline Tensor loadRawTensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open raw tensor " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw FormatError("raw tensor: empty file");
    {
        std::istringstream head(line);
        std::string magic;
        int version = -1;
        head >> magic >> version;
        if (magic != "RTENSOR") throw FormatError("raw tensor: bad magic");
        if (version != kRawTensorVersion) {
            throw VersionError("raw tensor: unsupported version " + std::to_string(version));
        }
    }
    std::vector<std::size_t> shape;
    if (!std::getline(in, line)) throw FormatError("raw tensor: missing shape line");
    {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key != "shape") throw FormatError("raw tensor: expected shape line");
        long long e;
        while (ss >> e) {
            if (e <= 0) throw FormatError("raw tensor: non-positive extent");
            shape.push_back(static_cast<std::size_t>(e));
        }
        if (shape.empty()) throw FormatError("raw tensor: empty shape");
    }
    if (!std::getline(in, line) || line != "data") {
        throw FormatError("raw tensor: expected data line");
    }

    std::size_t count = 1;
    for (std::size_t e : shape) count *= e;
    std::vector<unsigned char> raw(count * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw FormatError("raw tensor: truncated payload");
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t u = static_cast<std::uint32_t>(raw[4 * i]) |
                                (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                                (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                                (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
        data[i] = static_cast<double>(std::bit_cast<float>(u));
    }
    Tensor t(std::move(shape), std::move(data));
    t.requireFinite("raw tensor " + path.string());
    return t;
}

inline void saveRawTensor(const Tensor& t, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write raw tensor " + path.string());
    out << "RTENSOR " << kRawTensorVersion << "\n";
    out << "shape";
    for (std::size_t e : t.shape()) out << " " << e;
    out << "\ndata\n";
    std::vector<unsigned char> raw(t.size() * 4);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(t[i]));
        raw[4 * i] = static_cast<unsigned char>(u & 0xff);
        raw[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
        raw[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
        raw[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("short write on raw tensor " + path.string());
}

namespace detail {

inline int pnmNextValue(std::istream& in) {
    // skips whitespace and '#' comments, per the PNM spec
    while (true) {
        const int c = in.peek();
        if (c == EOF) throw FormatError("pnm: truncated header");
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value)) throw FormatError("pnm: bad header value");
    return value;
}

} // namespace detail

/// Loads a binary portable pixmap (P5 grayscale or P6 RGB) as (C,H,W) scaled
/// to [0,1]. No resizing: the decoded shape must match `expectedShape`.
inline Tensor loadPnm(const std::filesystem::path& path,
                      const std::vector<std::size_t>& expectedShape) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path.string());

    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6')) throw FormatError("pnm: not a P5/P6 file");
    const std::size_t channels = m1 == '5' ? 1 : 3;

    const int w = detail::pnmNextValue(in);
    const int h = detail::pnmNextValue(in);
    const int maxval = detail::pnmNextValue(in);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw FormatError("pnm: bad header");
    in.get(); // the single whitespace before the payload

    const std::size_t bytesPerSample = maxval > 255 ? 2 : 1;
    const std::size_t samples =
        static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
    std::vector<unsigned char> raw(samples * bytesPerSample);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw FormatError("pnm: truncated payload");
    }

    // interleaved samples -> planar (C,H,W)
    Tensor t({channels, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t s = p * channels + c;
            unsigned value;
            if (bytesPerSample == 1) {
                value = raw[s];
            } else {
                value = (static_cast<unsigned>(raw[2 * s]) << 8) | raw[2 * s + 1]; // big-endian
            }
            t[c * plane + p] = static_cast<double>(value) / static_cast<double>(maxval);
        }
    }
    if (t.shape() != expectedShape) {
        throw ShapeError("image " + path.string() + " has shape " +
                         Tensor::shapeString(t.shape()) + ", model expects " +
                         Tensor::shapeString(expectedShape));
    }
    return t;
}

/// Writes a (1,H,W) or (3,H,W) tensor of values in [0,1] as P5/P6, maxval 255.
inline void savePnm(const Tensor& t, const std::filesystem::path& path) {
    if (t.ndim() != 3 || (t.extent(0) != 1 && t.extent(0) != 3)) {
        throw ShapeError("pnm: need a (1,H,W) or (3,H,W) tensor");
    }
    const std::size_t channels = t.extent(0), h = t.extent(1), w = t.extent(2);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write image " + path.string());
    out << (channels == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
    const std::size_t plane = h * w;
    std::vector<unsigned char> raw(plane * channels);
    for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double v = std::min(std::max(t[c * plane + p], 0.0), 1.0);
            raw[p * channels + c] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("short write on image " + path.string());
}

/// Dispatch on extension: .pgm/.ppm go through the PNM reader, .rt through the
/// raw-tensor reader (shape checked against the model's input shape).
inline Tensor loadImage(const std::filesystem::path& path,
                        const std::vector<std::size_t>& expectedShape) {
    const std::string ext = path.extension().string();
    if (ext == ".pgm" || ext == ".ppm") return loadPnm(path, expectedShape);
    if (ext == ".rt") {
        Tensor t = loadRawTensor(path);
        if (t.shape() != expectedShape) {
            throw ShapeError("image " + path.string() + " has shape " +
                             Tensor::shapeString(t.shape()) + ", model expects " +
                             Tensor::shapeString(expectedShape));
        }
        return t;
    }
    throw FormatError("unsupported image extension '" + ext + "'");
}

} // namespace attrcrit
