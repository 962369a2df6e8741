#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "attrcrit/errors.hpp"
#include "attrcrit/model.hpp"

namespace attrcrit {

// Manifest format (versioned structured text):
//
//   NNMODEL 1
//   blob <relative-path>
//   input <e1> [e2 e3]
//   classes <n>
//   layer dense out=<o> in=<i> w@<byte-off> b@<byte-off>
//   layer conv2d out=<co> in=<ci> kh=<kh> kw=<kw> stride=<s> pad=<p> w@<off> b@<off>
//   layer relu | flatten | softmax
//   layer maxpool2d window=<w> stride=<s>
//
// The blob is packed little-endian 32-bit floats; offsets are bytes. Weights
// are widened to 64-bit on load and narrowed back on save, so a save/load
// cycle is bit-exact.

inline constexpr int kModelManifestVersion = 1;

namespace detail {

inline std::vector<float> readBlob(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open weight blob " + path.string());
    in.seekg(0, std::ios::end);
    const std::streamoff bytes = in.tellg();
    in.seekg(0, std::ios::beg);
    if (bytes % 4 != 0) throw ModelFormatError("weight blob size is not a multiple of 4 bytes");
    std::vector<unsigned char> raw(static_cast<std::size_t>(bytes));
    if (bytes > 0) in.read(reinterpret_cast<char*>(raw.data()), bytes);
    if (!in) throw IoError("short read on weight blob " + path.string());
    std::vector<float> out(raw.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint32_t u = static_cast<std::uint32_t>(raw[4 * i]) |
                                (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                                (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                                (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
        out[i] = std::bit_cast<float>(u);
    }
    return out;
}

inline void writeBlob(const std::filesystem::path& path, const std::vector<float>& values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write weight blob " + path.string());
    std::vector<unsigned char> raw(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint32_t u = std::bit_cast<std::uint32_t>(values[i]);
        raw[4 * i] = static_cast<unsigned char>(u & 0xff);
        raw[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
        raw[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
        raw[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
    }
    if (!raw.empty()) out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
    if (!out) throw IoError("short write on weight blob " + path.string());
}

struct KeyValues {
    std::vector<std::pair<std::string, std::string>> items;

    const std::string& require(const std::string& key) const {
        for (const auto& [k, v] : items) {
            if (k == key) return v;
        }
        throw ModelFormatError("manifest layer is missing key '" + key + "'");
    }
};

inline std::size_t parseSize(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ModelFormatError(std::string("manifest: bad ") + what + " value '" + s + "'");
    }
}

inline Tensor sliceBlob(const std::vector<float>& blob, std::size_t byteOffset,
                        std::vector<std::size_t> shape) {
    if (byteOffset % 4 != 0) throw ModelFormatError("weight offset not float-aligned");
    std::size_t count = 1;
    for (std::size_t e : shape) count *= e;
    const std::size_t start = byteOffset / 4;
    if (start + count > blob.size()) {
        throw ModelFormatError("weight range exceeds blob (" + std::to_string(start + count) +
                               " floats needed, blob holds " + std::to_string(blob.size()) + ")");
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = static_cast<double>(blob[start + i]);
    Tensor t(std::move(shape), std::move(data));
    if (!t.allFinite()) throw ModelFormatError("non-finite weight in blob");
    return t;
}

} // namespace detail

inline Model loadModel(const std::filesystem::path& manifestPath) {
    std::ifstream in(manifestPath);
    if (!in) throw IoError("cannot open manifest " + manifestPath.string());

    std::string line;
    if (!std::getline(in, line)) throw ModelFormatError("empty manifest");
    {
        std::istringstream head(line);
        std::string magic;
        int version = -1;
        head >> magic >> version;
        if (magic != "NNMODEL") throw ModelFormatError("manifest does not start with NNMODEL");
        if (version != kModelManifestVersion) {
            throw VersionError("unsupported manifest version " + std::to_string(version));
        }
    }

    Model m;
    std::string blobRel;
    std::size_t maxEndFloat = 0;

    struct RawLayer {
        Layer layer;
        std::size_t wOff = 0, bOff = 0;
        bool hasParams = false;
    };
    std::vector<RawLayer> rawLayers;

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "blob") {
            ls >> blobRel;
            if (blobRel.empty()) throw ModelFormatError("manifest: blob line without a path");
        } else if (key == "input") {
            m.input_shape.clear();
            std::string tok;
            while (ls >> tok) {
                m.input_shape.push_back(detail::parseSize(tok, "input extent"));
            }
            if (m.input_shape.empty()) throw ModelFormatError("manifest: empty input shape");
        } else if (key == "classes") {
            std::string tok;
            ls >> tok;
            m.class_count = detail::parseSize(tok, "class count");
        } else if (key == "layer") {
            std::string kind;
            ls >> kind;
            detail::KeyValues kv;
            std::string tok;
            while (ls >> tok) {
                const auto at = tok.find_first_of("=@");
                if (at == std::string::npos) {
                    throw ModelFormatError("manifest: bad layer token '" + tok + "'");
                }
                kv.items.emplace_back(tok.substr(0, at), tok.substr(at + 1));
            }
            RawLayer raw;
            if (kind == "dense") {
                const std::size_t out = detail::parseSize(kv.require("out"), "out");
                const std::size_t inDim = detail::parseSize(kv.require("in"), "in");
                raw.layer.kind = LayerKind::dense;
                raw.layer.weight = Tensor({out, inDim});
                raw.layer.bias = Tensor({out});
                raw.wOff = detail::parseSize(kv.require("w"), "weight offset");
                raw.bOff = detail::parseSize(kv.require("b"), "bias offset");
                raw.hasParams = true;
            } else if (kind == "conv2d") {
                const std::size_t co = detail::parseSize(kv.require("out"), "out");
                const std::size_t ci = detail::parseSize(kv.require("in"), "in");
                const std::size_t kh = detail::parseSize(kv.require("kh"), "kh");
                const std::size_t kw = detail::parseSize(kv.require("kw"), "kw");
                raw.layer.kind = LayerKind::conv2d;
                raw.layer.weight = Tensor({co, ci, kh, kw});
                raw.layer.bias = Tensor({co});
                raw.layer.stride = detail::parseSize(kv.require("stride"), "stride");
                raw.layer.padding = detail::parseSize(kv.require("pad"), "pad");
                raw.wOff = detail::parseSize(kv.require("w"), "weight offset");
                raw.bOff = detail::parseSize(kv.require("b"), "bias offset");
                raw.hasParams = true;
            } else if (kind == "relu") {
                raw.layer = Layer::relu();
            } else if (kind == "maxpool2d") {
                raw.layer = Layer::maxpool(detail::parseSize(kv.require("window"), "window"),
                                           detail::parseSize(kv.require("stride"), "stride"));
            } else if (kind == "flatten") {
                raw.layer = Layer::flatten();
            } else if (kind == "softmax") {
                raw.layer = Layer::softmax();
            } else {
                throw ModelFormatError("manifest: unknown layer kind '" + kind + "'");
            }
            rawLayers.push_back(std::move(raw));
        } else {
            throw ModelFormatError("manifest: unknown line '" + key + "'");
        }
    }
    if (blobRel.empty()) throw ModelFormatError("manifest: missing blob line");
    if (rawLayers.empty()) throw ModelFormatError("manifest: no layers");
    if (m.class_count == 0) throw ModelFormatError("manifest: missing classes line");

    const std::vector<float> blob = detail::readBlob(manifestPath.parent_path() / blobRel);

    for (RawLayer& raw : rawLayers) {
        if (raw.hasParams) {
            raw.layer.weight = detail::sliceBlob(blob, raw.wOff, raw.layer.weight.shape());
            raw.layer.bias = detail::sliceBlob(blob, raw.bOff, raw.layer.bias.shape());
            maxEndFloat = std::max(maxEndFloat, raw.wOff / 4 + raw.layer.weight.size());
            maxEndFloat = std::max(maxEndFloat, raw.bOff / 4 + raw.layer.bias.size());
        }
        m.layers.push_back(std::move(raw.layer));
    }
    if (maxEndFloat != blob.size()) {
        throw ModelFormatError("weight blob holds " + std::to_string(blob.size()) +
                               " floats but manifest references " + std::to_string(maxEndFloat));
    }

    validateModel(m);
    return m;
}

/// Writes manifest plus packed blob next to it. Layout is deterministic:
/// weights then bias, in layer order.
inline void saveModel(const Model& m, const std::filesystem::path& manifestPath) {
    validateModel(m);
    const std::filesystem::path blobPath = manifestPath.parent_path().empty()
                                               ? std::filesystem::path(manifestPath.stem().string() + ".blob")
                                               : manifestPath.parent_path() /
                                                     (manifestPath.stem().string() + ".blob");

    std::vector<float> blob;
    std::ostringstream body;
    for (const Layer& l : m.layers) {
        switch (l.kind) {
            case LayerKind::dense: {
                const std::size_t wOff = blob.size() * 4;
                for (double v : l.weight.data()) blob.push_back(static_cast<float>(v));
                const std::size_t bOff = blob.size() * 4;
                for (double v : l.bias.data()) blob.push_back(static_cast<float>(v));
                body << "layer dense out=" << l.weight.extent(0) << " in=" << l.weight.extent(1)
                     << " w@" << wOff << " b@" << bOff << "\n";
                break;
            }
            case LayerKind::conv2d: {
                const std::size_t wOff = blob.size() * 4;
                for (double v : l.weight.data()) blob.push_back(static_cast<float>(v));
                const std::size_t bOff = blob.size() * 4;
                for (double v : l.bias.data()) blob.push_back(static_cast<float>(v));
                body << "layer conv2d out=" << l.weight.extent(0) << " in=" << l.weight.extent(1)
                     << " kh=" << l.weight.extent(2) << " kw=" << l.weight.extent(3)
                     << " stride=" << l.stride << " pad=" << l.padding << " w@" << wOff << " b@"
                     << bOff << "\n";
                break;
            }
            case LayerKind::relu:
                body << "layer relu\n";
                break;
            case LayerKind::maxpool2d:
                body << "layer maxpool2d window=" << l.window << " stride=" << l.stride << "\n";
                break;
            case LayerKind::flatten:
                body << "layer flatten\n";
                break;
            case LayerKind::softmax:
                body << "layer softmax\n";
                break;
        }
    }

    detail::writeBlob(blobPath, blob);

    std::ofstream out(manifestPath, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + manifestPath.string());
    out << "NNMODEL " << kModelManifestVersion << "\n";
    out << "blob " << blobPath.filename().string() << "\n";
    out << "input";
    for (std::size_t e : m.input_shape) out << " " << e;
    out << "\n";
    out << "classes " << m.class_count << "\n";
    out << body.str();
    if (!out) throw IoError("short write on manifest " + manifestPath.string());
}

} // namespace attrcrit
