#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "attrcrit/image_io.hpp"
#include "attrcrit/model.hpp"
#include "attrcrit/model_io.hpp"
#include "attrcrit/rng.hpp"
#include "attrcrit/tensor.hpp"

namespace attrcrit {

/// Hand-constructed 4-class classifier for 1x16x16 images: a 3x3 averaging
/// conv pools local brightness, and each class's dense row aggregates one
/// quadrant of the pooled map. Classifies the quadrant-blob corpus below
/// near-perfectly, which gives the attribution methods real structure to find.
inline Model makeDemoClassifier() {
    Model m;
    m.input_shape = {1, 16, 16};
    m.class_count = 4;

    Tensor kernel({1, 1, 3, 3});
    for (std::size_t i = 0; i < kernel.size(); ++i) kernel[i] = 1.0 / 9.0;
    m.layers.push_back(Layer::conv(kernel, Tensor({1}), 1, 1));
    m.layers.push_back(Layer::relu());
    m.layers.push_back(Layer::maxpool(2, 2));
    m.layers.push_back(Layer::flatten());

    // pooled map is 8x8; class k gets weight on its quadrant, a small
    // penalty elsewhere so off-quadrant light argues against the class
    Tensor w({4, 64});
    for (std::size_t cls = 0; cls < 4; ++cls) {
        const std::size_t rowBase = (cls / 2) * 4;
        const std::size_t colBase = (cls % 2) * 4;
        for (std::size_t y = 0; y < 8; ++y) {
            for (std::size_t x = 0; x < 8; ++x) {
                const bool inside =
                    y >= rowBase && y < rowBase + 4 && x >= colBase && x < colBase + 4;
                w.at2(cls, y * 8 + x) = inside ? 1.0 : -0.25;
            }
        }
    }
    m.layers.push_back(Layer::dense(w, Tensor({4})));
    m.layers.push_back(Layer::softmax());
    validateModel(m);
    return m;
}

/// One synthetic corpus image: faint uniform background noise plus a bright
/// blob centered (with jitter) in the quadrant of `classIndex`.
inline Tensor makeDemoImage(std::size_t classIndex, std::uint64_t seed) {
    Rng rng(seed);
    Tensor img({1, 16, 16});
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.uniform(0.0, 0.15);

    const double cy = (classIndex / 2 == 0 ? 4.0 : 12.0) + rng.uniform(-1.5, 1.5);
    const double cx = (classIndex % 2 == 0 ? 4.0 : 12.0) + rng.uniform(-1.5, 1.5);
    const double radius = rng.uniform(2.0, 3.0);
    for (std::size_t y = 0; y < 16; ++y) {
        for (std::size_t x = 0; x < 16; ++x) {
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            const double d2 = (dy * dy + dx * dx) / (radius * radius);
            const double blob = std::exp(-d2);
            if (blob > 0.05) {
                const std::size_t i = y * 16 + x;
                img[i] = std::min(1.0, img[i] + 0.85 * blob);
            }
        }
    }
    return img;
}

/// Writes the demo model plus `count` P5 images (ids img000, img001, ...)
/// and a matching label file. Returns the manifest path.
inline std::filesystem::path writeDemoFixture(const std::filesystem::path& dir, std::size_t count,
                                              std::uint64_t seed) {
    std::filesystem::create_directories(dir / "images");
    const Model model = makeDemoClassifier();
    const auto manifest = dir / "model.manifest";
    saveModel(model, manifest);

    std::ofstream labels(dir / "labels.txt", std::ios::trunc);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t cls = i % 4;
        char name[32];
        std::snprintf(name, sizeof(name), "img%03zu", i);
        savePnm(makeDemoImage(cls, deriveSeed(seed, name)), dir / "images" / (std::string(name) + ".pgm"));
        labels << name << " " << cls << "\n";
    }
    return manifest;
}

} // namespace attrcrit
