// Shared model/input fixtures for the test suites.
#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "attrcrit/model.hpp"
#include "attrcrit/rng.hpp"
#include "attrcrit/tensor.hpp"

namespace fixtures {

using attrcrit::Layer;
using attrcrit::LayerKind;
using attrcrit::Model;
using attrcrit::Rng;
using attrcrit::Tensor;

/// max(x1, x2) over three features, expressed as relu(x1-x2) + relu(x2);
/// exact on inputs with x2 >= 0, which covers every perturbation of the
/// all-ones input toward a zero baseline.
inline Model makeMaxModel() {
    Model m;
    m.input_shape = {3};
    m.class_count = 1;
    m.layers.push_back(Layer::dense(
        Tensor({2, 3}, {1.0, -1.0, 0.0, 0.0, 1.0, 0.0}), Tensor({2})));
    m.layers.push_back(Layer::relu());
    m.layers.push_back(Layer::dense(Tensor({1, 2}, {1.0, 1.0}), Tensor({1})));
    attrcrit::validateModel(m);
    return m;
}

// the three attribution score rows the max-model fixtures inject
inline std::vector<double> maxModelScoresA1() { return {1.0 / 6.0, 1.0 / 3.0, 1.0 / 2.0}; }
inline std::vector<double> maxModelScoresA2() { return {2.0 / 3.0, 0.0, 1.0 / 3.0}; }
inline std::vector<double> maxModelScoresA3() { return {2.0 / 3.0, 1.0 / 3.0, 0.0}; }

inline Model makeSingleDenseModel(const std::vector<double>& weights, double bias = 0.0) {
    Model m;
    m.input_shape = {weights.size()};
    m.class_count = 1;
    m.layers.push_back(
        Layer::dense(Tensor({1, weights.size()}, weights), Tensor({1}, std::vector<double>{bias})));
    attrcrit::validateModel(m);
    return m;
}

inline Tensor randomTensor(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

/// Dense/relu stack with the given widths; ends dense (logit output).
inline Model makeRandomMlp(Rng& rng, const std::vector<std::size_t>& widths) {
    Model m;
    m.input_shape = {widths.front()};
    m.class_count = widths.back();
    for (std::size_t i = 1; i < widths.size(); ++i) {
        m.layers.push_back(Layer::dense(randomTensor(rng, {widths[i], widths[i - 1]}, -1.0, 1.0),
                                        randomTensor(rng, {widths[i]}, -0.5, 0.5)));
        if (i + 1 < widths.size()) m.layers.push_back(Layer::relu());
    }
    attrcrit::validateModel(m);
    return m;
}

/// Small conv net: conv -> relu -> (optional maxpool) -> flatten -> dense.
inline Model makeRandomCnn(Rng& rng, bool withPool, std::size_t inChannels = 1,
                           std::size_t side = 6, std::size_t convChannels = 3,
                           std::size_t classes = 2) {
    Model m;
    m.input_shape = {inChannels, side, side};
    m.class_count = classes;
    m.layers.push_back(
        Layer::conv(randomTensor(rng, {convChannels, inChannels, 3, 3}, -0.8, 0.8),
                    randomTensor(rng, {convChannels}, -0.3, 0.3), 1, 1));
    m.layers.push_back(Layer::relu());
    std::size_t spatial = side;
    if (withPool) {
        m.layers.push_back(Layer::maxpool(2, 2));
        spatial = (side - 2) / 2 + 1;
    }
    m.layers.push_back(Layer::flatten());
    m.layers.push_back(
        Layer::dense(randomTensor(rng, {classes, convChannels * spatial * spatial}, -0.5, 0.5),
                     randomTensor(rng, {classes}, -0.2, 0.2)));
    attrcrit::validateModel(m);
    return m;
}

/// True when every ReLU pre-activation is at least `margin` from its kink and
/// every maxpool window has a top-two gap of at least `margin` (finite
/// differences are only trustworthy away from those corners).
inline bool isKinkFree(const Model& m, const Tensor& x, double margin) {
    const attrcrit::ForwardTrace trace = attrcrit::forward(m, x);
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const Layer& l = m.layers[i];
        if (l.kind == LayerKind::relu) {
            const Tensor& pre = trace.input_of(i);
            for (std::size_t j = 0; j < pre.size(); ++j) {
                if (std::abs(pre[j]) < margin) return false;
            }
        } else if (l.kind == LayerKind::maxpool2d) {
            const Tensor& in = trace.input_of(i);
            const std::size_t h = in.extent(1), w = in.extent(2);
            const std::size_t hOut = trace.output_of(i).extent(1);
            const std::size_t wOut = trace.output_of(i).extent(2);
            for (std::size_t c = 0; c < in.extent(0); ++c) {
                for (std::size_t oy = 0; oy < hOut; ++oy) {
                    for (std::size_t ox = 0; ox < wOut; ++ox) {
                        double best = -1e300, second = -1e300;
                        for (std::size_t ky = 0; ky < l.window; ++ky) {
                            for (std::size_t kx = 0; kx < l.window; ++kx) {
                                const double v =
                                    in[(c * h + oy * l.stride + ky) * w + ox * l.stride + kx];
                                if (v > best) {
                                    second = best;
                                    best = v;
                                } else if (v > second) {
                                    second = v;
                                }
                            }
                        }
                        if (best - second < margin) return false;
                    }
                }
            }
        }
    }
    return true;
}

inline Tensor kinkFreeInput(const Model& m, Rng& rng, double margin = 1e-3, double lo = -1.0,
                            double hi = 1.0) {
    for (int attempt = 0; attempt < 400; ++attempt) {
        Tensor x = randomTensor(rng, m.input_shape, lo, hi);
        if (isKinkFree(m, x, margin)) return x;
    }
    throw std::runtime_error("could not sample a kink-free input");
}

/// Fresh unique directory under the system temp dir.
inline std::filesystem::path makeTempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("attrcrit-" + tag + "-" + std::to_string(::getpid()) + "-" +
                      std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace fixtures
