#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "attrcrit/errors.hpp"
#include "attrcrit/tensor.hpp"

namespace attrcrit {

enum class LayerKind { dense, conv2d, relu, maxpool2d, flatten, softmax };

inline const char* layerKindName(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::flatten: return "flatten";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

struct Layer {
    LayerKind kind{LayerKind::relu};
    Tensor weight; // dense: (out,in); conv2d: (C_out,C_in,kh,kw)
    Tensor bias;   // dense: (out); conv2d: (C_out)
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t window = 0; // maxpool2d

    static Layer dense(Tensor w, Tensor b) {
        Layer l;
        l.kind = LayerKind::dense;
        l.weight = std::move(w);
        l.bias = std::move(b);
        return l;
    }
    static Layer conv(Tensor kernels, Tensor b, std::size_t stride = 1, std::size_t padding = 0) {
        Layer l;
        l.kind = LayerKind::conv2d;
        l.weight = std::move(kernels);
        l.bias = std::move(b);
        l.stride = stride;
        l.padding = padding;
        return l;
    }
    static Layer relu() {
        Layer l;
        l.kind = LayerKind::relu;
        return l;
    }
    static Layer maxpool(std::size_t window, std::size_t stride) {
        Layer l;
        l.kind = LayerKind::maxpool2d;
        l.window = window;
        l.stride = stride;
        return l;
    }
    static Layer flatten() {
        Layer l;
        l.kind = LayerKind::flatten;
        return l;
    }
    static Layer softmax() {
        Layer l;
        l.kind = LayerKind::softmax;
        return l;
    }
};

/// Ordered layer stack; last layer yields the length-n score vector.
struct Model {
    std::vector<Layer> layers;
    std::vector<std::size_t> input_shape;
    std::size_t class_count = 0;
};

namespace detail {

inline std::vector<std::size_t> layerOutputShape(const Layer& l,
                                                 const std::vector<std::size_t>& in) {
    switch (l.kind) {
        case LayerKind::dense: {
            if (in.size() != 1) {
                throw ModelFormatError("dense layer needs a flat input, got " +
                                       Tensor::shapeString(in));
            }
            if (l.weight.ndim() != 2 || l.weight.extent(1) != in[0]) {
                throw ModelFormatError("dense weight " + Tensor::shapeString(l.weight.shape()) +
                                       " does not accept input " + Tensor::shapeString(in));
            }
            if (l.bias.size() != l.weight.extent(0)) {
                throw ModelFormatError("dense bias length mismatch");
            }
            return {l.weight.extent(0)};
        }
        case LayerKind::conv2d: {
            if (in.size() != 3) {
                throw ModelFormatError("conv2d layer needs (C,H,W) input, got " +
                                       Tensor::shapeString(in));
            }
            if (l.weight.ndim() != 4 || l.weight.extent(1) != in[0]) {
                throw ModelFormatError("conv kernel " + Tensor::shapeString(l.weight.shape()) +
                                       " does not accept input " + Tensor::shapeString(in));
            }
            if (l.bias.size() != l.weight.extent(0)) {
                throw ModelFormatError("conv bias length mismatch");
            }
            const std::size_t kh = l.weight.extent(2), kw = l.weight.extent(3);
            if (kh > in[1] + 2 * l.padding || kw > in[2] + 2 * l.padding) {
                throw ModelFormatError("conv kernel exceeds padded input");
            }
            return {l.weight.extent(0), (in[1] + 2 * l.padding - kh) / l.stride + 1,
                    (in[2] + 2 * l.padding - kw) / l.stride + 1};
        }
        case LayerKind::relu:
        case LayerKind::softmax:
            if (l.kind == LayerKind::softmax && in.size() != 1) {
                throw ModelFormatError("softmax layer needs a flat input");
            }
            return in;
        case LayerKind::maxpool2d: {
            if (in.size() != 3) throw ModelFormatError("maxpool2d layer needs (C,H,W) input");
            if (l.window > in[1] || l.window > in[2]) {
                throw ModelFormatError("maxpool window exceeds input extents");
            }
            return {in[0], (in[1] - l.window) / l.stride + 1, (in[2] - l.window) / l.stride + 1};
        }
        case LayerKind::flatten: {
            std::size_t n = 1;
            for (std::size_t e : in) n *= e;
            return {n};
        }
    }
    throw ModelFormatError("unknown layer kind");
}

} // namespace detail

/// End-to-end shape compatibility check; throws ModelFormatError on any break.
inline void validateModel(const Model& m) {
    if (m.layers.empty()) throw ModelFormatError("model has no layers");
    if (m.input_shape.empty()) throw ModelFormatError("model has no input shape");
    std::vector<std::size_t> shape = m.input_shape;
    for (const Layer& l : m.layers) {
        if (l.weight.size() > 0 && !l.weight.allFinite()) {
            throw ModelFormatError("non-finite weight in layer");
        }
        if (l.bias.size() > 0 && !l.bias.allFinite()) {
            throw ModelFormatError("non-finite bias in layer");
        }
        shape = detail::layerOutputShape(l, shape);
    }
    const LayerKind last = m.layers.back().kind;
    if (last != LayerKind::dense && last != LayerKind::softmax) {
        throw ModelFormatError("last layer must be dense or softmax");
    }
    if (shape.size() != 1 || shape[0] != m.class_count) {
        throw ModelFormatError("model output " + Tensor::shapeString(shape) +
                               " does not match class count " + std::to_string(m.class_count));
    }
}

/// Per-layer activation record. activations[0] is the input; activations[i+1]
/// is layer i's output, so each layer's input and output are both available.
struct ForwardTrace {
    std::vector<Tensor> activations;
    std::vector<std::vector<std::size_t>> pool_argmax; // indexed by layer, empty if not maxpool
    Tensor y;
    std::size_t predicted = 0;

    const Tensor& input_of(std::size_t layer) const { return activations[layer]; }
    const Tensor& output_of(std::size_t layer) const { return activations[layer + 1]; }
};

namespace detail {

inline Tensor denseForward(const Layer& l, const Tensor& x) {
    const std::size_t out = l.weight.extent(0), in = l.weight.extent(1);
    Tensor y({out});
    for (std::size_t i = 0; i < out; ++i) {
        double acc = l.bias[i];
        for (std::size_t j = 0; j < in; ++j) acc += l.weight.at2(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

inline Tensor convForward(const Layer& l, const Tensor& x) {
    Tensor y = conv2d(x, l.weight, l.stride, l.padding);
    const std::size_t cOut = y.extent(0), plane = y.extent(1) * y.extent(2);
    for (std::size_t c = 0; c < cOut; ++c) {
        const double b = l.bias[c];
        if (b == 0.0) continue;
        for (std::size_t p = 0; p < plane; ++p) y[c * plane + p] += b;
    }
    return y;
}

inline Tensor softmaxForward(const Tensor& x) {
    double mx = x[0];
    for (std::size_t i = 1; i < x.size(); ++i) mx = std::max(mx, x[i]);
    std::vector<double> e(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = std::exp(x[i] - mx);
        sum += e[i];
    }
    for (double& v : e) v /= sum;
    return Tensor(x.shape(), std::move(e));
}

} // namespace detail

inline ForwardTrace forward(const Model& m, const Tensor& input) {
    if (input.shape() != m.input_shape) {
        throw ShapeError("forward: input " + Tensor::shapeString(input.shape()) +
                         " does not match model input " + Tensor::shapeString(m.input_shape));
    }
    if (!input.allFinite()) throw ShapeError("forward: non-finite input");

    ForwardTrace trace;
    trace.activations.reserve(m.layers.size() + 1);
    trace.pool_argmax.resize(m.layers.size());
    trace.activations.push_back(input);

    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const Layer& l = m.layers[i];
        const Tensor& x = trace.activations.back();
        switch (l.kind) {
            case LayerKind::dense:
                trace.activations.push_back(detail::denseForward(l, x));
                break;
            case LayerKind::conv2d:
                trace.activations.push_back(detail::convForward(l, x));
                break;
            case LayerKind::relu:
                trace.activations.push_back(relu(x));
                break;
            case LayerKind::maxpool2d: {
                MaxPoolResult r = maxpool2d(x, l.window, l.stride);
                trace.pool_argmax[i] = std::move(r.argmax);
                trace.activations.push_back(std::move(r.values));
                break;
            }
            case LayerKind::flatten:
                trace.activations.push_back(x.reshape({x.size()}));
                break;
            case LayerKind::softmax:
                trace.activations.push_back(detail::softmaxForward(x));
                break;
        }
    }

    trace.y = trace.activations.back();
    trace.predicted = 0;
    for (std::size_t i = 1; i < trace.y.size(); ++i) {
        if (trace.y[i] > trace.y[trace.predicted]) trace.predicted = i;
    }
    return trace;
}

enum class ScoreMode { softmax, logit };

/// Index of the layer producing the class logits (skips a trailing softmax).
inline std::size_t logitLayerIndex(const Model& m) {
    std::size_t last = m.layers.size() - 1;
    if (m.layers[last].kind == LayerKind::softmax) {
        if (last == 0) throw ModelFormatError("model is a bare softmax");
        return last - 1;
    }
    return last;
}

/// Class score under the chosen mode. softmax mode never double-applies:
/// a model ending in softmax already outputs probabilities.
inline double classScore(const Model& m, const ForwardTrace& trace, std::size_t classIndex,
                         ScoreMode mode) {
    if (classIndex >= m.class_count) throw RangeError("class index out of range");
    const bool endsSoftmax = m.layers.back().kind == LayerKind::softmax;
    if (mode == ScoreMode::softmax) {
        if (endsSoftmax) return trace.y[classIndex];
        return detail::softmaxForward(trace.y)[classIndex];
    }
    if (endsSoftmax) return trace.output_of(logitLayerIndex(m))[classIndex];
    return trace.y[classIndex];
}

inline double classScore(const Model& m, const Tensor& input, std::size_t classIndex,
                         ScoreMode mode) {
    return classScore(m, forward(m, input), classIndex, mode);
}

} // namespace attrcrit
