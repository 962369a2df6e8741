#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "attrcrit/backward.hpp"
#include "attrcrit/errors.hpp"
#include "attrcrit/model.hpp"
#include "attrcrit/pixels.hpp"
#include "attrcrit/rng.hpp"
#include "attrcrit/tensor.hpp"

namespace attrcrit {

/// Per-pixel scores aligned with the input's spatial layout.
struct AttributionMap {
    Tensor scores; // spatial shape, channels already summed out
    std::string method;
    std::size_t class_index = 0;
    double baseline_value = 0.0;
    std::map<std::string, std::string> metadata;
};

struct MethodConfig {
    std::size_t ig_steps = 50;
    std::size_t sg_samples = 50;
    double sg_noise_fraction = 0.20;
    double baseline_value = 0.0;
    std::uint64_t rng_seed = 0;
    std::optional<std::size_t> gradcam_layer; // default: last conv layer

    void validate() const {
        if (ig_steps < 1) throw RangeError("ig_steps must be >= 1");
        if (sg_samples < 1) throw RangeError("sg_samples must be >= 1");
        if (sg_noise_fraction < 0.0 || sg_noise_fraction > 1.0) {
            throw RangeError("sg_noise_fraction must be in [0,1]");
        }
    }
};

namespace detail {

/// Backward signal seeded at the class logit (a trailing softmax is skipped:
/// every method here explains the pre-softmax class score).
inline Tensor signalFromLogit(const Model& m, const ForwardTrace& trace, std::size_t classIndex,
                              const BackwardRuleSet& rules, double seedValue) {
    if (classIndex >= m.class_count) throw RangeError("class index out of range");
    const std::size_t logitBoundary = logitLayerIndex(m) + 1;
    Tensor seed(trace.activations[logitBoundary].shape());
    seed[classIndex] = seedValue;
    return backwardRange(m, trace, std::move(seed), logitBoundary, 0, rules);
}

inline Tensor gradTimesInput(const PixelSpace& px, const Tensor& grad, const Tensor& x) {
    return px.collapseChannels(elementwise(ElemOp::mul, grad, x));
}

inline double classLogit(const Model& m, const ForwardTrace& trace, std::size_t classIndex) {
    return trace.output_of(logitLayerIndex(m))[classIndex];
}

} // namespace detail

/// grad x input at the class logit.
inline AttributionMap saliency(const Model& m, const Tensor& x, std::size_t classIndex) {
    const PixelSpace px(m.input_shape);
    const ForwardTrace trace = forward(m, x);
    const Tensor grad = detail::signalFromLogit(m, trace, classIndex, BackwardRuleSet::exact(), 1.0);
    return AttributionMap{detail::gradTimesInput(px, grad, x), "saliency", classIndex, 0.0, {}};
}

/// Left-endpoint Riemann sum of the gradient along the straight path from the
/// constant-baseline image to x, times (x - baseline).
inline AttributionMap integratedGradient(const Model& m, const Tensor& x, std::size_t classIndex,
                                         const MethodConfig& cfg = {}) {
    cfg.validate();
    const PixelSpace px(m.input_shape);
    const Tensor xb(m.input_shape, cfg.baseline_value);

    Tensor gradSum(m.input_shape);
    for (std::size_t step = 0; step < cfg.ig_steps; ++step) {
        const double t = static_cast<double>(step) / static_cast<double>(cfg.ig_steps);
        Tensor point(m.input_shape);
        for (std::size_t i = 0; i < point.size(); ++i) point[i] = xb[i] + t * (x[i] - xb[i]);
        const ForwardTrace trace = forward(m, point);
        const Tensor g = detail::signalFromLogit(m, trace, classIndex, BackwardRuleSet::exact(), 1.0);
        for (std::size_t i = 0; i < g.size(); ++i) gradSum[i] += g[i];
    }
    Tensor avgTimesDelta(m.input_shape);
    for (std::size_t i = 0; i < avgTimesDelta.size(); ++i) {
        avgTimesDelta[i] = (x[i] - xb[i]) * gradSum[i] / static_cast<double>(cfg.ig_steps);
    }
    AttributionMap map{px.collapseChannels(avgTimesDelta), "ig", classIndex, cfg.baseline_value, {}};
    map.metadata["ig_steps"] = std::to_string(cfg.ig_steps);
    map.metadata["scheme"] = "left-endpoint";
    return map;
}

/// Mean gradient over Gaussian-perturbed inputs, times the clean input.
/// Noise scale is sg_noise_fraction of the input's own dynamic range.
inline AttributionMap smoothGrad(const Model& m, const Tensor& x, std::size_t classIndex,
                                 const MethodConfig& cfg = {}) {
    cfg.validate();
    const PixelSpace px(m.input_shape);
    double lo = x[0], hi = x[0];
    for (std::size_t i = 1; i < x.size(); ++i) {
        lo = std::min(lo, x[i]);
        hi = std::max(hi, x[i]);
    }
    const double sigma = cfg.sg_noise_fraction * (hi - lo);

    Rng rng(cfg.rng_seed);
    Tensor gradSum(m.input_shape);
    for (std::size_t s = 0; s < cfg.sg_samples; ++s) {
        Tensor noisy = x;
        if (sigma > 0.0) {
            for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] += rng.normal(0.0, sigma);
        }
        const ForwardTrace trace = forward(m, noisy);
        const Tensor g = detail::signalFromLogit(m, trace, classIndex, BackwardRuleSet::exact(), 1.0);
        for (std::size_t i = 0; i < g.size(); ++i) gradSum[i] += g[i];
    }
    Tensor mean(m.input_shape);
    for (std::size_t i = 0; i < mean.size(); ++i) {
        mean[i] = gradSum[i] / static_cast<double>(cfg.sg_samples);
    }
    AttributionMap map{detail::gradTimesInput(px, mean, x), "smoothgrad", classIndex, 0.0, {}};
    map.metadata["sg_samples"] = std::to_string(cfg.sg_samples);
    map.metadata["sg_noise_fraction"] = std::to_string(cfg.sg_noise_fraction);
    return map;
}

/// Gradient with the guided ReLU rule, times the input.
inline AttributionMap guidedBackprop(const Model& m, const Tensor& x, std::size_t classIndex) {
    const PixelSpace px(m.input_shape);
    const ForwardTrace trace = forward(m, x);
    const Tensor grad = detail::signalFromLogit(m, trace, classIndex, BackwardRuleSet::guided(), 1.0);
    return AttributionMap{detail::gradTimesInput(px, grad, x), "gb", classIndex, 0.0, {}};
}

/// alpha2beta1 relevance from the class logit down to the input.
inline AttributionMap lrpAlpha2Beta1(const Model& m, const Tensor& x, std::size_t classIndex,
                                     double epsilon = 1e-9) {
    const PixelSpace px(m.input_shape);
    const ForwardTrace trace = forward(m, x);
    const double seed = detail::classLogit(m, trace, classIndex);
    const Tensor relevance =
        detail::signalFromLogit(m, trace, classIndex, BackwardRuleSet::lrp(epsilon), seed);
    AttributionMap map{px.collapseChannels(relevance), "lrp", classIndex, 0.0, {}};
    map.metadata["alpha"] = "2";
    map.metadata["beta"] = "1";
    return map;
}

/// Rescale-rule multipliers relative to the baseline trace, times (x - baseline).
inline AttributionMap deepliftRescale(const Model& m, const Tensor& x, std::size_t classIndex,
                                      const MethodConfig& cfg = {}) {
    cfg.validate();
    const PixelSpace px(m.input_shape);
    const Tensor xb(m.input_shape, cfg.baseline_value);
    const ForwardTrace trace = forward(m, x);
    const ForwardTrace refTrace = forward(m, xb);
    const Tensor mult =
        detail::signalFromLogit(m, trace, classIndex, BackwardRuleSet::deeplift(refTrace), 1.0);
    Tensor contrib(m.input_shape);
    for (std::size_t i = 0; i < contrib.size(); ++i) contrib[i] = mult[i] * (x[i] - xb[i]);
    AttributionMap map{px.collapseChannels(contrib), "deeplift", classIndex, cfg.baseline_value, {}};
    map.metadata["rule"] = "rescale";
    return map;
}

inline std::optional<std::size_t> lastConvLayer(const Model& m) {
    std::optional<std::size_t> idx;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        if (m.layers[i].kind == LayerKind::conv2d) idx = i;
    }
    return idx;
}

namespace detail {

/// Align-corners bilinear resize of a 2-D map.
inline Tensor bilinearUpsample(const Tensor& src, std::size_t hOut, std::size_t wOut) {
    const std::size_t hIn = src.extent(0), wIn = src.extent(1);
    Tensor out({hOut, wOut});
    const double sy = hOut > 1 ? static_cast<double>(hIn - 1) / static_cast<double>(hOut - 1) : 0.0;
    const double sx = wOut > 1 ? static_cast<double>(wIn - 1) / static_cast<double>(wOut - 1) : 0.0;
    for (std::size_t oy = 0; oy < hOut; ++oy) {
        const double fy = sy * static_cast<double>(oy);
        const std::size_t y0 = std::min(static_cast<std::size_t>(fy), hIn - 1);
        const std::size_t y1 = std::min(y0 + 1, hIn - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t ox = 0; ox < wOut; ++ox) {
            const double fx = sx * static_cast<double>(ox);
            const std::size_t x0 = std::min(static_cast<std::size_t>(fx), wIn - 1);
            const std::size_t x1 = std::min(x0 + 1, wIn - 1);
            const double wx = fx - static_cast<double>(x0);
            out.at2(oy, ox) = (1.0 - wy) * (1.0 - wx) * src.at2(y0, x0) +
                              (1.0 - wy) * wx * src.at2(y0, x1) +
                              wy * (1.0 - wx) * src.at2(y1, x0) + wy * wx * src.at2(y1, x1);
        }
    }
    return out;
}

} // namespace detail

/// Channel weights are spatial means of the logit gradient at the target conv
/// output; the weighted activation sum is clamped at zero and upsampled to the
/// input size. The result is the attribution itself (no input product).
inline AttributionMap gradCam(const Model& m, const Tensor& x, std::size_t classIndex,
                              const MethodConfig& cfg = {}) {
    cfg.validate();
    std::size_t convIdx;
    if (cfg.gradcam_layer) {
        convIdx = *cfg.gradcam_layer;
        if (convIdx >= m.layers.size() || m.layers[convIdx].kind != LayerKind::conv2d) {
            throw NoConvLayerError("gradcam_layer does not point at a conv layer");
        }
    } else {
        const auto last = lastConvLayer(m);
        if (!last) throw NoConvLayerError("model has no conv layer");
        convIdx = *last;
    }

    const ForwardTrace trace = forward(m, x);
    const std::size_t logitBoundary = logitLayerIndex(m) + 1;
    const std::size_t actBoundary = convIdx + 1;
    if (actBoundary > logitBoundary) {
        throw NoConvLayerError("gradcam target lies above the class score layer");
    }

    Tensor seed(trace.activations[logitBoundary].shape());
    if (classIndex >= m.class_count) throw RangeError("class index out of range");
    seed[classIndex] = 1.0;
    const Tensor grad = backwardRange(m, trace, std::move(seed), logitBoundary, actBoundary,
                                      BackwardRuleSet::exact());

    const Tensor& act = trace.activations[actBoundary];
    const std::size_t ch = act.extent(0), h = act.extent(1), w = act.extent(2);
    const std::size_t plane = h * w;
    Tensor cam({h, w});
    for (std::size_t c = 0; c < ch; ++c) {
        double weight = 0.0;
        for (std::size_t p = 0; p < plane; ++p) weight += grad[c * plane + p];
        weight /= static_cast<double>(plane);
        for (std::size_t p = 0; p < plane; ++p) cam[p] += weight * act[c * plane + p];
    }
    for (std::size_t p = 0; p < plane; ++p) cam[p] = std::max(cam[p], 0.0);

    const PixelSpace px(m.input_shape);
    const auto spatial = px.spatialShape();
    if (spatial.size() != 2) throw NoConvLayerError("gradcam needs a 2-D spatial input");
    AttributionMap map{detail::bilinearUpsample(cam, spatial[0], spatial[1]), "gradcam",
                       classIndex, 0.0, {}};
    map.metadata["gradcam_layer"] = std::to_string(convIdx);
    map.metadata["upsampling"] = "bilinear";
    return map;
}

/// Seeded i.i.d. uniform(0,1) score per pixel.
inline AttributionMap randomAttribution(const Tensor& x, std::uint64_t seed,
                                        std::size_t classIndex = 0) {
    const PixelSpace px(x.shape());
    Rng rng(seed);
    Tensor scores(px.spatialShape());
    for (std::size_t p = 0; p < scores.size(); ++p) {
        double v = rng.uniform01();
        while (v == 0.0) v = rng.uniform01(); // keep scores strictly positive
        scores[p] = v;
    }
    AttributionMap map{std::move(scores), "random", classIndex, 0.0, {}};
    map.metadata["seed"] = std::to_string(seed);
    return map;
}

} // namespace attrcrit
