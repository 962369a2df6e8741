#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "attrcrit/errors.hpp"
#include "attrcrit/model.hpp"
#include "attrcrit/tensor.hpp"

namespace attrcrit {

enum class RuleKind { exact_gradient, guided_relu, lrp_alpha_beta, deeplift_rescale };

/// Per-layer-kind override of the backward propagation rule.
/// exact-gradient is the default for every layer kind.
struct BackwardRuleSet {
    std::array<std::optional<RuleKind>, 6> overrides{};
    double lrp_alpha = 2.0;
    double lrp_beta = 1.0;
    double lrp_epsilon = 1e-9;
    // the layer emitting the class score splits relevance proportionally
    // (z-rule); hidden linear layers use alpha-beta
    bool lrp_top_z_rule = true;
    const ForwardTrace* reference = nullptr; // required by deeplift_rescale

    RuleKind ruleFor(LayerKind k) const {
        const auto& o = overrides[static_cast<std::size_t>(k)];
        return o ? *o : RuleKind::exact_gradient;
    }

    static BackwardRuleSet exact() { return {}; }

    static BackwardRuleSet guided() {
        BackwardRuleSet r;
        r.overrides[static_cast<std::size_t>(LayerKind::relu)] = RuleKind::guided_relu;
        return r;
    }

    static BackwardRuleSet lrp(double epsilon = 1e-9) {
        BackwardRuleSet r;
        for (auto& o : r.overrides) o = RuleKind::lrp_alpha_beta;
        r.lrp_epsilon = epsilon;
        return r;
    }

    static BackwardRuleSet deeplift(const ForwardTrace& referenceTrace) {
        BackwardRuleSet r;
        for (auto& o : r.overrides) o = RuleKind::deeplift_rescale;
        r.reference = &referenceTrace;
        return r;
    }
};

namespace detail {

// ---- linear-map transposes (shared by exact gradients and DeepLIFT multipliers)

inline Tensor denseBackward(const Layer& l, const Tensor& gOut) {
    const std::size_t out = l.weight.extent(0), in = l.weight.extent(1);
    Tensor gIn({in});
    for (std::size_t i = 0; i < out; ++i) {
        const double g = gOut[i];
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < in; ++j) gIn[j] += l.weight.at2(i, j) * g;
    }
    return gIn;
}

inline Tensor convBackward(const Layer& l, const Tensor& gOut, const Tensor& xIn) {
    const std::size_t cIn = xIn.extent(0), h = xIn.extent(1), w = xIn.extent(2);
    const std::size_t cOut = l.weight.extent(0), kh = l.weight.extent(2), kw = l.weight.extent(3);
    const std::size_t hOut = gOut.extent(1), wOut = gOut.extent(2);
    Tensor gIn({cIn, h, w});
    for (std::size_t co = 0; co < cOut; ++co) {
        for (std::size_t oy = 0; oy < hOut; ++oy) {
            for (std::size_t ox = 0; ox < wOut; ++ox) {
                const double g = gOut.at3(co, oy, ox);
                if (g == 0.0) continue;
                for (std::size_t ci = 0; ci < cIn; ++ci) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * l.stride + ky) -
                                                  static_cast<std::ptrdiff_t>(l.padding);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * l.stride + kx) -
                                static_cast<std::ptrdiff_t>(l.padding);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            gIn.at3(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                                g * l.weight[((co * cIn + ci) * kh + ky) * kw + kx];
                        }
                    }
                }
            }
        }
    }
    return gIn;
}

inline Tensor maxpoolRoute(const std::vector<std::size_t>& argmax, const Tensor& gOut,
                           const std::vector<std::size_t>& inShape) {
    Tensor gIn(inShape);
    for (std::size_t o = 0; o < gOut.size(); ++o) gIn[argmax[o]] += gOut[o];
    return gIn;
}

inline Tensor softmaxBackward(const Tensor& y, const Tensor& gOut) {
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += gOut[i] * y[i];
    Tensor gIn(y.shape());
    for (std::size_t j = 0; j < y.size(); ++j) gIn[j] = y[j] * (gOut[j] - dot);
    return gIn;
}

// ---- LRP relevance redistribution
//
// alpha2beta1 on the positive/negative contribution split; when one branch is
// empty for an output unit the relevance splits proportionally over the other
// branch, so each unit redistributes exactly what it received (the per-layer
// conservation the metrics rely on). Bias gets no relevance. A unit with no
// contributions at all (every z exactly zero, e.g. below a fully inactive
// layer) keeps nothing to redistribute: its relevance is dropped, since the
// input provably does not influence that unit.

struct LrpState {
    bool topLinearDone = false; // the layer emitting the class score uses the z-rule
};

template <typename ContribFn>
inline void lrpRedistributeUnit(double rOut, double eps, double alpha, double beta, bool zRule,
                                ContribFn&& forEachContribution) {
    if (rOut == 0.0) return;
    double zPos = 0.0, zNeg = 0.0, zSum = 0.0;
    forEachContribution([&](double z, double&) {
        zSum += z;
        if (z > 0.0) zPos += z;
        else zNeg += z;
    });
    if (zRule) {
        const double denom = zSum >= 0.0 ? zSum + eps : zSum - eps;
        forEachContribution([&](double z, double& rIn) { rIn += z / denom * rOut; });
        return;
    }
    const bool hasPos = zPos > 0.0, hasNeg = zNeg < 0.0;
    if (hasPos && hasNeg) {
        const double dPos = zPos + eps, dNeg = zNeg - eps;
        forEachContribution([&](double z, double& rIn) {
            if (z > 0.0) rIn += alpha * z / dPos * rOut;
            else if (z < 0.0) rIn -= beta * z / dNeg * rOut;
        });
    } else if (hasPos) {
        const double dPos = zPos + eps;
        forEachContribution([&](double z, double& rIn) {
            if (z > 0.0) rIn += z / dPos * rOut;
        });
    } else if (hasNeg) {
        const double dNeg = zNeg - eps;
        forEachContribution([&](double z, double& rIn) {
            if (z < 0.0) rIn += z / dNeg * rOut;
        });
    }
}

inline Tensor lrpDense(const Layer& l, const Tensor& x, const Tensor& rOut,
                       const BackwardRuleSet& rules, bool zRule) {
    const std::size_t out = l.weight.extent(0), in = l.weight.extent(1);
    Tensor rIn({in});
    for (std::size_t i = 0; i < out; ++i) {
        lrpRedistributeUnit(rOut[i], rules.lrp_epsilon, rules.lrp_alpha, rules.lrp_beta, zRule,
                            [&](auto&& visit) {
                                for (std::size_t j = 0; j < in; ++j) {
                                    visit(x[j] * l.weight.at2(i, j), rIn[j]);
                                }
                            });
    }
    return rIn;
}

inline Tensor lrpConv(const Layer& l, const Tensor& x, const Tensor& rOut,
                      const BackwardRuleSet& rules, bool zRule) {
    const std::size_t cIn = x.extent(0), h = x.extent(1), w = x.extent(2);
    const std::size_t cOut = l.weight.extent(0), kh = l.weight.extent(2), kw = l.weight.extent(3);
    const std::size_t hOut = rOut.extent(1), wOut = rOut.extent(2);
    Tensor rIn({cIn, h, w});
    for (std::size_t co = 0; co < cOut; ++co) {
        for (std::size_t oy = 0; oy < hOut; ++oy) {
            for (std::size_t ox = 0; ox < wOut; ++ox) {
                lrpRedistributeUnit(
                    rOut.at3(co, oy, ox), rules.lrp_epsilon, rules.lrp_alpha, rules.lrp_beta,
                    zRule, [&](auto&& visit) {
                        for (std::size_t ci = 0; ci < cIn; ++ci) {
                            for (std::size_t ky = 0; ky < kh; ++ky) {
                                const std::ptrdiff_t iy =
                                    static_cast<std::ptrdiff_t>(oy * l.stride + ky) -
                                    static_cast<std::ptrdiff_t>(l.padding);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                                for (std::size_t kx = 0; kx < kw; ++kx) {
                                    const std::ptrdiff_t ix =
                                        static_cast<std::ptrdiff_t>(ox * l.stride + kx) -
                                        static_cast<std::ptrdiff_t>(l.padding);
                                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                    const std::size_t flat =
                                        (ci * h + static_cast<std::size_t>(iy)) * w +
                                        static_cast<std::size_t>(ix);
                                    visit(x[flat] *
                                              l.weight[((co * cIn + ci) * kh + ky) * kw + kx],
                                          rIn[flat]);
                                }
                            }
                        }
                    });
            }
        }
    }
    return rIn;
}

// ---- DeepLIFT-Rescale pieces

inline constexpr double kDeepliftTinyDelta = 1e-9;

inline Tensor deepliftRelu(const Tensor& x, const Tensor& xRef, const Tensor& mOut) {
    Tensor mIn(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dIn = x[i] - xRef[i];
        double slope;
        if (std::abs(dIn) > kDeepliftTinyDelta) {
            slope = (std::max(x[i], 0.0) - std::max(xRef[i], 0.0)) / dIn;
        } else {
            slope = x[i] > 0.0 ? 1.0 : 0.0; // negligible delta: fall back to the derivative
        }
        mIn[i] = mOut[i] * slope;
    }
    return mIn;
}

/// Routes each window's output delta onto one input position so that
/// multiplier * input-delta reproduces the output delta per window.
inline Tensor deepliftMaxpool(const Layer& l, const Tensor& x, const Tensor& xRef,
                              const std::vector<std::size_t>& argmax, const Tensor& out,
                              const Tensor& outRef, const Tensor& mOut) {
    const std::size_t h = x.extent(1), w = x.extent(2);
    const std::size_t hOut = out.extent(1), wOut = out.extent(2);
    Tensor mIn(x.shape());
    for (std::size_t ch = 0; ch < x.extent(0); ++ch) {
        for (std::size_t oy = 0; oy < hOut; ++oy) {
            for (std::size_t ox = 0; ox < wOut; ++ox) {
                const std::size_t o = (ch * hOut + oy) * wOut + ox;
                const double dOut = out[o] - outRef[o];
                if (mOut[o] == 0.0 || dOut == 0.0) continue;
                std::size_t target = argmax[o];
                double dIn = x[target] - xRef[target];
                if (std::abs(dIn) <= kDeepliftTinyDelta) {
                    // winner did not move; pick the window position that did
                    double bestMag = std::abs(dIn);
                    for (std::size_t ky = 0; ky < l.window; ++ky) {
                        for (std::size_t kx = 0; kx < l.window; ++kx) {
                            const std::size_t flat =
                                (ch * h + oy * l.stride + ky) * w + ox * l.stride + kx;
                            const double cand = std::abs(x[flat] - xRef[flat]);
                            if (cand > bestMag) {
                                bestMag = cand;
                                target = flat;
                            }
                        }
                    }
                    dIn = x[target] - xRef[target];
                    if (std::abs(dIn) <= kDeepliftTinyDelta) continue; // dOut is equally tiny
                }
                mIn[target] += mOut[o] * dOut / dIn;
            }
        }
    }
    return mIn;
}

} // namespace detail

/// Propagates a seed signal from activation boundary `fromBoundary` down to
/// `toBoundary` (boundary i is the input of layer i; boundary layer-count is
/// the model output). Returns the signal at `toBoundary`:
/// gradients for exact/guided rules, relevance for LRP, multipliers for DeepLIFT.
inline Tensor backwardRange(const Model& m, const ForwardTrace& trace, Tensor seed,
                            std::size_t fromBoundary, std::size_t toBoundary,
                            const BackwardRuleSet& rules) {
    if (fromBoundary > m.layers.size() || toBoundary > fromBoundary) {
        throw RangeError("backwardRange: bad boundaries");
    }
    if (seed.shape() != trace.activations[fromBoundary].shape()) {
        throw ShapeError("backwardRange: seed shape mismatch");
    }
    detail::LrpState lrpState;
    Tensor signal = std::move(seed);

    for (std::size_t b = fromBoundary; b > toBoundary; --b) {
        const std::size_t i = b - 1;
        const Layer& l = m.layers[i];
        const Tensor& xIn = trace.input_of(i);
        const RuleKind rule = rules.ruleFor(l.kind);

        if (rule == RuleKind::deeplift_rescale && rules.reference == nullptr) {
            throw RuleError("deeplift rule needs a reference trace");
        }

        switch (l.kind) {
            case LayerKind::dense:
                if (rule == RuleKind::lrp_alpha_beta) {
                    const bool zRule = rules.lrp_top_z_rule && !lrpState.topLinearDone;
                    lrpState.topLinearDone = true;
                    signal = detail::lrpDense(l, xIn, signal, rules, zRule);
                } else {
                    signal = detail::denseBackward(l, signal);
                }
                break;
            case LayerKind::conv2d:
                if (rule == RuleKind::lrp_alpha_beta) {
                    const bool zRule = rules.lrp_top_z_rule && !lrpState.topLinearDone;
                    lrpState.topLinearDone = true;
                    signal = detail::lrpConv(l, xIn, signal, rules, zRule);
                } else {
                    signal = detail::convBackward(l, signal, xIn);
                }
                break;
            case LayerKind::relu:
                switch (rule) {
                    case RuleKind::exact_gradient:
                        for (std::size_t j = 0; j < signal.size(); ++j) {
                            if (xIn[j] <= 0.0) signal[j] = 0.0;
                        }
                        break;
                    case RuleKind::guided_relu:
                        for (std::size_t j = 0; j < signal.size(); ++j) {
                            if (xIn[j] <= 0.0 || signal[j] <= 0.0) signal[j] = 0.0;
                        }
                        break;
                    case RuleKind::lrp_alpha_beta:
                        // relevance passes through the nonlinearity unchanged
                        break;
                    case RuleKind::deeplift_rescale:
                        signal = detail::deepliftRelu(xIn, rules.reference->input_of(i), signal);
                        break;
                }
                break;
            case LayerKind::maxpool2d:
                if (rule == RuleKind::deeplift_rescale) {
                    signal = detail::deepliftMaxpool(l, xIn, rules.reference->input_of(i),
                                                     trace.pool_argmax[i], trace.output_of(i),
                                                     rules.reference->output_of(i), signal);
                } else {
                    // exact, guided and LRP all route to the forward winner
                    signal = detail::maxpoolRoute(trace.pool_argmax[i], signal, xIn.shape());
                }
                break;
            case LayerKind::flatten:
                signal = signal.reshape(xIn.shape());
                break;
            case LayerKind::softmax:
                if (rule == RuleKind::lrp_alpha_beta || rule == RuleKind::deeplift_rescale) {
                    throw RuleError(std::string(rule == RuleKind::lrp_alpha_beta
                                                    ? "lrp-alpha-beta"
                                                    : "deeplift-rescale") +
                                    " rule is not applicable to softmax");
                }
                signal = detail::softmaxBackward(trace.output_of(i), signal);
                break;
        }
    }
    return signal;
}

/// Signal of the model output w.r.t. the input under the given rules.
/// Exact/guided/deeplift seed a unit vector at the requested class; LRP seeds
/// the class score itself, so input relevance sums to (about) y_c.
inline Tensor backwardInput(const Model& m, const ForwardTrace& trace, std::size_t classIndex,
                            const BackwardRuleSet& rules = BackwardRuleSet::exact()) {
    if (classIndex >= m.class_count) throw RangeError("backwardInput: class index out of range");
    Tensor seed(trace.y.shape());
    const bool isLrp = rules.ruleFor(LayerKind::dense) == RuleKind::lrp_alpha_beta;
    seed[classIndex] = isLrp ? trace.y[classIndex] : 1.0;
    return backwardRange(m, trace, std::move(seed), m.layers.size(), 0, rules);
}

} // namespace attrcrit
