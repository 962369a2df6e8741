#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "attrcrit/attribution.hpp"
#include "attrcrit/errors.hpp"
#include "attrcrit/model.hpp"
#include "attrcrit/pixels.hpp"
#include "attrcrit/tensor.hpp"

namespace attrcrit {

/// Model output for one (possibly perturbed) input image.
using ScoreFn = std::function<double(const Tensor&)>;

inline ScoreFn makeClassScoreFn(const Model& m, std::size_t classIndex, ScoreMode mode) {
    return [&m, classIndex, mode](const Tensor& x) { return classScore(m, x, classIndex, mode); };
}

/// Pixels sorted by descending attribution score, ties broken by ascending
/// pixel index. The first `positive_count` entries are the strictly positive
/// prefix the ordering metrics operate on.
struct OrderedPixels {
    std::vector<std::size_t> order;
    std::vector<double> ordered_scores;     // aligned with `order`, non-increasing
    std::size_t positive_count = 0;         // M
    double positive_sum = 0.0;              // S(x,A)
    std::vector<double> cumulative_share;   // size M+1: 0 .. 1 over the positive prefix

    std::span<const std::size_t> positivePrefix() const {
        return {order.data(), positive_count};
    }
};

inline OrderedPixels orderPixels(const AttributionMap& map) {
    if (!map.scores.allFinite()) throw ShapeError("orderPixels: non-finite score");
    const std::size_t n = map.scores.size();
    OrderedPixels op;
    op.order.resize(n);
    std::iota(op.order.begin(), op.order.end(), std::size_t{0});
    std::stable_sort(op.order.begin(), op.order.end(), [&](std::size_t a, std::size_t b) {
        return map.scores[a] > map.scores[b]; // stable keeps ascending-index ties
    });
    op.ordered_scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) op.ordered_scores[i] = map.scores[op.order[i]];

    while (op.positive_count < n && op.ordered_scores[op.positive_count] > 0.0) {
        ++op.positive_count;
    }
    if (op.positive_count == 0) {
        throw EmptyPositiveSetError("attribution map has no strictly positive score");
    }
    op.positive_sum = std::accumulate(op.ordered_scores.begin(),
                                      op.ordered_scores.begin() + op.positive_count, 0.0);
    op.cumulative_share.resize(op.positive_count + 1, 0.0);
    double run = 0.0;
    for (std::size_t i = 0; i < op.positive_count; ++i) {
        run += op.ordered_scores[i];
        op.cumulative_share[i + 1] = run / op.positive_sum;
    }
    op.cumulative_share[op.positive_count] = 1.0; // pin the endpoint exactly
    return op;
}

enum class Direction { ablation, construction };
enum class Orientation { forward, reversed };
enum class CurveScope { positive_only, full_order };

struct CurvePoint {
    std::size_t m;  // pixels perturbed
    double k;       // cumulative positive attribution share at this prefix
    double R;       // model output
};

struct PerturbationCurve {
    std::vector<CurvePoint> points;
    Direction direction = Direction::ablation;
    double baseline_value = 0.0;
    double y0 = 0.0;
    double yb = 0.0;
};

/// Evaluates the model along prefixes 0, chunk, 2*chunk, ... of the chosen
/// pixel sequence; the final prefix is always exact. Ablation walks from x
/// toward the baseline; construction walks from the baseline toward x.
inline PerturbationCurve perturbationCurve(const ScoreFn& score, const Tensor& x,
                                           const OrderedPixels& op, double baselineValue,
                                           std::size_t chunk, Direction direction,
                                           CurveScope scope = CurveScope::positive_only,
                                           Orientation orient = Orientation::forward) {
    if (chunk < 1) throw RangeError("perturbation curve: chunk must be >= 1");
    if (orient == Orientation::reversed && scope == CurveScope::full_order) {
        throw RangeError("perturbation curve: reversal is defined over the positive prefix only");
    }
    const PixelSpace px(x.shape());

    std::vector<std::size_t> seq(op.order.begin(),
                                 scope == CurveScope::positive_only
                                     ? op.order.begin() + op.positive_count
                                     : op.order.end());
    if (orient == Orientation::reversed) std::reverse(seq.begin(), seq.end());

    // cumulative positive share after each prefix of this sequence
    std::vector<double> share(seq.size() + 1, 0.0);
    if (orient == Orientation::forward) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            share[i + 1] = i < op.positive_count ? op.cumulative_share[i + 1] : 1.0;
        }
    } else {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            share[i + 1] = 1.0 - op.cumulative_share[op.positive_count - (i + 1)];
        }
        share[seq.size()] = 1.0;
    }

    const Tensor xb(x.shape(), baselineValue);

    PerturbationCurve curve;
    curve.direction = direction;
    curve.baseline_value = baselineValue;
    curve.y0 = score(x);
    curve.yb = score(xb);

    Tensor work = direction == Direction::ablation ? x : xb;
    const Tensor& source = x;

    std::size_t done = 0;
    curve.points.push_back({0, 0.0, direction == Direction::ablation ? curve.y0 : curve.yb});
    while (done < seq.size()) {
        const std::size_t next = std::min(done + chunk, seq.size());
        for (std::size_t i = done; i < next; ++i) {
            if (direction == Direction::ablation) {
                px.setPixel(work, seq[i], baselineValue);
            } else {
                px.copyPixel(work, source, seq[i]);
            }
        }
        done = next;
        curve.points.push_back({done, share[done], score(work)});
    }
    return curve;
}

inline PerturbationCurve ablationCurve(const ScoreFn& score, const Tensor& x,
                                       const OrderedPixels& op, double baselineValue,
                                       std::size_t chunk,
                                       CurveScope scope = CurveScope::positive_only) {
    return perturbationCurve(score, x, op, baselineValue, chunk, Direction::ablation, scope);
}

inline PerturbationCurve constructionCurve(const ScoreFn& score, const Tensor& x,
                                           const OrderedPixels& op, double baselineValue,
                                           std::size_t chunk) {
    return perturbationCurve(score, x, op, baselineValue, chunk, Direction::construction);
}

/// Mean clipped output while ablating the positive prefix from the top.
/// Exact for chunk=1 curves; a chunked curve gives the documented subsampled
/// approximation (mean over available points). Lower is better.
inline double nOrd(const PerturbationCurve& curve) {
    if (curve.direction != Direction::ablation) throw Error("nOrd: needs an ablation curve");
    double acc = 0.0;
    for (const CurvePoint& p : curve.points) acc += std::max(p.R - curve.yb, 0.0);
    return acc / static_cast<double>(curve.points.size());
}

/// Mean clipped output gap while rebuilding from the baseline. The clip keeps
/// every term at or below zero (values above min(R_M, y0) count as that bound).
/// Higher is better.
inline double sOrd(const PerturbationCurve& curve) {
    if (curve.direction != Direction::construction) {
        throw Error("sOrd: needs a construction curve");
    }
    const double rFinal = curve.points.back().R;
    const double bound = std::min(rFinal, curve.y0);
    double acc = 0.0;
    for (const CurvePoint& p : curve.points) acc += std::min(p.R, bound) - curve.y0;
    return acc / static_cast<double>(curve.points.size());
}

/// Mean output drop over the first `steps` ablation steps of the full ordering.
inline double aopc(const PerturbationCurve& curve, std::size_t steps) {
    if (curve.direction != Direction::ablation) throw Error("aopc: needs an ablation curve");
    if (steps + 1 > curve.points.size()) {
        throw RangeError("aopc: steps exceed the curve length");
    }
    for (std::size_t m = 0; m <= steps; ++m) {
        if (curve.points[m].m != m) {
            throw Error("aopc: needs a chunk=1 curve over the full ordering");
        }
    }
    double acc = 0.0;
    for (std::size_t m = 0; m <= steps; ++m) acc += curve.y0 - curve.points[m].R;
    return acc / static_cast<double>(steps + 1);
}

} // namespace attrcrit
