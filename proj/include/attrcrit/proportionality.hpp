#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "attrcrit/errors.hpp"
#include "attrcrit/ordering.hpp"

namespace attrcrit {

struct ShareKnot {
    double k; // cumulative positive attribution share, strictly increasing 0..1
    double R; // model output at that share
};

/// Model output as a function of attribution share rather than pixel count.
/// Knots sit at the attainable prefix shares; between knots the curve is
/// linear. Runs of equal scores collapse into their final knot, so the curve
/// does not depend on the order within a tie.
struct ShareCurve {
    std::vector<ShareKnot> knots;
    Direction direction = Direction::ablation;
    Orientation orientation = Orientation::forward;
};

/// Builds the share curve out of an already evaluated chunk=1 perturbation
/// curve over the positive prefix. `stepScores[i]` is the attribution score of
/// the pixel perturbed at step i+1.
inline ShareCurve shareCurveFromPerturbation(const PerturbationCurve& curve,
                                             const std::vector<double>& stepScores,
                                             Orientation orientation) {
    const std::size_t m = stepScores.size();
    if (curve.points.size() != m + 1) {
        throw RangeError("share curve: need a chunk=1 curve over the positive prefix");
    }
    ShareCurve sc;
    sc.direction = curve.direction;
    sc.orientation = orientation;
    sc.knots.push_back({0.0, curve.points[0].R});
    for (std::size_t i = 1; i <= m; ++i) {
        if (i < m && stepScores[i] == stepScores[i - 1]) continue; // inside an equal-score run
        sc.knots.push_back({curve.points[i].k, curve.points[i].R});
    }
    return sc;
}

/// Evaluates the model along the positive prefix in the requested orientation
/// and direction, and keeps the run-boundary knots.
inline ShareCurve shareCurve(const ScoreFn& score, const Tensor& x, const OrderedPixels& op,
                             double baselineValue, Direction direction, Orientation orientation) {
    if (op.positive_count < 1) throw EmptyPositiveSetError("share curve: no positive pixel");
    const PerturbationCurve pc = perturbationCurve(score, x, op, baselineValue, 1, direction,
                                                   CurveScope::positive_only, orientation);
    std::vector<double> stepScores(op.positive_count);
    for (std::size_t i = 0; i < op.positive_count; ++i) {
        stepScores[i] = orientation == Orientation::forward
                            ? op.ordered_scores[i]
                            : op.ordered_scores[op.positive_count - 1 - i];
    }
    return shareCurveFromPerturbation(pc, stepScores, orientation);
}

/// Linear interpolation between knots.
inline double evalShareCurve(const ShareCurve& c, double k) {
    if (k < 0.0 || k > 1.0) throw RangeError("share curve: k outside [0,1]");
    const auto& kn = c.knots;
    if (k <= kn.front().k) return kn.front().R;
    if (k >= kn.back().k) return kn.back().R;
    std::size_t hi = 1;
    while (kn[hi].k < k) ++hi;
    const ShareKnot& a = kn[hi - 1];
    const ShareKnot& b = kn[hi];
    const double t = (k - a.k) / (b.k - a.k);
    return a.R + t * (b.R - a.R);
}

/// Output gap between equal-share prefixes of the forward and reversed
/// ablation orderings. Smaller is better.
inline double propKNecessity(const ShareCurve& fwd, const ShareCurve& rev, double k) {
    if (fwd.direction != Direction::ablation || rev.direction != Direction::ablation) {
        throw Error("propKNecessity: needs ablation share curves");
    }
    return std::abs(evalShareCurve(fwd, k) - evalShareCurve(rev, k));
}

/// Same gap on construction curves. Smaller is better.
inline double propKSufficiency(const ShareCurve& fwd, const ShareCurve& rev, double k) {
    if (fwd.direction != Direction::construction || rev.direction != Direction::construction) {
        throw Error("propKSufficiency: needs construction share curves");
    }
    return std::abs(evalShareCurve(fwd, k) - evalShareCurve(rev, k));
}

/// Exact integral over [0,1] of |a(k) - b(k)| for two piecewise-linear curves:
/// trapezoids over the union of knot abscissae, split where the gap changes sign.
inline double areaBetweenShareCurves(const ShareCurve& a, const ShareCurve& b) {
    std::vector<double> ks;
    ks.reserve(a.knots.size() + b.knots.size());
    for (const ShareKnot& kn : a.knots) ks.push_back(kn.k);
    for (const ShareKnot& kn : b.knots) ks.push_back(kn.k);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    double area = 0.0;
    for (std::size_t i = 1; i < ks.size(); ++i) {
        const double x0 = ks[i - 1], x1 = ks[i];
        const double width = x1 - x0;
        if (width <= 0.0) continue;
        const double d0 = evalShareCurve(a, x0) - evalShareCurve(b, x0);
        const double d1 = evalShareCurve(a, x1) - evalShareCurve(b, x1);
        if (d0 * d1 >= 0.0) {
            area += 0.5 * (std::abs(d0) + std::abs(d1)) * width;
        } else {
            const double t = d0 / (d0 - d1); // zero crossing inside the interval
            area += 0.5 * std::abs(d0) * t * width + 0.5 * std::abs(d1) * (1.0 - t) * width;
        }
    }
    return area;
}

/// min{(yb + eps) / (R_M + eps), 1}: penalizes orderings whose full positive
/// ablation fails to reach the baseline score.
inline double necessityPenalty(double yb, double fullyAblated, double epsilon) {
    const double r = std::min((yb + epsilon) / (fullyAblated + epsilon), 1.0);
    if (!(r > 0.0)) {
        throw DegenerateScoreError("necessity penalty ratio is not positive");
    }
    return r;
}

/// min{(R'_M + eps) / (y0 + eps), 1}: penalizes orderings whose full positive
/// reconstruction fails to reach the original score.
inline double sufficiencyPenalty(double fullyRestored, double y0, double epsilon) {
    const double r = std::min((fullyRestored + epsilon) / (y0 + epsilon), 1.0);
    if (!(r > 0.0)) {
        throw DegenerateScoreError("sufficiency penalty ratio is not positive");
    }
    return r;
}

/// Total Proportionality for Necessity: penalty-normalized area between the
/// forward and reversed ablation share curves. Lower is better; 0 is optimal.
inline double tpn(const ShareCurve& fwd, const ShareCurve& rev, double y0, double yb,
                  double epsilon) {
    if (fwd.direction != Direction::ablation || rev.direction != Direction::ablation) {
        throw Error("tpn: needs ablation share curves");
    }
    if (y0 <= epsilon) throw DegenerateScoreError("tpn: y0 is not above epsilon");
    const double r = necessityPenalty(yb, fwd.knots.back().R, epsilon);
    return areaBetweenShareCurves(fwd, rev) / (r * y0);
}

/// Total Proportionality for Sufficiency, same construction on construction
/// curves. Lower is better; 0 is optimal.
inline double tps(const ShareCurve& fwd, const ShareCurve& rev, double y0, double epsilon) {
    if (fwd.direction != Direction::construction || rev.direction != Direction::construction) {
        throw Error("tps: needs construction share curves");
    }
    if (y0 <= epsilon) throw DegenerateScoreError("tps: y0 is not above epsilon");
    const double rPrime = sufficiencyPenalty(fwd.knots.back().R, y0, epsilon);
    return areaBetweenShareCurves(fwd, rev) / (rPrime * y0);
}

/// Optional uniform-grid midpoint cross-check for the exact integral
/// (the report's k_samples mode).
inline double areaBetweenShareCurvesRiemann(const ShareCurve& a, const ShareCurve& b,
                                            std::size_t samples) {
    if (samples < 1) throw RangeError("riemann area: samples must be >= 1");
    double acc = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double k = (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
        acc += std::abs(evalShareCurve(a, k) - evalShareCurve(b, k));
    }
    return acc / static_cast<double>(samples);
}

/// Both total-proportionality scores with the penalty ratios and the
/// integration settings that produced them.
struct ProportionalityReport {
    double tpn = 0.0;
    double tps = 0.0;
    double r = 0.0;       // necessity penalty, in [0,1]
    double r_prime = 0.0; // sufficiency penalty, in [0,1]
    std::size_t k_samples = 0; // 0: exact piecewise-linear integration
    double epsilon = 0.0;
};

inline ProportionalityReport proportionalityReport(const ShareCurve& necFwd,
                                                   const ShareCurve& necRev,
                                                   const ShareCurve& sufFwd,
                                                   const ShareCurve& sufRev, double y0, double yb,
                                                   double epsilon, std::size_t kSamples = 0) {
    if (y0 <= epsilon) throw DegenerateScoreError("proportionality: y0 is not above epsilon");
    ProportionalityReport report;
    report.epsilon = epsilon;
    report.k_samples = kSamples;
    report.r = necessityPenalty(yb, necFwd.knots.back().R, epsilon);
    report.r_prime = sufficiencyPenalty(sufFwd.knots.back().R, y0, epsilon);
    const double necArea = kSamples == 0 ? areaBetweenShareCurves(necFwd, necRev)
                                         : areaBetweenShareCurvesRiemann(necFwd, necRev, kSamples);
    const double sufArea = kSamples == 0 ? areaBetweenShareCurves(sufFwd, sufRev)
                                         : areaBetweenShareCurvesRiemann(sufFwd, sufRev, kSamples);
    report.tpn = necArea / (report.r * y0);
    report.tps = sufArea / (report.r_prime * y0);
    return report;
}

} // namespace attrcrit
