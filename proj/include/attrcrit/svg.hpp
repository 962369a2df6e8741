#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "attrcrit/errors.hpp"
#include "attrcrit/proportionality.hpp"

namespace attrcrit {

/// Renders the forward/reversed share curves with the area between them
/// shaded — the picture the TPN/TPS integrals measure.
inline void renderShareCurveChart(const ShareCurve& fwd, const ShareCurve& rev,
                                  const std::string& title,
                                  const std::filesystem::path& path) {
    const double width = 480.0, height = 320.0, margin = 42.0;

    double lo = fwd.knots.front().R, hi = lo;
    for (const ShareKnot& k : fwd.knots) {
        lo = std::min(lo, k.R);
        hi = std::max(hi, k.R);
    }
    for (const ShareKnot& k : rev.knots) {
        lo = std::min(lo, k.R);
        hi = std::max(hi, k.R);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;

    const auto px = [&](double k) { return margin + k * (width - 2.0 * margin); };
    const auto py = [&](double r) {
        return height - margin - (r - lo) / (hi - lo) * (height - 2.0 * margin);
    };
    const auto polyline = [&](const ShareCurve& c) {
        std::string pts;
        for (const ShareKnot& kn : c.knots) {
            pts += std::to_string(px(kn.k)) + "," + std::to_string(py(kn.R)) + " ";
        }
        return pts;
    };

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write svg " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // shaded area: forward knots, then reversed-curve knots walked backward
    out << "<polygon fill=\"#c8d8f0\" stroke=\"none\" points=\"";
    for (const ShareKnot& kn : fwd.knots) out << px(kn.k) << "," << py(kn.R) << " ";
    for (auto it = rev.knots.rbegin(); it != rev.knots.rend(); ++it) {
        out << px(it->k) << "," << py(it->R) << " ";
    }
    out << "\"/>\n";

    out << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\" points=\""
        << polyline(fwd) << "\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"#b23a2f\" stroke-width=\"2\" points=\""
        << polyline(rev) << "\"/>\n";

    // axes
    out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << height - margin << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 10
        << "\" text-anchor=\"middle\" font-size=\"12\">attribution share k</text>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
        << title << "</text>\n";
    out << "<text x=\"" << width - margin << "\" y=\"" << height - margin + 14
        << "\" text-anchor=\"end\" font-size=\"10\">forward: blue, reversed: red</text>\n";
    out << "</svg>\n";
    if (!out) throw IoError("short write on svg " + path.string());
}

} // namespace attrcrit
