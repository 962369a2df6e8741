#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "attrcrit/attribution.hpp"
#include "attrcrit/csv.hpp"
#include "attrcrit/errors.hpp"
#include "attrcrit/image_io.hpp"
#include "attrcrit/model.hpp"
#include "attrcrit/model_io.hpp"
#include "attrcrit/ordering.hpp"
#include "attrcrit/proportionality.hpp"
#include "attrcrit/rng.hpp"
#include "attrcrit/svg.hpp"

namespace attrcrit {

enum class MethodKind { saliency, ig, smoothgrad, gb, lrp, deeplift, gradcam, random, external };

struct MethodSpec {
    MethodKind kind = MethodKind::saliency;
    std::string name; // CSV identity; external maps are looked up by this name
};

inline MethodSpec parseMethodSpec(const std::string& text) {
    static const std::map<std::string, MethodKind> builtin = {
        {"saliency", MethodKind::saliency}, {"ig", MethodKind::ig},
        {"smoothgrad", MethodKind::smoothgrad}, {"gb", MethodKind::gb},
        {"lrp", MethodKind::lrp}, {"deeplift", MethodKind::deeplift},
        {"gradcam", MethodKind::gradcam}, {"random", MethodKind::random}};
    if (auto it = builtin.find(text); it != builtin.end()) return {it->second, text};
    if (text.rfind("external:", 0) == 0 && text.size() > 9) {
        return {MethodKind::external, text.substr(9)};
    }
    throw Error("unknown method '" + text + "'");
}

enum class ClassMode { predicted, fixed, labels };

struct RunConfig {
    std::filesystem::path model_path;
    std::filesystem::path image_dir;
    std::vector<MethodSpec> methods;
    ClassMode class_mode = ClassMode::predicted;
    std::size_t fixed_class = 0;
    std::filesystem::path label_file;
    ScoreMode score_mode = ScoreMode::softmax;
    double baseline_value = 0.0;
    std::size_t chunk = 0; // 0: pick so ordering curves have <= 257 points
    std::uint64_t seed = 1;
    double epsilon = 1e-6;
    std::filesystem::path output_dir;
    MethodConfig method_cfg;
    std::filesystem::path external_map_dir;
    std::size_t aopc_steps = 0; // 0: the whole ordering
    bool export_curves = false;
    bool render_svg = false;
    std::size_t jobs = 1;
    bool include_timings = false;
};

enum class RowStatus { ok, empty_positive_set, degenerate_score };

inline const char* rowStatusName(RowStatus s) {
    switch (s) {
        case RowStatus::ok: return "ok";
        case RowStatus::empty_positive_set: return "empty-positive-set";
        case RowStatus::degenerate_score: return "degenerate-score";
    }
    return "?";
}

struct MetricReport {
    std::string image_id;
    std::string method;
    std::size_t class_index = 0;
    double y0 = 0.0, yb = 0.0;
    std::size_t M = 0;
    double n_ord = 0.0, s_ord = 0.0, aopc = 0.0;
    double tpn = 0.0, tps = 0.0, r = 0.0, r_prime = 0.0;
    double runtime_ms = 0.0;
    RowStatus status = RowStatus::ok;
};

struct SummaryRow {
    std::string method;
    std::string metric;
    std::size_t count = 0;
    std::size_t excluded_count = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

struct AggregateSummary {
    std::vector<SummaryRow> rows;
    std::size_t images_processed = 0;
    std::size_t ok_rows = 0;
    std::size_t excluded_rows = 0;
};

/// Type-7 quantile (linear interpolation between order statistics).
inline double quantileType7(std::vector<double> values, double p) {
    if (values.empty()) throw EmptyInputError("quantile of nothing");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double h = p * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

/// AOPC over a possibly chunked full-order curve: mean output drop over the
/// points with m <= steps (the spec formula exactly when chunk is 1).
inline double aopcOverChunked(const PerturbationCurve& curve, std::size_t steps) {
    if (curve.direction != Direction::ablation) throw Error("aopc: needs an ablation curve");
    if (steps > curve.points.back().m) throw RangeError("aopc: steps exceed the pixel count");
    double acc = 0.0;
    std::size_t used = 0;
    for (const CurvePoint& p : curve.points) {
        if (p.m > steps) break;
        acc += curve.y0 - p.R;
        ++used;
    }
    return acc / static_cast<double>(used);
}

namespace detail {

struct EvalContext {
    const Model* model = nullptr;
    const RunConfig* config = nullptr;
};

inline AttributionMap computeMap(const EvalContext& ctx, const MethodSpec& spec, const Tensor& x,
                                 const std::string& imageId, std::size_t classIndex) {
    const RunConfig& cfg = *ctx.config;
    MethodConfig mc = cfg.method_cfg;
    mc.baseline_value = cfg.baseline_value;
    mc.rng_seed = deriveSeed(cfg.seed, imageId, spec.name);

    switch (spec.kind) {
        case MethodKind::saliency: return saliency(*ctx.model, x, classIndex);
        case MethodKind::ig: return integratedGradient(*ctx.model, x, classIndex, mc);
        case MethodKind::smoothgrad: return smoothGrad(*ctx.model, x, classIndex, mc);
        case MethodKind::gb: return guidedBackprop(*ctx.model, x, classIndex);
        case MethodKind::lrp: return lrpAlpha2Beta1(*ctx.model, x, classIndex);
        case MethodKind::deeplift: return deepliftRescale(*ctx.model, x, classIndex, mc);
        case MethodKind::gradcam: return gradCam(*ctx.model, x, classIndex, mc);
        case MethodKind::random: return randomAttribution(x, mc.rng_seed, classIndex);
        case MethodKind::external: {
            const auto path = cfg.external_map_dir / (imageId + "." + spec.name + ".rt");
            Tensor scores = loadRawTensor(path);
            const PixelSpace px(x.shape());
            if (scores.size() != px.pixel_count) {
                throw ShapeError("external map " + path.string() + " has " +
                                 std::to_string(scores.size()) + " scores for " +
                                 std::to_string(px.pixel_count) + " pixels");
            }
            AttributionMap map{scores.reshape(px.spatialShape()), spec.name, classIndex,
                               cfg.baseline_value, {}};
            map.metadata["source"] = path.string();
            return map;
        }
    }
    throw Error("unreachable method kind");
}

inline std::size_t effectiveChunk(std::size_t configured, std::size_t prefixLength) {
    if (configured > 0) return configured;
    return std::max<std::size_t>(1, (prefixLength + 255) / 256); // curves stay <= 257 points
}

} // namespace detail

/// One method map computed exactly the way runEval computes it (same derived
/// seed, same hyperparameters).
inline AttributionMap computeAttribution(const Model& model, const RunConfig& cfg,
                                         const MethodSpec& spec, const Tensor& x,
                                         const std::string& imageId, std::size_t classIndex) {
    const detail::EvalContext ctx{&model, &cfg};
    return detail::computeMap(ctx, spec, x, imageId, classIndex);
}

/// Every curve one evaluated (image, method) pair produces.
struct InstanceCurves {
    PerturbationCurve ablation;      // positive prefix, harness chunk
    PerturbationCurve construction;  // positive prefix, harness chunk
    PerturbationCurve full_ablation; // whole ordering, harness chunk
    ShareCurve nec_fwd, nec_rev, suf_fwd, suf_rev;
};

inline InstanceCurves computeCurves(const ScoreFn& score, const Tensor& x, const OrderedPixels& op,
                                    double baselineValue, std::size_t chunk) {
    InstanceCurves c;
    c.ablation = ablationCurve(score, x, op, baselineValue, chunk);
    c.construction = constructionCurve(score, x, op, baselineValue, chunk);
    c.full_ablation = ablationCurve(score, x, op, baselineValue, chunk, CurveScope::full_order);
    c.nec_fwd = shareCurve(score, x, op, baselineValue, Direction::ablation, Orientation::forward);
    c.nec_rev = shareCurve(score, x, op, baselineValue, Direction::ablation, Orientation::reversed);
    c.suf_fwd =
        shareCurve(score, x, op, baselineValue, Direction::construction, Orientation::forward);
    c.suf_rev =
        shareCurve(score, x, op, baselineValue, Direction::construction, Orientation::reversed);
    return c;
}

/// Writes the per-curve CSVs, one combined share file per metric family, and
/// (optionally) the shaded-area SVG charts for one evaluated instance.
inline std::vector<std::filesystem::path> exportCurves(
    const std::filesystem::path& dir, const std::string& imageId, const std::string& method,
    const InstanceCurves& curves, bool renderSvg) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;

    const auto writeCurve = [&](const PerturbationCurve& c, const std::string& tag) {
        const auto path = dir / (imageId + "." + method + "." + tag + ".csv");
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw IoError("cannot write curve csv " + path.string());
        out << csvVersionLine("curve", 1) << "\n";
        out << "m,k,R\n";
        for (const CurvePoint& p : c.points) {
            out << p.m << "," << formatDouble(p.k) << "," << formatDouble(p.R) << "\n";
        }
        written.push_back(path);
    };
    writeCurve(curves.ablation, "ablation");
    writeCurve(curves.construction, "construction");
    writeCurve(curves.full_ablation, "ablation_full");

    const auto writeSharePair = [&](const ShareCurve& fwd, const ShareCurve& rev,
                                    const std::string& tag) {
        const auto path = dir / (imageId + "." + method + "." + tag + ".csv");
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw IoError("cannot write share csv " + path.string());
        out << csvVersionLine("share-curve", 1) << "\n";
        out << "orientation,k,R\n";
        for (const ShareKnot& kn : fwd.knots) {
            out << "forward," << formatDouble(kn.k) << "," << formatDouble(kn.R) << "\n";
        }
        for (const ShareKnot& kn : rev.knots) {
            out << "reversed," << formatDouble(kn.k) << "," << formatDouble(kn.R) << "\n";
        }
        written.push_back(path);
    };
    writeSharePair(curves.nec_fwd, curves.nec_rev, "necessity_share");
    writeSharePair(curves.suf_fwd, curves.suf_rev, "sufficiency_share");

    if (renderSvg) {
        const auto necSvg = dir / (imageId + "." + method + ".necessity.svg");
        const auto sufSvg = dir / (imageId + "." + method + ".sufficiency.svg");
        renderShareCurveChart(curves.nec_fwd, curves.nec_rev,
                              imageId + " / " + method + " necessity share curves", necSvg);
        renderShareCurveChart(curves.suf_fwd, curves.suf_rev,
                              imageId + " / " + method + " sufficiency share curves", sufSvg);
        written.push_back(necSvg);
        written.push_back(sufSvg);
    }
    return written;
}

/// Reads back a share-curve CSV written by exportCurves.
inline std::pair<ShareCurve, ShareCurve> importShareCurves(const std::filesystem::path& path,
                                                           Direction direction) {
    const CsvTable table = readCsv(path, "share-curve", 1);
    const std::size_t oCol = table.columnIndex("orientation");
    const std::size_t kCol = table.columnIndex("k");
    const std::size_t rCol = table.columnIndex("R");
    ShareCurve fwd, rev;
    fwd.direction = rev.direction = direction;
    fwd.orientation = Orientation::forward;
    rev.orientation = Orientation::reversed;
    for (const auto& row : table.rows) {
        ShareKnot kn{std::stod(row[kCol]), std::stod(row[rCol])};
        if (row[oCol] == "forward") fwd.knots.push_back(kn);
        else if (row[oCol] == "reversed") rev.knots.push_back(kn);
        else throw FormatError("share csv: bad orientation '" + row[oCol] + "'");
    }
    if (fwd.knots.empty() || rev.knots.empty()) throw FormatError("share csv: missing curve");
    return {fwd, rev};
}

struct RunResult {
    std::vector<MetricReport> reports;
    AggregateSummary summary;
    std::filesystem::path instance_csv;
    std::filesystem::path summary_csv;
    std::size_t ok_rows = 0;
    std::vector<std::string> skipped; // human-readable row-skip reasons
};

namespace detail {

inline std::map<std::string, std::size_t> loadLabels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label file " + path.string());
    std::map<std::string, std::size_t> labels;
    std::string id;
    long long cls;
    while (in >> id >> cls) {
        if (cls < 0) throw FormatError("label file: negative class for " + id);
        labels[id] = static_cast<std::size_t>(cls);
    }
    return labels;
}

inline std::vector<std::filesystem::path> discoverImages(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm" || ext == ".rt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

struct RowOutcome {
    std::vector<MetricReport> reports;
    std::vector<std::string> skipped;
};

inline RowOutcome evaluateImage(const EvalContext& ctx, const std::filesystem::path& imagePath,
                                const std::map<std::string, std::size_t>& labels) {
    const RunConfig& cfg = *ctx.config;
    const Model& model = *ctx.model;
    const std::string imageId = imagePath.stem().string();

    RowOutcome outcome;
    if (imageId.find_first_of(", \t") != std::string::npos) {
        outcome.skipped.push_back(imageId + ": image id would corrupt the report schema");
        return outcome;
    }
    Tensor x;
    try {
        x = loadImage(imagePath, model.input_shape);
    } catch (const Error& e) {
        outcome.skipped.push_back(imageId + ": unreadable image (" + e.what() + ")");
        return outcome;
    }

    std::size_t classIndex = 0;
    switch (cfg.class_mode) {
        case ClassMode::predicted: classIndex = forward(model, x).predicted; break;
        case ClassMode::fixed: classIndex = cfg.fixed_class; break;
        case ClassMode::labels: {
            const auto it = labels.find(imageId);
            if (it == labels.end()) {
                outcome.skipped.push_back(imageId + ": no label for image");
                return outcome;
            }
            classIndex = it->second;
            break;
        }
    }
    if (classIndex >= model.class_count) {
        outcome.skipped.push_back(imageId + ": class index out of range");
        return outcome;
    }

    const ScoreFn score = makeClassScoreFn(model, classIndex, cfg.score_mode);
    const PixelSpace px(model.input_shape);

    for (const MethodSpec& spec : cfg.methods) {
        const auto started = std::chrono::steady_clock::now();
        MetricReport row;
        row.image_id = imageId;
        row.method = spec.name;
        row.class_index = classIndex;
        try {
            const AttributionMap map = computeMap(ctx, spec, x, imageId, classIndex);
            row.y0 = score(x);
            row.yb = score(Tensor(model.input_shape, cfg.baseline_value));
            try {
                const OrderedPixels op = orderPixels(map);
                row.M = op.positive_count;
                const std::size_t chunk = effectiveChunk(cfg.chunk, op.positive_count);
                const InstanceCurves curves =
                    computeCurves(score, x, op, cfg.baseline_value, chunk);

                row.n_ord = nOrd(curves.ablation);
                row.s_ord = sOrd(curves.construction);
                const std::size_t steps =
                    cfg.aopc_steps == 0 ? px.pixel_count
                                        : std::min(cfg.aopc_steps, px.pixel_count);
                row.aopc = aopcOverChunked(curves.full_ablation, steps);

                try {
                    const ProportionalityReport prop =
                        proportionalityReport(curves.nec_fwd, curves.nec_rev, curves.suf_fwd,
                                              curves.suf_rev, row.y0, row.yb, cfg.epsilon);
                    row.tpn = prop.tpn;
                    row.tps = prop.tps;
                    row.r = prop.r;
                    row.r_prime = prop.r_prime;
                    row.status = RowStatus::ok;
                } catch (const DegenerateScoreError&) {
                    row.status = RowStatus::degenerate_score;
                }

                if (cfg.export_curves && row.status == RowStatus::ok) {
                    exportCurves(cfg.output_dir / "curves", imageId, spec.name, curves,
                                 cfg.render_svg);
                }
            } catch (const EmptyPositiveSetError&) {
                row.status = RowStatus::empty_positive_set;
                row.M = 0;
            }
            row.runtime_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();
            outcome.reports.push_back(std::move(row));
        } catch (const Error& e) {
            outcome.skipped.push_back(imageId + "/" + spec.name + ": " + e.what());
        }
    }
    return outcome;
}

inline void appendMetricValue(std::ostringstream& out, double v, bool present) {
    out << ",";
    if (present) out << formatDouble(v);
}

} // namespace detail

inline AggregateSummary summarize(const std::vector<MetricReport>& reports,
                                  std::size_t imagesProcessed) {
    AggregateSummary summary;
    summary.images_processed = imagesProcessed;

    std::vector<std::string> methods;
    for (const MetricReport& r : reports) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
            methods.push_back(r.method);
        }
        if (r.status == RowStatus::ok) ++summary.ok_rows;
        else ++summary.excluded_rows;
    }
    std::sort(methods.begin(), methods.end());

    const std::vector<std::pair<std::string, std::function<double(const MetricReport&)>>> metrics =
        {{"n_ord", [](const MetricReport& r) { return r.n_ord; }},
         {"s_ord", [](const MetricReport& r) { return r.s_ord; }},
         {"s_ord_flipped", [](const MetricReport& r) { return 1.0 - r.s_ord; }},
         {"aopc", [](const MetricReport& r) { return r.aopc; }},
         {"tpn", [](const MetricReport& r) { return r.tpn; }},
         {"tps", [](const MetricReport& r) { return r.tps; }}};

    for (const std::string& method : methods) {
        std::size_t excluded = 0;
        for (const MetricReport& r : reports) {
            if (r.method == method && r.status != RowStatus::ok) ++excluded;
        }
        for (const auto& [metricName, extract] : metrics) {
            SummaryRow row;
            row.method = method;
            row.metric = metricName;
            row.excluded_count = excluded;
            std::vector<double> values;
            for (const MetricReport& r : reports) {
                if (r.method == method && r.status == RowStatus::ok) values.push_back(extract(r));
            }
            row.count = values.size();
            if (!values.empty()) {
                row.min = quantileType7(values, 0.0);
                row.q1 = quantileType7(values, 0.25);
                row.median = quantileType7(values, 0.5);
                row.q3 = quantileType7(values, 0.75);
                row.max = quantileType7(values, 1.0);
                double sum = 0.0;
                for (double v : values) sum += v;
                row.mean = sum / static_cast<double>(values.size());
            }
            summary.rows.push_back(std::move(row));
        }
    }
    return summary;
}

inline void writeInstanceCsv(const std::filesystem::path& path,
                             const std::vector<MetricReport>& reports,
                             const AggregateSummary& summary, bool includeTimings,
                             double epsilon) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << csvVersionLine("per-instance", 1) << "\n";
    out << "# images=" << summary.images_processed << " ok_rows=" << summary.ok_rows
        << " excluded_rows=" << summary.excluded_rows << "\n";
    out << "# epsilon=" << formatDouble(epsilon) << " integration=exact\n";
    out << "image_id,method,class_index,y0,yb,M,n_ord,s_ord,aopc,tpn,tps,r,r_prime,status";
    if (includeTimings) out << ",runtime_ms";
    out << "\n";
    for (const MetricReport& r : reports) {
        std::ostringstream line;
        line << r.image_id << "," << r.method << "," << r.class_index << ","
             << formatDouble(r.y0) << "," << formatDouble(r.yb) << "," << r.M;
        const bool orderingOk = r.status != RowStatus::empty_positive_set;
        const bool propOk = r.status == RowStatus::ok;
        detail::appendMetricValue(line, r.n_ord, orderingOk);
        detail::appendMetricValue(line, r.s_ord, orderingOk);
        detail::appendMetricValue(line, r.aopc, orderingOk);
        detail::appendMetricValue(line, r.tpn, propOk);
        detail::appendMetricValue(line, r.tps, propOk);
        detail::appendMetricValue(line, r.r, propOk);
        detail::appendMetricValue(line, r.r_prime, propOk);
        line << "," << rowStatusName(r.status);
        if (includeTimings) line << "," << formatDouble(r.runtime_ms);
        out << line.str() << "\n";
    }
}

inline void writeSummaryCsv(const std::filesystem::path& path, const AggregateSummary& summary) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << csvVersionLine("summary", 1) << "\n";
    out << "# images=" << summary.images_processed << " ok_rows=" << summary.ok_rows
        << " excluded_rows=" << summary.excluded_rows << "\n";
    out << "# quantiles=type-7\n";
    out << "method,metric,count,excluded,min,q1,median,q3,max,mean\n";
    for (const SummaryRow& r : summary.rows) {
        out << r.method << "," << r.metric << "," << r.count << "," << r.excluded_count << ","
            << formatDouble(r.min) << "," << formatDouble(r.q1) << "," << formatDouble(r.median)
            << "," << formatDouble(r.q3) << "," << formatDouble(r.max) << ","
            << formatDouble(r.mean) << "\n";
    }
}

inline void validateRunConfig(const RunConfig& cfg) {
    if (cfg.methods.empty()) throw Error("config: no methods selected");
    std::vector<std::string> names;
    for (const MethodSpec& m : cfg.methods) names.push_back(m.name);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
        throw Error("config: duplicate method name");
    }
    if (!std::filesystem::exists(cfg.model_path)) {
        throw Error("config: model path does not exist: " + cfg.model_path.string());
    }
    if (!std::filesystem::is_directory(cfg.image_dir)) {
        throw Error("config: image dir does not exist: " + cfg.image_dir.string());
    }
    for (const MethodSpec& m : cfg.methods) {
        if (m.kind == MethodKind::external && !std::filesystem::is_directory(cfg.external_map_dir)) {
            throw Error("config: external method needs --external-maps directory");
        }
    }
    if (cfg.class_mode == ClassMode::labels && !std::filesystem::exists(cfg.label_file)) {
        throw Error("config: label file does not exist");
    }
    cfg.method_cfg.validate();
}

/// Loads the model, evaluates every configured method on every image, writes
/// the per-instance and summary CSVs, and returns everything in memory too.
/// Deterministic for a fixed (config, seed, inputs) regardless of jobs.
inline RunResult runEval(const RunConfig& cfg) {
    validateRunConfig(cfg);
    const Model model = loadModel(cfg.model_path);

    std::map<std::string, std::size_t> labels;
    if (cfg.class_mode == ClassMode::labels) labels = detail::loadLabels(cfg.label_file);

    const std::vector<std::filesystem::path> images = detail::discoverImages(cfg.image_dir);
    if (images.empty()) throw Error("config: no images found in " + cfg.image_dir.string());

    const detail::EvalContext ctx{&model, &cfg};
    std::vector<detail::RowOutcome> outcomes(images.size());

    const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < images.size(); ++i) {
            outcomes[i] = detail::evaluateImage(ctx, images[i], labels);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(jobs);
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= images.size()) break;
                    outcomes[i] = detail::evaluateImage(ctx, images[i], labels);
                }
            });
        }
        for (std::thread& t : workers) t.join();
    }

    RunResult result;
    std::size_t imagesProcessed = 0;
    for (detail::RowOutcome& o : outcomes) {
        if (!o.reports.empty()) ++imagesProcessed;
        for (MetricReport& r : o.reports) result.reports.push_back(std::move(r));
        for (std::string& s : o.skipped) result.skipped.push_back(std::move(s));
    }
    std::sort(result.reports.begin(), result.reports.end(),
              [](const MetricReport& a, const MetricReport& b) {
                  if (a.image_id != b.image_id) return a.image_id < b.image_id;
                  return a.method < b.method;
              });

    result.summary = summarize(result.reports, imagesProcessed);
    result.ok_rows = result.summary.ok_rows;

    std::filesystem::create_directories(cfg.output_dir);
    result.instance_csv = cfg.output_dir / "per_instance.csv";
    result.summary_csv = cfg.output_dir / "summary.csv";
    writeInstanceCsv(result.instance_csv, result.reports, result.summary, cfg.include_timings,
                     cfg.epsilon);
    writeSummaryCsv(result.summary_csv, result.summary);
    return result;
}

// ---- winner tables (best method per criterion)

struct WinnerEntry {
    std::string image_id; // empty for the global table
    std::string criterion;
    std::vector<std::string> winners; // more than one entry means a tie
};

struct WinnerTable {
    bool per_image = false;
    std::vector<WinnerEntry> entries;
};

namespace detail {

struct Criterion {
    std::string name;
    std::function<double(const MetricReport&)> value;
    bool lowerIsBetter;
};

inline const std::vector<Criterion>& winnerCriteria() {
    static const std::vector<Criterion> criteria = {
        {"n_ord", [](const MetricReport& r) { return r.n_ord; }, true},
        {"s_ord", [](const MetricReport& r) { return r.s_ord; }, false},
        {"tpn", [](const MetricReport& r) { return r.tpn; }, true},
        {"tps", [](const MetricReport& r) { return r.tps; }, true}};
    return criteria;
}

inline std::vector<std::string> bestOf(const std::vector<std::pair<std::string, double>>& scored,
                                       bool lowerIsBetter) {
    double best = scored.front().second;
    for (const auto& [name, v] : scored) {
        if (lowerIsBetter ? v < best : v > best) best = v;
    }
    std::vector<std::string> winners;
    for (const auto& [name, v] : scored) {
        if (v == best) winners.push_back(name);
    }
    std::sort(winners.begin(), winners.end());
    return winners;
}

} // namespace detail

/// Per image, or globally on per-method medians: lowest n_ord, highest s_ord,
/// lowest tpn, lowest tps. Exact ties are reported as ties.
inline WinnerTable selectWinners(const std::vector<MetricReport>& reports, bool perImage) {
    std::vector<const MetricReport*> ok;
    for (const MetricReport& r : reports) {
        if (r.status == RowStatus::ok) ok.push_back(&r);
    }
    if (ok.empty()) throw EmptyInputError("no ok rows to pick winners from");

    WinnerTable table;
    table.per_image = perImage;

    if (perImage) {
        std::vector<std::string> imageIds;
        for (const MetricReport* r : ok) {
            if (std::find(imageIds.begin(), imageIds.end(), r->image_id) == imageIds.end()) {
                imageIds.push_back(r->image_id);
            }
        }
        std::sort(imageIds.begin(), imageIds.end());
        for (const std::string& id : imageIds) {
            for (const auto& criterion : detail::winnerCriteria()) {
                std::vector<std::pair<std::string, double>> scored;
                for (const MetricReport* r : ok) {
                    if (r->image_id == id) scored.emplace_back(r->method, criterion.value(*r));
                }
                table.entries.push_back(
                    {id, criterion.name, detail::bestOf(scored, criterion.lowerIsBetter)});
            }
        }
        return table;
    }

    std::vector<std::string> methods;
    for (const MetricReport* r : ok) {
        if (std::find(methods.begin(), methods.end(), r->method) == methods.end()) {
            methods.push_back(r->method);
        }
    }
    std::sort(methods.begin(), methods.end());
    for (const auto& criterion : detail::winnerCriteria()) {
        std::vector<std::pair<std::string, double>> scored;
        for (const std::string& method : methods) {
            std::vector<double> values;
            for (const MetricReport* r : ok) {
                if (r->method == method) values.push_back(criterion.value(*r));
            }
            scored.emplace_back(method, quantileType7(std::move(values), 0.5));
        }
        table.entries.push_back({"", criterion.name, detail::bestOf(scored, criterion.lowerIsBetter)});
    }
    return table;
}

inline void writeWinnersCsv(const std::filesystem::path& path, const WinnerTable& table) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << csvVersionLine("winners", 1) << "\n";
    out << "scope,image_id,criterion,winners\n";
    for (const WinnerEntry& e : table.entries) {
        out << (table.per_image ? "image" : "global") << "," << e.image_id << "," << e.criterion
            << ",";
        for (std::size_t i = 0; i < e.winners.size(); ++i) {
            if (i) out << "+";
            out << e.winners[i];
        }
        out << "\n";
    }
}

/// Rebuilds MetricReports from a per-instance CSV (the winners subcommand path).
inline std::vector<MetricReport> readInstanceCsv(const std::filesystem::path& path) {
    const CsvTable table = readCsv(path, "per-instance", 1);
    const std::size_t id = table.columnIndex("image_id");
    const std::size_t method = table.columnIndex("method");
    const std::size_t cls = table.columnIndex("class_index");
    const std::size_t y0 = table.columnIndex("y0");
    const std::size_t yb = table.columnIndex("yb");
    const std::size_t mCol = table.columnIndex("M");
    const std::size_t nOrdCol = table.columnIndex("n_ord");
    const std::size_t sOrdCol = table.columnIndex("s_ord");
    const std::size_t aopcCol = table.columnIndex("aopc");
    const std::size_t tpnCol = table.columnIndex("tpn");
    const std::size_t tpsCol = table.columnIndex("tps");
    const std::size_t rCol = table.columnIndex("r");
    const std::size_t rpCol = table.columnIndex("r_prime");
    const std::size_t status = table.columnIndex("status");

    std::vector<MetricReport> reports;
    for (const auto& row : table.rows) {
        MetricReport r;
        r.image_id = row[id];
        r.method = row[method];
        r.class_index = static_cast<std::size_t>(std::stoull(row[cls]));
        r.y0 = std::stod(row[y0]);
        r.yb = std::stod(row[yb]);
        r.M = static_cast<std::size_t>(std::stoull(row[mCol]));
        const std::string& st = row[status];
        if (st == "ok") r.status = RowStatus::ok;
        else if (st == "empty-positive-set") r.status = RowStatus::empty_positive_set;
        else if (st == "degenerate-score") r.status = RowStatus::degenerate_score;
        else throw FormatError("per-instance csv: unknown status '" + st + "'");
        if (r.status != RowStatus::empty_positive_set) {
            r.n_ord = std::stod(row[nOrdCol]);
            r.s_ord = std::stod(row[sOrdCol]);
            r.aopc = std::stod(row[aopcCol]);
        }
        if (r.status == RowStatus::ok) {
            r.tpn = std::stod(row[tpnCol]);
            r.tps = std::stod(row[tpsCol]);
            r.r = std::stod(row[rCol]);
            r.r_prime = std::stod(row[rpCol]);
        }
        reports.push_back(std::move(r));
    }
    return reports;
}

} // namespace attrcrit
