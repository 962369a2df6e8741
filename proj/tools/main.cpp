// attrcrit command line: evaluates attribution methods against the
// necessity/sufficiency ordering and proportionality criteria.
//
// Subcommands:
//   eval      run the batch pipeline, write per-instance + summary CSVs
//   winners   best method per criterion from a per-instance CSV
//   curves    perturbation/share curves (and optional SVG) for one image
//   demo      write a small self-contained model + corpus to play with
//
// Exit codes: 0 ok, 1 configuration error, 2 zero usable rows.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attrcrit/demo.hpp"
#include "attrcrit/harness.hpp"

namespace {

struct CliOptions {
    attrcrit::RunConfig config;
    std::vector<std::string> methodNames;
    std::string classMode = "predicted";
    std::string scoreMode = "softmax";
    std::size_t gradcamLayer = static_cast<std::size_t>(-1);
};

void addEvalFlags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--model", opt.config.model_path, "model manifest path")->required();
    cmd->add_option("--methods", opt.methodNames,
                    "comma-separated subset of saliency,ig,smoothgrad,gb,lrp,deeplift,gradcam,"
                    "random plus external:<name>")
        ->delimiter(',');
    cmd->add_option("--class-mode", opt.classMode, "predicted | fixed | labels");
    cmd->add_option("--class", opt.config.fixed_class, "class index for --class-mode fixed");
    cmd->add_option("--labels", opt.config.label_file, "label file for --class-mode labels");
    cmd->add_option("--score-mode", opt.scoreMode, "softmax | logit");
    cmd->add_option("--baseline", opt.config.baseline_value, "baseline value b");
    cmd->add_option("--chunk", opt.config.chunk, "perturbation chunk (0 = auto)");
    cmd->add_option("--seed", opt.config.seed, "run seed");
    cmd->add_option("--epsilon", opt.config.epsilon, "penalty stabilizer epsilon");
    cmd->add_option("--output", opt.config.output_dir, "output directory");
    cmd->add_option("--ig-steps", opt.config.method_cfg.ig_steps, "integrated-gradient steps");
    cmd->add_option("--sg-samples", opt.config.method_cfg.sg_samples, "smoothgrad samples");
    cmd->add_option("--sg-noise", opt.config.method_cfg.sg_noise_fraction,
                    "smoothgrad noise fraction of the input range");
    cmd->add_option("--gradcam-layer", opt.gradcamLayer, "conv layer index for gradcam");
    cmd->add_option("--external-maps", opt.config.external_map_dir,
                    "directory of <image>.<name>.rt attribution maps");
    cmd->add_option("--aopc-steps", opt.config.aopc_steps, "AOPC steps (0 = all pixels)");
    cmd->add_option("--jobs", opt.config.jobs, "parallel image workers");
    cmd->add_flag("--timings", opt.config.include_timings,
                  "add runtime_ms to the per-instance CSV (breaks byte determinism)");
}

int finishConfig(CliOptions& opt) {
    for (const std::string& name : opt.methodNames) {
        opt.config.methods.push_back(attrcrit::parseMethodSpec(name));
    }
    if (opt.classMode == "predicted") opt.config.class_mode = attrcrit::ClassMode::predicted;
    else if (opt.classMode == "fixed") opt.config.class_mode = attrcrit::ClassMode::fixed;
    else if (opt.classMode == "labels") opt.config.class_mode = attrcrit::ClassMode::labels;
    else throw attrcrit::Error("unknown class mode '" + opt.classMode + "'");
    if (opt.scoreMode == "softmax") opt.config.score_mode = attrcrit::ScoreMode::softmax;
    else if (opt.scoreMode == "logit") opt.config.score_mode = attrcrit::ScoreMode::logit;
    else throw attrcrit::Error("unknown score mode '" + opt.scoreMode + "'");
    if (opt.gradcamLayer != static_cast<std::size_t>(-1)) {
        opt.config.method_cfg.gradcam_layer = opt.gradcamLayer;
    }
    if (const char* env = std::getenv("ATTRCRIT_OUTPUT_DIR")) {
        opt.config.output_dir = env; // environment wins over the flag
    }
    if (opt.config.output_dir.empty()) opt.config.output_dir = "attrcrit-out";
    return 0;
}

int runEvalCommand(CliOptions& opt) {
    finishConfig(opt);
    const attrcrit::RunResult result = attrcrit::runEval(opt.config);
    for (const std::string& s : result.skipped) std::cerr << "skipped " << s << "\n";
    std::cout << "rows: " << result.reports.size() << " (ok " << result.ok_rows << ")\n";
    std::cout << "per-instance: " << result.instance_csv.string() << "\n";
    std::cout << "summary: " << result.summary_csv.string() << "\n";
    return result.ok_rows > 0 ? 0 : 2;
}

int runWinnersCommand(const std::string& reportPath, bool perImage, const std::string& outPath) {
    const auto reports = attrcrit::readInstanceCsv(reportPath);
    const attrcrit::WinnerTable table = attrcrit::selectWinners(reports, perImage);
    for (const attrcrit::WinnerEntry& e : table.entries) {
        if (perImage) std::cout << e.image_id << "  ";
        std::cout << e.criterion << ": ";
        for (std::size_t i = 0; i < e.winners.size(); ++i) {
            if (i) std::cout << " + ";
            std::cout << e.winners[i];
        }
        std::cout << "\n";
    }
    if (!outPath.empty()) attrcrit::writeWinnersCsv(outPath, table);
    return 0;
}

int runCurvesCommand(CliOptions& opt, const std::string& imagePath, bool svg) {
    finishConfig(opt);
    if (opt.config.methods.size() != 1) {
        throw attrcrit::Error("curves: pick exactly one --methods entry");
    }
    const attrcrit::Model model = attrcrit::loadModel(opt.config.model_path);
    const attrcrit::Tensor x = attrcrit::loadImage(imagePath, model.input_shape);
    const std::string imageId = std::filesystem::path(imagePath).stem().string();

    std::size_t classIndex = opt.config.fixed_class;
    if (opt.config.class_mode == attrcrit::ClassMode::predicted) {
        classIndex = attrcrit::forward(model, x).predicted;
    }

    const attrcrit::AttributionMap map = attrcrit::computeAttribution(
        model, opt.config, opt.config.methods[0], x, imageId, classIndex);
    const attrcrit::OrderedPixels op = attrcrit::orderPixels(map);
    const attrcrit::ScoreFn score =
        attrcrit::makeClassScoreFn(model, classIndex, opt.config.score_mode);
    const std::size_t chunk = opt.config.chunk == 0 ? 1 : opt.config.chunk;
    const attrcrit::InstanceCurves curves =
        attrcrit::computeCurves(score, x, op, opt.config.baseline_value, chunk);

    const auto files = attrcrit::exportCurves(opt.config.output_dir / "curves", imageId,
                                              opt.config.methods[0].name, curves, svg);
    for (const auto& f : files) std::cout << f.string() << "\n";

    const double y0 = score(x);
    const double yb = score(attrcrit::Tensor(model.input_shape, opt.config.baseline_value));
    std::cout << "n_ord=" << attrcrit::nOrd(curves.ablation)
              << " s_ord=" << attrcrit::sOrd(curves.construction)
              << " tpn=" << attrcrit::tpn(curves.nec_fwd, curves.nec_rev, y0, yb, opt.config.epsilon)
              << " tps=" << attrcrit::tps(curves.suf_fwd, curves.suf_rev, y0, opt.config.epsilon)
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"attribution necessity/sufficiency evaluation"};
    app.require_subcommand(1);

    CliOptions evalOpt;
    CLI::App* evalCmd = app.add_subcommand("eval", "run the batch evaluation pipeline");
    addEvalFlags(evalCmd, evalOpt);
    evalCmd->add_option("--images", evalOpt.config.image_dir, "directory of .pgm/.ppm/.rt images")
        ->required();
    evalCmd->add_flag("--curves", evalOpt.config.export_curves, "export per-instance curve CSVs");
    evalCmd->add_flag("--svg", evalOpt.config.render_svg, "render share-curve SVG charts");

    std::string reportPath, winnersOut;
    bool perImage = false;
    CLI::App* winnersCmd = app.add_subcommand("winners", "best method per criterion");
    winnersCmd->add_option("--report", reportPath, "per-instance CSV from eval")->required();
    winnersCmd->add_flag("--per-image", perImage, "winners per image instead of global medians");
    winnersCmd->add_option("--output", winnersOut, "also write a winners CSV here");

    CliOptions curvesOpt;
    std::string curvesImage;
    bool curvesSvg = false;
    CLI::App* curvesCmd = app.add_subcommand("curves", "curves for one image and method");
    addEvalFlags(curvesCmd, curvesOpt);
    curvesCmd->add_option("--image", curvesImage, "image file")->required();
    curvesCmd->add_flag("--svg", curvesSvg, "render share-curve SVG charts");

    std::string demoDir = "attrcrit-demo";
    std::size_t demoCount = 24;
    std::uint64_t demoSeed = 7;
    CLI::App* demoCmd = app.add_subcommand("demo", "write a demo model and corpus");
    demoCmd->add_option("--output", demoDir, "destination directory");
    demoCmd->add_option("--count", demoCount, "number of images");
    demoCmd->add_option("--seed", demoSeed, "corpus seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (evalCmd->parsed()) return runEvalCommand(evalOpt);
        if (winnersCmd->parsed()) return runWinnersCommand(reportPath, perImage, winnersOut);
        if (curvesCmd->parsed()) return runCurvesCommand(curvesOpt, curvesImage, curvesSvg);
        if (demoCmd->parsed()) {
            const auto manifest = attrcrit::writeDemoFixture(demoDir, demoCount, demoSeed);
            std::cout << "model: " << manifest.string() << "\n";
            std::cout << "images: " << (std::filesystem::path(demoDir) / "images").string() << "\n";
            std::cout << "labels: " << (std::filesystem::path(demoDir) / "labels.txt").string()
                      << "\n";
            return 0;
        }
    } catch (const attrcrit::EmptyInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const attrcrit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
