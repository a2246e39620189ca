#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "camkit/experiment.hpp"
#include "camkit/explain.hpp"
#include "camkit/io_png.hpp"
#include "camkit/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace camkit;

namespace {

// Values are only applied to the config when the flag was actually passed,
// so config-file settings survive unless overridden.
struct ExperimentFlags {
    std::string config_path;
    std::string manifest;
    std::string phantom_config;
    int image_size = 0;
    int train_count = 0, val_count = 0, test_count = 0;
    int ratio = 0;
    bool baseline = false;
    std::string annotation;
    int cam_epochs = 0;
    double lambda_dice = 0.0;
    std::uint64_t seed_data = 0, seed_model = 0, seed_train = 0;
    double class_threshold = 0.0, iou_threshold = 0.0, cam_tau = 0.0;
    bool roi_all_diseased = false, roi_box_match = false;
    std::string out_dir;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f) {
    cmd->add_option("--config", f.config_path,
                    "experiment config JSON; explicit flags override its values");
    cmd->add_option("--manifest", f.manifest,
                    "dataset manifest.csv (paths resolve beside it); wins over generation");
    cmd->add_option("--phantom-config", f.phantom_config, "phantom parameter file (key = value)");
    cmd->add_option("--image-size", f.image_size, "generated phantom size in pixels");
    cmd->add_option("--train-count", f.train_count, "generated train split size");
    cmd->add_option("--val-count", f.val_count, "generated validation split size");
    cmd->add_option("--test-count", f.test_count, "generated test split size");
    cmd->add_option("--ratio", f.ratio, "R in the 1:R annotation ratio");
    cmd->add_flag("--baseline,!--no-baseline", f.baseline, "label-only baseline (no masks kept)");
    cmd->add_option("--annotation", f.annotation, "training-mask quality")
        ->check(CLI::IsMember({"accurate", "bbox", "random", "whole"}));
    cmd->add_option("--cam-epochs", f.cam_epochs, "epochs for the final CAM-head fit");
    cmd->add_option("--lambda-dice", f.lambda_dice, "dice weight in the combined loss");
    cmd->add_option("--seed-data", f.seed_data, "dataset generation / annotation-choice seed");
    cmd->add_option("--seed-model", f.seed_model, "weight initialization seed");
    cmd->add_option("--seed-train", f.seed_train, "shuffling seed");
    cmd->add_option("--class-threshold", f.class_threshold, "diseased-call probability cutoff");
    cmd->add_option("--iou-threshold", f.iou_threshold, "correct-detection IOU cutoff");
    cmd->add_option("--cam-tau", f.cam_tau, "heatmap binarization level");
    cmd->add_flag("--roi-all-diseased,!--no-roi-all-diseased", f.roi_all_diseased,
                  "score ROI detection on every diseased test image, not just true positives");
    cmd->add_flag("--roi-box-match,!--no-roi-box-match", f.roi_box_match,
                  "compare tight bounding boxes instead of raw masks");
    cmd->add_option("--out", f.out_dir, "output directory");
}

ExperimentConfig merge_config(const CLI::App* cmd, const ExperimentFlags& f) {
    ExperimentConfig cfg;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path, std::ios::binary);
        if (!in) throw std::invalid_argument("cannot open config: " + f.config_path);
        cfg = ExperimentConfig::from_json(
            std::string(std::istreambuf_iterator<char>(in), {}));
    }
    const auto set = [&](const char* name) { return cmd->count(name) > 0; };
    if (set("--manifest")) cfg.manifest = f.manifest;
    if (set("--phantom-config")) cfg.phantom_config = f.phantom_config;
    if (set("--image-size")) cfg.image_size = f.image_size;
    if (set("--train-count")) cfg.counts.train = f.train_count;
    if (set("--val-count")) cfg.counts.validation = f.val_count;
    if (set("--test-count")) cfg.counts.test = f.test_count;
    if (set("--ratio")) cfg.ratio = f.ratio;
    if (set("--baseline")) cfg.baseline = f.baseline;
    if (set("--annotation")) cfg.annotation = annotation_type_from_string(f.annotation);
    if (set("--cam-epochs")) cfg.cam_epochs = f.cam_epochs;
    if (set("--lambda-dice")) cfg.lambda_dice = f.lambda_dice;
    if (set("--seed-data")) cfg.seed_data = f.seed_data;
    if (set("--seed-model")) cfg.seed_model = f.seed_model;
    if (set("--seed-train")) cfg.seed_train = f.seed_train;
    if (set("--class-threshold")) cfg.class_threshold = f.class_threshold;
    if (set("--iou-threshold")) cfg.iou_threshold = f.iou_threshold;
    if (set("--cam-tau")) cfg.cam_tau = f.cam_tau;
    if (set("--roi-all-diseased")) cfg.roi_all_diseased = f.roi_all_diseased;
    if (set("--roi-box-match")) cfg.roi_box_match = f.roi_box_match;
    if (set("--out")) cfg.out_dir = f.out_dir;
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_config(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    write_text(fs::path(cfg.out_dir) / "config.json", cfg.to_json() + "\n");
}

// ----- generate-data -----

void cmd_generate_data(const ExperimentConfig& cfg, bool force) {
    if (!cfg.manifest.empty())
        throw std::invalid_argument(
            "generate-data creates phantom datasets; --manifest does not apply");
    const PhantomConfig pc = cfg.phantom_config.empty()
                                 ? scaled_phantom_defaults(cfg.image_size)
                                 : phantom_config_from_file(cfg.phantom_config);
    const DatasetSplit split = generate_phantom_dataset(pc, cfg.counts, cfg.seed_data);
    save_dataset(split, cfg.out_dir, force);
    write_config(cfg);
    phantom_config_to_file(pc, (fs::path(cfg.out_dir) / "phantom.cfg").string());
    std::cout << "wrote " << split.train.size() << " train / " << split.validation.size()
              << " validation / " << split.test.size() << " test samples to " << cfg.out_dir
              << "\n";
}

// ----- train -----

void cmd_train(const ExperimentConfig& cfg) {
    write_config(cfg);
    const ExperimentData data = prepare_data(cfg);
    const std::string ckpt_dir = (fs::path(cfg.out_dir) / "checkpoints").string();
    const TrainedModels models = train_experiment(cfg, data, ckpt_dir);

    std::cout << "model " << cfg.model_name() << ": " << models.schedule.checkpoint_paths.size()
              << " phase checkpoints under " << ckpt_dir << "\n";
    if (models.schedule.best_val_accuracy)
        std::cout << "best validation accuracy " << *models.schedule.best_val_accuracy
                  << "% (phase " << models.schedule.best_val_phase << ", epoch "
                  << models.schedule.best_val_epoch << ")\n";
}

// ----- evaluate -----

struct FoundCheckpoints {
    std::string dual;
    std::string cam;
};

/// Picks the highest-numbered phase_<i>_*.ckpt of each kind.
FoundCheckpoints discover_checkpoints(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw std::runtime_error("no checkpoint directory at " + dir.string() +
                                 "; pass --checkpoint/--cam-checkpoint or train first");
    FoundCheckpoints found;
    int best_dual = -1, best_cam = -1;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("phase_", 0) != 0 || entry.path().extension() != ".ckpt") continue;
        int idx = 0;
        try {
            idx = std::stoi(name.substr(6));
        } catch (const std::exception&) {
            continue;
        }
        const CheckpointKind kind = peek_checkpoint_kind(entry.path().string());
        if (kind == CheckpointKind::dual_head && idx > best_dual) {
            best_dual = idx;
            found.dual = entry.path().string();
        } else if (kind == CheckpointKind::cam && idx > best_cam) {
            best_cam = idx;
            found.cam = entry.path().string();
        }
    }
    return found;
}

void cmd_evaluate(const ExperimentConfig& cfg, std::string dual_path, std::string cam_path) {
    if (dual_path.empty() || cam_path.empty()) {
        const FoundCheckpoints found = discover_checkpoints(fs::path(cfg.out_dir) / "checkpoints");
        if (dual_path.empty()) dual_path = found.dual;
        if (cam_path.empty()) cam_path = found.cam;
    }
    if (dual_path.empty()) throw std::runtime_error("no dual-head checkpoint found");
    if (cam_path.empty()) throw std::runtime_error("no CAM checkpoint found");

    DualHeadNetwork dual = load_dual_checkpoint(dual_path);
    CamNetwork cam = load_cam_checkpoint(cam_path);
    const ExperimentData data = prepare_data(cfg);
    const MetricsReport report = evaluate_experiment(dual, cam, data.split.test, cfg);

    fs::create_directories(cfg.out_dir);
    save_metrics_report(report, (fs::path(cfg.out_dir) / "metrics.json").string());
    append_report_csv(report, (fs::path(cfg.out_dir) / "results.csv").string());

    std::cout << "model " << report.model << ": accuracy " << report.accuracy << "%, AUC "
              << report.auc_pct << "%, detection " << report.detection.correct_rois << "/"
              << report.detection.total_images << " (" << report.detection.detection_accuracy
              << "%)\n";
}

// ----- explain -----

void cmd_explain(const std::string& checkpoint, const std::vector<std::string>& images,
                 const std::vector<std::string>& masks, const std::string& out_dir, double tau,
                 double alpha) {
    if (!masks.empty() && masks.size() != images.size())
        throw std::invalid_argument("--masks must list one mask per image");

    CamNetwork cam = load_cam_checkpoint(checkpoint);
    const int input = cam.config.input_size;
    const std::string provenance = read_checkpoint_provenance(checkpoint);
    fs::create_directories(out_dir);

    for (size_t i = 0; i < images.size(); ++i) {
        Image img = load_image_png(images[i]);
        const int orig_h = img.h, orig_w = img.w;
        const bool resized = img.h != input || img.w != input;
        if (resized) img = resize_bilinear(img, input, input);

        const Heatmap heat = compute_cam(cam, img);
        const RoiPrediction roi = binarize_heatmap(heat, tau);

        std::vector<Box> truth;
        if (!masks.empty()) {
            Mask m = load_mask_png(masks[i]);
            if (m.h != orig_h || m.w != orig_w)
                throw std::invalid_argument("mask " + masks[i] + " does not match its image");
            if (resized) m = resize_nearest(m, input, input);
            truth = connected_components(m).boxes;
        }

        const ColorImage overlay = render_overlay(img, heat, roi.components, truth, alpha);
        const std::string stem = fs::path(images[i]).stem().string();
        const fs::path png_path = fs::path(out_dir) / (stem + "_overlay.png");
        save_color_png(overlay, png_path.string());

        json side;
        side["image"] = images[i];
        side["prob"] = heat.prob;
        side["logit"] = heat.logit;
        side["degenerate"] = heat.degenerate;
        side["tau"] = tau;
        json boxes = json::array();
        for (const Box& b : roi.components) boxes.push_back({b.y0, b.x0, b.y1, b.x1});
        side["predicted_boxes"] = boxes;
        side["resized_from"] = resized ? json({orig_h, orig_w}) : json(nullptr);
        side["version"] = std::string(kVersion);
        if (provenance.empty()) side["provenance"] = nullptr;
        else side["provenance"] = json::parse(provenance);
        write_text(fs::path(out_dir) / (stem + "_cam.json"), side.dump(2) + "\n");

        std::cout << png_path.string() << ": prob " << heat.prob << ", " << roi.components.size()
                  << (roi.components.size() == 1 ? " region" : " regions");
        if (heat.degenerate) std::cout << " (degenerate heatmap: uniform response)";
        std::cout << "\n";
    }
}

// ----- report -----

std::string cell(const std::optional<double>& v) {
    if (!v) return "NA";
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << *v;
    return s.str();
}

void cmd_report(const std::string& results_dir, const std::string& out_file) {
    if (!fs::is_directory(results_dir))
        throw std::invalid_argument("not a directory: " + results_dir);

    std::vector<std::string> paths;
    for (const auto& entry : fs::recursive_directory_iterator(results_dir))
        if (entry.is_regular_file() && entry.path().filename() == "metrics.json")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());

    std::vector<MetricsReport> rows;
    for (const std::string& p : paths) {
        try {
            rows.push_back(load_metrics_report(p));
        } catch (const std::exception& e) {
            std::cerr << "warning: skipping " << p << ": " << e.what() << "\n";
        }
    }

    std::ostringstream md;
    md << "| Model | Accuracy | AUC | Specificity | Sensitivity | CAM Accuracy | CAM AUC | "
          "Total Images | Correct ROIs | Detection Accuracy |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const MetricsReport& r : rows) {
        md << "| " << r.model << " | " << cell(r.accuracy) << " | " << cell(r.auc_pct) << " | "
           << cell(r.specificity) << " | " << cell(r.sensitivity) << " | " << cell(r.accuracy_cam)
           << " | " << cell(r.auc_cam_pct) << " | " << r.detection.total_images << " | "
           << r.detection.correct_rois << " | " << cell(r.detection.detection_accuracy) << " |\n";
    }
    md << "\n" << rows.size() << (rows.size() == 1 ? " run" : " runs") << ", camkit " << kVersion
       << "\n";

    if (out_file.empty()) std::cout << md.str();
    else write_text(out_file, md.str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"weakly-supervised lesion localization toolkit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    ExperimentFlags gen_flags;
    bool gen_force = false;
    CLI::App* gen = app.add_subcommand("generate-data", "write a phantom dataset to --out");
    add_experiment_flags(gen, gen_flags);
    gen->add_flag("--force", gen_force, "overwrite an existing dataset");
    gen->callback([&] { cmd_generate_data(merge_config(gen, gen_flags), gen_force); });

    ExperimentFlags train_flags;
    CLI::App* train = app.add_subcommand("train", "run the staged schedule; writes checkpoints");
    add_experiment_flags(train, train_flags);
    train->callback([&] { cmd_train(merge_config(train, train_flags)); });

    ExperimentFlags eval_flags;
    std::string eval_dual, eval_cam;
    CLI::App* eval = app.add_subcommand("evaluate", "score a trained model on the test split");
    add_experiment_flags(eval, eval_flags);
    eval->add_option("--checkpoint", eval_dual,
                     "dual-head checkpoint (default: latest under <out>/checkpoints)");
    eval->add_option("--cam-checkpoint", eval_cam,
                     "CAM checkpoint (default: latest under <out>/checkpoints)");
    eval->callback([&] { cmd_evaluate(merge_config(eval, eval_flags), eval_dual, eval_cam); });

    std::string exp_checkpoint, exp_out = "explain";
    std::vector<std::string> exp_images, exp_masks;
    double exp_tau = 0.5, exp_alpha = 0.45;
    CLI::App* explain = app.add_subcommand("explain", "render heatmap overlays for images");
    explain->add_option("--checkpoint", exp_checkpoint, "CAM checkpoint")->required();
    explain->add_option("images", exp_images, "grayscale PNG images")
        ->required()
        ->check(CLI::ExistingFile);
    explain->add_option("--masks", exp_masks, "ground-truth masks, one per image (drawn in red)");
    explain->add_option("--out", exp_out, "output directory");
    explain->add_option("--cam-tau", exp_tau, "heatmap binarization level");
    explain->add_option("--alpha", exp_alpha, "overlay blend weight");
    explain->callback(
        [&] { cmd_explain(exp_checkpoint, exp_images, exp_masks, exp_out, exp_tau, exp_alpha); });

    std::string rep_dir, rep_out;
    CLI::App* report = app.add_subcommand("report", "summarize metrics.json files as Markdown");
    report->add_option("results_dir", rep_dir, "directory searched recursively")->required();
    report->add_option("--out", rep_out, "write the table here instead of stdout");
    report->callback([&] { cmd_report(rep_dir, rep_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
