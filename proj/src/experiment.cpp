#include "camkit/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "camkit/explain.hpp"
#include "camkit/rng.hpp"
#include "camkit/version.hpp"

namespace camkit {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string ExperimentConfig::model_name() const {
    if (baseline) return "baseline";
    std::string name = "1:" + std::to_string(ratio);
    switch (annotation) {
        case AnnotationType::bbox: return name + "/bbox";
        case AnnotationType::random_patch: return name + "/random";
        case AnnotationType::whole_image: return name + "/whole";
        default: return name;
    }
}

void ExperimentConfig::validate() const {
    if (!baseline && ratio < 1)
        throw std::invalid_argument("experiment config: ratio must be >= 1");
    if (annotation == AnnotationType::none)
        throw std::invalid_argument("experiment config: annotation mode 'none' is not a "
                                    "training regime; use 'accurate'");
    if (cam_epochs < 0) throw std::invalid_argument("experiment config: cam_epochs must be >= 0");
    if (!(lambda_dice >= 0.0) || !std::isfinite(lambda_dice))
        throw std::invalid_argument("experiment config: lambda_dice must be finite and >= 0");
    if (!(class_threshold > 0.0 && class_threshold < 1.0))
        throw std::invalid_argument("experiment config: class_threshold must lie in (0, 1)");
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0))
        throw std::invalid_argument("experiment config: iou_threshold must lie in [0, 1]");
    if (!(cam_tau > 0.0 && cam_tau < 1.0))
        throw std::invalid_argument("experiment config: cam_tau must lie in (0, 1)");
    if (manifest.empty()) {
        if (counts.train < 1 || counts.validation < 1 || counts.test < 1)
            throw std::invalid_argument(
                "experiment config: every split count must be >= 1 when generating phantoms");
    }
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["manifest"] = manifest;
    j["phantom_config"] = phantom_config;
    j["image_size"] = image_size;
    j["counts"] = {{"train", counts.train},
                   {"validation", counts.validation},
                   {"test", counts.test}};
    j["ratio"] = ratio;
    j["baseline"] = baseline;
    j["annotation"] = to_string(annotation);
    j["cam_epochs"] = cam_epochs;
    j["lambda_dice"] = lambda_dice;
    j["seed_data"] = seed_data;
    j["seed_model"] = seed_model;
    j["seed_train"] = seed_train;
    j["class_threshold"] = class_threshold;
    j["iou_threshold"] = iou_threshold;
    j["cam_tau"] = cam_tau;
    j["roi_all_diseased"] = roi_all_diseased;
    j["roi_box_match"] = roi_box_match;
    j["out_dir"] = out_dir;
    j["version"] = std::string(kVersion);
    return j.dump(2);
}

namespace {

[[noreturn]] void bad_config(const std::string& what) {
    throw std::invalid_argument("experiment config: " + what);
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        bad_config(std::string("not valid JSON: ") + e.what());
    }
    if (!j.is_object()) bad_config("top level must be a JSON object");

    ExperimentConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "manifest") cfg.manifest = value.get<std::string>();
            else if (key == "phantom_config") cfg.phantom_config = value.get<std::string>();
            else if (key == "image_size") cfg.image_size = value.get<int>();
            else if (key == "counts") {
                if (!value.is_object()) bad_config("'counts' must be an object");
                for (const auto& [ck, cv] : value.items()) {
                    if (ck == "train") cfg.counts.train = cv.get<int>();
                    else if (ck == "validation") cfg.counts.validation = cv.get<int>();
                    else if (ck == "test") cfg.counts.test = cv.get<int>();
                    else bad_config("unknown counts key '" + ck + "'");
                }
            } else if (key == "ratio") cfg.ratio = value.get<int>();
            else if (key == "baseline") cfg.baseline = value.get<bool>();
            else if (key == "annotation")
                cfg.annotation = annotation_type_from_string(value.get<std::string>());
            else if (key == "cam_epochs") cfg.cam_epochs = value.get<int>();
            else if (key == "lambda_dice") cfg.lambda_dice = value.get<double>();
            else if (key == "seed_data") cfg.seed_data = value.get<std::uint64_t>();
            else if (key == "seed_model") cfg.seed_model = value.get<std::uint64_t>();
            else if (key == "seed_train") cfg.seed_train = value.get<std::uint64_t>();
            else if (key == "class_threshold") cfg.class_threshold = value.get<double>();
            else if (key == "iou_threshold") cfg.iou_threshold = value.get<double>();
            else if (key == "cam_tau") cfg.cam_tau = value.get<double>();
            else if (key == "roi_all_diseased") cfg.roi_all_diseased = value.get<bool>();
            else if (key == "roi_box_match") cfg.roi_box_match = value.get<bool>();
            else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
            else if (key == "version") (void)value.get<std::string>(); // stamp, not a setting
            else bad_config("unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        bad_config(std::string("bad value type: ") + e.what());
    }
    return cfg;
}

PhantomConfig scaled_phantom_defaults(int image_size) {
    PhantomConfig pc;
    const double scale = static_cast<double>(image_size) / pc.image_size;
    pc.blob_axis_min *= scale;
    pc.blob_axis_max *= scale;
    pc.image_size = image_size;
    return pc;
}

ExperimentData prepare_data(const ExperimentConfig& cfg) {
    cfg.validate();

    ExperimentData data;
    if (!cfg.manifest.empty()) {
        const std::string root = fs::path(cfg.manifest).parent_path().string();
        data.split = load_dataset(root.empty() ? "." : root, cfg.manifest);
    } else {
        const PhantomConfig pc = cfg.phantom_config.empty()
                                     ? scaled_phantom_defaults(cfg.image_size)
                                     : phantom_config_from_file(cfg.phantom_config);
        data.split = generate_phantom_dataset(pc, cfg.counts, cfg.seed_data);
    }

    const int R = cfg.baseline ? kBaselineRatio : cfg.ratio;
    data.train = make_mixed_annotation(data.split.train,
                                       R, Rng::derive(cfg.seed_data, 0x6d6978ULL).next_u64());

    if (cfg.annotation != AnnotationType::accurate) {
        // Degrade the kept diseased masks only. Annotated normals stay as
        // all-zero masks: an empty region is exact under every mode, and a
        // whole-image "lesion" on a healthy sample would be a label error,
        // not an annotation-quality one.
        for (size_t i = 0; i < data.train.samples.size(); ++i) {
            auto& s = data.train.samples[i];
            if (!s.mask || s.label != 1) continue;
            const std::uint64_t seed =
                Rng::derive(cfg.seed_data, 0x64677264ULL, static_cast<std::uint64_t>(i))
                    .next_u64();
            s.mask = degrade_annotation(*s.mask, cfg.annotation, seed);
            s.annotation_type = cfg.annotation;
        }
    }
    return data;
}

TrainedModels train_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                               const std::string& checkpoint_dir) {
    cfg.validate();
    if (data.train.samples.empty())
        throw std::invalid_argument("train_experiment: empty training set");

    const ArchConfig arch = default_arch(data.train.samples.front().image.h);
    TrainingSchedule schedule = default_schedule(cfg.cam_epochs);
    schedule.weights.lambda_dice = cfg.lambda_dice;
    if (cfg.baseline) schedule = baseline_schedule(std::move(schedule));

    TrainedModels out;
    out.dual = build_model(arch, cfg.seed_model);
    out.schedule = run_full_schedule(out.dual, data.train, data.split.validation, schedule,
                                     cfg.seed_train, checkpoint_dir, cfg.to_json());
    save_training_log(out.schedule.log, (fs::path(checkpoint_dir) / "training_log.jsonl").string(),
                      cfg.to_json());
    return out;
}

namespace {

constexpr size_t kEvalBatch = 64;

/// Scores in split order with a fixed batch partition so reruns are
/// byte-identical.
void score_test_split(DualHeadNetwork& dual, CamNetwork& cam,
                      const std::vector<AnnotatedSample>& test, std::vector<double>& ed_scores,
                      std::vector<double>& cam_scores, std::vector<Heatmap>& heatmaps) {
    const int input = dual.config.input_size;
    for (size_t start = 0; start < test.size(); start += kEvalBatch) {
        const size_t stop = std::min(test.size(), start + kEvalBatch);
        std::vector<const Image*> imgs;
        imgs.reserve(stop - start);
        for (size_t i = start; i < stop; ++i) imgs.push_back(&test[i].image);

        const DualForward out = dual.forward(pack_batch(imgs, input), false);
        for (float p : out.class_probs) ed_scores.push_back(static_cast<double>(p));

        std::vector<Heatmap> maps = compute_cam(cam, imgs);
        for (auto& h : maps) {
            cam_scores.push_back(h.prob);
            heatmaps.push_back(std::move(h));
        }
    }
}

Mask roi_truth_mask(const Mask& gt, bool box_match) {
    if (!box_match) return gt;
    return boxes_to_mask(connected_components(gt).boxes, gt.h, gt.w);
}

Mask roi_pred_mask(const RoiPrediction& roi, int h, int w, bool box_match) {
    if (!box_match) return roi.mask;
    return boxes_to_mask(roi.components, h, w);
}

} // namespace

MetricsReport evaluate_experiment(DualHeadNetwork& dual, CamNetwork& cam,
                                  const std::vector<AnnotatedSample>& test,
                                  const ExperimentConfig& cfg) {
    if (test.empty()) throw std::invalid_argument("evaluate_experiment: empty test split");

    std::vector<int> labels;
    labels.reserve(test.size());
    for (const auto& s : test) labels.push_back(s.label);

    std::vector<double> ed_scores, cam_scores;
    std::vector<Heatmap> heatmaps;
    ed_scores.reserve(test.size());
    cam_scores.reserve(test.size());
    heatmaps.reserve(test.size());
    score_test_split(dual, cam, test, ed_scores, cam_scores, heatmaps);

    MetricsReport r;
    r.model = cfg.model_name();

    const ClassificationMetrics ed = classification_metrics(
        confusion(ed_scores, labels, cfg.class_threshold));
    r.accuracy = ed.accuracy.value_or(0.0);
    r.specificity = ed.specificity;
    r.sensitivity = ed.sensitivity;
    r.auc_pct = 100.0 * auc(ed_scores, labels);

    const ClassificationMetrics cm = classification_metrics(
        confusion(cam_scores, labels, cfg.class_threshold));
    r.accuracy_cam = cm.accuracy.value_or(0.0);
    r.auc_cam_pct = 100.0 * auc(cam_scores, labels);

    // ROI evaluation. Diseased test images without a ground-truth mask
    // cannot be scored and are left out of the denominator.
    std::vector<Mask> preds, truths;
    for (size_t i = 0; i < test.size(); ++i) {
        if (test[i].label != 1 || !test[i].mask) continue;
        if (!cfg.roi_all_diseased && ed_scores[i] < cfg.class_threshold) continue;
        const RoiPrediction roi = binarize_heatmap(heatmaps[i], cfg.cam_tau);
        preds.push_back(roi_pred_mask(roi, test[i].image.h, test[i].image.w, cfg.roi_box_match));
        truths.push_back(roi_truth_mask(*test[i].mask, cfg.roi_box_match));
    }
    r.detection = roi_detection(preds, truths, cfg.iou_threshold);

    r.config_json = cfg.to_json();
    r.version = std::string(kVersion);
    return r;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    {
        std::ofstream f(out / "config.json", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (out / "config.json").string());
        f << cfg.to_json() << "\n";
    }

    ExperimentData data = prepare_data(cfg);
    TrainedModels models = train_experiment(cfg, data, (out / "checkpoints").string());
    MetricsReport report =
        evaluate_experiment(models.dual, models.schedule.cam, data.split.test, cfg);

    save_metrics_report(report, (out / "metrics.json").string());
    append_report_csv(report, (out / "results.csv").string());
    return report;
}

} // namespace camkit
