#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camkit/data.hpp"
#include "camkit/eval.hpp"
#include "camkit/network.hpp"
#include "camkit/training.hpp"

namespace camkit {

/// Everything that determines one experiment, from dataset to thresholds.
/// Serialized verbatim into every artifact the run produces so a result can
/// always be traced back to its exact configuration.
struct ExperimentConfig {
    // Dataset source. A manifest path wins over phantom generation; with
    // both empty, phantoms are generated from built-in defaults.
    std::string manifest;        // path to a manifest.csv (paths resolve beside it)
    std::string phantom_config;  // key=value phantom parameter file
    int image_size = 96;         // phantom size when no parameter file is given
    SplitCounts counts;          // phantom split sizes

    // Supervision regime.
    int ratio = 1;          // R in the 1:R annotation ratio
    bool baseline = false;  // label-only baseline (Q = 0); overrides ratio
    AnnotationType annotation = AnnotationType::accurate; // training-mask quality

    // Schedule overrides.
    int cam_epochs = 10;
    double lambda_dice = 1.0;

    std::uint64_t seed_data = 1;
    std::uint64_t seed_model = 2;
    std::uint64_t seed_train = 3;

    // Evaluation thresholds.
    double class_threshold = 0.5; // diseased when the classifier score reaches this
    double iou_threshold = 0.3;   // correct-detection cutoff
    double cam_tau = 0.5;         // heatmap binarization level

    // ROI evaluation policy. By default only diseased test images the
    // classifier also calls diseased are scored; localization quality is
    // then measured where the pipeline would actually surface a heatmap.
    bool roi_all_diseased = false; // score every diseased test image instead
    bool roi_box_match = false;    // compare tight boxes instead of raw masks

    std::string out_dir = "runs/experiment";

    /// Row label for the results table: "baseline", "1:3", "1:3/bbox", ...
    std::string model_name() const;

    void validate() const;

    std::string to_json() const;
    /// Strict parse: unknown keys are rejected, missing keys keep defaults.
    static ExperimentConfig from_json(const std::string& text);
};

/// The split as loaded or generated plus the ratio-reduced training set the
/// schedule actually consumes. Test and validation keep accurate masks:
/// degradation corrupts the supervision, never the ground truth.
struct ExperimentData {
    DatasetSplit split;
    MixedAnnotationDataset train;
};

/// Phantom defaults are tuned for 96 px images; other sizes scale the blob
/// axes proportionally so lesions keep their relative footprint and still
/// fit inside the layer band.
PhantomConfig scaled_phantom_defaults(int image_size);

ExperimentData prepare_data(const ExperimentConfig& cfg);

struct TrainedModels {
    DualHeadNetwork dual;
    ScheduleResult schedule;
};

/// Builds the model and runs the full schedule (the baseline variant when
/// configured). Checkpoints and the training log land in checkpoint_dir.
TrainedModels train_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                               const std::string& checkpoint_dir);

/// Classification metrics for both heads over the whole test split, ROI
/// detection over the configured subset. Deterministic: samples are scored
/// in split order with a fixed batch partition.
MetricsReport evaluate_experiment(DualHeadNetwork& dual, CamNetwork& cam,
                                  const std::vector<AnnotatedSample>& test,
                                  const ExperimentConfig& cfg);

/// prepare + train + evaluate. Writes config.json, checkpoints, the
/// training log, metrics.json and appends to results.csv under cfg.out_dir.
MetricsReport run_experiment(const ExperimentConfig& cfg);

} // namespace camkit
