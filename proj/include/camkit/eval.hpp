#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camkit/grid.hpp"

namespace camkit {

struct ConfusionMatrix {
    long long tp = 0, fp = 0, tn = 0, fn = 0;
    long long total() const { return tp + fp + tn + fn; }
};

/// Percentages; a metric with a zero denominator is reported as absent
/// rather than 0.
struct ClassificationMetrics {
    std::optional<double> accuracy;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
};

struct DetectionReport {
    long long total_images = 0;
    long long correct_rois = 0;
    double detection_accuracy = 0.0; // percent
    double iou_threshold = 0.3;
};

struct IouResult {
    double value = 0.0;
    bool both_empty = false; // value 1 by convention when set
};

/// Thresholded confusion counts; positive class = diseased (label 1),
/// predicted positive when score >= threshold.
ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold = 0.5);

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

/// Probability that a random positive outranks a random negative, ties
/// counted 1/2 (rank-sum estimator). Throws if a class is missing.
double auc(std::span<const double> scores, std::span<const int> labels);

double iou(const Mask& a, const Mask& b);
IouResult iou_ex(const Mask& a, const Mask& b);

DetectionReport roi_detection(std::span<const Mask> predictions, std::span<const Mask> ground_truth,
                              double iou_threshold = 0.3);

/// One experiment's metrics in the shape of the results tables.
struct MetricsReport {
    std::string model; // e.g. "1:3", "baseline", "1:3/bbox"
    // ED-head classification, percentages
    double accuracy = 0.0;
    double auc_pct = 0.0;
    std::optional<double> specificity;
    std::optional<double> sensitivity;
    // CAM-head scores on the same split (the surgery head; reported alongside)
    double accuracy_cam = 0.0;
    double auc_cam_pct = 0.0;
    DetectionReport detection;
    std::string config_json; // full experiment config echoed for provenance
    std::string version;
};

std::string metrics_report_to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const std::string& text);
void save_metrics_report(const MetricsReport& r, const std::string& path);
MetricsReport load_metrics_report(const std::string& path);

/// Appends one row in the results-table column layout; writes the header
/// when the file does not exist yet.
void append_report_csv(const MetricsReport& r, const std::string& csv_path);

} // namespace camkit
