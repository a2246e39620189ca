#include "camkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace camkit {

using json = nlohmann::ordered_json;

ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("confusion: scores/labels length mismatch");
    if (scores.empty()) throw std::invalid_argument("confusion: empty input");
    ConfusionMatrix cm;
    for (size_t i = 0; i < scores.size(); ++i) {
        const bool pred_pos = scores[i] >= threshold;
        const bool is_pos = labels[i] != 0;
        if (pred_pos && is_pos) ++cm.tp;
        else if (pred_pos && !is_pos) ++cm.fp;
        else if (!pred_pos && is_pos) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
    ClassificationMetrics m;
    const long long total = cm.total();
    if (total > 0) m.accuracy = 100.0 * (cm.tp + cm.tn) / total;
    if (cm.tp + cm.fn > 0) m.sensitivity = 100.0 * cm.tp / (cm.tp + cm.fn);
    if (cm.tn + cm.fp > 0) m.specificity = 100.0 * cm.tn / (cm.tn + cm.fp);
    return m;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: scores/labels length mismatch");
    const size_t n = scores.size();
    size_t n_pos = 0;
    for (auto l : labels) n_pos += (l != 0);
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auc: both classes must be present");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // average ranks over tie groups, then Mann-Whitney U
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

IouResult iou_ex(const Mask& a, const Mask& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("iou: shape mismatch");
    long long inter = 0, uni = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const bool pa = a.v[i] != 0, pb = b.v[i] != 0;
        inter += (pa && pb);
        uni += (pa || pb);
    }
    if (uni == 0) return {1.0, true}; // agreement on absence, flagged
    return {static_cast<double>(inter) / static_cast<double>(uni), false};
}

double iou(const Mask& a, const Mask& b) { return iou_ex(a, b).value; }

DetectionReport roi_detection(std::span<const Mask> predictions, std::span<const Mask> ground_truth,
                              double iou_threshold) {
    if (predictions.size() != ground_truth.size())
        throw std::invalid_argument("roi_detection: prediction/ground-truth length mismatch");
    DetectionReport r;
    r.iou_threshold = iou_threshold;
    r.total_images = static_cast<long long>(predictions.size());
    for (size_t i = 0; i < predictions.size(); ++i)
        if (iou(predictions[i], ground_truth[i]) >= iou_threshold) ++r.correct_rois;
    r.detection_accuracy =
        r.total_images ? 100.0 * r.correct_rois / r.total_images : 0.0;
    return r;
}

namespace {

json optional_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

std::optional<double> optional_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

} // namespace

std::string metrics_report_to_json(const MetricsReport& r) {
    json j;
    j["model"] = r.model;
    j["classification"] = {{"accuracy", r.accuracy},
                           {"auc", r.auc_pct},
                           {"specificity", optional_to_json(r.specificity)},
                           {"sensitivity", optional_to_json(r.sensitivity)}};
    j["classification_cam"] = {{"accuracy", r.accuracy_cam}, {"auc", r.auc_cam_pct}};
    j["detection"] = {{"total_images", r.detection.total_images},
                      {"correct_rois", r.detection.correct_rois},
                      {"detection_accuracy", r.detection.detection_accuracy},
                      {"iou_threshold", r.detection.iou_threshold}};
    j["config"] = r.config_json.empty() ? json(nullptr) : json::parse(r.config_json);
    j["version"] = r.version;
    return j.dump(2) + "\n";
}

MetricsReport metrics_report_from_json(const std::string& text) {
    const json j = json::parse(text);
    MetricsReport r;
    r.model = j.at("model").get<std::string>();
    const auto& c = j.at("classification");
    r.accuracy = c.at("accuracy").get<double>();
    r.auc_pct = c.at("auc").get<double>();
    r.specificity = optional_from_json(c.at("specificity"));
    r.sensitivity = optional_from_json(c.at("sensitivity"));
    const auto& cc = j.at("classification_cam");
    r.accuracy_cam = cc.at("accuracy").get<double>();
    r.auc_cam_pct = cc.at("auc").get<double>();
    const auto& d = j.at("detection");
    r.detection.total_images = d.at("total_images").get<long long>();
    r.detection.correct_rois = d.at("correct_rois").get<long long>();
    r.detection.detection_accuracy = d.at("detection_accuracy").get<double>();
    r.detection.iou_threshold = d.at("iou_threshold").get<double>();
    if (!j.at("config").is_null()) r.config_json = j.at("config").dump();
    r.version = j.at("version").get<std::string>();
    return r;
}

void save_metrics_report(const MetricsReport& r, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_metrics_report: cannot open " + path);
    f << metrics_report_to_json(r);
}

MetricsReport load_metrics_report(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_metrics_report: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return metrics_report_from_json(ss.str());
}

void append_report_csv(const MetricsReport& r, const std::string& csv_path) {
    const bool fresh = !std::filesystem::exists(csv_path);
    std::ofstream f(csv_path, std::ios::app | std::ios::binary);
    if (!f) throw std::runtime_error("append_report_csv: cannot open " + csv_path);
    if (fresh)
        f << "model,accuracy,auc,specificity,sensitivity,"
             "total_images,correct_rois,detection_accuracy\n";
    auto field = [](const std::optional<double>& v) {
        if (!v) return std::string("NA");
        std::ostringstream os;
        os << *v;
        return os.str();
    };
    std::ostringstream row;
    row << r.model << ',' << r.accuracy << ',' << r.auc_pct << ',' << field(r.specificity) << ','
        << field(r.sensitivity) << ',' << r.detection.total_images << ','
        << r.detection.correct_rois << ',' << r.detection.detection_accuracy << '\n';
    f << row.str();
}

} // namespace camkit
