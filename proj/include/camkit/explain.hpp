#pragma once

#include <functional>
#include <vector>

#include "camkit/grid.hpp"
#include "camkit/io_png.hpp"
#include "camkit/network.hpp"

namespace camkit {

/// Class-evidence map for the diseased class: the weighted sum of the 16
/// bottleneck feature maps, bilinearly upsampled to the input resolution and
/// min-max normalized. Normalization maps the raw minimum to 0 and the raw
/// maximum to 1 (negative evidence is shifted, never clipped); raw_min and
/// raw_max record the constants used. raw keeps the 6x6 pre-upsampling map,
/// whose mean recovers the classification logit minus the bias.
struct Heatmap {
    Image values;            // input-size map in [0,1]
    Image raw;               // 6x6 weighted feature sum, bias excluded
    double raw_min = 0.0;
    double raw_max = 0.0;
    double logit = 0.0;      // CAM-head logit for the source image
    double prob = 0.0;
    bool degenerate = false; // constant raw map; values left uniformly 0
    int source_class = 1;    // evidence is always for the diseased class
};

Heatmap compute_cam(CamNetwork& net, const Image& image);
/// Batched variant: one encoder pass for the whole set.
std::vector<Heatmap> compute_cam(CamNetwork& net, const std::vector<const Image*>& images);

/// Binarized ROI: mask = (heatmap values >= tau), components are its
/// 4-connected components with tight bounding boxes.
struct RoiPrediction {
    Mask mask;
    std::vector<Box> components;
    double threshold_used = 0.5;
    bool degenerate = false; // source heatmap was degenerate; mask is empty
};

RoiPrediction binarize_heatmap(const Heatmap& h, double tau = 0.5);

/// Classification probability for one patch-sized image.
using PatchScorer = std::function<double(const Image&)>;

/// Slides a patch_size window; every patch scoring at or above
/// prob_threshold contributes its full footprint to the ROI mask. A stride
/// of zero or less selects the non-overlapping default (= patch_size).
/// Windows never extend past the image edge, so a stride that does not
/// divide the remainder leaves the far border unswept.
RoiPrediction patch_inference(const Image& image, int patch_size, int stride,
                              double prob_threshold, const PatchScorer& score);
/// CamNetwork variant: each patch is bilinearly resized to the network
/// input size and scored with the CAM-head probability.
RoiPrediction patch_inference(CamNetwork& net, const Image& image, int patch_size,
                              int stride = 0, double prob_threshold = 0.5);

/// Rasterizes boxes (clamped to the canvas) for box-vs-box IOU scoring.
Mask boxes_to_mask(const std::vector<Box>& boxes, int h, int w);

/// Grayscale base with the heatmap alpha-blended on top (blend weight
/// alpha scaled by the local heat), predicted boxes drawn in green and
/// ground-truth boxes in red.
ColorImage render_overlay(const Image& image, const Heatmap& heat,
                          const std::vector<Box>& predicted, const std::vector<Box>& truth,
                          double alpha = 0.45);

} // namespace camkit
