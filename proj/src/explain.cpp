#include "camkit/explain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace camkit {

std::vector<Heatmap> compute_cam(CamNetwork& net, const std::vector<const Image*>& images) {
    const int input = net.config.input_size;
    const BatchTensor x = pack_batch(images, input);
    const CamForward fwd = net.forward(x, false);
    const BatchTensor& b = fwd.bottleneck;

    std::vector<Heatmap> out(images.size());
    for (int i = 0; i < b.n; ++i) {
        Heatmap& h = out[i];
        h.raw = Image(b.h, b.w);
        for (int y = 0; y < b.h; ++y)
            for (int xx = 0; xx < b.w; ++xx) {
                double acc = 0.0;
                for (int ch = 0; ch < b.c; ++ch)
                    acc += static_cast<double>(net.cam_weight.value[ch]) * b.at(ch, i, y, xx);
                h.raw.at(y, xx) = static_cast<float>(acc);
            }
        h.logit = fwd.logits[i];
        h.prob = fwd.probs[i];

        const auto [lo_it, hi_it] = std::minmax_element(h.raw.v.begin(), h.raw.v.end());
        h.raw_min = *lo_it;
        h.raw_max = *hi_it;
        if (!(h.raw_max - h.raw_min > 1e-12)) {
            h.degenerate = true;
            h.values = Image(input, input, 0.0f);
            continue;
        }
        h.values = resize_bilinear(h.raw, input, input);
        const float lo = static_cast<float>(h.raw_min);
        const float scale = static_cast<float>(1.0 / (h.raw_max - h.raw_min));
        for (auto& v : h.values.v) v = std::clamp((v - lo) * scale, 0.0f, 1.0f);
    }
    return out;
}

Heatmap compute_cam(CamNetwork& net, const Image& image) {
    return compute_cam(net, std::vector<const Image*>{&image}).front();
}

RoiPrediction binarize_heatmap(const Heatmap& h, double tau) {
    if (!(tau > 0.0) || !(tau < 1.0))
        throw std::invalid_argument("binarize_heatmap: tau must lie in (0, 1), got " +
                                    std::to_string(tau));
    RoiPrediction out;
    out.threshold_used = tau;
    out.mask = Mask(h.values.h, h.values.w, 0);
    if (h.degenerate) {
        out.degenerate = true;
        return out;
    }
    for (size_t i = 0; i < h.values.v.size(); ++i)
        if (static_cast<double>(h.values.v[i]) >= tau) out.mask.v[i] = 1;
    out.components = connected_components(out.mask).boxes;
    return out;
}

namespace {

struct Placement {
    int y0, x0;
};

std::vector<Placement> sweep_placements(int h, int w, int patch, int stride) {
    std::vector<Placement> out;
    for (int y0 = 0; y0 + patch <= h; y0 += stride)
        for (int x0 = 0; x0 + patch <= w; x0 += stride) out.push_back({y0, x0});
    return out;
}

Image crop_patch(const Image& img, const Placement& p, int patch) {
    Image out(patch, patch);
    for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x) out.at(y, x) = img.at(p.y0 + y, p.x0 + x);
    return out;
}

void check_patch_fits(const Image& image, int patch_size) {
    if (patch_size < 1)
        throw std::invalid_argument("patch_inference: patch size must be positive");
    if (patch_size > image.h || patch_size > image.w)
        throw std::invalid_argument("patch_inference: patch " + std::to_string(patch_size) + "x" +
                                    std::to_string(patch_size) + " exceeds the " +
                                    std::to_string(image.h) + "x" + std::to_string(image.w) +
                                    " image");
}

RoiPrediction roi_from_scores(int h, int w, int patch, const std::vector<Placement>& placements,
                              const std::vector<double>& scores, double prob_threshold) {
    RoiPrediction out;
    out.threshold_used = prob_threshold;
    out.mask = Mask(h, w, 0);
    for (size_t i = 0; i < placements.size(); ++i) {
        if (scores[i] < prob_threshold) continue;
        for (int y = 0; y < patch; ++y)
            for (int x = 0; x < patch; ++x)
                out.mask.at(placements[i].y0 + y, placements[i].x0 + x) = 1;
    }
    out.components = connected_components(out.mask).boxes;
    return out;
}

} // namespace

RoiPrediction patch_inference(const Image& image, int patch_size, int stride,
                              double prob_threshold, const PatchScorer& score) {
    check_patch_fits(image, patch_size);
    if (!score) throw std::invalid_argument("patch_inference: no scorer supplied");
    const int step = stride > 0 ? stride : patch_size;
    const auto placements = sweep_placements(image.h, image.w, patch_size, step);
    std::vector<double> scores(placements.size());
    for (size_t i = 0; i < placements.size(); ++i)
        scores[i] = score(crop_patch(image, placements[i], patch_size));
    return roi_from_scores(image.h, image.w, patch_size, placements, scores, prob_threshold);
}

RoiPrediction patch_inference(CamNetwork& net, const Image& image, int patch_size, int stride,
                              double prob_threshold) {
    check_patch_fits(image, patch_size);
    const int step = stride > 0 ? stride : patch_size;
    const int input = net.config.input_size;
    const auto placements = sweep_placements(image.h, image.w, patch_size, step);

    std::vector<double> scores(placements.size());
    constexpr size_t kBatch = 64;
    for (size_t start = 0; start < placements.size(); start += kBatch) {
        const size_t stop = std::min(placements.size(), start + kBatch);
        std::vector<Image> patches;
        patches.reserve(stop - start);
        for (size_t i = start; i < stop; ++i)
            patches.push_back(
                resize_bilinear(crop_patch(image, placements[i], patch_size), input, input));
        const CamForward fwd = net.forward(pack_batch(patches, input), false);
        for (size_t i = start; i < stop; ++i) scores[i] = fwd.probs[i - start];
    }
    return roi_from_scores(image.h, image.w, patch_size, placements, scores, prob_threshold);
}

Mask boxes_to_mask(const std::vector<Box>& boxes, int h, int w) {
    Mask out(h, w, 0);
    for (const Box& b : boxes) {
        const int y0 = std::max(0, b.y0), y1 = std::min(h - 1, b.y1);
        const int x0 = std::max(0, b.x0), x1 = std::min(w - 1, b.x1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) out.at(y, x) = 1;
    }
    return out;
}

namespace {

// Blue through cyan, green and yellow to red, the usual heat ramp.
void heat_color(float t, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
    const auto chan = [](double v) {
        return static_cast<std::uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
    };
    r = chan(1.5 - std::abs(4.0 * t - 3.0));
    g = chan(1.5 - std::abs(4.0 * t - 2.0));
    b = chan(1.5 - std::abs(4.0 * t - 1.0));
}

void draw_box(ColorImage& img, const Box& box, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int y0 = std::clamp(box.y0, 0, img.h - 1), y1 = std::clamp(box.y1, 0, img.h - 1);
    const int x0 = std::clamp(box.x0, 0, img.w - 1), x1 = std::clamp(box.x1, 0, img.w - 1);
    const auto put = [&](int y, int x) {
        const size_t k = (static_cast<size_t>(y) * img.w + x) * 3;
        img.rgb[k] = r;
        img.rgb[k + 1] = g;
        img.rgb[k + 2] = b;
    };
    for (int x = x0; x <= x1; ++x) {
        put(y0, x);
        put(y1, x);
    }
    for (int y = y0; y <= y1; ++y) {
        put(y, x0);
        put(y, x1);
    }
}

} // namespace

ColorImage render_overlay(const Image& image, const Heatmap& heat,
                          const std::vector<Box>& predicted, const std::vector<Box>& truth,
                          double alpha) {
    if (!image.same_shape(heat.values))
        throw std::invalid_argument("render_overlay: heatmap shape does not match the image");
    ColorImage out;
    out.h = image.h;
    out.w = image.w;
    out.rgb.resize(static_cast<size_t>(image.h) * image.w * 3);
    for (size_t i = 0; i < image.v.size(); ++i) {
        const double gray = std::clamp(static_cast<double>(image.v[i]), 0.0, 1.0) * 255.0;
        const float t = heat.values.v[i];
        std::uint8_t hr, hg, hb;
        heat_color(t, hr, hg, hb);
        const double a = std::clamp(alpha, 0.0, 1.0) * t; // cold areas stay grayscale
        out.rgb[i * 3] = static_cast<std::uint8_t>((1.0 - a) * gray + a * hr + 0.5);
        out.rgb[i * 3 + 1] = static_cast<std::uint8_t>((1.0 - a) * gray + a * hg + 0.5);
        out.rgb[i * 3 + 2] = static_cast<std::uint8_t>((1.0 - a) * gray + a * hb + 0.5);
    }
    for (const Box& b : truth) draw_box(out, b, 255, 0, 0);
    for (const Box& b : predicted) draw_box(out, b, 0, 255, 0);
    return out;
}

} // namespace camkit
