#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "camkit/explain.hpp"
#include "camkit/rng.hpp"

using namespace camkit;

namespace {

Image random_image(int size, std::uint64_t seed) {
    Rng rng(seed);
    Image img(size, size);
    for (auto& v : img.v) v = static_cast<float>(rng.uniform());
    return img;
}

CamNetwork make_cam(int input_size, std::uint64_t seed) {
    return build_cam_head(build_model(default_arch(input_size), seed));
}

Heatmap heatmap_from(const Image& values) {
    Heatmap h;
    h.values = values;
    const auto [lo, hi] = std::minmax_element(values.v.begin(), values.v.end());
    h.raw_min = *lo;
    h.raw_max = *hi;
    return h;
}

} // namespace

TEST_CASE("a one-hot CAM weight reproduces that feature map") {
    CamNetwork cam = make_cam(96, 3);
    std::fill(cam.cam_weight.value.begin(), cam.cam_weight.value.end(), 0.0f);
    cam.cam_weight.value[3] = 1.0f;
    cam.cam_bias.value[0] = 0.7f; // must not leak into the map

    const Image img = random_image(96, 5);
    const Heatmap h = compute_cam(cam, img);

    // oracle: pull channel 3 of the bottleneck straight from the forward pass
    const CamForward fwd = cam.forward(pack_batch(std::vector<Image>{img}, 96));
    Image f3(6, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) f3.at(y, x) = fwd.bottleneck.at(3, 0, y, x);

    REQUIRE(h.raw.h == 6);
    REQUIRE(h.raw.w == 6);
    for (size_t i = 0; i < f3.v.size(); ++i)
        CHECK(h.raw.v[i] == doctest::Approx(f3.v[i]).epsilon(1e-6));

    const auto [lo, hi] = std::minmax_element(f3.v.begin(), f3.v.end());
    REQUIRE(*hi > *lo);
    const Image up = resize_bilinear(f3, 96, 96);
    REQUIRE(h.values.h == 96);
    for (size_t i = 0; i < up.v.size(); ++i) {
        const double expect = (up.v[i] - *lo) / (*hi - *lo);
        CHECK(h.values.v[i] == doctest::Approx(expect).epsilon(1e-5));
    }
    CHECK(h.raw_min == doctest::Approx(*lo));
    CHECK(h.raw_max == doctest::Approx(*hi));
    CHECK_FALSE(h.degenerate);
    CHECK(h.prob == doctest::Approx(1.0 / (1.0 + std::exp(-h.logit))).epsilon(1e-6));
}

TEST_CASE("all-zero CAM weights give the flagged uniform map") {
    CamNetwork cam = make_cam(96, 7);
    std::fill(cam.cam_weight.value.begin(), cam.cam_weight.value.end(), 0.0f);
    const Heatmap h = compute_cam(cam, random_image(96, 9));
    CHECK(h.degenerate);
    CHECK(h.raw_min == 0.0);
    CHECK(h.raw_max == 0.0);
    for (float v : h.values.v) CHECK(v == 0.0f);
    for (float v : h.raw.v) CHECK(v == 0.0f);
}

TEST_CASE("positive rescaling of the weights leaves the normalized map unchanged") {
    CamNetwork cam = make_cam(96, 11);
    const Image img = random_image(96, 13);
    const Heatmap base = compute_cam(cam, img);

    for (auto& w : cam.cam_weight.value) w *= 3.0f;
    const Heatmap scaled = compute_cam(cam, img);

    REQUIRE_FALSE(base.degenerate);
    CHECK(scaled.raw_max == doctest::Approx(3.0 * base.raw_max).epsilon(1e-5));
    for (size_t i = 0; i < base.values.v.size(); ++i)
        CHECK(scaled.values.v[i] == doctest::Approx(base.values.v[i]).epsilon(1e-5));
}

TEST_CASE("raw CAM maps are linear in the head weights") {
    CamNetwork cam = make_cam(96, 17);
    const Image img = random_image(96, 19);

    Rng rng(23);
    std::vector<float> w1(16), w2(16);
    for (auto& w : w1) w = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (auto& w : w2) w = static_cast<float>(rng.uniform(-1.0, 1.0));

    cam.cam_weight.value = w1;
    const Heatmap h1 = compute_cam(cam, img);
    cam.cam_weight.value = w2;
    const Heatmap h2 = compute_cam(cam, img);
    for (int ch = 0; ch < 16; ++ch) cam.cam_weight.value[ch] = w1[ch] + w2[ch];
    const Heatmap hsum = compute_cam(cam, img);

    for (size_t i = 0; i < hsum.raw.v.size(); ++i)
        CHECK(std::abs(hsum.raw.v[i] - (h1.raw.v[i] + h2.raw.v[i])) <= 1e-5);
}

TEST_CASE("the raw CAM mean recovers the logit minus the bias") {
    CamNetwork cam = make_cam(96, 29);
    for (int trial = 0; trial < 5; ++trial) {
        const Heatmap h = compute_cam(cam, random_image(96, 31 + trial));
        double mean = 0.0;
        for (float v : h.raw.v) mean += v;
        mean /= static_cast<double>(h.raw.v.size());
        CHECK(std::abs(mean - (h.logit - cam.cam_bias.value[0])) <= 1e-5);
    }
}

TEST_CASE("compute_cam batches agree with single-image calls") {
    CamNetwork cam = make_cam(96, 37);
    const Image a = random_image(96, 41);
    const Image b = random_image(96, 43);
    const auto batch = compute_cam(cam, std::vector<const Image*>{&a, &b});
    const Heatmap solo = compute_cam(cam, a);
    REQUIRE(batch.size() == 2);
    CHECK(std::abs(batch[0].logit - solo.logit) <= 1e-5);
    for (size_t i = 0; i < solo.values.v.size(); ++i)
        CHECK(std::abs(batch[0].values.v[i] - solo.values.v[i]) <= 1e-5);

    const Image wrong = random_image(48, 47);
    CHECK_THROWS_AS(compute_cam(cam, wrong), std::invalid_argument);
}

TEST_CASE("upsampling keeps the argmax within a cell of the raw peak") {
    CamNetwork cam = make_cam(96, 53);
    for (int trial = 0; trial < 10; ++trial) {
        const Heatmap h = compute_cam(cam, random_image(96, 59 + trial));
        if (h.degenerate) continue;
        const auto raw_it = std::max_element(h.raw.v.begin(), h.raw.v.end());
        const int rc = static_cast<int>(raw_it - h.raw.v.begin());
        const int ry = rc / 6, rx = rc % 6;
        const auto val_it = std::max_element(h.values.v.begin(), h.values.v.end());
        const int vc = static_cast<int>(val_it - h.values.v.begin());
        const int vy = (vc / 96) / 16, vx = (vc % 96) / 16;
        CHECK(std::abs(vy - ry) <= 1);
        CHECK(std::abs(vx - rx) <= 1);
    }
}

TEST_CASE("binarize_heatmap on a uniform-one map selects everything") {
    const Heatmap h = heatmap_from(Image(10, 12, 1.0f));
    const RoiPrediction roi = binarize_heatmap(h, 0.5);
    CHECK(mask_area(roi.mask) == 120);
    REQUIRE(roi.components.size() == 1);
    CHECK(roi.components[0] == Box{0, 0, 9, 11});
    CHECK(roi.threshold_used == 0.5);
    CHECK_FALSE(roi.degenerate);
}

TEST_CASE("binarize_heatmap separates two bright blobs") {
    Image v(20, 20, 0.1f);
    for (int y = 2; y <= 5; ++y)
        for (int x = 3; x <= 6; ++x) v.at(y, x) = 0.9f;
    for (int y = 12; y <= 17; ++y)
        for (int x = 10; x <= 13; ++x) v.at(y, x) = 0.8f;
    const RoiPrediction roi = binarize_heatmap(heatmap_from(v), 0.5);
    REQUIRE(roi.components.size() == 2);
    CHECK(roi.components[0] == Box{2, 3, 5, 6});
    CHECK(roi.components[1] == Box{12, 10, 17, 13});
    CHECK(mask_area(roi.mask) == 16 + 24);
}

TEST_CASE("a tight threshold keeps only the peak of a smooth bump") {
    Image v(32, 32);
    const double cy = 20.0, cx = 9.0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            v.at(y, x) = static_cast<float>(std::exp(-d2 / 40.0));
        }
    const RoiPrediction roi = binarize_heatmap(heatmap_from(v), 0.99);
    REQUIRE(roi.components.size() == 1);
    const Box b = roi.components[0];
    CHECK(b.y0 <= 20);
    CHECK(b.y1 >= 20);
    CHECK(b.x0 <= 9);
    CHECK(b.x1 >= 9);
    CHECK(b.area() < 32); // a tight cap, nowhere near the whole image
}

TEST_CASE("binarize_heatmap is idempotent at a fixed tau") {
    CamNetwork cam = make_cam(96, 61);
    const Heatmap h = compute_cam(cam, random_image(96, 67));
    REQUIRE_FALSE(h.degenerate);
    const RoiPrediction once = binarize_heatmap(h, 0.6);

    Image as_values(once.mask.h, once.mask.w);
    for (size_t i = 0; i < once.mask.v.size(); ++i)
        as_values.v[i] = static_cast<float>(once.mask.v[i]);
    const RoiPrediction twice = binarize_heatmap(heatmap_from(as_values), 0.6);
    CHECK(twice.mask == once.mask);
    CHECK(twice.components.size() == once.components.size());
}

TEST_CASE("binarize_heatmap flags degenerate input and validates tau") {
    Heatmap degen;
    degen.values = Image(8, 8, 0.0f);
    degen.degenerate = true;
    const RoiPrediction roi = binarize_heatmap(degen, 0.5);
    CHECK(roi.degenerate);
    CHECK(mask_area(roi.mask) == 0);
    CHECK(roi.components.empty());

    const Heatmap ok = heatmap_from(Image(8, 8, 1.0f));
    CHECK_THROWS_AS(binarize_heatmap(ok, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(binarize_heatmap(ok, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(binarize_heatmap(ok, -0.2), std::invalid_argument);
}

TEST_CASE("patch_inference unions triggering footprints") {
    // bright 8x8 block exactly at the placement (row 1, col 2) of an
    // 8-pixel non-overlapping sweep
    Image img(24, 24, 0.05f);
    for (int y = 8; y < 16; ++y)
        for (int x = 16; x < 24; ++x) img.at(y, x) = 0.95f;
    const PatchScorer mean_score = [](const Image& p) {
        double acc = 0.0;
        for (float v : p.v) acc += v;
        return acc / p.v.size();
    };

    const RoiPrediction roi = patch_inference(img, 8, 0, 0.5, mean_score);
    REQUIRE(roi.components.size() == 1);
    CHECK(roi.components[0] == Box{8, 16, 15, 23});
    CHECK(mask_area(roi.mask) == 64);

    const RoiPrediction none =
        patch_inference(img, 8, 0, 0.5, [](const Image&) { return 0.0; });
    CHECK(mask_area(none.mask) == 0);
    CHECK(none.components.empty());

    const RoiPrediction all = patch_inference(img, 8, 0, 0.5, [](const Image&) { return 1.0; });
    CHECK(mask_area(all.mask) == 24 * 24);
    REQUIRE(all.components.size() == 1);
    CHECK(all.components[0] == Box{0, 0, 23, 23});
}

TEST_CASE("patch_inference sweeps only complete windows") {
    // stride 7 on a 24-wide image places windows at 0, 7 and 14: the last
    // two rows and columns stay unswept
    const Image img(24, 24, 1.0f);
    const RoiPrediction roi =
        patch_inference(img, 8, 7, 0.5, [](const Image&) { return 1.0; });
    REQUIRE(roi.components.size() == 1);
    CHECK(roi.components[0] == Box{0, 0, 21, 21});
    CHECK(mask_area(roi.mask) == 22 * 22);
}

TEST_CASE("patch_inference validates the patch size") {
    const Image img(16, 16, 0.5f);
    const PatchScorer one = [](const Image&) { return 1.0; };
    CHECK_THROWS_AS(patch_inference(img, 20, 0, 0.5, one), std::invalid_argument);
    CHECK_THROWS_AS(patch_inference(img, 0, 0, 0.5, one), std::invalid_argument);
    CHECK_THROWS_AS(patch_inference(img, 4, 4, 0.5, PatchScorer{}), std::invalid_argument);
    CHECK_NOTHROW(patch_inference(img, 16, 0, 0.5, one)); // exact fit is legal
}

TEST_CASE("the CamNetwork patch overload resizes and scores deterministically") {
    CamNetwork cam = make_cam(12, 71);
    const Image img = random_image(26, 73);

    const RoiPrediction everything = patch_inference(cam, img, 13, 0, 0.0);
    CHECK(mask_area(everything.mask) == 26 * 26); // 2x2 placements cover all

    const RoiPrediction a = patch_inference(cam, img, 13, 0, 0.5);
    const RoiPrediction b = patch_inference(cam, img, 13, 0, 0.5);
    CHECK(a.mask == b.mask);

    // agrees with the generic core driven by the same scorer
    const RoiPrediction c = patch_inference(img, 13, 0, 0.5, [&](const Image& p) {
        const Image r = resize_bilinear(p, 12, 12);
        return compute_cam(cam, r).prob;
    });
    CHECK(a.mask == c.mask);

    CHECK_THROWS_AS(patch_inference(cam, img, 30, 0, 0.5), std::invalid_argument);
}

TEST_CASE("boxes_to_mask rasterizes, unions and clamps") {
    const Mask m = boxes_to_mask({{1, 1, 2, 3}, {2, 2, 4, 4}}, 6, 6);
    CHECK(mask_area(m) == 6 + 9 - 2); // overlap of two cells counted once
    CHECK(m.at(1, 1) == 1);
    CHECK(m.at(4, 4) == 1);
    CHECK(m.at(0, 0) == 0);
    CHECK(m.at(5, 5) == 0);

    const Mask clamped = boxes_to_mask({{-5, -5, 10, 10}}, 4, 4);
    CHECK(mask_area(clamped) == 16);
    CHECK(mask_area(boxes_to_mask({}, 4, 4)) == 0);
}

TEST_CASE("render_overlay blends heat and draws both box families") {
    const Image base(20, 20, 0.5f);
    Heatmap heat;
    heat.values = Image(20, 20, 0.0f);
    heat.values.at(10, 10) = 1.0f;

    const ColorImage img = render_overlay(base, heat, {{2, 2, 6, 6}}, {{12, 12, 16, 16}}, 0.5);
    REQUIRE(img.h == 20);
    REQUIRE(img.w == 20);
    REQUIRE(img.rgb.size() == 20 * 20 * 3);

    // untouched pixel: pure grayscale
    const size_t plain = (0 * 20 + 0) * 3;
    CHECK(img.rgb[plain] == img.rgb[plain + 1]);
    CHECK(img.rgb[plain + 1] == img.rgb[plain + 2]);

    // hot pixel: red-shifted away from gray
    const size_t hot = (10 * 20 + 10) * 3;
    CHECK(img.rgb[hot] > img.rgb[hot + 2]);

    // predicted box edge is green, truth box edge is red
    const size_t pred = (2 * 20 + 4) * 3;
    CHECK(img.rgb[pred] == 0);
    CHECK(img.rgb[pred + 1] == 255);
    CHECK(img.rgb[pred + 2] == 0);
    const size_t gt = (12 * 20 + 14) * 3;
    CHECK(img.rgb[gt] == 255);
    CHECK(img.rgb[gt + 1] == 0);
    CHECK(img.rgb[gt + 2] == 0);

    Heatmap wrong;
    wrong.values = Image(10, 10, 0.0f);
    CHECK_THROWS_AS(render_overlay(base, wrong, {}, {}, 0.5), std::invalid_argument);
}
