#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "camkit/losses.hpp"
#include "camkit/network.hpp"
#include "camkit/optimizer.hpp"
#include "camkit/rng.hpp"

using namespace camkit;

namespace {

Image random_image(int size, Rng& rng) {
    Image img(size, size);
    for (auto& v : img.v) v = static_cast<float>(rng.uniform());
    return img;
}

BatchTensor random_batch(int n, int size, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Image> imgs;
    for (int i = 0; i < n; ++i) imgs.push_back(random_image(size, rng));
    return pack_batch(imgs, size);
}

// Parameter values keyed by name prefix, for freeze-scope diffing.
std::vector<std::vector<float>> snapshot(const DualHeadNetwork& net) {
    std::vector<std::vector<float>> out;
    for (const Param* p : net.params()) out.push_back(p->value);
    return out;
}

bool group_changed(const DualHeadNetwork& net, const std::vector<std::vector<float>>& before,
                   const std::string& prefix) {
    const auto params = net.params();
    bool saw_group = false;
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i]->name.rfind(prefix, 0) != 0) continue;
        saw_group = true;
        if (params[i]->value != before[i]) return true;
    }
    REQUIRE(saw_group);
    return false;
}

} // namespace

TEST_CASE("default_arch builds the documented channel stacks") {
    const ArchConfig a96 = default_arch(96);
    CHECK(a96.input_size == 96);
    CHECK(a96.encoder_channels == std::vector<int>{16, 32, 32, 16});
    CHECK(a96.downsample_steps() == 4);
    CHECK(a96.flat_features() == 576);

    const ArchConfig a192 = default_arch(192);
    CHECK(a192.encoder_channels == std::vector<int>{16, 32, 32, 32, 16});
    CHECK(a192.downsample_steps() == 5);
    CHECK(a192.flat_features() == 576);

    // 100 halves to 25 and never reaches 6; 6 needs at least one step
    CHECK_THROWS_AS(default_arch(100), std::invalid_argument);
    CHECK_THROWS_AS(default_arch(6), std::invalid_argument);
    CHECK_THROWS_AS(default_arch(0), std::invalid_argument);
}

TEST_CASE("ArchConfig::validate rejects inconsistent geometry") {
    ArchConfig cfg = default_arch(96);
    CHECK_NOTHROW(cfg.validate());

    ArchConfig wrong_tail = cfg;
    wrong_tail.encoder_channels.back() = 32;
    CHECK_THROWS_WITH_AS(wrong_tail.validate(), "ArchConfig: encoder must end in 16 channels",
                         std::invalid_argument);

    // five steps on a 96 input lands on 3x3, not 6x6
    ArchConfig too_deep = cfg;
    too_deep.encoder_channels = {16, 32, 32, 32, 16};
    CHECK_THROWS_WITH_AS(too_deep.validate(),
                         "ArchConfig: input_size 96 with 5 downsample steps gives a 3x3 map, "
                         "not the required 6x6",
                         std::invalid_argument);

    ArchConfig odd = cfg;
    odd.input_size = 50; // 50 -> 25 -> not divisible
    CHECK_THROWS_AS(odd.validate(), std::invalid_argument);

    ArchConfig bad_dense = cfg;
    bad_dense.dense_widths = {0};
    CHECK_THROWS_AS(bad_dense.validate(), std::invalid_argument);
}

TEST_CASE("forward produces the documented shapes and ranges") {
    DualHeadNetwork net = build_model(default_arch(96), 11);
    const BatchTensor x = random_batch(3, 96, 21);

    DualForward out = net.forward(x, true);
    CHECK(out.class_probs.size() == 3);
    CHECK(out.class_logits.size() == 3);
    CHECK(out.seg_probs.c == 1);
    CHECK(out.seg_probs.n == 3);
    CHECK(out.seg_probs.h == 96);
    CHECK(out.seg_probs.w == 96);
    for (float p : out.class_probs) {
        CHECK(p > 0.0f);
        CHECK(p < 1.0f);
    }
    for (float s : out.seg_probs.v) {
        CHECK(s > 0.0f);
        CHECK(s < 1.0f);
    }
    for (size_t i = 0; i < 3; ++i) {
        const float logit = out.class_logits[i];
        CHECK(out.class_probs[i] ==
              doctest::Approx(1.0 / (1.0 + std::exp(-static_cast<double>(logit)))).epsilon(1e-6));
    }

    DualForward no_dec = net.forward(x, false);
    CHECK(no_dec.seg_probs.empty());
    CHECK(no_dec.class_probs == out.class_probs);

    BatchTensor wrong(1, 1, 64, 64);
    CHECK_THROWS_AS(net.forward(wrong, true), std::invalid_argument);
}

TEST_CASE("build_model is deterministic in the seed") {
    const ArchConfig cfg = default_arch(96);
    DualHeadNetwork a = build_model(cfg, 5);
    DualHeadNetwork b = build_model(cfg, 5);
    DualHeadNetwork c = build_model(cfg, 6);

    const auto pa = a.params(), pb = b.params(), pc = c.params();
    REQUIRE(pa.size() == pb.size());
    bool any_diff_seed = false;
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        CHECK(pa[i]->value == pb[i]->value);
        if (pa[i]->value != pc[i]->value) any_diff_seed = true;
    }
    CHECK(any_diff_seed);

    const BatchTensor x = random_batch(2, 96, 3);
    CHECK(a.forward(x, true).class_probs == b.forward(x, true).class_probs);
}

TEST_CASE("batch position changes a sample's outputs by at most rounding noise") {
    // The GEMM backend blocks over columns, so a sample's arithmetic depends
    // on its batch position at the level of the last float bit. Identical
    // calls are still bit-identical; across positions we bound the noise.
    DualHeadNetwork net = build_model(default_arch(96), 17);
    Rng rng(31);
    const Image img = random_image(96, rng);
    const Image other = random_image(96, rng);
    const BatchTensor x = pack_batch(std::vector<Image>{img, other, img}, 96);

    DualForward out = net.forward(x, true);
    CHECK(std::abs(out.class_logits[0] - out.class_logits[2]) <= 1e-5f);
    const size_t plane = 96 * 96;
    float dup_diff = 0.0f, other_diff = 0.0f;
    for (size_t k = 0; k < plane; ++k) {
        dup_diff = std::max(dup_diff,
                            std::abs(out.seg_probs.v[k] - out.seg_probs.v[2 * plane + k]));
        other_diff = std::max(other_diff,
                              std::abs(out.seg_probs.v[k] - out.seg_probs.v[plane + k]));
    }
    CHECK(dup_diff <= 1e-5f);
    CHECK(other_diff > 1e-3f); // distinct inputs differ materially

    // a singleton batch agrees with the batched run to the same bound
    const BatchTensor solo = pack_batch(std::vector<Image>{img}, 96);
    DualForward sout = net.forward(solo, true);
    CHECK(std::abs(sout.class_logits[0] - out.class_logits[0]) <= 1e-5f);
    float solo_diff = 0.0f;
    for (size_t k = 0; k < plane; ++k)
        solo_diff = std::max(solo_diff, std::abs(sout.seg_probs.v[k] - out.seg_probs.v[k]));
    CHECK(solo_diff <= 1e-5f);
}

TEST_CASE("freeze scopes confine optimizer updates to the right heads") {
    const ArchConfig cfg = default_arch(96);
    const BatchTensor x = random_batch(4, 96, 41);
    const std::vector<float> target = {1.0f, 0.0f, 1.0f, 0.0f};

    auto one_bce_step = [&](DualHeadNetwork& net) {
        Adam opt(net.params(), 1e-3);
        opt.zero_grad();
        DualForward out = net.forward(x, false, true);
        std::vector<float> grad(4);
        bce_loss_grad<float>(std::span<const float>(out.class_probs),
                             std::span<const float>(target), std::span<float>(grad));
        net.backward(grad, nullptr);
        opt.step();
    };

    SUBCASE("ed_only trains encoder and dense head, decoder untouched") {
        DualHeadNetwork net = build_model(cfg, 7);
        set_trainable(net, TrainableScope::ed_only);
        const auto before = snapshot(net);
        one_bce_step(net);
        CHECK(group_changed(net, before, "enc"));
        CHECK(group_changed(net, before, "ed_dense"));
        CHECK_FALSE(group_changed(net, before, "dec"));
    }

    SUBCASE("ed_dense_only trains only the dense head") {
        DualHeadNetwork net = build_model(cfg, 7);
        set_trainable(net, TrainableScope::ed_dense_only);
        const auto before = snapshot(net);
        one_bce_step(net);
        CHECK_FALSE(group_changed(net, before, "enc"));
        CHECK(group_changed(net, before, "ed_dense"));
        CHECK_FALSE(group_changed(net, before, "dec"));
    }

    SUBCASE("all with the combined loss touches every head") {
        DualHeadNetwork net = build_model(cfg, 7);
        set_trainable(net, TrainableScope::all);
        const auto before = snapshot(net);

        Adam opt(net.params(), 1e-3);
        opt.zero_grad();
        DualForward out = net.forward(x, true, true);
        std::vector<float> grad(4);
        bce_loss_grad<float>(std::span<const float>(out.class_probs),
                             std::span<const float>(target), std::span<float>(grad));
        BatchTensor seg_grad(1, 4, 96, 96);
        Rng rng(5);
        for (auto& g : seg_grad.v) g = static_cast<float>(rng.uniform(-0.1, 0.1));
        net.backward(grad, &seg_grad);
        opt.step();

        CHECK(group_changed(net, before, "enc"));
        CHECK(group_changed(net, before, "ed_dense"));
        CHECK(group_changed(net, before, "dec"));
    }

    SUBCASE("cam_dense_only is not a dual-head scope") {
        DualHeadNetwork net = build_model(cfg, 7);
        CHECK_THROWS_WITH_AS(set_trainable(net, TrainableScope::cam_dense_only),
                             "scope cam_dense_only requires a CamNetwork",
                             std::invalid_argument);
    }
}

TEST_CASE("backward demands a cached training forward") {
    DualHeadNetwork net = build_model(default_arch(96), 1);
    const BatchTensor x = random_batch(1, 96, 1);
    net.forward(x, false, false);
    CHECK_THROWS_AS(net.backward({0.5f}, nullptr), std::logic_error);

    net.forward(x, false, true);
    BatchTensor seg_grad(1, 1, 96, 96);
    CHECK_THROWS_AS(net.backward({0.5f}, &seg_grad), std::logic_error);
}

TEST_CASE("network gradients match finite differences") {
    // Smallest legal geometry: one downsample step from a 12x12 input.
    ArchConfig cfg;
    cfg.input_size = 12;
    cfg.encoder_channels = {16};
    cfg.dense_widths = {8};
    DualHeadNetwork net = build_model(cfg, 23);
    set_trainable(net, TrainableScope::all);

    const BatchTensor x = random_batch(2, 12, 29);

    // Fixed random projection of the outputs; its gradient w.r.t. the
    // outputs is exactly the coefficient vector, so finite differences on
    // the scalar probe every parameter through the full chain rule.
    Rng crng(101);
    std::vector<double> cclass(2);
    for (auto& c : cclass) c = crng.uniform(-1.0, 1.0);
    std::vector<double> cseg(static_cast<size_t>(2) * 12 * 12);
    for (auto& c : cseg) c = crng.uniform(-1.0, 1.0);

    auto scalar = [&]() {
        DualForward out = net.forward(x, true, false);
        double acc = 0.0;
        for (size_t i = 0; i < out.class_probs.size(); ++i)
            acc += cclass[i] * out.class_probs[i];
        for (size_t j = 0; j < out.seg_probs.v.size(); ++j)
            acc += cseg[j] * out.seg_probs.v[j];
        return acc;
    };

    net.zero_grad();
    DualForward out = net.forward(x, true, true);
    std::vector<float> dclass(2);
    for (size_t i = 0; i < dclass.size(); ++i) dclass[i] = static_cast<float>(cclass[i]);
    BatchTensor dseg(1, 2, 12, 12);
    for (size_t j = 0; j < dseg.v.size(); ++j) dseg.v[j] = static_cast<float>(cseg[j]);
    net.backward(dclass, &dseg);

    Rng pick(55);
    const double h = 6e-3;
    int checked = 0;
    for (Param* p : net.params()) {
        for (int trial = 0; trial < 6; ++trial) {
            const size_t idx =
                static_cast<size_t>(pick.uniform_int(0, static_cast<std::int64_t>(p->value.size()) - 1));
            const float keep = p->value[idx];
            p->value[idx] = static_cast<float>(keep + h);
            const double up = scalar();
            p->value[idx] = static_cast<float>(keep - h);
            const double down = scalar();
            p->value[idx] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double an = p->grad[idx];
            // generous bound: wiring mistakes miss by the gradient itself,
            // while step truncation and relu kinks stay well under 10%
            CHECK(std::abs(fd - an) <= 1.5e-3 + 8e-2 * std::max(std::abs(an), std::abs(fd)));
            ++checked;
        }
    }
    CHECK(checked >= 40);
}

TEST_CASE("pack_batch validates shapes and unpack_plane round-trips") {
    Rng rng(3);
    const Image a = random_image(8, rng);
    const Image b = random_image(8, rng);
    const BatchTensor t = pack_batch(std::vector<Image>{a, b}, 8);
    CHECK(t.c == 1);
    CHECK(t.n == 2);
    CHECK(unpack_plane(t, 0, 0) == a);
    CHECK(unpack_plane(t, 0, 1) == b);
    CHECK_THROWS_AS(unpack_plane(t, 1, 0), std::out_of_range);
    CHECK_THROWS_AS(unpack_plane(t, 0, 2), std::out_of_range);

    CHECK_THROWS_AS(pack_batch(std::vector<Image>{}, 8), std::invalid_argument);
    const Image small = random_image(6, rng);
    CHECK_THROWS_AS(pack_batch(std::vector<Image>{a, small}, 8), std::invalid_argument);
}

TEST_CASE("build_cam_head copies and freezes the encoder") {
    DualHeadNetwork net = build_model(default_arch(96), 13);
    CamNetwork cam = build_cam_head(net);

    REQUIRE(cam.encoder.size() == net.encoder.size());
    for (size_t i = 0; i < cam.encoder.size(); ++i) {
        CHECK(cam.encoder[i].weight.value == net.encoder[i].weight.value);
        CHECK(cam.encoder[i].bias.value == net.encoder[i].bias.value);
        CHECK_FALSE(cam.encoder[i].weight.trainable);
        CHECK_FALSE(cam.encoder[i].bias.trainable);
    }
    CHECK(cam.cam_weight.name == "cam_dense.weight");
    CHECK(cam.cam_weight.value.size() == 16);
    CHECK(cam.cam_bias.name == "cam_dense.bias");
    CHECK(cam.cam_bias.value == std::vector<float>{0.0f});

    // head init is deterministic and the copy is isolated from the source
    CamNetwork again = build_cam_head(net);
    CHECK(again.cam_weight.value == cam.cam_weight.value);
    net.encoder[0].weight.value[0] += 1.0f;
    CHECK(cam.encoder[0].weight.value[0] != net.encoder[0].weight.value[0]);

    CHECK_THROWS_WITH_AS(set_trainable(cam, TrainableScope::all),
                         "a CamNetwork supports only the cam_dense_only scope",
                         std::invalid_argument);
    set_trainable(cam, TrainableScope::cam_dense_only);
    CHECK(cam.cam_weight.trainable);
}

TEST_CASE("CamNetwork logits are the weighted global average pool") {
    DualHeadNetwork net = build_model(default_arch(96), 19);
    CamNetwork cam = build_cam_head(net);
    const BatchTensor x = random_batch(3, 96, 37);

    CamForward out = cam.forward(x);
    REQUIRE(out.bottleneck.c == 16);
    REQUIRE(out.bottleneck.n == 3);
    REQUIRE(out.bottleneck.h == 6);
    REQUIRE(out.bottleneck.w == 6);
    REQUIRE(out.gap.size() == 16 * 3);

    for (int i = 0; i < 3; ++i) {
        double logit = cam.cam_bias.value[0];
        for (int ch = 0; ch < 16; ++ch) {
            double mean = 0.0;
            for (int y = 0; y < 6; ++y)
                for (int xx = 0; xx < 6; ++xx) mean += out.bottleneck.at(ch, i, y, xx);
            mean /= 36.0;
            CHECK(out.gap[static_cast<size_t>(ch) * 3 + i] ==
                  doctest::Approx(mean).epsilon(1e-5));
            logit += static_cast<double>(cam.cam_weight.value[ch]) *
                     out.gap[static_cast<size_t>(ch) * 3 + i];
        }
        CHECK(out.logits[i] == doctest::Approx(logit).epsilon(1e-5));
        CHECK(out.probs[i] ==
              doctest::Approx(1.0 / (1.0 + std::exp(-logit))).epsilon(1e-5));
    }

    // the CAM encoder reproduces the source network's bottleneck features
    DualForward dual = net.forward(x, false);
    CHECK(dual.class_probs.size() == 3); // same input accepted by both nets
}

TEST_CASE("CamNetwork head gradients match finite differences") {
    ArchConfig cfg;
    cfg.input_size = 12;
    cfg.encoder_channels = {16};
    cfg.dense_widths = {8};
    CamNetwork cam = build_cam_head(build_model(cfg, 43));
    set_trainable(cam, TrainableScope::cam_dense_only);
    const BatchTensor x = random_batch(2, 12, 47);

    Rng crng(201);
    std::vector<double> cclass(2);
    for (auto& c : cclass) c = crng.uniform(-1.0, 1.0);
    auto scalar = [&]() {
        CamForward out = cam.forward(x, false);
        double acc = 0.0;
        for (size_t i = 0; i < out.probs.size(); ++i) acc += cclass[i] * out.probs[i];
        return acc;
    };

    cam.zero_grad();
    cam.forward(x, true);
    std::vector<float> dclass(2);
    for (size_t i = 0; i < dclass.size(); ++i) dclass[i] = static_cast<float>(cclass[i]);
    cam.backward(dclass);

    const double h = 1e-3;
    for (Param* p : {&cam.cam_weight, &cam.cam_bias}) {
        for (size_t idx = 0; idx < p->value.size(); ++idx) {
            const float keep = p->value[idx];
            p->value[idx] = static_cast<float>(keep + h);
            const double up = scalar();
            p->value[idx] = static_cast<float>(keep - h);
            const double down = scalar();
            p->value[idx] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double an = p->grad[idx];
            CHECK(std::abs(fd - an) <= 1e-4 + 1e-2 * std::abs(an));
        }
    }
}

TEST_CASE("backward_logit equals backward with the sigmoid derivative pre-applied") {
    ArchConfig cfg;
    cfg.input_size = 12;
    cfg.encoder_channels = {16};
    cfg.dense_widths = {8};
    const BatchTensor x = random_batch(3, 12, 83);

    DualHeadNetwork prob_net = build_model(cfg, 47);
    DualHeadNetwork logit_net = build_model(cfg, 47);
    set_trainable(prob_net, TrainableScope::all);
    set_trainable(logit_net, TrainableScope::all);

    const DualForward out = prob_net.forward(x, true, true);
    logit_net.forward(x, true, true);

    std::vector<float> dprob{0.4f, -0.7f, 0.25f};
    std::vector<float> dlogit(3);
    for (size_t i = 0; i < 3; ++i) {
        // associate as dprob * (p * (1 - p)) so the product rounds the same
        // way as the in-place sigmoid derivative
        const float p = out.class_probs[i];
        dlogit[i] = dprob[i] * (p * (1.0f - p));
    }
    BatchTensor dseg(1, 3, 12, 12, 0.02f);

    prob_net.zero_grad();
    logit_net.zero_grad();
    prob_net.backward(dprob, &dseg);
    logit_net.backward_logit(dlogit, &dseg);

    auto pa = std::as_const(prob_net).params();
    auto pb = std::as_const(logit_net).params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->grad == pb[i]->grad);

    // CamNetwork: same equivalence through the GAP head
    CamNetwork prob_cam = build_cam_head(prob_net);
    CamNetwork logit_cam = build_cam_head(prob_net);
    const CamForward cf = prob_cam.forward(x, true);
    logit_cam.forward(x, true);
    for (size_t i = 0; i < 3; ++i) {
        const float p = cf.probs[i];
        dlogit[i] = dprob[i] * (p * (1.0f - p));
    }
    prob_cam.zero_grad();
    logit_cam.zero_grad();
    prob_cam.backward(dprob);
    logit_cam.backward_logit(dlogit);
    CHECK(prob_cam.cam_weight.grad == logit_cam.cam_weight.grad);
    CHECK(prob_cam.cam_bias.grad == logit_cam.cam_bias.grad);
}

TEST_CASE("clip_grad_norm rescales only above the threshold") {
    Param a, b;
    a.name = "a";
    a.resize(3);
    b.name = "b";
    b.resize(2);
    a.grad = {3.0f, 0.0f, 0.0f};
    b.grad = {0.0f, 4.0f};
    std::vector<Param*> params{&a, &b};

    SUBCASE("below the threshold nothing moves") {
        CHECK(clip_grad_norm(params, 10.0) == doctest::Approx(5.0));
        CHECK(a.grad[0] == 3.0f);
        CHECK(b.grad[1] == 4.0f);
    }
    SUBCASE("above the threshold the global norm lands on it") {
        CHECK(clip_grad_norm(params, 1.0) == doctest::Approx(5.0));
        CHECK(a.grad[0] == doctest::Approx(0.6f));
        CHECK(b.grad[1] == doctest::Approx(0.8f));
    }
    SUBCASE("zero disables clipping") {
        CHECK(clip_grad_norm(params, 0.0) == doctest::Approx(5.0));
        CHECK(a.grad[0] == 3.0f);
    }
    SUBCASE("frozen parameters neither count nor move") {
        b.trainable = false;
        CHECK(clip_grad_norm(params, 1.0) == doctest::Approx(3.0));
        CHECK(a.grad[0] == doctest::Approx(1.0f));
        CHECK(b.grad[1] == 4.0f);
    }
}
