#include "camkit/network.hpp"

#include <cmath>
#include <stdexcept>

namespace camkit {

std::string to_string(TrainableScope s) {
    switch (s) {
        case TrainableScope::all: return "all";
        case TrainableScope::ed_only: return "ed_only";
        case TrainableScope::ed_dense_only: return "ed_dense_only";
        case TrainableScope::cam_dense_only: return "cam_dense_only";
    }
    return "all";
}

TrainableScope scope_from_string(const std::string& s) {
    if (s == "all") return TrainableScope::all;
    if (s == "ed_only") return TrainableScope::ed_only;
    if (s == "ed_dense_only") return TrainableScope::ed_dense_only;
    if (s == "cam_dense_only") return TrainableScope::cam_dense_only;
    throw std::invalid_argument("unknown trainable scope: " + s);
}

void ArchConfig::validate() const {
    if (encoder_channels.empty())
        throw std::invalid_argument("ArchConfig: encoder_channels must not be empty");
    for (int c : encoder_channels)
        if (c < 1) throw std::invalid_argument("ArchConfig: encoder channel counts must be positive");
    if (encoder_channels.back() != kBottleneckChannels)
        throw std::invalid_argument("ArchConfig: encoder must end in 16 channels");
    long long size = input_size;
    for (int i = 0; i < downsample_steps(); ++i) {
        if (size % 2 != 0)
            throw std::invalid_argument("ArchConfig: input_size " + std::to_string(input_size) +
                                        " is not divisible through " +
                                        std::to_string(downsample_steps()) + " downsample steps");
        size /= 2;
    }
    if (size != kBottleneck)
        throw std::invalid_argument(
            "ArchConfig: input_size " + std::to_string(input_size) + " with " +
            std::to_string(downsample_steps()) + " downsample steps gives a " +
            std::to_string(size) + "x" + std::to_string(size) + " map, not the required 6x6");
    for (int wdt : dense_widths)
        if (wdt < 1) throw std::invalid_argument("ArchConfig: dense widths must be positive");
}

ArchConfig default_arch(int input_size) {
    int steps = 0;
    long long size = input_size;
    while (size > ArchConfig::kBottleneck && size % 2 == 0) {
        size /= 2;
        ++steps;
    }
    if (size != ArchConfig::kBottleneck || steps < 1)
        throw std::invalid_argument("default_arch: input_size " + std::to_string(input_size) +
                                    " cannot reach the 6x6 bottleneck by halving");
    ArchConfig cfg;
    cfg.input_size = input_size;
    cfg.encoder_channels.assign(steps, 32);
    cfg.encoder_channels.front() = 16;
    cfg.encoder_channels.back() = ArchConfig::kBottleneckChannels;
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// batching helpers

BatchTensor pack_batch(const std::vector<const Image*>& images, int expected_size) {
    if (images.empty()) throw std::invalid_argument("pack_batch: empty batch");
    BatchTensor t(1, static_cast<int>(images.size()), expected_size, expected_size);
    for (size_t i = 0; i < images.size(); ++i) {
        const Image& img = *images[i];
        if (img.h != expected_size || img.w != expected_size)
            throw std::invalid_argument("pack_batch: image " + std::to_string(i) + " is " +
                                        std::to_string(img.h) + "x" + std::to_string(img.w) +
                                        ", expected " + std::to_string(expected_size));
        std::copy(img.v.begin(), img.v.end(),
                  t.v.begin() + static_cast<size_t>(i) * img.v.size());
    }
    return t;
}

BatchTensor pack_batch(const std::vector<Image>& images, int expected_size) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(images.size());
    for (const auto& img : images) ptrs.push_back(&img);
    return pack_batch(ptrs, expected_size);
}

Image unpack_plane(const BatchTensor& t, int ch, int img) {
    if (ch < 0 || ch >= t.c || img < 0 || img >= t.n)
        throw std::out_of_range("unpack_plane: index out of range");
    Image out(t.h, t.w);
    const float* src = t.v.data() + (static_cast<size_t>(ch) * t.n + img) * t.h * t.w;
    std::copy(src, src + out.v.size(), out.v.begin());
    return out;
}

namespace {

// Bottleneck (16, n, 6, 6) -> flat feature matrix [576 x n] with the
// channel-major feature order (ch, y, x).
std::vector<float> flatten_bottleneck(const BatchTensor& b) {
    const int hw = b.h * b.w;
    std::vector<float> flat(static_cast<size_t>(b.c) * hw * b.n);
    for (int ch = 0; ch < b.c; ++ch)
        for (int i = 0; i < b.n; ++i) {
            const float* src = b.v.data() + (static_cast<size_t>(ch) * b.n + i) * hw;
            for (int k = 0; k < hw; ++k)
                flat[(static_cast<size_t>(ch) * hw + k) * b.n + i] = src[k];
        }
    return flat;
}

void unflatten_add(const std::vector<float>& flat, BatchTensor& b) {
    const int hw = b.h * b.w;
    for (int ch = 0; ch < b.c; ++ch)
        for (int i = 0; i < b.n; ++i) {
            float* dst = b.v.data() + (static_cast<size_t>(ch) * b.n + i) * hw;
            for (int k = 0; k < hw; ++k)
                dst[k] += flat[(static_cast<size_t>(ch) * hw + k) * b.n + i];
        }
}

bool any_trainable(const std::vector<const Param*>& params) {
    for (const Param* p : params)
        if (p->trainable) return true;
    return false;
}

} // namespace

// ---------------------------------------------------------------------------
// DualHeadNetwork

DualHeadNetwork build_model(const ArchConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    DualHeadNetwork net;
    net.config = cfg;
    net.seed = seed;

    const auto& ch = cfg.encoder_channels;
    const int steps = cfg.downsample_steps();
    for (int i = 0; i < steps; ++i)
        net.encoder.emplace_back("enc" + std::to_string(i + 1), i == 0 ? 1 : ch[i - 1], ch[i]);

    int in_features = cfg.flat_features();
    for (size_t j = 0; j < cfg.dense_widths.size(); ++j) {
        net.ed_dense.emplace_back("ed_dense" + std::to_string(j + 1), in_features,
                                  cfg.dense_widths[j]);
        in_features = cfg.dense_widths[j];
    }
    net.ed_dense.emplace_back("ed_dense" + std::to_string(cfg.dense_widths.size() + 1),
                              in_features, 1);

    for (int i = 0; i < steps; ++i) {
        const int c_in = ch[steps - 1 - i];
        const int c_out = i == steps - 1 ? 1 : ch[steps - 2 - i];
        net.decoder.emplace_back("dec" + std::to_string(i + 1), c_in, c_out);
    }

    Rng rng(seed);
    for (auto& c : net.encoder) c.init_he(rng);
    for (auto& d : net.ed_dense) d.init_he(rng);
    for (auto& t : net.decoder) t.init_he(rng);
    return net;
}

std::vector<Param*> DualHeadNetwork::params() {
    std::vector<Param*> out;
    for (auto& c : encoder) {
        out.push_back(&c.weight);
        out.push_back(&c.bias);
    }
    for (auto& d : ed_dense) {
        out.push_back(&d.weight);
        out.push_back(&d.bias);
    }
    for (auto& t : decoder) {
        out.push_back(&t.weight);
        out.push_back(&t.bias);
    }
    return out;
}

std::vector<const Param*> DualHeadNetwork::params() const {
    std::vector<const Param*> out;
    for (const auto& p : const_cast<DualHeadNetwork*>(this)->params()) out.push_back(p);
    return out;
}

void DualHeadNetwork::zero_grad() {
    for (Param* p : params()) p->zero_grad();
}

DualForward DualHeadNetwork::forward(const BatchTensor& x, bool with_decoder, bool training) {
    if (x.c != 1 || x.h != config.input_size || x.w != config.input_size)
        throw std::invalid_argument("forward: batch is " + std::to_string(x.h) + "x" +
                                    std::to_string(x.w) + ", expected " +
                                    std::to_string(config.input_size) + " square");

    cache_valid_ = training;
    cache_has_decoder_ = training && with_decoder;
    cached_n_ = x.n;
    if (training) {
        enc_out_.assign(encoder.size(), BatchTensor());
        hidden_out_.assign(ed_dense.size() - 1, {});
        dec_out_.assign(with_decoder ? decoder.size() : 0, BatchTensor());
    }

    BatchTensor scratch;
    const BatchTensor* cur = &x;
    for (size_t i = 0; i < encoder.size(); ++i) {
        BatchTensor y = encoder[i].forward(*cur, training);
        relu_inplace(y.v);
        if (training) {
            enc_out_[i] = std::move(y);
            cur = &enc_out_[i];
        } else {
            scratch = std::move(y);
            cur = &scratch;
        }
    }
    const BatchTensor& bottleneck = *cur;

    DualForward out;
    std::vector<float> h = flatten_bottleneck(bottleneck);
    for (size_t j = 0; j + 1 < ed_dense.size(); ++j) {
        h = ed_dense[j].forward(h, x.n, training);
        relu_inplace(h);
        if (training) hidden_out_[j] = h;
    }
    out.class_logits = ed_dense.back().forward(h, x.n, training);
    out.class_probs = out.class_logits;
    sigmoid_inplace(out.class_probs);
    if (training) probs_ = out.class_probs;

    if (with_decoder) {
        BatchTensor d = bottleneck;
        for (size_t k = 0; k < decoder.size(); ++k) {
            d = decoder[k].forward(d, training);
            if (k + 1 < decoder.size()) relu_inplace(d.v);
            else sigmoid_inplace(d.v);
            if (training) dec_out_[k] = d;
        }
        out.seg_probs = std::move(d);
    }
    return out;
}

void DualHeadNetwork::backward(const std::vector<float>& dclass_probs,
                               const BatchTensor* dseg_probs) {
    backward_impl(dclass_probs, dseg_probs, false);
}

void DualHeadNetwork::backward_logit(const std::vector<float>& dclass_logits,
                                     const BatchTensor* dseg_probs) {
    backward_impl(dclass_logits, dseg_probs, true);
}

void DualHeadNetwork::backward_impl(const std::vector<float>& dclass,
                                    const BatchTensor* dseg_probs, bool class_grad_is_logit) {
    if (!cache_valid_) throw std::logic_error("backward without a training forward");
    if (dseg_probs && !cache_has_decoder_)
        throw std::logic_error("backward: segmentation grads without a decoder forward");
    const int n = cached_n_;
    if (dclass.size() != static_cast<size_t>(n))
        throw std::invalid_argument("backward: class grad size mismatch");

    std::vector<const Param*> enc_params;
    for (const auto& c : encoder) {
        enc_params.push_back(&c.weight);
        enc_params.push_back(&c.bias);
    }
    const bool need_encoder = any_trainable(enc_params);

    // classification head
    std::vector<float> d = dclass;
    if (!class_grad_is_logit) sigmoid_backward_inplace(probs_, d);
    const size_t hidden = ed_dense.size() - 1;
    d = ed_dense.back().backward(d, n, hidden > 0 || need_encoder);
    for (size_t j = hidden; j-- > 0;) {
        relu_backward_inplace(hidden_out_[j], d);
        d = ed_dense[j].backward(d, n, j > 0 || need_encoder);
    }

    BatchTensor dbot(ArchConfig::kBottleneckChannels, n, ArchConfig::kBottleneck,
                     ArchConfig::kBottleneck);
    if (need_encoder) unflatten_add(d, dbot);

    // segmentation head
    if (dseg_probs) {
        BatchTensor ds = *dseg_probs;
        sigmoid_backward_inplace(dec_out_.back().v, ds.v);
        for (size_t k = decoder.size(); k-- > 0;) {
            const bool need_dx = k > 0 || need_encoder;
            BatchTensor dx = decoder[k].backward(ds, need_dx);
            if (k > 0) {
                relu_backward_inplace(dec_out_[k - 1].v, dx.v);
                ds = std::move(dx);
            } else if (need_encoder) {
                for (size_t i = 0; i < dbot.v.size(); ++i) dbot.v[i] += dx.v[i];
            }
        }
    }

    // shared encoder
    if (need_encoder) {
        BatchTensor dcur = std::move(dbot);
        for (size_t i = encoder.size(); i-- > 0;) {
            relu_backward_inplace(enc_out_[i].v, dcur.v);
            dcur = encoder[i].backward(dcur, i > 0);
        }
    }
    cache_valid_ = false;
}

// ---------------------------------------------------------------------------
// CamNetwork

std::vector<Param*> CamNetwork::params() {
    std::vector<Param*> out;
    for (auto& c : encoder) {
        out.push_back(&c.weight);
        out.push_back(&c.bias);
    }
    out.push_back(&cam_weight);
    out.push_back(&cam_bias);
    return out;
}

std::vector<const Param*> CamNetwork::params() const {
    std::vector<const Param*> out;
    for (const auto& p : const_cast<CamNetwork*>(this)->params()) out.push_back(p);
    return out;
}

void CamNetwork::zero_grad() {
    for (Param* p : params()) p->zero_grad();
}

CamForward CamNetwork::forward(const BatchTensor& x, bool training) {
    if (x.c != 1 || x.h != config.input_size || x.w != config.input_size)
        throw std::invalid_argument("forward: batch is " + std::to_string(x.h) + "x" +
                                    std::to_string(x.w) + ", expected " +
                                    std::to_string(config.input_size) + " square");
    CamForward out;
    BatchTensor cur = x;
    for (auto& c : encoder) {
        cur = c.forward(cur, false);
        relu_inplace(cur.v);
    }
    out.bottleneck = std::move(cur);

    const BatchTensor& b = out.bottleneck;
    const int hw = b.h * b.w;
    out.gap.assign(static_cast<size_t>(b.c) * b.n, 0.0f);
    for (int ch = 0; ch < b.c; ++ch)
        for (int i = 0; i < b.n; ++i) {
            const float* src = b.v.data() + (static_cast<size_t>(ch) * b.n + i) * hw;
            double acc = 0.0;
            for (int k = 0; k < hw; ++k) acc += src[k];
            out.gap[static_cast<size_t>(ch) * b.n + i] = static_cast<float>(acc / hw);
        }

    out.logits.assign(b.n, 0.0f);
    for (int i = 0; i < b.n; ++i) {
        double acc = cam_bias.value[0];
        for (int ch = 0; ch < b.c; ++ch)
            acc += static_cast<double>(cam_weight.value[ch]) *
                   out.gap[static_cast<size_t>(ch) * b.n + i];
        out.logits[i] = static_cast<float>(acc);
    }
    out.probs = out.logits;
    sigmoid_inplace(out.probs);

    if (training) {
        gap_ = out.gap;
        probs_ = out.probs;
        cache_valid_ = true;
    } else {
        cache_valid_ = false;
    }
    return out;
}

void CamNetwork::backward(const std::vector<float>& dclass_probs) {
    backward_impl(dclass_probs, false);
}

void CamNetwork::backward_logit(const std::vector<float>& dclass_logits) {
    backward_impl(dclass_logits, true);
}

void CamNetwork::backward_impl(const std::vector<float>& dclass, bool class_grad_is_logit) {
    if (!cache_valid_) throw std::logic_error("backward without a training forward");
    const int n = static_cast<int>(dclass.size());
    if (probs_.size() != static_cast<size_t>(n))
        throw std::invalid_argument("backward: class grad size mismatch");
    std::vector<float> d = dclass;
    if (!class_grad_is_logit) sigmoid_backward_inplace(probs_, d);
    const int channels = static_cast<int>(cam_weight.value.size());
    for (int ch = 0; ch < channels; ++ch) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            acc += static_cast<double>(d[i]) * gap_[static_cast<size_t>(ch) * n + i];
        cam_weight.grad[ch] += static_cast<float>(acc);
    }
    double bacc = 0.0;
    for (int i = 0; i < n; ++i) bacc += d[i];
    cam_bias.grad[0] += static_cast<float>(bacc);
    cache_valid_ = false;
}

CamNetwork build_cam_head(const DualHeadNetwork& net) {
    CamNetwork cam;
    cam.config = net.config;
    cam.seed = net.seed;
    cam.encoder = net.encoder;
    for (auto& c : cam.encoder) {
        c.weight.trainable = false;
        c.bias.trainable = false;
        c.weight.zero_grad();
        c.bias.zero_grad();
    }
    cam.cam_weight.name = "cam_dense.weight";
    cam.cam_weight.resize(ArchConfig::kBottleneckChannels);
    cam.cam_bias.name = "cam_dense.bias";
    cam.cam_bias.resize(1);
    Rng rng = Rng::derive(net.seed, 0x63616dULL); // fresh stream for the new head
    const double stddev = std::sqrt(2.0 / ArchConfig::kBottleneckChannels);
    for (auto& w : cam.cam_weight.value) w = static_cast<float>(stddev * rng.normal());
    cam.cam_bias.value[0] = 0.0f;
    return cam;
}

// ---------------------------------------------------------------------------
// freeze scopes

void set_trainable(DualHeadNetwork& net, TrainableScope scope) {
    if (scope == TrainableScope::cam_dense_only)
        throw std::invalid_argument("scope cam_dense_only requires a CamNetwork");
    const bool enc = scope == TrainableScope::all || scope == TrainableScope::ed_only;
    const bool dense = true; // every DualHeadNetwork scope trains the ED dense head
    const bool dec = scope == TrainableScope::all;
    for (auto& c : net.encoder) {
        c.weight.trainable = enc;
        c.bias.trainable = enc;
    }
    for (auto& d : net.ed_dense) {
        d.weight.trainable = dense;
        d.bias.trainable = dense;
    }
    for (auto& t : net.decoder) {
        t.weight.trainable = dec;
        t.bias.trainable = dec;
    }
}

void set_trainable(CamNetwork& net, TrainableScope scope) {
    if (scope != TrainableScope::cam_dense_only)
        throw std::invalid_argument("a CamNetwork supports only the cam_dense_only scope");
    for (auto& c : net.encoder) {
        c.weight.trainable = false;
        c.bias.trainable = false;
    }
    net.cam_weight.trainable = true;
    net.cam_bias.trainable = true;
}

} // namespace camkit
