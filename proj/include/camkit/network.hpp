#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camkit/layers.hpp"
#include "camkit/tensor.hpp"

namespace camkit {

enum class TrainableScope { all, ed_only, ed_dense_only, cam_dense_only };

std::string to_string(TrainableScope s);
TrainableScope scope_from_string(const std::string& s);

/// Shape plan for the dual-head model. The encoder halves the spatial extent
/// once per entry of encoder_channels and must land exactly on the 6x6x16
/// bottleneck; the decoder mirrors the encoder back up to input resolution.
struct ArchConfig {
    int input_size = 192;
    std::vector<int> encoder_channels{16, 32, 32, 32, 16};
    std::vector<int> dense_widths{64}; // hidden widths; a final 1-unit layer is implied

    static constexpr int kBottleneck = 6;
    static constexpr int kBottleneckChannels = 16;

    int downsample_steps() const { return static_cast<int>(encoder_channels.size()); }
    int flat_features() const { return kBottleneckChannels * kBottleneck * kBottleneck; }
    void validate() const;
    bool operator==(const ArchConfig&) const = default;
};

/// Default channel plan for a given input size (96 -> 4 steps, 192 -> 5).
ArchConfig default_arch(int input_size = 192);

struct DualForward {
    std::vector<float> class_probs;  // [n]
    std::vector<float> class_logits; // [n], pre-sigmoid
    BatchTensor seg_probs;           // (1, n, input, input); empty when decoder skipped
};

/// Shared encoder with a classification head (flatten, dense stack, sigmoid
/// scalar) and a mirrored transposed-conv decoder producing a per-pixel
/// sigmoid map. No skip connections: everything the decoder sees must pass
/// through the bottleneck.
class DualHeadNetwork {
public:
    DualHeadNetwork() = default;

    ArchConfig config;
    std::uint64_t seed = 0;

    std::vector<Conv2d> encoder;
    std::vector<Dense> ed_dense; // hidden layers then the final 1-unit layer
    std::vector<ConvTranspose2d> decoder;

    std::vector<Param*> params();
    std::vector<const Param*> params() const;
    void zero_grad();

    /// with_decoder=false skips the segmentation head (classification-only
    /// phases). training=true caches activations for one backward call.
    DualForward forward(const BatchTensor& x, bool with_decoder, bool training = false);

    /// Gradient of the loss w.r.t. the sigmoid outputs goes in; parameter
    /// grads accumulate. dseg_probs may be null (classification-only loss).
    void backward(const std::vector<float>& dclass_probs, const BatchTensor* dseg_probs);

    /// Same, but the class gradient is w.r.t. the pre-sigmoid logits. With
    /// BCE this is the numerically safe route: float sigmoid saturates to an
    /// exact 0 or 1, where the prob-space chain rule multiplies a clamped
    /// huge value by an exact zero and learning stops for the samples that
    /// need it most. The fused logit gradient (p - t)/n stays bounded.
    void backward_logit(const std::vector<float>& dclass_logits, const BatchTensor* dseg_probs);

private:
    void backward_impl(const std::vector<float>& dclass, const BatchTensor* dseg_probs,
                       bool class_grad_is_logit);
    std::vector<BatchTensor> enc_out_; // post-relu activations per encoder layer
    std::vector<std::vector<float>> hidden_out_; // post-relu per hidden dense layer
    std::vector<float> probs_;
    std::vector<BatchTensor> dec_out_; // post-activation per decoder layer
    int cached_n_ = 0;
    bool cache_valid_ = false;
    bool cache_has_decoder_ = false;
};

DualHeadNetwork build_model(const ArchConfig& cfg, std::uint64_t seed);

struct CamForward {
    std::vector<float> probs;      // [n]
    std::vector<float> logits;     // [n]
    std::vector<float> gap;        // [16 x n], row-major rows=channels
    BatchTensor bottleneck;        // (16, n, 6, 6) feature maps f_k
};

/// Encoder copy (frozen) + global average pooling + a 16-weight dense layer:
/// the classifier whose weights double as CAM coefficients.
class CamNetwork {
public:
    ArchConfig config;
    std::uint64_t seed = 0; // seed of the source network

    std::vector<Conv2d> encoder;
    Param cam_weight; // [16]
    Param cam_bias;   // [1]

    std::vector<Param*> params();
    std::vector<const Param*> params() const;
    void zero_grad();

    CamForward forward(const BatchTensor& x, bool training = false);
    void backward(const std::vector<float>& dclass_probs);
    /// Class gradient w.r.t. the logits; see DualHeadNetwork::backward_logit.
    void backward_logit(const std::vector<float>& dclass_logits);

private:
    void backward_impl(const std::vector<float>& dclass, bool class_grad_is_logit);
    std::vector<float> gap_;
    std::vector<float> probs_;
    bool cache_valid_ = false;
};

/// CAM surgery: drop the dense head and decoder, freeze a bitwise copy of
/// the encoder, attach a freshly seeded 16+1 parameter dense layer.
CamNetwork build_cam_head(const DualHeadNetwork& net);

void set_trainable(DualHeadNetwork& net, TrainableScope scope);
void set_trainable(CamNetwork& net, TrainableScope scope);

} // namespace camkit
