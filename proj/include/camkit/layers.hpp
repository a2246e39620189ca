#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "camkit/rng.hpp"
#include "camkit/tensor.hpp"

namespace camkit {

/// Named parameter tensor with its gradient accumulator.
struct Param {
    std::string name;
    std::vector<float> value;
    std::vector<float> grad;
    bool trainable = true;

    void resize(size_t n) {
        value.assign(n, 0.0f);
        grad.assign(n, 0.0f);
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

/// 3x3 convolution, stride 2, padding 1 (halves each spatial dimension).
/// Forward is one im2col gather plus a single GEMM per batch.
class Conv2d {
public:
    Conv2d(std::string name, int c_in, int c_out);

    void init_he(Rng& rng);
    BatchTensor forward(const BatchTensor& x, bool keep_for_backward);
    /// Accumulates weight/bias grads from the cached forward; returns dx
    /// when need_dx (otherwise an empty tensor). Requires a prior forward
    /// with keep_for_backward=true.
    BatchTensor backward(const BatchTensor& dy, bool need_dx);

    int c_in() const { return c_in_; }
    int c_out() const { return c_out_; }

    Param weight; // [c_out x c_in*9], row-major
    Param bias;   // [c_out]

private:
    int c_in_, c_out_;
    std::vector<float> cols_; // cached im2col matrix [c_in*9 x n*oh*ow]
    int n_ = 0, in_h_ = 0, in_w_ = 0;
};

/// 2x2 transposed convolution, stride 2 (doubles each spatial dimension).
/// Kernel footprints do not overlap, so forward is a single GEMM followed
/// by a pure reshuffle.
class ConvTranspose2d {
public:
    ConvTranspose2d(std::string name, int c_in, int c_out);

    void init_he(Rng& rng);
    BatchTensor forward(const BatchTensor& x, bool keep_for_backward);
    BatchTensor backward(const BatchTensor& dy, bool need_dx);

    int c_in() const { return c_in_; }
    int c_out() const { return c_out_; }

    Param weight; // [c_out*4 x c_in]; row (co*4 + dy*2 + dx)
    Param bias;   // [c_out]

private:
    int c_in_, c_out_;
    BatchTensor x_; // cached input
};

/// Fully connected layer over column-stacked feature vectors: input viewed
/// as [in x n], output [out x n].
class Dense {
public:
    Dense(std::string name, int in, int out);

    void init_he(Rng& rng);
    std::vector<float> forward(const std::vector<float>& x, int n, bool keep_for_backward);
    std::vector<float> backward(const std::vector<float>& dy, int n, bool need_dx);

    int in() const { return in_; }
    int out() const { return out_; }

    Param weight; // [out x in]
    Param bias;   // [out]

private:
    int in_, out_;
    std::vector<float> x_;
};

void relu_inplace(std::span<float> v);
/// dy *= 1[y > 0], where y is the stored post-activation output.
void relu_backward_inplace(std::span<const float> y, std::span<float> dy);
void sigmoid_inplace(std::span<float> v);
/// dy *= y(1-y), where y is the stored post-activation output.
void sigmoid_backward_inplace(std::span<const float> y, std::span<float> dy);

} // namespace camkit
