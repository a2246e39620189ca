#include "camkit/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace camkit {

namespace {

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

void add_bias_rows(float* data, const std::vector<float>& bias, int rows, long long cols) {
    for (int r = 0; r < rows; ++r) {
        float* p = data + static_cast<size_t>(r) * cols;
        const float b = bias[r];
        for (long long i = 0; i < cols; ++i) p[i] += b;
    }
}

void fill_normal(std::vector<float>& v, double stddev, Rng& rng) {
    for (auto& x : v) x = static_cast<float>(stddev * rng.normal());
}

// Gather for the 3x3/stride-2/pad-1 convolution: cols is [c_in*9 x n*oh*ow]
// with cols[(ci*9 + ky*3 + kx)][(i*oh + oy)*ow + ox] = x(ci, i, 2oy+ky-1, 2ox+kx-1).
void im2col_3x3s2p1(const BatchTensor& x, int oh, int ow, std::vector<float>& cols) {
    const long long ncols = static_cast<long long>(x.n) * oh * ow;
    cols.assign(static_cast<size_t>(x.c) * 9 * ncols, 0.0f);
    for (int ci = 0; ci < x.c; ++ci) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                float* dst = cols.data() +
                             (static_cast<size_t>(ci) * 9 + ky * 3 + kx) * ncols;
                for (int i = 0; i < x.n; ++i) {
                    const float* src =
                        x.v.data() + (static_cast<size_t>(ci) * x.n + i) * x.h * x.w;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int sy = 2 * oy + ky - 1;
                        float* row = dst + (static_cast<size_t>(i) * oh + oy) * ow;
                        if (sy < 0 || sy >= x.h) continue; // stays zero
                        const float* srow = src + static_cast<size_t>(sy) * x.w;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int sx = 2 * ox + kx - 1;
                            if (sx >= 0 && sx < x.w) row[ox] = srow[sx];
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add transpose of im2col_3x3s2p1 (receptive fields overlap by one
// pixel at stride 2, so accumulation is required).
void col2im_3x3s2p1_add(const std::vector<float>& cols, int oh, int ow, BatchTensor& dx) {
    const long long ncols = static_cast<long long>(dx.n) * oh * ow;
    for (int ci = 0; ci < dx.c; ++ci) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const float* src = cols.data() +
                                   (static_cast<size_t>(ci) * 9 + ky * 3 + kx) * ncols;
                for (int i = 0; i < dx.n; ++i) {
                    float* dst =
                        dx.v.data() + (static_cast<size_t>(ci) * dx.n + i) * dx.h * dx.w;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int sy = 2 * oy + ky - 1;
                        if (sy < 0 || sy >= dx.h) continue;
                        const float* row = src + (static_cast<size_t>(i) * oh + oy) * ow;
                        float* drow = dst + static_cast<size_t>(sy) * dx.w;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int sx = 2 * ox + kx - 1;
                            if (sx >= 0 && sx < dx.w) drow[sx] += row[ox];
                        }
                    }
                }
            }
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, int c_in, int c_out) : c_in_(c_in), c_out_(c_out) {
    if (c_in < 1 || c_out < 1) throw std::invalid_argument("Conv2d: bad channel counts");
    weight.name = name + ".weight";
    weight.resize(static_cast<size_t>(c_out) * c_in * 9);
    bias.name = name + ".bias";
    bias.resize(c_out);
}

void Conv2d::init_he(Rng& rng) {
    fill_normal(weight.value, std::sqrt(2.0 / (c_in_ * 9)), rng);
    std::fill(bias.value.begin(), bias.value.end(), 0.0f);
}

BatchTensor Conv2d::forward(const BatchTensor& x, bool keep_for_backward) {
    if (x.c != c_in_) throw std::invalid_argument(weight.name + ": channel mismatch");
    if (x.h < 2 || x.w < 2) throw std::invalid_argument(weight.name + ": input too small");
    const int oh = x.h / 2, ow = x.w / 2;
    std::vector<float> local_cols;
    if (!keep_for_backward) cols_.clear();
    std::vector<float>& cols = keep_for_backward ? cols_ : local_cols;
    im2col_3x3s2p1(x, oh, ow, cols);
    n_ = x.n;
    in_h_ = x.h;
    in_w_ = x.w;

    BatchTensor y(c_out_, x.n, oh, ow);
    const long long ncols = static_cast<long long>(x.n) * oh * ow;
    MapRM out(y.v.data(), c_out_, ncols);
    ConstMapRM W(weight.value.data(), c_out_, c_in_ * 9);
    ConstMapRM C(cols.data(), c_in_ * 9, ncols);
    out.noalias() = W * C;
    add_bias_rows(y.v.data(), bias.value, c_out_, ncols);
    return y;
}

BatchTensor Conv2d::backward(const BatchTensor& dy, bool need_dx) {
    if (cols_.empty()) throw std::logic_error(weight.name + ": backward without cached forward");
    const int oh = in_h_ / 2, ow = in_w_ / 2;
    const long long ncols = static_cast<long long>(n_) * oh * ow;

    ConstMapRM dY(dy.v.data(), c_out_, ncols);
    ConstMapRM C(cols_.data(), c_in_ * 9, ncols);
    MapRM dW(weight.grad.data(), c_out_, c_in_ * 9);
    dW.noalias() += dY * C.transpose();
    // plain loop: Eigen's vectorized sum peels by pointer alignment, which
    // makes the reduction order (and the rounded result) depend on where the
    // batch happened to be allocated
    for (int co = 0; co < c_out_; ++co) {
        float acc = 0.0f;
        const float* row = dy.v.data() + static_cast<size_t>(co) * ncols;
        for (long long i = 0; i < ncols; ++i) acc += row[i];
        bias.grad[co] += acc;
    }

    BatchTensor dx;
    if (need_dx) {
        std::vector<float> dcols(static_cast<size_t>(c_in_) * 9 * ncols);
        MapRM dC(dcols.data(), c_in_ * 9, ncols);
        ConstMapRM W(weight.value.data(), c_out_, c_in_ * 9);
        dC.noalias() = W.transpose() * dY;
        dx = BatchTensor(c_in_, n_, in_h_, in_w_);
        col2im_3x3s2p1_add(dcols, oh, ow, dx);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(std::string name, int c_in, int c_out)
    : c_in_(c_in), c_out_(c_out) {
    if (c_in < 1 || c_out < 1) throw std::invalid_argument("ConvTranspose2d: bad channel counts");
    weight.name = name + ".weight";
    weight.resize(static_cast<size_t>(c_out) * 4 * c_in);
    bias.name = name + ".bias";
    bias.resize(c_out);
}

void ConvTranspose2d::init_he(Rng& rng) {
    fill_normal(weight.value, std::sqrt(2.0 / c_in_), rng);
    std::fill(bias.value.begin(), bias.value.end(), 0.0f);
}

BatchTensor ConvTranspose2d::forward(const BatchTensor& x, bool keep_for_backward) {
    if (x.c != c_in_) throw std::invalid_argument(weight.name + ": channel mismatch");
    const long long ncols = static_cast<long long>(x.n) * x.h * x.w;
    std::vector<float> y(static_cast<size_t>(c_out_) * 4 * ncols);
    {
        MapRM Y(y.data(), c_out_ * 4, ncols);
        ConstMapRM W(weight.value.data(), c_out_ * 4, c_in_);
        ConstMapRM X(x.v.data(), c_in_, ncols);
        Y.noalias() = W * X;
    }
    BatchTensor out(c_out_, x.n, x.h * 2, x.w * 2);
    for (int co = 0; co < c_out_; ++co) {
        const float b = bias.value[co];
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const float* src = y.data() + (static_cast<size_t>(co) * 4 + dy * 2 + dx) * ncols;
                for (int i = 0; i < x.n; ++i) {
                    float* dst = out.v.data() +
                                 (static_cast<size_t>(co) * x.n + i) * out.h * out.w;
                    for (int yy = 0; yy < x.h; ++yy) {
                        const float* srow = src + (static_cast<size_t>(i) * x.h + yy) * x.w;
                        float* drow = dst + static_cast<size_t>(2 * yy + dy) * out.w + dx;
                        for (int xx = 0; xx < x.w; ++xx) drow[2 * xx] = srow[xx] + b;
                    }
                }
            }
    }
    if (keep_for_backward) x_ = x;
    else x_ = BatchTensor();
    return out;
}

BatchTensor ConvTranspose2d::backward(const BatchTensor& dy, bool need_dx) {
    if (x_.empty()) throw std::logic_error(weight.name + ": backward without cached forward");
    const long long ncols = static_cast<long long>(x_.n) * x_.h * x_.w;

    // Gather dy back into the GEMM output layout [c_out*4 x ncols].
    std::vector<float> dYg(static_cast<size_t>(c_out_) * 4 * ncols);
    for (int co = 0; co < c_out_; ++co) {
        double bsum = 0.0;
        for (int ky = 0; ky < 2; ++ky)
            for (int kx = 0; kx < 2; ++kx) {
                float* dst = dYg.data() + (static_cast<size_t>(co) * 4 + ky * 2 + kx) * ncols;
                for (int i = 0; i < x_.n; ++i) {
                    const float* src = dy.v.data() +
                                       (static_cast<size_t>(co) * x_.n + i) * dy.h * dy.w;
                    for (int yy = 0; yy < x_.h; ++yy) {
                        float* drow = dst + (static_cast<size_t>(i) * x_.h + yy) * x_.w;
                        const float* srow = src + static_cast<size_t>(2 * yy + ky) * dy.w + kx;
                        for (int xx = 0; xx < x_.w; ++xx) {
                            drow[xx] = srow[2 * xx];
                            bsum += srow[2 * xx];
                        }
                    }
                }
            }
        bias.grad[co] += static_cast<float>(bsum);
    }

    ConstMapRM dYm(dYg.data(), c_out_ * 4, ncols);
    ConstMapRM X(x_.v.data(), c_in_, ncols);
    MapRM dW(weight.grad.data(), c_out_ * 4, c_in_);
    dW.noalias() += dYm * X.transpose();

    BatchTensor dx;
    if (need_dx) {
        dx = BatchTensor(c_in_, x_.n, x_.h, x_.w);
        MapRM dX(dx.v.data(), c_in_, ncols);
        ConstMapRM W(weight.value.data(), c_out_ * 4, c_in_);
        dX.noalias() = W.transpose() * dYm;
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::string name, int in, int out) : in_(in), out_(out) {
    if (in < 1 || out < 1) throw std::invalid_argument("Dense: bad sizes");
    weight.name = name + ".weight";
    weight.resize(static_cast<size_t>(out) * in);
    bias.name = name + ".bias";
    bias.resize(out);
}

void Dense::init_he(Rng& rng) {
    fill_normal(weight.value, std::sqrt(2.0 / in_), rng);
    std::fill(bias.value.begin(), bias.value.end(), 0.0f);
}

std::vector<float> Dense::forward(const std::vector<float>& x, int n, bool keep_for_backward) {
    if (x.size() != static_cast<size_t>(in_) * n)
        throw std::invalid_argument(weight.name + ": input size mismatch");
    std::vector<float> y(static_cast<size_t>(out_) * n);
    MapRM Y(y.data(), out_, n);
    ConstMapRM W(weight.value.data(), out_, in_);
    ConstMapRM X(x.data(), in_, n);
    Y.noalias() = W * X;
    add_bias_rows(y.data(), bias.value, out_, n);
    if (keep_for_backward) x_ = x;
    else x_.clear();
    return y;
}

std::vector<float> Dense::backward(const std::vector<float>& dy, int n, bool need_dx) {
    if (x_.empty()) throw std::logic_error(weight.name + ": backward without cached forward");
    ConstMapRM dY(dy.data(), out_, n);
    ConstMapRM X(x_.data(), in_, n);
    MapRM dW(weight.grad.data(), out_, in_);
    dW.noalias() += dY * X.transpose();
    // fixed-order sum: see the note in Conv2d::backward
    for (int r = 0; r < out_; ++r) {
        float acc = 0.0f;
        const float* row = dy.data() + static_cast<size_t>(r) * n;
        for (int i = 0; i < n; ++i) acc += row[i];
        bias.grad[r] += acc;
    }

    std::vector<float> dx;
    if (need_dx) {
        dx.resize(static_cast<size_t>(in_) * n);
        MapRM dX(dx.data(), in_, n);
        ConstMapRM W(weight.value.data(), out_, in_);
        dX.noalias() = W.transpose() * dY;
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Activations

void relu_inplace(std::span<float> v) {
    for (auto& x : v) x = x > 0.0f ? x : 0.0f;
}

void relu_backward_inplace(std::span<const float> y, std::span<float> dy) {
    for (size_t i = 0; i < dy.size(); ++i)
        if (y[i] <= 0.0f) dy[i] = 0.0f;
}

void sigmoid_inplace(std::span<float> v) {
    for (auto& x : v) x = 1.0f / (1.0f + std::exp(-x));
}

void sigmoid_backward_inplace(std::span<const float> y, std::span<float> dy) {
    for (size_t i = 0; i < dy.size(); ++i) dy[i] *= y[i] * (1.0f - y[i]);
}

} // namespace camkit
