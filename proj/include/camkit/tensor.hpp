#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "camkit/grid.hpp"

namespace camkit {

/// Batched activation tensor in channel-major (C, N, H, W) order. Viewed as
/// a row-major matrix it is [C x N*H*W], which is exactly the operand shape
/// the conv and transposed-conv GEMMs consume, so no transposes are needed
/// between layers.
struct BatchTensor {
    int c = 0, n = 0, h = 0, w = 0;
    std::vector<float> v;

    BatchTensor() = default;
    BatchTensor(int c_, int n_, int h_, int w_, float fill = 0.0f)
        : c(c_), n(n_), h(h_), w(w_),
          v(static_cast<size_t>(c_) * n_ * h_ * w_, fill) {
        if (c_ < 0 || n_ < 0 || h_ < 0 || w_ < 0)
            throw std::invalid_argument("BatchTensor: negative dimensions");
    }

    float& at(int ch, int img, int y, int x) {
        return v[((static_cast<size_t>(ch) * n + img) * h + y) * w + x];
    }
    const float& at(int ch, int img, int y, int x) const {
        return v[((static_cast<size_t>(ch) * n + img) * h + y) * w + x];
    }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
    int cols() const { return n * h * w; } // matrix-view column count

    bool same_shape(const BatchTensor& o) const {
        return c == o.c && n == o.n && h == o.h && w == o.w;
    }
};

/// Packs same-sized grayscale images into a 1-channel batch.
BatchTensor pack_batch(const std::vector<const Image*>& images, int expected_size);
BatchTensor pack_batch(const std::vector<Image>& images, int expected_size);

/// Extracts one image plane from channel `ch` of the batch.
Image unpack_plane(const BatchTensor& t, int ch, int img);

} // namespace camkit
