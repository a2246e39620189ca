#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace camkit {

/// Dense row-major 2-D array. Image = Grid<float> with values in [0,1],
/// Mask = Grid<uint8_t> with values in {0,1}.
template <typename T>
struct Grid {
    int h = 0;
    int w = 0;
    std::vector<T> v;

    Grid() = default;
    Grid(int h_, int w_, T fill = T{}) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {
        if (h_ < 0 || w_ < 0) throw std::invalid_argument("Grid: negative dimensions");
    }

    T& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    const T& at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }

    bool same_shape(const Grid& o) const { return h == o.h && w == o.w; }
    bool operator==(const Grid& o) const { return h == o.h && w == o.w && v == o.v; }
};

using Image = Grid<float>;
using Mask = Grid<std::uint8_t>;

/// Tight axis-aligned box, inclusive pixel bounds.
struct Box {
    int y0 = 0, x0 = 0, y1 = -1, x1 = -1;
    int height() const { return y1 - y0 + 1; }
    int width() const { return x1 - x0 + 1; }
    long long area() const { return static_cast<long long>(height()) * width(); }
    bool operator==(const Box& o) const {
        return y0 == o.y0 && x0 == o.x0 && y1 == o.y1 && x1 == o.x1;
    }
};

struct ComponentSet {
    Grid<int> labels;        // 0 = background, components numbered from 1
    std::vector<Box> boxes;  // boxes[i] belongs to label i+1
    std::vector<long long> areas;
};

/// 4-connected component labelling of the nonzero pixels.
ComponentSet connected_components(const Mask& m);

/// Bilinear resample to (out_h, out_w), half-pixel-center convention.
/// Identity when the shape is unchanged.
Image resize_bilinear(const Image& img, int out_h, int out_w);

/// Nearest-neighbour resample; keeps binary masks binary.
Mask resize_nearest(const Mask& m, int out_h, int out_w);

long long mask_area(const Mask& m);

} // namespace camkit
