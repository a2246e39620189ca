#include "camkit/grid.hpp"

#include <algorithm>
#include <cmath>

namespace camkit {

ComponentSet connected_components(const Mask& m) {
    ComponentSet out;
    out.labels = Grid<int>(m.h, m.w, 0);
    std::vector<int> stack;
    int next_label = 0;
    for (int y = 0; y < m.h; ++y) {
        for (int x = 0; x < m.w; ++x) {
            if (!m.at(y, x) || out.labels.at(y, x) != 0) continue;
            ++next_label;
            Box box{y, x, y, x};
            long long area = 0;
            stack.push_back(y * m.w + x);
            out.labels.at(y, x) = next_label;
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                const int py = p / m.w, px = p % m.w;
                ++area;
                box.y0 = std::min(box.y0, py);
                box.y1 = std::max(box.y1, py);
                box.x0 = std::min(box.x0, px);
                box.x1 = std::max(box.x1, px);
                const int dy[4] = {-1, 1, 0, 0};
                const int dx[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const int ny = py + dy[k], nx = px + dx[k];
                    if (ny < 0 || ny >= m.h || nx < 0 || nx >= m.w) continue;
                    if (!m.at(ny, nx) || out.labels.at(ny, nx) != 0) continue;
                    out.labels.at(ny, nx) = next_label;
                    stack.push_back(ny * m.w + nx);
                }
            }
            out.boxes.push_back(box);
            out.areas.push_back(area);
        }
    }
    return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_bilinear: empty target");
    if (img.h == out_h && img.w == out_w) return img;
    Image out(out_h, out_w);
    const double sy = static_cast<double>(img.h) / out_h;
    const double sx = static_cast<double>(img.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        int y1 = y0 + 1;
        y0 = std::clamp(y0, 0, img.h - 1);
        y1 = std::clamp(y1, 0, img.h - 1);
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            int x1 = x0 + 1;
            x0 = std::clamp(x0, 0, img.w - 1);
            x1 = std::clamp(x1, 0, img.w - 1);
            const double top = img.at(y0, x0) * (1.0 - wx) + img.at(y0, x1) * wx;
            const double bot = img.at(y1, x0) * (1.0 - wx) + img.at(y1, x1) * wx;
            out.at(y, x) = static_cast<float>(top * (1.0 - wy) + bot * wy);
        }
    }
    return out;
}

Mask resize_nearest(const Mask& m, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_nearest: empty target");
    if (m.h == out_h && m.w == out_w) return m;
    Mask out(out_h, out_w);
    const double sy = static_cast<double>(m.h) / out_h;
    const double sx = static_cast<double>(m.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const int yy = std::min(m.h - 1, static_cast<int>((y + 0.5) * sy));
        for (int x = 0; x < out_w; ++x) {
            const int xx = std::min(m.w - 1, static_cast<int>((x + 0.5) * sx));
            out.at(y, x) = m.at(yy, xx);
        }
    }
    return out;
}

long long mask_area(const Mask& m) {
    long long a = 0;
    for (auto p : m.v) a += (p != 0);
    return a;
}

} // namespace camkit
