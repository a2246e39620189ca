#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camkit/grid.hpp"

namespace camkit {

/// Grayscale PNG, 8- or 16-bit, normalized to [0,1] on load.
Image load_image_png(const std::string& path);
/// Saved as 16-bit grayscale.
void save_image_png(const Image& img, const std::string& path);

/// Mask PNG: any nonzero pixel is 1.
Mask load_mask_png(const std::string& path);
void save_mask_png(const Mask& m, const std::string& path);

/// 8-bit RGB image for overlays.
struct ColorImage {
    int h = 0, w = 0;
    std::vector<std::uint8_t> rgb; // packed r,g,b per pixel
};
void save_color_png(const ColorImage& img, const std::string& path);

} // namespace camkit
