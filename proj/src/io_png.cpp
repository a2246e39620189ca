#include "camkit/io_png.hpp"

#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace camkit {

Image load_image_png(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("cannot read image: " + path);
    if (m.channels() != 1)
        throw std::runtime_error("expected grayscale image: " + path);
    Image out(m.rows, m.cols);
    if (m.depth() == CV_8U) {
        for (int y = 0; y < m.rows; ++y)
            for (int x = 0; x < m.cols; ++x)
                out.at(y, x) = m.at<std::uint8_t>(y, x) / 255.0f;
    } else if (m.depth() == CV_16U) {
        for (int y = 0; y < m.rows; ++y)
            for (int x = 0; x < m.cols; ++x)
                out.at(y, x) = m.at<std::uint16_t>(y, x) / 65535.0f;
    } else {
        throw std::runtime_error("unsupported PNG depth (want 8- or 16-bit): " + path);
    }
    return out;
}

void save_image_png(const Image& img, const std::string& path) {
    cv::Mat m(img.h, img.w, CV_16UC1);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            float v = img.at(y, x);
            v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
            m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(v * 65535.0f + 0.5f);
        }
    if (!cv::imwrite(path, m)) throw std::runtime_error("cannot write image: " + path);
}

Mask load_mask_png(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("cannot read mask: " + path);
    if (m.channels() != 1) throw std::runtime_error("expected grayscale mask: " + path);
    Mask out(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            const double v = m.depth() == CV_16U ? m.at<std::uint16_t>(y, x)
                                                 : static_cast<double>(m.at<std::uint8_t>(y, x));
            out.at(y, x) = v != 0.0 ? 1 : 0;
        }
    return out;
}

void save_mask_png(const Mask& m, const std::string& path) {
    cv::Mat img(m.h, m.w, CV_8UC1);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x)
            img.at<std::uint8_t>(y, x) = m.at(y, x) ? 255 : 0;
    if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write mask: " + path);
}

void save_color_png(const ColorImage& img, const std::string& path) {
    cv::Mat m(img.h, img.w, CV_8UC3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const size_t i = (static_cast<size_t>(y) * img.w + x) * 3;
            // OpenCV stores BGR
            m.at<cv::Vec3b>(y, x) = {img.rgb[i + 2], img.rgb[i + 1], img.rgb[i]};
        }
    if (!cv::imwrite(path, m)) throw std::runtime_error("cannot write overlay: " + path);
}

} // namespace camkit
