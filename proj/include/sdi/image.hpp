#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdi::data {

struct ImageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// 8-bit RGB image, separate planes.
struct RgbImage {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> r, g, b;

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h)
        : width(w), height(h), r(w * h, 0), g(w * h, 0), b(w * h, 0) {}

    std::size_t idx(std::size_t y, std::size_t x) const { return y * width + x; }

    bool operator==(const RgbImage& o) const {
        return width == o.width && height == o.height && r == o.r && g == o.g && b == o.b;
    }
};

/// Dispatches on the file's magic bytes (PNG or binary PPM "P6").
RgbImage load_image(const std::string& path);
void save_image(const RgbImage& img, const std::string& path);  // by extension

RgbImage load_ppm(const std::string& path);
void save_ppm(const RgbImage& img, const std::string& path);
RgbImage load_png(const std::string& path);
void save_png(const RgbImage& img, const std::string& path);

/// 8-bit grayscale PGM (P5), used for activation map dumps.
void save_pgm(const std::vector<std::uint8_t>& pixels, std::size_t width,
              std::size_t height, const std::string& path);

}  // namespace sdi::data
