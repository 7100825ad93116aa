#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace milpath {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Hue in degrees [0, 360), saturation and value in [0, 1].
struct Hsv {
    double h = 0.0;
    double s = 0.0;
    double v = 0.0;
};

/// 8-bit RGB raster, row-major, channels interleaved.
class RasterImage {
public:
    RasterImage() = default;
    /// Black image. Throws ShapeError on a zero dimension.
    RasterImage(int width, int height);
    /// Throws ShapeError unless pixels.size() == width * height * 3.
    RasterImage(int width, int height, std::vector<std::uint8_t> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const noexcept { return pixels_.empty(); }

    Rgb at(int x, int y) const noexcept {
        const auto* p = pixels_.data() + index(x, y);
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, Rgb c) noexcept {
        auto* p = pixels_.data() + index(x, y);
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }
    /// Fills the axis-aligned rectangle [x0, x0+w) x [y0, y0+h), clipped to the image.
    void fill_rect(int x0, int y0, int w, int h, Rgb c) noexcept;

    std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
    std::span<std::uint8_t> pixels() noexcept { return pixels_; }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * 3;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

struct HsvImage {
    int width = 0;
    int height = 0;
    std::vector<Hsv> pixels;  // row-major
};

/// Hexcone conversion. Achromatic pixels get hue 0.
Hsv rgb_to_hsv(Rgb c) noexcept;
HsvImage rgb_to_hsv(const RasterImage& image);

/// Inverse hexcone conversion, rounded to the nearest 8-bit level.
Rgb hsv_to_rgb(const Hsv& c) noexcept;

/// Saturation quantized to [0, 255] with round-half-up, computed in integers
/// from the RGB triple so it is exact.
std::uint8_t saturation_level(Rgb c) noexcept;

}  // namespace milpath
