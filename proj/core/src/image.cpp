#include "milpath/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "milpath/error.hpp"

namespace milpath {

RasterImage::RasterImage(int width, int height)
    : RasterImage(width, height,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                            static_cast<std::size_t>(std::max(height, 0)) * 3)) {}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) {
        throw ShapeError("raster dimensions must be positive, got " + std::to_string(width) + "x" +
                         std::to_string(height));
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * height * 3) {
        throw ShapeError("raster buffer holds " + std::to_string(pixels_.size()) + " bytes, expected " +
                         std::to_string(static_cast<std::size_t>(width) * height * 3));
    }
}

void RasterImage::fill_rect(int x0, int y0, int w, int h, Rgb c) noexcept {
    const int x1 = std::min(width_, x0 + w);
    const int y1 = std::min(height_, y0 + h);
    for (int y = std::max(0, y0); y < y1; ++y) {
        for (int x = std::max(0, x0); x < x1; ++x) {
            set(x, y, c);
        }
    }
}

Hsv rgb_to_hsv(Rgb c) noexcept {
    const int mx = std::max({c.r, c.g, c.b});
    const int mn = std::min({c.r, c.g, c.b});
    const double delta = mx - mn;
    Hsv out;
    out.v = mx / 255.0;
    out.s = mx == 0 ? 0.0 : delta / mx;
    if (delta == 0) {
        out.h = 0.0;
        return out;
    }
    double h = 0.0;
    if (mx == c.r) {
        h = (static_cast<int>(c.g) - static_cast<int>(c.b)) / delta;
    } else if (mx == c.g) {
        h = (static_cast<int>(c.b) - static_cast<int>(c.r)) / delta + 2.0;
    } else {
        h = (static_cast<int>(c.r) - static_cast<int>(c.g)) / delta + 4.0;
    }
    h *= 60.0;
    if (h < 0.0) {
        h += 360.0;
    }
    out.h = h >= 360.0 ? h - 360.0 : h;
    return out;
}

HsvImage rgb_to_hsv(const RasterImage& image) {
    HsvImage out{image.width(), image.height(), {}};
    out.pixels.reserve(image.pixel_count());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            out.pixels.push_back(rgb_to_hsv(image.at(x, y)));
        }
    }
    return out;
}

Rgb hsv_to_rgb(const Hsv& c) noexcept {
    const double v = std::clamp(c.v, 0.0, 1.0);
    const double s = std::clamp(c.s, 0.0, 1.0);
    double h = std::fmod(c.h, 360.0);
    if (h < 0.0) {
        h += 360.0;
    }
    const double chroma = v * s;
    const double hp = h / 60.0;
    const double x = chroma * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp) % 6) {
        case 0: r = chroma; g = x; break;
        case 1: r = x; g = chroma; break;
        case 2: g = chroma; b = x; break;
        case 3: g = x; b = chroma; break;
        case 4: r = x; b = chroma; break;
        default: r = chroma; b = x; break;
    }
    const double m = v - chroma;
    auto to8 = [m](double t) {
        return static_cast<std::uint8_t>(std::clamp(std::lround((t + m) * 255.0), 0L, 255L));
    };
    return {to8(r), to8(g), to8(b)};
}

std::uint8_t saturation_level(Rgb c) noexcept {
    const unsigned mx = std::max({c.r, c.g, c.b});
    const unsigned mn = std::min({c.r, c.g, c.b});
    if (mx == 0) {
        return 0;
    }
    // round(255 * (mx - mn) / mx), half up
    return static_cast<std::uint8_t>((2u * 255u * (mx - mn) + mx) / (2u * mx));
}

}  // namespace milpath
