#pragma once

#include <filesystem>

#include "milpath/image.hpp"

namespace milpath {

enum class TiffCompression { none, deflate };

/// Reads an 8-bit RGB raster from PNG or TIFF, detected by file signature.
///
/// TIFF support covers single-image, chunky (interleaved) strips with either
/// no compression or Deflate (codes 8 and 32946), optional horizontal
/// predictor, 3 or 4 samples per pixel (alpha is dropped). Anything else
/// raises FormatError.
RasterImage read_image(const std::filesystem::path& path);

RasterImage read_png(const std::filesystem::path& path);
RasterImage read_tiff(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RasterImage& image);
void write_tiff(const std::filesystem::path& path, const RasterImage& image,
                TiffCompression compression = TiffCompression::none);

}  // namespace milpath
