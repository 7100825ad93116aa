#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "milpath/image.hpp"

namespace milpath {

using Histogram256 = std::array<std::uint64_t, 256>;

/// Per-pixel tissue flags (true = tissue), same dimensions as the source.
struct TissueMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;
    /// Saturation level the mask was cut at (tissue iff level > threshold).
    int threshold = 0;

    bool at(int x, int y) const noexcept { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
};

struct PatchRecord {
    int row = 0;
    int col = 0;
    int origin_x = 0;
    int origin_y = 0;
    int size = 0;
    double coverage = 0.0;
    RasterImage pixels;
};

/// Otsu's method: the level t maximizing between-class variance of
/// {<= t} vs {> t}. Ties go to the smallest level, so a histogram with a
/// single occupied bin returns 0. Throws DataError("no pixels") when empty.
int otsu_threshold(const Histogram256& histogram);

/// Histogram of quantized HSV saturation (see saturation_level).
Histogram256 saturation_histogram(const RasterImage& image);

/// Otsu on the saturation channel; tissue is the strictly-above side.
/// A constant image cuts at 0, so it is all tissue unless fully unsaturated.
TissueMask segment_tissue(const RasterImage& image);

/// Tissue pixels inside [x0, x0+size) x [y0, y0+size).
std::uint64_t count_tissue(const TissueMask& mask, int x0, int y0, int size);

struct TilingParams {
    int patch_size = 256;
    double min_coverage = 0.5;
};

/// Non-overlapping grid of floor(w/p) x floor(h/p) cells, border strips
/// dropped, row-major order. A cell is kept iff coverage >= min_coverage.
std::vector<PatchRecord> extract_patches(const RasterImage& image, const TissueMask& mask,
                                         const TilingParams& params = {});

/// Copies the p x p block at (x0, y0).
RasterImage crop(const RasterImage& image, int x0, int y0, int size);

struct PatchManifestEntry {
    int row = 0;
    int col = 0;
    int origin_x = 0;
    int origin_y = 0;
    double coverage = 0.0;
    friend bool operator==(const PatchManifestEntry&, const PatchManifestEntry&) = default;
};

struct PatchManifest {
    std::string slide_id;
    std::string source;  // image path as given on the command line
    int width = 0;
    int height = 0;
    int patch_size = 256;
    double min_coverage = 0.5;
    std::string magnification = "20x";
    int threshold = 0;
    std::vector<PatchManifestEntry> patches;
    friend bool operator==(const PatchManifest&, const PatchManifest&) = default;
};

PatchManifest make_patch_manifest(std::string slide_id, std::string source, const RasterImage& image,
                                  const TissueMask& mask, const TilingParams& params,
                                  std::string magnification, const std::vector<PatchRecord>& patches);

std::string to_json(const PatchManifest& manifest);
PatchManifest patch_manifest_from_json(const std::string& text);
void save_patch_manifest(const std::filesystem::path& path, const PatchManifest& manifest);
PatchManifest load_patch_manifest(const std::filesystem::path& path);

}  // namespace milpath
