#include "milpath/tiling.hpp"

#include "milpath/error.hpp"

namespace milpath {

int otsu_threshold(const Histogram256& histogram) {
    std::uint64_t total = 0;
    double total_sum = 0.0;
    for (int level = 0; level < 256; ++level) {
        total += histogram[level];
        total_sum += static_cast<double>(level) * static_cast<double>(histogram[level]);
    }
    if (total == 0) {
        throw DataError("no pixels");
    }

    const double n = static_cast<double>(total);
    std::uint64_t below = 0;
    double below_sum = 0.0;
    int best_level = 0;
    double best_variance = -1.0;
    for (int t = 0; t < 256; ++t) {
        below += histogram[t];
        below_sum += static_cast<double>(t) * static_cast<double>(histogram[t]);
        const std::uint64_t above = total - below;
        double variance = 0.0;
        if (below != 0 && above != 0) {
            const double w0 = static_cast<double>(below) / n;
            const double w1 = static_cast<double>(above) / n;
            const double mu0 = below_sum / static_cast<double>(below);
            const double mu1 = (total_sum - below_sum) / static_cast<double>(above);
            variance = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        }
        if (variance > best_variance) {
            best_variance = variance;
            best_level = t;
        }
    }
    return best_level;
}

Histogram256 saturation_histogram(const RasterImage& image) {
    Histogram256 hist{};
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            ++hist[saturation_level(image.at(x, y))];
        }
    }
    return hist;
}

TissueMask segment_tissue(const RasterImage& image) {
    TissueMask mask{image.width(), image.height(), {}, 0};
    mask.threshold = otsu_threshold(saturation_histogram(image));
    mask.bits.resize(image.pixel_count());
    std::size_t i = 0;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            mask.bits[i++] = saturation_level(image.at(x, y)) > mask.threshold ? 1 : 0;
        }
    }
    return mask;
}

std::uint64_t count_tissue(const TissueMask& mask, int x0, int y0, int size) {
    std::uint64_t count = 0;
    for (int y = y0; y < y0 + size; ++y) {
        const auto* row = mask.bits.data() + static_cast<std::size_t>(y) * mask.width;
        for (int x = x0; x < x0 + size; ++x) {
            count += row[x];
        }
    }
    return count;
}

RasterImage crop(const RasterImage& image, int x0, int y0, int size) {
    RasterImage out(size, size);
    const auto src = image.pixels();
    auto dst = out.pixels();
    const std::size_t row_bytes = static_cast<std::size_t>(size) * 3;
    for (int y = 0; y < size; ++y) {
        const auto from = (static_cast<std::size_t>(y0 + y) * image.width() + x0) * 3;
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), row_bytes,
                    dst.begin() + static_cast<std::ptrdiff_t>(y * row_bytes));
    }
    return out;
}

std::vector<PatchRecord> extract_patches(const RasterImage& image, const TissueMask& mask,
                                         const TilingParams& params) {
    if (mask.width != image.width() || mask.height != image.height() ||
        mask.bits.size() != image.pixel_count()) {
        throw ShapeError("tissue mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                         " but image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()));
    }
    if (params.patch_size < 1) {
        throw ConfigError("patch size must be >= 1");
    }
    const int p = params.patch_size;
    const int rows = image.height() / p;
    const int cols = image.width() / p;
    const double area = static_cast<double>(p) * static_cast<double>(p);

    std::vector<PatchRecord> patches;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double coverage = static_cast<double>(count_tissue(mask, c * p, r * p, p)) / area;
            if (coverage >= params.min_coverage) {
                patches.push_back({r, c, c * p, r * p, p, coverage, crop(image, c * p, r * p, p)});
            }
        }
    }
    return patches;
}

PatchManifest make_patch_manifest(std::string slide_id, std::string source, const RasterImage& image,
                                  const TissueMask& mask, const TilingParams& params,
                                  std::string magnification, const std::vector<PatchRecord>& patches) {
    PatchManifest m;
    m.slide_id = std::move(slide_id);
    m.source = std::move(source);
    m.width = image.width();
    m.height = image.height();
    m.patch_size = params.patch_size;
    m.min_coverage = params.min_coverage;
    m.magnification = std::move(magnification);
    m.threshold = mask.threshold;
    m.patches.reserve(patches.size());
    for (const auto& p : patches) {
        m.patches.push_back({p.row, p.col, p.origin_x, p.origin_y, p.coverage});
    }
    return m;
}

}  // namespace milpath
