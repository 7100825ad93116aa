#include "milpath/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "milpath/error.hpp"
#include "milpath/rng.hpp"

namespace milpath {

std::string to_string(ExtractorKind kind) {
    return kind == ExtractorKind::synthetic ? "synthetic" : "imported";
}

ExtractorKind parse_extractor_kind(const std::string& text) {
    if (text == "synthetic") {
        return ExtractorKind::synthetic;
    }
    if (text == "imported") {
        return ExtractorKind::imported;
    }
    throw ConfigError("unknown extractor kind '" + text + "' (expected synthetic or imported)");
}

void validate_extractors(const std::vector<ExtractorSpec>& specs) {
    std::set<std::string> seen;
    for (const auto& s : specs) {
        if (s.name.empty()) {
            throw ConfigError("extractor name must not be empty");
        }
        if (s.dim < 1) {
            throw ConfigError("extractor '" + s.name + "' has dim " + std::to_string(s.dim) + " < 1");
        }
        if (!seen.insert(s.name).second) {
            throw ConfigError("duplicate extractor name '" + s.name + "'");
        }
    }
}

std::vector<double> pool_patch(const RasterImage& patch) {
    constexpr int g = SyntheticExtractor::kGrid;
    auto bounds = [](int cell, int extent) {
        const int lo = std::min(cell * extent / g, extent - 1);
        const int hi = std::max((cell + 1) * extent / g, lo + 1);
        return std::pair{lo, hi};
    };
    std::vector<double> pooled(SyntheticExtractor::kPooledDim, 0.0);
    for (int cy = 0; cy < g; ++cy) {
        const auto [y0, y1] = bounds(cy, patch.height());
        for (int cx = 0; cx < g; ++cx) {
            const auto [x0, x1] = bounds(cx, patch.width());
            std::uint64_t sum[3] = {0, 0, 0};
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const Rgb c = patch.at(x, y);
                    sum[0] += c.r;
                    sum[1] += c.g;
                    sum[2] += c.b;
                }
            }
            const double denom = 255.0 * static_cast<double>((y1 - y0) * (x1 - x0));
            for (int ch = 0; ch < 3; ++ch) {
                pooled[(cy * g + cx) * 3 + ch] = static_cast<double>(sum[ch]) / denom;
            }
        }
    }
    return pooled;
}

SyntheticExtractor::SyntheticExtractor(const ExtractorSpec& spec) : spec_(spec) {
    if (spec.kind != ExtractorKind::synthetic) {
        throw ConfigError("extractor '" + spec.name + "' is not synthetic");
    }
    validate_extractors({spec});
    SplitMix64 rng(spec.seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kPooledDim));
    projection_.resize(static_cast<std::size_t>(spec.dim) * kPooledDim);
    for (auto& v : projection_) {
        v = (2.0 * rng.uniform() - 1.0) * scale;
    }
}

Eigen::VectorXd SyntheticExtractor::operator()(const RasterImage& patch) const {
    const auto pooled = pool_patch(patch);
    Eigen::VectorXd out(spec_.dim);
    for (int d = 0; d < spec_.dim; ++d) {
        const double* row = projection_.data() + static_cast<std::size_t>(d) * kPooledDim;
        double acc = 0.0;
        for (int j = 0; j < kPooledDim; ++j) {
            acc += row[j] * pooled[j];
        }
        out[d] = acc;
    }
    return out;
}

Eigen::VectorXd synthetic_extract(const PatchRecord& patch, const ExtractorSpec& spec) {
    return SyntheticExtractor(spec)(patch.pixels);
}

}  // namespace milpath
