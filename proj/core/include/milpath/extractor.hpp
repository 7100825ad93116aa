#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "milpath/image.hpp"
#include "milpath/tiling.hpp"

namespace milpath {

enum class ExtractorKind { synthetic, imported };

std::string to_string(ExtractorKind kind);
/// Throws ConfigError for anything but "synthetic" / "imported".
ExtractorKind parse_extractor_kind(const std::string& text);

struct ExtractorSpec {
    std::string name;
    int dim = 512;
    ExtractorKind kind = ExtractorKind::synthetic;
    std::uint64_t seed = 0;
};

/// Throws ConfigError on dim < 1, an empty name, or duplicate names.
void validate_extractors(const std::vector<ExtractorSpec>& specs);

/// Desk-scale stand-in for a frozen patch encoder.
///
/// A patch is mean-pooled to an 8x8x3 grid (cell y covers rows
/// [floor(y*p/8), floor((y+1)*p/8)), at least one row), scaled to [0,1] and
/// multiplied by a dim x 192 projection whose entries, in row-major order,
/// are (2u - 1)/sqrt(192) with u the successive SplitMix64(seed) uniforms.
/// Only IEEE-exact operations are used, so outputs are bit-identical across
/// conforming platforms.
class SyntheticExtractor {
public:
    static constexpr int kGrid = 8;
    static constexpr int kPooledDim = kGrid * kGrid * 3;

    explicit SyntheticExtractor(const ExtractorSpec& spec);

    Eigen::VectorXd operator()(const RasterImage& patch) const;

    const ExtractorSpec& spec() const noexcept { return spec_; }

private:
    ExtractorSpec spec_;
    std::vector<double> projection_;  // dim x 192, row-major
};

/// 8x8x3 mean-pooled block in [0,1], (cell row, cell col, channel) order.
std::vector<double> pool_patch(const RasterImage& patch);

/// One-shot convenience; prefer SyntheticExtractor when embedding many patches.
Eigen::VectorXd synthetic_extract(const PatchRecord& patch, const ExtractorSpec& spec);

}  // namespace milpath
