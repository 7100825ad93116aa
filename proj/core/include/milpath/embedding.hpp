#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "milpath/gating.hpp"

namespace milpath {

struct PatchKey {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    friend bool operator==(const PatchKey&, const PatchKey&) = default;
};

struct ExtractorMatrix {
    std::string name;
    Eigen::MatrixXd values;  // K x dim
};

/// Per-extractor embeddings of one slide. Every matrix has one row per
/// patch key, in key order.
struct SlideEmbeddingSet {
    std::string slide_id;
    std::vector<PatchKey> patch_keys;
    std::vector<ExtractorMatrix> extractors;

    std::size_t patch_count() const noexcept { return patch_keys.size(); }
    /// Throws ConfigError when absent.
    const ExtractorMatrix& extractor(const std::string& name) const;
};

/// Fused per-patch features, K x M, with the column block layout.
struct FusedBagFeatures {
    Eigen::MatrixXd values;
    std::vector<std::string> names;
    std::vector<int> dims;
};

// ---- WEMB binary format ---------------------------------------------------
//
// Little-endian: "WEMB" | u16 version (1) | u16 name length | UTF-8 name |
// u32 dim | u32 count | count x (u32 row | u32 col | dim x f32).

inline constexpr std::uint16_t kWembVersion = 1;

/// Values are narrowed to float32. Throws DataError on non-finite entries.
std::vector<std::uint8_t> encode_wemb(const std::string& extractor, const std::vector<PatchKey>& keys,
                                      const Eigen::MatrixXd& values);
/// FormatError on bad magic or version, LengthError on truncation or
/// trailing bytes, DataError on NaN/Inf.
SlideEmbeddingSet decode_wemb(const std::vector<std::uint8_t>& bytes);

void save_wemb(const std::filesystem::path& path, const std::string& extractor,
               const std::vector<PatchKey>& keys, const Eigen::MatrixXd& values);
/// Single-extractor set; slide_id is left empty (it lives in the sidecar).
SlideEmbeddingSet load_embeddings(const std::filesystem::path& path);

/// Writes `<dir>/<slide>_<extractor>.wemb` per extractor plus the sidecar
/// `<dir>/<slide>.json` (slide_id, count, extractor files, dims, CRC-32).
/// Returns the sidecar path.
std::filesystem::path save_slide_embeddings(const std::filesystem::path& dir, const SlideEmbeddingSet& set);

/// Loads every extractor listed in a sidecar, verifying checksums, dims and
/// that all files share the same patch keys.
SlideEmbeddingSet load_slide_embeddings(const std::filesystem::path& sidecar);

std::uint32_t crc32_of(const std::vector<std::uint8_t>& bytes);

// ---- Fusion -----------------------------------------------------------------

/// Row-wise concatenation [h^1 | ... | h^n] in the given order.
FusedBagFeatures concat_fuse(const SlideEmbeddingSet& set, const std::vector<std::string>& order);

/// Learned patch-level attention across extractors: each extractor block is
/// projected to a common width D, scored with the gated form
/// w'(tanh(V p) .* sigm(U p)), softmax-normalized across the n extractors
/// and combined convexly.
struct PatchFusionParams {
    std::vector<Eigen::MatrixXd> projections;  // D x dim_j
    Eigen::MatrixXd V;                         // L_f x D
    Eigen::MatrixXd U;                         // L_f x D
    Eigen::VectorXd w;                         // L_f

    int output_dim() const { return static_cast<int>(V.cols()); }
    int input_dim() const;
    std::vector<int> block_dims() const;
};

struct FusionTrace {
    std::vector<Eigen::MatrixXd> projected;  // n x (K x D)
    std::vector<GateCache> gates;            // n
    Eigen::MatrixXd weights;                 // K x n, rows sum to 1
    Eigen::MatrixXd fused;                   // K x D
};

/// `concatenated` holds the extractor blocks side by side (K x sum dim_j).
FusionTrace fusion_forward(const PatchFusionParams& params, const Eigen::MatrixXd& concatenated);

/// Accumulates parameter gradients into `grads` (same shapes as params).
void fusion_backward(const PatchFusionParams& params, const Eigen::MatrixXd& concatenated,
                     const FusionTrace& trace, const Eigen::MatrixXd& d_fused, PatchFusionParams& grads);

FusedBagFeatures attention_fuse(const SlideEmbeddingSet& set, const std::vector<std::string>& order,
                                const PatchFusionParams& params);

}  // namespace milpath
