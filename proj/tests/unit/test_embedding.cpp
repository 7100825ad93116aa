#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "milpath/embedding.hpp"
#include "milpath/error.hpp"
#include "milpath/extractor.hpp"
#include "milpath/rng.hpp"

using namespace milpath;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const auto dir = fs::temp_directory_path() / "milpath_embedding";
    fs::create_directories(dir);
    return dir;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<float>(rng.normal());
    }
    return m;
}

SlideEmbeddingSet two_extractor_set(Eigen::Index k, int d1, int d2, std::uint64_t seed) {
    SlideEmbeddingSet set;
    set.slide_id = "S1";
    for (Eigen::Index i = 0; i < k; ++i) {
        set.patch_keys.push_back({static_cast<std::uint32_t>(i), 3});
    }
    set.extractors.push_back({"a", random_matrix(k, d1, seed)});
    set.extractors.push_back({"b", random_matrix(k, d2, seed + 1)});
    return set;
}

PatchFusionParams random_fusion(const std::vector<int>& dims, int d, int l, std::uint64_t seed) {
    PatchFusionParams f;
    for (std::size_t j = 0; j < dims.size(); ++j) {
        f.projections.push_back(random_matrix(d, dims[j], seed + j) * 0.3);
    }
    f.V = random_matrix(l, d, seed + 10) * 0.3;
    f.U = random_matrix(l, d, seed + 11) * 0.3;
    f.w = random_matrix(l, 1, seed + 12).col(0);
    return f;
}

}  // namespace

TEST_SUITE("embedding") {

TEST_CASE("SplitMix64 reference outputs") {
    SplitMix64 rng(0);
    CHECK(rng.next() == 0xe220a8397b1dcdafULL);
    CHECK(rng.next() == 0x6e789e6aa1b965f4ULL);
    CHECK(rng.next() == 0x06c45d188009454fULL);
}

TEST_CASE("synthetic extractor reproduces the portable reference bit for bit") {
    RasterImage patch(16, 16);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            patch.set(x, y, Rgb{static_cast<std::uint8_t>((x * 16) % 256), static_cast<std::uint8_t>((y * 16) % 256),
                                static_cast<std::uint8_t>(((x + y) * 8) % 256)});
        }
    }
    const ExtractorSpec spec{"ref", 5, ExtractorKind::synthetic, 42};
    const auto e = SyntheticExtractor(spec)(patch);
    // Computed by an independent scalar re-implementation of the documented
    // procedure (pooling grid, SplitMix64 projection).
    CHECK(e[0] == 0x1.5006821a6ef66p-3);
    CHECK(e[1] == 0x1.a141b5eb083e4p-3);
    CHECK(e[2] == -0x1.5fe0d4d15f651p-3);
    CHECK(e[3] == -0x1.550f9859273dcp-1);
    CHECK(e[4] == -0x1.62876ec9347efp-3);
}

TEST_CASE("synthetic_extract determinism, linearity at zero, sensitivity") {
    const ExtractorSpec spec{"s", 64, ExtractorKind::synthetic, 9};
    PatchRecord a{0, 0, 0, 0, 32, 1.0, RasterImage(32, 32)};
    CHECK(synthetic_extract(a, spec).isZero(0.0));

    SplitMix64 rng(1);
    for (auto& b : a.pixels.pixels()) {
        b = static_cast<std::uint8_t>(rng.below(256));
    }
    PatchRecord b = a;
    CHECK(synthetic_extract(a, spec) == synthetic_extract(b, spec));
    b.pixels.set(5, 7, Rgb{static_cast<std::uint8_t>(a.pixels.at(5, 7).r ^ 1), a.pixels.at(5, 7).g,
                           a.pixels.at(5, 7).b});
    CHECK(synthetic_extract(a, spec) != synthetic_extract(b, spec));

    ExtractorSpec other = spec;
    other.seed = 10;
    CHECK(synthetic_extract(a, spec) != synthetic_extract(a, other));
}

TEST_CASE("extractor config validation") {
    CHECK_THROWS_AS(validate_extractors({{"x", 0}}), ConfigError);
    CHECK_THROWS_AS(validate_extractors({{"x", 4}, {"x", 8}}), ConfigError);
    CHECK_THROWS_AS(parse_extractor_kind("resnet"), ConfigError);
    CHECK_THROWS_AS(SyntheticExtractor(ExtractorSpec{"i", 4, ExtractorKind::imported, 0}), ConfigError);
}

TEST_CASE("WEMB write-then-read returns the written matrix") {
    const auto path = scratch_dir() / "k3.wemb";
    Eigen::MatrixXd m(3, 4);
    m << 0.5, -1.25, 3.0, 1e-3f, 2.0, 0.0, -7.5, 1.0f / 3.0f, 8.0, 9.0, 10.0, -0.125;
    const std::vector<PatchKey> keys{{0, 0}, {0, 1}, {4, 2}};
    save_wemb(path, "conch", keys, m);
    const auto set = load_embeddings(path);
    REQUIRE(set.extractors.size() == 1);
    CHECK(set.extractors[0].name == "conch");
    CHECK(set.patch_keys == keys);
    CHECK(set.extractors[0].values == m);
    CHECK(fs::file_size(path) == 4 + 2 + 2 + 5 + 4 + 4 + 3 * (8 + 16));
}

TEST_CASE("WEMB byte layout") {
    Eigen::MatrixXd m(1, 1);
    m << 1.0;
    const auto bytes = encode_wemb("ab", {{2, 3}}, m);
    const std::vector<std::uint8_t> expected{'W', 'E', 'M', 'B', 1, 0, 2, 0, 'a', 'b', 1, 0, 0, 0, 1, 0, 0, 0,
                                             2,   0,   0,   0,   3, 0, 0, 0, 0, 0, 0x80, 0x3f};
    CHECK(bytes == expected);
}

TEST_CASE("WEMB empty patch list") {
    const auto path = scratch_dir() / "empty.wemb";
    save_wemb(path, "x", {}, Eigen::MatrixXd(0, 7));
    const auto set = load_embeddings(path);
    CHECK(set.patch_count() == 0);
    CHECK(set.extractors[0].values.rows() == 0);
    CHECK(set.extractors[0].values.cols() == 7);
}

TEST_CASE("WEMB error paths") {
    Eigen::MatrixXd m = random_matrix(2, 3, 4);
    auto bytes = encode_wemb("e", {{0, 0}, {0, 1}}, m);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_wemb(bad_magic), FormatError);

    auto bad_version = bytes;
    bad_version[4] = 2;
    CHECK_THROWS_AS(decode_wemb(bad_version), FormatError);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 3);
    CHECK_THROWS_AS(decode_wemb(truncated), LengthError);

    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_wemb(trailing), LengthError);

    auto nan = bytes;
    const std::size_t first_value = 4 + 2 + 2 + 1 + 4 + 4 + 8;
    nan[first_value + 0] = 0x00;
    nan[first_value + 1] = 0x00;
    nan[first_value + 2] = 0xc0;
    nan[first_value + 3] = 0x7f;
    CHECK_THROWS_AS(decode_wemb(nan), DataError);

    m(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(encode_wemb("e", {{0, 0}, {0, 1}}, m), DataError);
}

TEST_CASE("slide sidecar round trip and checksum") {
    const auto dir = scratch_dir() / "slides";
    const auto set = two_extractor_set(5, 6, 4, 21);
    const auto sidecar = save_slide_embeddings(dir, set);
    const auto loaded = load_slide_embeddings(sidecar);
    CHECK(loaded.slide_id == "S1");
    CHECK(loaded.patch_keys == set.patch_keys);
    CHECK(loaded.extractor("a").values == set.extractor("a").values);
    CHECK(loaded.extractor("b").values == set.extractor("b").values);

    // Flip one payload byte: checksum must catch it.
    const auto file = dir / "S1_b.wemb";
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-1, std::ios::end);
    f.put('\x11');
    f.close();
    CHECK_THROWS_AS(load_slide_embeddings(sidecar), DataError);
}

TEST_CASE("concat_fuse bookkeeping") {
    const auto set = two_extractor_set(4, 512, 384, 1);
    const auto fused = concat_fuse(set, {"a", "b"});
    REQUIRE(fused.values.cols() == 896);
    CHECK(fused.dims == std::vector<int>{512, 384});
    for (Eigen::Index i = 0; i < 4; ++i) {
        for (Eigen::Index t = 0; t < 384; t += 17) {
            CHECK(fused.values(i, 512 + t) == set.extractor("b").values(i, t));
        }
    }
    // Slicing recovers each block exactly.
    CHECK(fused.values.leftCols(512) == set.extractor("a").values);
    CHECK(fused.values.rightCols(384) == set.extractor("b").values);

    const auto single = concat_fuse(set, {"b"});
    CHECK(single.values == set.extractor("b").values);

    CHECK_THROWS_AS(concat_fuse(set, {"a", "missing"}), ConfigError);

    auto broken = set;
    broken.extractors[1].values.conservativeResize(3, Eigen::NoChange);
    CHECK_THROWS_AS(concat_fuse(broken, {"a", "b"}), ShapeError);
}

TEST_CASE("fusion commutes with patch permutation") {
    const auto set = two_extractor_set(6, 5, 3, 2);
    const auto params = random_fusion({5, 3}, 4, 3, 40);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
    perm.indices() << 3, 0, 5, 1, 4, 2;

    auto permuted = set;
    for (auto& e : permuted.extractors) {
        e.values = perm * e.values;
    }
    CHECK(concat_fuse(permuted, {"a", "b"}).values == perm * concat_fuse(set, {"a", "b"}).values);
    const Eigen::MatrixXd lhs = attention_fuse(permuted, {"a", "b"}, params).values;
    const Eigen::MatrixXd rhs = perm * attention_fuse(set, {"a", "b"}, params).values;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("attention fusion with a single extractor is its projection") {
    SlideEmbeddingSet set;
    set.slide_id = "one";
    set.patch_keys = {{0, 0}, {0, 1}, {0, 2}};
    set.extractors.push_back({"a", random_matrix(3, 5, 8)});
    const auto params = random_fusion({5}, 4, 3, 9);
    const auto trace = fusion_forward(params, set.extractor("a").values);
    CHECK(trace.weights == Eigen::MatrixXd::Ones(3, 1));
    const Eigen::MatrixXd projected = set.extractor("a").values * params.projections[0].transpose();
    CHECK((attention_fuse(set, {"a"}, params).values - projected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("attention fusion of identical projections gives uniform weights") {
    SlideEmbeddingSet set;
    set.slide_id = "same";
    set.patch_keys = {{0, 0}, {0, 1}};
    const auto block = random_matrix(2, 4, 3);
    set.extractors = {{"a", block}, {"b", block}, {"c", block}};
    auto params = random_fusion({4, 4, 4}, 6, 5, 50);
    params.projections[1] = params.projections[0];
    params.projections[2] = params.projections[0];
    const auto trace = fusion_forward(params, concat_fuse(set, {"a", "b", "c"}).values);
    CHECK((trace.weights.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
    CHECK((trace.fused - trace.projected[0]).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("attention fusion output is a convex combination") {
    SplitMix64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(3));
        std::vector<int> dims;
        SlideEmbeddingSet set;
        set.slide_id = "r";
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.below(6));
        for (Eigen::Index i = 0; i < k; ++i) {
            set.patch_keys.push_back({0, static_cast<std::uint32_t>(i)});
        }
        std::vector<std::string> order;
        for (int j = 0; j < n; ++j) {
            dims.push_back(1 + static_cast<int>(rng.below(6)));
            order.push_back("e" + std::to_string(j));
            set.extractors.push_back({order.back(), random_matrix(k, dims.back(), rng.next())});
        }
        const auto params = random_fusion(dims, 5, 4, rng.next());
        const auto trace = fusion_forward(params, concat_fuse(set, order).values);
        CHECK((trace.weights.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
        CHECK(trace.weights.minCoeff() >= 0.0);
        for (Eigen::Index i = 0; i < k; ++i) {
            for (Eigen::Index c = 0; c < 5; ++c) {
                double lo = 1e300, hi = -1e300;
                for (const auto& p : trace.projected) {
                    lo = std::min(lo, p(i, c));
                    hi = std::max(hi, p(i, c));
                }
                CHECK(trace.fused(i, c) >= lo - 1e-12);
                CHECK(trace.fused(i, c) <= hi + 1e-12);
            }
        }
    }
}

}  // TEST_SUITE
