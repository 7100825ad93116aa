#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "milpath/error.hpp"
#include "milpath/image_io.hpp"
#include "milpath/rng.hpp"

using namespace milpath;
namespace fs = std::filesystem;

namespace {

RasterImage noise_image(int w, int h, std::uint64_t seed) {
    RasterImage img(w, h);
    SplitMix64 rng(seed);
    for (auto& b : img.pixels()) {
        b = static_cast<std::uint8_t>(rng.below(256));
    }
    return img;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "milpath_image_io";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_SUITE("image_io") {

TEST_CASE("PNG write/read is lossless") {
    const auto img = noise_image(37, 21, 1);
    const auto path = scratch("a.png");
    write_png(path, img);
    CHECK(read_image(path) == img);
}

TEST_CASE("TIFF uncompressed and deflate are lossless") {
    const auto img = noise_image(40, 17, 2);
    const auto raw = scratch("raw.tif");
    const auto zip = scratch("zip.tif");
    write_tiff(raw, img, TiffCompression::none);
    write_tiff(zip, img, TiffCompression::deflate);
    CHECK(read_image(raw) == img);
    CHECK(read_image(zip) == img);
}

TEST_CASE("unreadable inputs") {
    CHECK_THROWS_AS(read_image(scratch("does_not_exist.png")), IoError);
    const auto junk = scratch("junk.bin");
    std::ofstream(junk) << "hello";
    CHECK_THROWS_AS(read_image(junk), FormatError);

    const auto img = noise_image(8, 8, 3);
    const auto path = scratch("trunc.tif");
    write_tiff(path, img);
    fs::resize_file(path, 40);
    CHECK_THROWS_AS(read_image(path), Error);
}

}  // TEST_SUITE
