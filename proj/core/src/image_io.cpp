#include "milpath/image_io.hpp"

#include <png.h>
#include <zlib.h>

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "milpath/error.hpp"

namespace milpath {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---- TIFF -----------------------------------------------------------------

class TiffReader {
public:
    explicit TiffReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
        if (bytes_.size() < 8) {
            throw LengthError("TIFF header truncated");
        }
        if (bytes_[0] == 'I' && bytes_[1] == 'I') {
            little_ = true;
        } else if (bytes_[0] == 'M' && bytes_[1] == 'M') {
            little_ = false;
        } else {
            throw FormatError("not a TIFF file");
        }
        if (u16(2) != 42) {
            throw FormatError("unsupported TIFF variant (BigTIFF?)");
        }
    }

    RasterImage decode() {
        parse_ifd(u32(4));
        const auto width = scalar(256);
        const auto height = scalar(257);
        const auto samples = tags_.contains(277) ? scalar(277) : 1;
        const auto compression = tags_.contains(259) ? scalar(259) : 1;
        const auto photometric = tags_.contains(262) ? scalar(262) : 2;
        const auto planar = tags_.contains(284) ? scalar(284) : 1;
        const auto predictor = tags_.contains(317) ? scalar(317) : 1;
        const auto rows_per_strip = tags_.contains(278) ? scalar(278) : height;
        if (width == 0 || height == 0) {
            throw FormatError("TIFF has zero dimension");
        }
        for (auto bits : values(258)) {
            if (bits != 8) {
                throw FormatError("only 8-bit TIFF samples are supported");
            }
        }
        if (photometric != 2 || (samples != 3 && samples != 4)) {
            throw FormatError("only RGB/RGBA TIFF is supported");
        }
        if (planar != 1) {
            throw FormatError("planar TIFF layout is not supported");
        }
        if (compression != 1 && compression != 8 && compression != 32946) {
            throw FormatError("unsupported TIFF compression " + std::to_string(compression));
        }
        if (predictor != 1 && predictor != 2) {
            throw FormatError("unsupported TIFF predictor " + std::to_string(predictor));
        }
        const auto offsets = values(273);
        const auto counts = values(279);
        if (offsets.size() != counts.size()) {
            throw FormatError("TIFF strip tables disagree");
        }

        const std::size_t row_bytes = static_cast<std::size_t>(width) * samples;
        std::vector<std::uint8_t> raw;
        raw.reserve(row_bytes * height);
        for (std::size_t s = 0; s < offsets.size(); ++s) {
            if (offsets[s] + counts[s] > bytes_.size()) {
                throw LengthError("TIFF strip extends past end of file");
            }
            const auto* strip = bytes_.data() + offsets[s];
            const std::size_t strip_rows =
                std::min<std::size_t>(rows_per_strip, height - std::min<std::size_t>(height, s * rows_per_strip));
            const std::size_t expected = strip_rows * row_bytes;
            std::vector<std::uint8_t> decoded;
            if (compression == 1) {
                decoded.assign(strip, strip + std::min<std::size_t>(counts[s], expected));
            } else {
                decoded.resize(expected);
                uLongf out_len = static_cast<uLongf>(expected);
                if (uncompress(decoded.data(), &out_len, strip, static_cast<uLong>(counts[s])) != Z_OK) {
                    throw FormatError("corrupt Deflate strip in TIFF");
                }
                decoded.resize(out_len);
            }
            if (decoded.size() < expected) {
                throw LengthError("TIFF strip shorter than its rows");
            }
            if (predictor == 2) {
                for (std::size_t r = 0; r < strip_rows; ++r) {
                    auto* row = decoded.data() + r * row_bytes;
                    for (std::size_t i = samples; i < row_bytes; ++i) {
                        row[i] = static_cast<std::uint8_t>(row[i] + row[i - samples]);
                    }
                }
            }
            raw.insert(raw.end(), decoded.begin(), decoded.begin() + static_cast<std::ptrdiff_t>(expected));
        }
        if (raw.size() < row_bytes * height) {
            throw LengthError("TIFF pixel data truncated");
        }

        std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3);
        for (std::size_t p = 0; p < static_cast<std::size_t>(width) * height; ++p) {
            std::memcpy(rgb.data() + p * 3, raw.data() + p * samples, 3);
        }
        return RasterImage(static_cast<int>(width), static_cast<int>(height), std::move(rgb));
    }

private:
    std::uint16_t u16(std::size_t at) const {
        need(at, 2);
        return little_ ? static_cast<std::uint16_t>(bytes_[at] | bytes_[at + 1] << 8)
                       : static_cast<std::uint16_t>(bytes_[at] << 8 | bytes_[at + 1]);
    }
    std::uint32_t u32(std::size_t at) const {
        need(at, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const std::uint32_t b = bytes_[at + (little_ ? 3 - i : i)];
            v = v << 8 | b;
        }
        return v;
    }
    void need(std::size_t at, std::size_t n) const {
        if (at + n > bytes_.size()) {
            throw LengthError("TIFF structure truncated");
        }
    }

    void parse_ifd(std::size_t offset) {
        const std::size_t n = u16(offset);
        for (std::size_t e = 0; e < n; ++e) {
            const std::size_t entry = offset + 2 + e * 12;
            const auto tag = u16(entry);
            const auto type = u16(entry + 2);
            const auto count = u32(entry + 4);
            std::size_t width = 0;
            switch (type) {
                case 1: case 2: case 7: width = 1; break;   // BYTE, ASCII, UNDEFINED
                case 3: width = 2; break;                   // SHORT
                case 4: width = 4; break;                   // LONG
                default: continue;                          // rationals etc. are never needed
            }
            const std::size_t data = count * width <= 4 ? entry + 8 : u32(entry + 8);
            std::vector<std::uint64_t> vals;
            vals.reserve(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t at = data + i * width;
                vals.push_back(width == 1 ? (need(at, 1), bytes_[at]) : width == 2 ? u16(at) : u32(at));
            }
            tags_[tag] = std::move(vals);
        }
    }

    const std::vector<std::uint64_t>& values(std::uint16_t tag) const {
        auto it = tags_.find(tag);
        if (it == tags_.end() || it->second.empty()) {
            throw FormatError("TIFF is missing required tag " + std::to_string(tag));
        }
        return it->second;
    }
    std::uint64_t scalar(std::uint16_t tag) const { return values(tag).front(); }

    std::vector<std::uint8_t> bytes_;
    bool little_ = true;
    std::map<std::uint16_t, std::vector<std::uint64_t>> tags_;
};

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

}  // namespace

RasterImage read_png(const std::filesystem::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw FormatError("cannot read PNG " + path.string() + ": " + msg);
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
    }
    return RasterImage(static_cast<int>(png.width), static_cast<int>(png.height), std::move(pixels));
}

RasterImage read_tiff(const std::filesystem::path& path) {
    return TiffReader(read_file(path)).decode();
}

RasterImage read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::array<char, 4> sig{};
    in.read(sig.data(), sig.size());
    if (in.gcount() == 4 && static_cast<unsigned char>(sig[0]) == 0x89 && sig[1] == 'P' && sig[2] == 'N' &&
        sig[3] == 'G') {
        return read_png(path);
    }
    if (in.gcount() >= 2 && ((sig[0] == 'I' && sig[1] == 'I') || (sig[0] == 'M' && sig[1] == 'M'))) {
        return read_tiff(path);
    }
    throw FormatError("unrecognized image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const RasterImage& image) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width());
    png.height = static_cast<png_uint_32>(image.height());
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, image.pixels().data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError("cannot write PNG " + path.string() + ": " + msg);
    }
}

void write_tiff(const std::filesystem::path& path, const RasterImage& image, TiffCompression compression) {
    std::vector<std::uint8_t> strip(image.pixels().begin(), image.pixels().end());
    std::uint16_t code = 1;
    if (compression == TiffCompression::deflate) {
        uLongf len = compressBound(static_cast<uLong>(strip.size()));
        std::vector<std::uint8_t> packed(len);
        if (compress2(packed.data(), &len, strip.data(), static_cast<uLong>(strip.size()), 6) != Z_OK) {
            throw IoError("deflate failed while writing " + path.string());
        }
        packed.resize(len);
        strip = std::move(packed);
        code = 8;
    }

    // Layout: header | bits-per-sample array | strip | IFD
    std::vector<std::uint8_t> out{'I', 'I'};
    put16(out, 42);
    const std::uint32_t bps_offset = 8;
    const std::uint32_t strip_offset = bps_offset + 6;
    const std::uint32_t ifd_offset = strip_offset + static_cast<std::uint32_t>(strip.size());
    put32(out, ifd_offset);
    put16(out, 8);
    put16(out, 8);
    put16(out, 8);
    out.insert(out.end(), strip.begin(), strip.end());

    struct Entry {
        std::uint16_t tag, type;
        std::uint32_t count, value;
    };
    const std::array<Entry, 10> entries{{
        {256, 4, 1, static_cast<std::uint32_t>(image.width())},
        {257, 4, 1, static_cast<std::uint32_t>(image.height())},
        {258, 3, 3, bps_offset},
        {259, 3, 1, code},
        {262, 3, 1, 2},
        {273, 4, 1, strip_offset},
        {277, 3, 1, 3},
        {278, 4, 1, static_cast<std::uint32_t>(image.height())},
        {279, 4, 1, static_cast<std::uint32_t>(strip.size())},
        {284, 3, 1, 1},
    }};
    put16(out, static_cast<std::uint16_t>(entries.size()));
    for (const auto& e : entries) {
        put16(out, e.tag);
        put16(out, e.type);
        put32(out, e.count);
        if (e.type == 3 && e.count == 1) {
            put16(out, static_cast<std::uint16_t>(e.value));
            put16(out, 0);
        } else {
            put32(out, e.value);
        }
    }
    put32(out, 0);

    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot write " + path.string());
    }
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace milpath
