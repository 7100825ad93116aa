#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "milpath/embedding.hpp"
#include "milpath/error.hpp"

namespace milpath {
namespace {

class ByteWriter {
public:
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string text(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) {
            throw LengthError("WEMB data truncated at byte " + std::to_string(pos_));
        }
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

const ExtractorMatrix& SlideEmbeddingSet::extractor(const std::string& name) const {
    for (const auto& e : extractors) {
        if (e.name == name) {
            return e;
        }
    }
    throw ConfigError("slide '" + slide_id + "' has no embeddings for extractor '" + name + "'");
}

std::uint32_t crc32_of(const std::vector<std::uint8_t>& bytes) {
    return static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

std::vector<std::uint8_t> encode_wemb(const std::string& extractor, const std::vector<PatchKey>& keys,
                                      const Eigen::MatrixXd& values) {
    if (static_cast<std::size_t>(values.rows()) != keys.size()) {
        throw ShapeError("WEMB: " + std::to_string(keys.size()) + " keys but " + std::to_string(values.rows()) +
                         " rows");
    }
    if (extractor.size() > 0xFFFF) {
        throw ConfigError("WEMB: extractor name too long");
    }
    if (!values.allFinite()) {
        throw DataError("WEMB: refusing to write non-finite embedding values");
    }
    ByteWriter w;
    w.bytes("WEMB");
    w.u16(kWembVersion);
    w.u16(static_cast<std::uint16_t>(extractor.size()));
    w.bytes(extractor);
    w.u32(static_cast<std::uint32_t>(values.cols()));
    w.u32(static_cast<std::uint32_t>(values.rows()));
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        w.u32(keys[static_cast<std::size_t>(i)].row);
        w.u32(keys[static_cast<std::size_t>(i)].col);
        for (Eigen::Index d = 0; d < values.cols(); ++d) {
            w.f32(static_cast<float>(values(i, d)));
        }
    }
    return w.take();
}

SlideEmbeddingSet decode_wemb(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    if (bytes.size() < 4 || r.text(4) != "WEMB") {
        throw FormatError("WEMB: bad magic");
    }
    const auto version = r.u16();
    if (version != kWembVersion) {
        throw FormatError("WEMB: unsupported version " + std::to_string(version));
    }
    ExtractorMatrix m;
    m.name = r.text(r.u16());
    const auto dim = r.u32();
    const auto count = r.u32();
    const std::size_t record = 8 + static_cast<std::size_t>(dim) * 4;
    if (r.remaining() != record * count) {
        throw LengthError("WEMB: payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                          std::to_string(record * count));
    }
    SlideEmbeddingSet set;
    set.patch_keys.reserve(count);
    m.values.resize(count, dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto row = r.u32();
        const auto col = r.u32();
        set.patch_keys.push_back({row, col});
        for (std::uint32_t d = 0; d < dim; ++d) {
            const float v = r.f32();
            if (!std::isfinite(v)) {
                throw DataError("WEMB: non-finite value at patch " + std::to_string(i) + ", dim " + std::to_string(d));
            }
            m.values(i, d) = v;
        }
    }
    set.extractors.push_back(std::move(m));
    return set;
}

void save_wemb(const std::filesystem::path& path, const std::string& extractor, const std::vector<PatchKey>& keys,
               const Eigen::MatrixXd& values) {
    write_bytes(path, encode_wemb(extractor, keys, values));
}

SlideEmbeddingSet load_embeddings(const std::filesystem::path& path) {
    return decode_wemb(read_bytes(path));
}

std::filesystem::path save_slide_embeddings(const std::filesystem::path& dir, const SlideEmbeddingSet& set) {
    using nlohmann::json;
    std::filesystem::create_directories(dir);
    json files = json::array();
    for (const auto& e : set.extractors) {
        const auto name = set.slide_id + "_" + e.name + ".wemb";
        const auto bytes = encode_wemb(e.name, set.patch_keys, e.values);
        write_bytes(dir / name, bytes);
        files.push_back({{"name", e.name}, {"dim", e.values.cols()}, {"file", name}, {"crc32", crc32_of(bytes)}});
    }
    const json doc = {{"slide_id", set.slide_id}, {"count", set.patch_keys.size()}, {"extractors", files}};
    const auto sidecar = dir / (set.slide_id + ".json");
    const auto text = doc.dump(2) + "\n";
    write_bytes(sidecar, std::vector<std::uint8_t>(text.begin(), text.end()));
    return sidecar;
}

SlideEmbeddingSet load_slide_embeddings(const std::filesystem::path& sidecar) {
    using nlohmann::json;
    const auto raw = read_bytes(sidecar);
    json doc;
    try {
        doc = json::parse(raw.begin(), raw.end());
    } catch (const json::exception& e) {
        throw FormatError("invalid embedding sidecar " + sidecar.string() + ": " + e.what());
    }
    SlideEmbeddingSet set;
    try {
        set.slide_id = doc.at("slide_id").get<std::string>();
        const auto count = doc.at("count").get<std::size_t>();
        for (const auto& f : doc.at("extractors")) {
            const auto bytes = read_bytes(sidecar.parent_path() / f.at("file").get<std::string>());
            if (f.contains("crc32") && f.at("crc32").get<std::uint32_t>() != crc32_of(bytes)) {
                throw DataError("checksum mismatch for " + f.at("file").get<std::string>());
            }
            auto one = decode_wemb(bytes);
            auto& m = one.extractors.front();
            if (m.name != f.at("name").get<std::string>() || m.values.cols() != f.at("dim").get<Eigen::Index>()) {
                throw FormatError("WEMB header disagrees with sidecar for " + f.at("file").get<std::string>());
            }
            if (one.patch_keys.size() != count) {
                throw LengthError("extractor '" + m.name + "' has " + std::to_string(one.patch_keys.size()) +
                                  " patches, sidecar says " + std::to_string(count));
            }
            if (set.extractors.empty()) {
                set.patch_keys = std::move(one.patch_keys);
            } else if (one.patch_keys != set.patch_keys) {
                throw DataError("extractor '" + m.name + "' patch keys differ from the first extractor");
            }
            set.extractors.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw FormatError("invalid embedding sidecar " + sidecar.string() + ": " + e.what());
    }
    return set;
}

}  // namespace milpath
