#include "milpath/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "milpath/error.hpp"

namespace milpath {
namespace {

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
    return {{"extractor_names", c.extractor_names},
            {"extractor_dims", c.extractor_dims},
            {"fusion", to_string(c.fusion)},
            {"fusion_dim", c.fusion_dim},
            {"fusion_attention_dim", c.fusion_attention_dim},
            {"attention_dim", c.attention_dim},
            {"head_widths", c.head_widths}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.extractor_names = j.at("extractor_names").get<std::vector<std::string>>();
    c.extractor_dims = j.at("extractor_dims").get<std::vector<int>>();
    c.fusion = parse_fusion_mode(j.at("fusion").get<std::string>());
    c.fusion_dim = j.at("fusion_dim").get<int>();
    c.fusion_attention_dim = j.at("fusion_attention_dim").get<int>();
    c.attention_dim = j.at("attention_dim").get<int>();
    c.head_widths = j.at("head_widths").get<std::vector<int>>();
    return c;
}

json header_of(const Checkpoint& cp) {
    json tensors = json::array();
    const auto names = cp.model.tensor_names();
    const auto spans = cp.model.tensors();
    for (std::size_t i = 0; i < names.size(); ++i) {
        tensors.push_back({{"name", names[i]}, {"size", spans[i].size()}});
    }
    return {{"format", "milpath-checkpoint"},
            {"version", kCheckpointVersion},
            {"config", config_to_json(cp.model.config)},
            {"config_hash", cp.config_hash},
            {"tensors", tensors}};
}

/// Builds a correctly shaped model from a header and checks the tensor table.
Checkpoint skeleton_from_header(const json& header) {
    if (header.value("format", std::string{}) != "milpath-checkpoint") {
        throw FormatError("checkpoint: unknown format tag");
    }
    if (header.at("version").get<int>() != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version");
    }
    Checkpoint cp{init_model(config_from_json(header.at("config")), 0),
                  header.at("config_hash").get<std::string>()};
    const auto names = cp.model.tensor_names();
    const auto spans = cp.model.tensors();
    const auto& table = header.at("tensors");
    if (table.size() != names.size()) {
        throw FormatError("checkpoint: tensor table does not match the model config");
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (table[i].at("name").get<std::string>() != names[i] ||
            table[i].at("size").get<std::size_t>() != spans[i].size()) {
            throw FormatError("checkpoint: tensor '" + names[i] + "' has unexpected name or size");
        }
    }
    return cp;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
    const auto header = header_of(checkpoint).dump();
    std::vector<std::uint8_t> out{'M', 'I', 'L', 'C'};
    auto put = [&out](std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) {
            out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    };
    put(kCheckpointVersion, 2);
    put(header.size(), 4);
    out.insert(out.end(), header.begin(), header.end());
    for (auto t : checkpoint.model.tensors()) {
        for (double v : t) {
            put(std::bit_cast<std::uint64_t>(v), 8);
        }
    }
    return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    auto get = [&](int n) {
        if (pos + static_cast<std::size_t>(n) > bytes.size()) {
            throw LengthError("checkpoint truncated");
        }
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        }
        pos += static_cast<std::size_t>(n);
        return v;
    };
    if (bytes.size() < 4 || std::string(bytes.begin(), bytes.begin() + 4) != "MILC") {
        throw FormatError("checkpoint: bad magic");
    }
    pos = 4;
    if (get(2) != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version");
    }
    const auto header_len = static_cast<std::size_t>(get(4));
    if (pos + header_len > bytes.size()) {
        throw LengthError("checkpoint header truncated");
    }
    json header;
    try {
        header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                             bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
        pos += header_len;
        auto cp = skeleton_from_header(header);
        for (auto t : cp.model.tensors()) {
            for (auto& v : t) {
                v = std::bit_cast<double>(get(8));
            }
        }
        if (pos != bytes.size()) {
            throw LengthError("checkpoint has trailing bytes");
        }
        return cp;
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }
}

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
    auto doc = header_of(checkpoint);
    const auto spans = checkpoint.model.tensors();
    for (std::size_t i = 0; i < spans.size(); ++i) {
        doc["tensors"][i]["values"] = std::vector<double>(spans[i].begin(), spans[i].end());
    }
    return doc.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
    try {
        const auto doc = json::parse(text);
        auto cp = skeleton_from_header(doc);
        auto spans = cp.model.tensors();
        for (std::size_t i = 0; i < spans.size(); ++i) {
            const auto values = doc.at("tensors")[i].at("values").get<std::vector<double>>();
            if (values.size() != spans[i].size()) {
                throw FormatError("checkpoint: tensor " + std::to_string(i) + " has wrong value count");
            }
            std::copy(values.begin(), values.end(), spans[i].begin());
        }
        return cp;
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint JSON: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    if (path.extension() == ".json") {
        out << checkpoint_to_json(checkpoint);
    } else {
        const auto bytes = encode_checkpoint(checkpoint);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (path.extension() == ".json") {
        return checkpoint_from_json(std::string(bytes.begin(), bytes.end()));
    }
    return decode_checkpoint(bytes);
}

}  // namespace milpath
