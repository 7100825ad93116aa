#include "milpath/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "milpath/embedding.hpp"
#include "milpath/error.hpp"

namespace milpath {

using nlohmann::ordered_json;

std::string to_json(const DatasetManifest& m) {
    ordered_json slides = ordered_json::array();
    for (const auto& s : m.slides) {
        ordered_json e = {{"patient_id", s.patient_id},
                          {"slide_id", s.slide_id},
                          {"label", s.label},
                          {"embeddings", s.embeddings}};
        if (!s.patch_manifest.empty()) {
            e["patch_manifest"] = s.patch_manifest;
        }
        slides.push_back(std::move(e));
    }
    const ordered_json doc = {{"format", "milpath-dataset"},
                              {"version", 1},
                              {"config_hash", m.config_hash},
                              {"extractors", m.extractor_names},
                              {"extractor_dims", m.extractor_dims},
                              {"slides", slides}};
    return doc.dump(2) + "\n";
}

DatasetManifest dataset_manifest_from_json(const std::string& text) {
    DatasetManifest m;
    try {
        const auto doc = ordered_json::parse(text);
        m.config_hash = doc.value("config_hash", std::string{});
        m.extractor_names = doc.at("extractors").get<std::vector<std::string>>();
        m.extractor_dims = doc.at("extractor_dims").get<std::vector<int>>();
        for (const auto& s : doc.at("slides")) {
            m.slides.push_back({s.at("patient_id").get<std::string>(), s.at("slide_id").get<std::string>(),
                                s.at("label").get<int>(), s.at("embeddings").get<std::string>(),
                                s.value("patch_manifest", std::string{})});
        }
    } catch (const ordered_json::exception& e) {
        throw FormatError(std::string("invalid dataset manifest: ") + e.what());
    }
    if (m.extractor_names.size() != m.extractor_dims.size()) {
        throw FormatError("dataset manifest: extractor names and dims differ in length");
    }
    std::set<std::string> ids;
    for (const auto& s : m.slides) {
        if (!ids.insert(s.slide_id).second) {
            throw DataError("dataset manifest: duplicate slide id '" + s.slide_id + "'");
        }
        if (s.label != 0 && s.label != 1) {
            throw DataError("dataset manifest: slide '" + s.slide_id + "' has label " + std::to_string(s.label));
        }
    }
    return m;
}

void save_dataset_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << to_json(manifest);
}

DatasetManifest load_dataset_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open dataset manifest " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    auto m = dataset_manifest_from_json(buf.str());
    const auto base = path.parent_path();
    for (const auto& s : m.slides) {
        if (!std::filesystem::exists(base / s.embeddings)) {
            throw IoError("slide '" + s.slide_id + "': missing " + (base / s.embeddings).string());
        }
        if (!s.patch_manifest.empty() && !std::filesystem::exists(base / s.patch_manifest)) {
            throw IoError("slide '" + s.slide_id + "': missing " + (base / s.patch_manifest).string());
        }
    }
    return m;
}

LoadedDataset load_bags(const std::filesystem::path& manifest_path, const std::vector<std::string>& extractors) {
    const auto manifest = load_dataset_manifest(manifest_path);
    LoadedDataset out;
    out.layout.names = extractors.empty() ? manifest.extractor_names : extractors;
    for (const auto& name : out.layout.names) {
        const auto it = std::find(manifest.extractor_names.begin(), manifest.extractor_names.end(), name);
        if (it == manifest.extractor_names.end()) {
            throw ConfigError("dataset has no extractor '" + name + "'");
        }
        out.layout.dims.push_back(manifest.extractor_dims[static_cast<std::size_t>(it - manifest.extractor_names.begin())]);
    }
    for (const auto& s : manifest.slides) {
        const auto set = load_slide_embeddings(manifest_path.parent_path() / s.embeddings);
        auto fused = concat_fuse(set, out.layout.names);
        if (fused.dims != out.layout.dims) {
            throw DataError("slide '" + s.slide_id + "' embedding dims disagree with the manifest");
        }
        if (fused.values.rows() == 0) {
            throw DataError("slide '" + s.slide_id + "' has no patches");
        }
        out.bags.push_back({s.slide_id, s.patient_id, std::move(fused.values), s.label});
    }
    return out;
}

}  // namespace milpath
