#include <fstream>
#include <sstream>

#include "json.hpp"
#include "milpath/error.hpp"
#include "milpath/tiling.hpp"

namespace milpath {

using nlohmann::json;

std::string to_json(const PatchManifest& m) {
    json patches = json::array();
    for (const auto& p : m.patches) {
        patches.push_back({{"row", p.row},
                           {"col", p.col},
                           {"origin_x", p.origin_x},
                           {"origin_y", p.origin_y},
                           {"coverage", p.coverage}});
    }
    const json doc = {{"slide_id", m.slide_id},
                      {"source", m.source},
                      {"width", m.width},
                      {"height", m.height},
                      {"patch_size", m.patch_size},
                      {"min_coverage", m.min_coverage},
                      {"magnification", m.magnification},
                      {"threshold", m.threshold},
                      {"patches", patches}};
    return doc.dump(2) + "\n";
}

PatchManifest patch_manifest_from_json(const std::string& text) {
    try {
        const auto doc = json::parse(text);
        PatchManifest m;
        m.slide_id = doc.at("slide_id").get<std::string>();
        m.source = doc.value("source", std::string{});
        m.width = doc.at("width").get<int>();
        m.height = doc.at("height").get<int>();
        m.patch_size = doc.at("patch_size").get<int>();
        m.min_coverage = doc.at("min_coverage").get<double>();
        m.magnification = doc.value("magnification", std::string{"20x"});
        m.threshold = doc.value("threshold", 0);
        for (const auto& p : doc.at("patches")) {
            m.patches.push_back({p.at("row").get<int>(), p.at("col").get<int>(), p.at("origin_x").get<int>(),
                                 p.at("origin_y").get<int>(), p.at("coverage").get<double>()});
        }
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("invalid patch manifest: ") + e.what());
    }
}

void save_patch_manifest(const std::filesystem::path& path, const PatchManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << to_json(manifest);
}

PatchManifest load_patch_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return patch_manifest_from_json(buf.str());
}

}  // namespace milpath
