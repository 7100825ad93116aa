#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "milpath/model.hpp"
#include "milpath/training.hpp"

namespace milpath {

struct DatasetEntry {
    std::string patient_id;
    std::string slide_id;
    int label = -1;
    std::string embeddings;     // sidecar path, relative to the manifest directory
    std::string patch_manifest; // optional
};

struct DatasetManifest {
    std::vector<std::string> extractor_names;
    std::vector<int> extractor_dims;
    std::string config_hash;
    std::vector<DatasetEntry> slides;
};

std::string to_json(const DatasetManifest& manifest);
/// Validates unique slide ids and labels in {0, 1}.
DatasetManifest dataset_manifest_from_json(const std::string& text);
void save_dataset_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
/// Also checks that every referenced file exists (IoError otherwise).
DatasetManifest load_dataset_manifest(const std::filesystem::path& path);

struct LoadedDataset {
    std::vector<Bag> bags;
    FeatureLayout layout;
};

/// Loads every slide and concatenates the selected extractors in the given
/// order (all manifest extractors when `extractors` is empty).
LoadedDataset load_bags(const std::filesystem::path& manifest_path, const std::vector<std::string>& extractors = {});

}  // namespace milpath
