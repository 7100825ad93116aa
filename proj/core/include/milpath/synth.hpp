#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "milpath/model.hpp"
#include "milpath/training.hpp"

namespace milpath {

/// Planted-signal bag generator.
///
/// Every instance starts as noise * N(0, I). In positive bags, round(s*K)
/// instances chosen uniformly without replacement get a fixed offset added.
/// The offset has norm `offset_norm` with equal energy in each extractor's
/// block, so an extractor seen alone carries 1/n of the squared signal.
/// Values are rounded to float32 so in-memory bags equal what WEMB files
/// hold.
struct SynthSpec {
    int n_patients = 152;
    double positive_fraction = 0.73;
    int bags_per_patient_min = 1;
    int bags_per_patient_max = 1;
    int instances_min = 200;
    int instances_max = 800;
    std::vector<std::string> extractor_names{"synth_a", "synth_b"};
    std::vector<int> extractor_dims{512, 384};
    double signal_rate = 0.1;
    double offset_norm = 2.0;
    /// Number of coordinates carrying the offset, split evenly across
    /// extractor blocks; 0 spreads it over every coordinate.
    int signal_coordinates = 0;
    double noise = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    /// round(n_patients * positive_fraction), clamped to [1, n_patients - 1].
    int positive_count() const;
    int fused_dim() const;
    std::vector<std::pair<std::string, std::string>> to_key_values() const;
    std::string hash() const;
};

void apply_key_values(SynthSpec& spec, const std::map<std::string, std::string>& values);

struct SyntheticDataset {
    std::vector<Bag> bags;
    std::vector<std::vector<bool>> signal;  // per bag, per instance
    FeatureLayout layout;
    Eigen::VectorXd offset;
};

SyntheticDataset generate_synthetic(const SynthSpec& spec);

/// Writes WEMB files and sidecars under `<dir>/embeddings/` and the dataset
/// manifest `<dir>/dataset.json`. Returns the manifest path.
std::filesystem::path write_synthetic(const SyntheticDataset& data, const SynthSpec& spec,
                                      const std::filesystem::path& dir);

}  // namespace milpath
