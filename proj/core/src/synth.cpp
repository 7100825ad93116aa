#include "milpath/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "milpath/config.hpp"
#include "milpath/dataset.hpp"
#include "milpath/embedding.hpp"
#include "milpath/error.hpp"
#include "milpath/rng.hpp"

namespace milpath {
namespace {

std::string patient_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "P%04d", i);
    return buf;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += (i ? "," : "") + items[i];
    }
    return out;
}

std::string repr(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void SynthSpec::validate() const {
    if (n_patients < 2) {
        throw ConfigError("synth: need at least 2 patients");
    }
    if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
        throw ConfigError("synth: positive_fraction must lie in (0, 1)");
    }
    if (bags_per_patient_min < 1 || bags_per_patient_max < bags_per_patient_min) {
        throw ConfigError("synth: invalid bags-per-patient range");
    }
    if (instances_min < 1 || instances_max < instances_min) {
        throw ConfigError("synth: invalid instance-count range");
    }
    if (extractor_dims.empty() || extractor_names.size() != extractor_dims.size()) {
        throw ConfigError("synth: extractor names and dims must be non-empty and parallel");
    }
    for (int d : extractor_dims) {
        if (d < 1) {
            throw ConfigError("synth: extractor dims must be >= 1");
        }
    }
    if (!(signal_rate >= 0.0 && signal_rate <= 1.0)) {
        throw ConfigError("synth: signal_rate must lie in [0, 1]");
    }
    if (signal_coordinates < 0) {
        throw ConfigError("synth: signal_coordinates must be >= 0");
    }
    const auto n = static_cast<int>(extractor_dims.size());
    for (int d : extractor_dims) {
        if ((signal_coordinates + n - 1) / n > d) {
            throw ConfigError("synth: signal_coordinates exceed an extractor's width");
        }
    }
    if (!(offset_norm >= 0.0) || !(noise >= 0.0)) {
        throw ConfigError("synth: offset_norm and noise must be >= 0");
    }
}

int SynthSpec::positive_count() const {
    const auto n = static_cast<int>(std::lround(n_patients * positive_fraction));
    return std::clamp(n, 1, n_patients - 1);
}

int SynthSpec::fused_dim() const { return std::accumulate(extractor_dims.begin(), extractor_dims.end(), 0); }

std::vector<std::pair<std::string, std::string>> SynthSpec::to_key_values() const {
    std::vector<std::string> dims;
    for (int d : extractor_dims) {
        dims.push_back(std::to_string(d));
    }
    return {{"n_patients", std::to_string(n_patients)},
            {"positive_fraction", repr(positive_fraction)},
            {"bags_per_patient_min", std::to_string(bags_per_patient_min)},
            {"bags_per_patient_max", std::to_string(bags_per_patient_max)},
            {"instances_min", std::to_string(instances_min)},
            {"instances_max", std::to_string(instances_max)},
            {"extractor_names", join(extractor_names)},
            {"extractor_dims", join(dims)},
            {"signal_rate", repr(signal_rate)},
            {"offset_norm", repr(offset_norm)},
            {"signal_coordinates", std::to_string(signal_coordinates)},
            {"noise", repr(noise)},
            {"seed", std::to_string(seed)}};
}

std::string SynthSpec::hash() const {
    std::string canonical;
    for (const auto& [k, v] : to_key_values()) {
        canonical += k + "=" + v + "\n";
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
    return buf;
}

void apply_key_values(SynthSpec& s, const std::map<std::string, std::string>& values) {
    for (const auto& [key, value] : values) {
        if (key == "n_patients") s.n_patients = parse_int(key, value);
        else if (key == "positive_fraction") s.positive_fraction = parse_double(key, value);
        else if (key == "bags_per_patient_min") s.bags_per_patient_min = parse_int(key, value);
        else if (key == "bags_per_patient_max") s.bags_per_patient_max = parse_int(key, value);
        else if (key == "instances_min") s.instances_min = parse_int(key, value);
        else if (key == "instances_max") s.instances_max = parse_int(key, value);
        else if (key == "extractor_names") s.extractor_names = parse_name_list(value);
        else if (key == "extractor_dims") s.extractor_dims = parse_int_list(key, value);
        else if (key == "signal_rate") s.signal_rate = parse_double(key, value);
        else if (key == "offset_norm") s.offset_norm = parse_double(key, value);
        else if (key == "signal_coordinates") s.signal_coordinates = parse_int(key, value);
        else if (key == "noise") s.noise = parse_double(key, value);
        else if (key == "seed") s.seed = parse_u64(key, value);
        else throw ConfigError("unknown synth config key '" + key + "'");
    }
}

SyntheticDataset generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    SyntheticDataset data;
    data.layout = {spec.extractor_names, spec.extractor_dims};
    const int m = spec.fused_dim();

    // Offset: per extractor block, either a Gaussian direction or (when
    // signal_coordinates > 0) a random-sign constant on that block's share of
    // the signal coordinates. Each block has norm offset_norm / sqrt(n).
    SplitMix64 offset_rng(derive_seed(spec.seed, "offset"));
    data.offset = Eigen::VectorXd::Zero(m);
    const auto n_blocks = static_cast<int>(spec.extractor_dims.size());
    const double block_norm = spec.offset_norm / std::sqrt(static_cast<double>(n_blocks));
    int at = 0;
    for (int b = 0; b < n_blocks; ++b) {
        const int d = spec.extractor_dims[static_cast<std::size_t>(b)];
        auto block = data.offset.segment(at, d);
        if (spec.signal_coordinates == 0) {
            for (int i = 0; i < d; ++i) {
                block[i] = offset_rng.normal();
            }
        } else {
            const int share = spec.signal_coordinates / n_blocks + (b < spec.signal_coordinates % n_blocks ? 1 : 0);
            for (auto i : sample_without_replacement(static_cast<std::size_t>(d), static_cast<std::size_t>(share), offset_rng)) {
                block[static_cast<Eigen::Index>(i)] = offset_rng.below(2) == 0 ? -1.0 : 1.0;
            }
        }
        const double norm = block.norm();
        block *= norm > 0.0 ? block_norm / norm : 0.0;
        at += d;
    }

    std::vector<int> labels(static_cast<std::size_t>(spec.n_patients), 0);
    std::fill_n(labels.begin(), spec.positive_count(), 1);
    SplitMix64 label_rng(derive_seed(spec.seed, "labels"));
    shuffle(labels, label_rng);

    SplitMix64 layout_rng(derive_seed(spec.seed, "layout"));
    std::uint64_t bag_index = 0;
    for (int p = 0; p < spec.n_patients; ++p) {
        const auto span = static_cast<std::uint64_t>(spec.bags_per_patient_max - spec.bags_per_patient_min + 1);
        const int n_bags = spec.bags_per_patient_min + static_cast<int>(layout_rng.below(span));
        for (int b = 0; b < n_bags; ++b, ++bag_index) {
            SplitMix64 rng(derive_seed(spec.seed, "bag", bag_index));
            const auto k_span = static_cast<std::uint64_t>(spec.instances_max - spec.instances_min + 1);
            const int k = spec.instances_min + static_cast<int>(rng.below(k_span));

            Bag bag;
            bag.patient_id = patient_name(p);
            bag.slide_id = bag.patient_id + "_S" + std::to_string(b + 1);
            bag.label = labels[static_cast<std::size_t>(p)];
            bag.features.resize(k, m);
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < m; ++j) {
                    bag.features(i, j) = spec.noise * rng.normal();
                }
            }
            std::vector<bool> signal(static_cast<std::size_t>(k), false);
            if (bag.label == 1) {
                const auto n_signal = static_cast<std::size_t>(std::lround(spec.signal_rate * k));
                for (auto row : sample_without_replacement(static_cast<std::size_t>(k), n_signal, rng)) {
                    bag.features.row(static_cast<Eigen::Index>(row)) += data.offset.transpose();
                    signal[row] = true;
                }
            }
            bag.features = bag.features.cast<float>().cast<double>();
            data.bags.push_back(std::move(bag));
            data.signal.push_back(std::move(signal));
        }
    }
    return data;
}

std::filesystem::path write_synthetic(const SyntheticDataset& data, const SynthSpec& spec,
                                      const std::filesystem::path& dir) {
    const auto emb_dir = dir / "embeddings";
    std::filesystem::create_directories(emb_dir);
    DatasetManifest manifest;
    manifest.extractor_names = data.layout.names;
    manifest.extractor_dims = data.layout.dims;
    manifest.config_hash = spec.hash();
    for (const auto& bag : data.bags) {
        SlideEmbeddingSet set;
        set.slide_id = bag.slide_id;
        for (Eigen::Index i = 0; i < bag.size(); ++i) {
            set.patch_keys.push_back({static_cast<std::uint32_t>(i), 0});
        }
        Eigen::Index offset = 0;
        for (std::size_t j = 0; j < data.layout.names.size(); ++j) {
            const auto d = data.layout.dims[j];
            set.extractors.push_back({data.layout.names[j], bag.features.middleCols(offset, d)});
            offset += d;
        }
        const auto sidecar = save_slide_embeddings(emb_dir, set);
        manifest.slides.push_back(
            {bag.patient_id, bag.slide_id, bag.label, std::filesystem::relative(sidecar, dir).generic_string(), ""});
    }
    const auto path = dir / "dataset.json";
    save_dataset_manifest(path, manifest);
    return path;
}

}  // namespace milpath
