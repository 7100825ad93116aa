#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "milpath/config.hpp"
#include "milpath/dataset.hpp"
#include "milpath/embedding.hpp"
#include "milpath/error.hpp"
#include "milpath/extractor.hpp"
#include "milpath/image_io.hpp"
#include "milpath/rng.hpp"
#include "milpath/synth.hpp"
#include "milpath/tiling.hpp"
#include "milpath/training.hpp"

namespace milpath::cli {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> config_values(const std::string& path) {
    return path.empty() ? std::map<std::string, std::string>{} : load_key_values(path);
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> signal_rate;
    std::optional<int> patients;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
    SynthSpec spec;
    apply_key_values(spec, config_values(a.config));
    if (a.seed) spec.seed = *a.seed;
    if (a.signal_rate) spec.signal_rate = *a.signal_rate;
    if (a.patients) spec.n_patients = *a.patients;
    spec.validate();
    const auto data = generate_synthetic(spec);
    const auto manifest = write_synthetic(data, spec, a.out);
    out << manifest.string() << '\n';
}

// ---- tile -------------------------------------------------------------------

struct TileArgs {
    std::vector<std::string> images;
    std::string config;
    std::string out;
    std::optional<int> patch_size;
    std::optional<double> min_coverage;
};

void cmd_tile(const TileArgs& a, std::ostream& out) {
    TilingParams params;
    const auto kv = config_values(a.config);
    if (auto it = kv.find("patch_size"); it != kv.end()) params.patch_size = parse_int(it->first, it->second);
    if (auto it = kv.find("min_coverage"); it != kv.end()) params.min_coverage = parse_double(it->first, it->second);
    if (a.patch_size) params.patch_size = *a.patch_size;
    if (a.min_coverage) params.min_coverage = *a.min_coverage;
    if (params.patch_size < 1) throw ConfigError("patch_size must be >= 1");
    if (!(params.min_coverage >= 0.0 && params.min_coverage <= 1.0)) {
        throw ConfigError("min_coverage must lie in [0, 1]");
    }
    for (const auto& image_path : a.images) {
        const auto image = read_image(image_path);
        const auto mask = segment_tissue(image);
        const auto patches = extract_patches(image, mask, params);
        const auto slide_id = fs::path(image_path).stem().string();
        const auto manifest = make_patch_manifest(slide_id, image_path, image, mask, params, "20x", patches);
        const auto target = fs::path(a.out) / (slide_id + ".patches.json");
        fs::create_directories(a.out);
        save_patch_manifest(target, manifest);
        out << target.string() << '\t' << patches.size() << '\n';
    }
}

// ---- embed ------------------------------------------------------------------

struct EmbedArgs {
    std::vector<std::string> manifests;
    std::string config;
    std::string out;
    std::string extractors;
    std::string labels;
};

struct LabelRow {
    std::string patient_id;
    int label = 0;
};

// CSV with header slide_id,patient_id,label.
std::map<std::string, LabelRow> read_labels(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    std::map<std::string, LabelRow> rows;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line != "slide_id,patient_id,label") throw FormatError("labels header must be slide_id,patient_id,label");
            continue;
        }
        const auto fields = parse_name_list(line);
        if (fields.size() != 3) throw FormatError("bad labels row: " + line);
        const int label = parse_int("label", fields[2]);
        if (label != 0 && label != 1) throw DataError("label must be 0 or 1: " + line);
        if (!rows.emplace(fields[0], LabelRow{fields[1], label}).second) {
            throw DataError("duplicate slide in labels: " + fields[0]);
        }
    }
    return rows;
}

fs::path resolve_source(const std::string& source, const fs::path& manifest_path) {
    fs::path p(source);
    if (p.is_relative() && !fs::exists(p)) {
        const auto beside = manifest_path.parent_path() / p;
        if (fs::exists(beside)) return beside;
    }
    return p;
}

void cmd_embed(const EmbedArgs& a, std::ostream& out) {
    const auto kv = config_values(a.config);
    auto specs = extractors_from(kv);
    if (!a.extractors.empty()) {
        const auto wanted = parse_name_list(a.extractors);
        std::vector<ExtractorSpec> picked;
        for (const auto& name : wanted) {
            auto it = std::find_if(specs.begin(), specs.end(), [&](const auto& s) { return s.name == name; });
            if (it == specs.end()) throw ConfigError("unknown extractor: " + name);
            picked.push_back(*it);
        }
        specs = picked;
    }
    validate_extractors(specs);
    std::vector<SyntheticExtractor> extractors;
    for (const auto& s : specs) {
        if (s.kind != ExtractorKind::synthetic) {
            throw ConfigError("extractor " + s.name + " is imported; its WEMB files are supplied, not computed");
        }
        extractors.emplace_back(s);
    }

    std::optional<std::map<std::string, LabelRow>> labels;
    if (!a.labels.empty()) labels = read_labels(a.labels);

    const fs::path out_dir(a.out);
    fs::create_directories(out_dir);
    DatasetManifest dataset;
    for (const auto& s : specs) {
        dataset.extractor_names.push_back(s.name);
        dataset.extractor_dims.push_back(s.dim);
    }
    std::ostringstream hash_input;
    for (const auto& s : specs) hash_input << s.name << ':' << to_string(s.kind) << ':' << s.dim << ':' << s.seed << ';';
    dataset.config_hash = [&] {
        std::ostringstream h;
        h << std::hex << fnv1a64(hash_input.str());
        return h.str();
    }();

    for (const auto& manifest_path : a.manifests) {
        const auto manifest = load_patch_manifest(manifest_path);
        const auto image = read_image(resolve_source(manifest.source, manifest_path));
        if (image.width() != manifest.width || image.height() != manifest.height) {
            throw DataError("image size differs from patch manifest: " + manifest.source);
        }
        SlideEmbeddingSet set;
        set.slide_id = manifest.slide_id;
        const auto n = static_cast<Eigen::Index>(manifest.patches.size());
        for (std::size_t j = 0; j < specs.size(); ++j) {
            set.extractors.push_back({specs[j].name, Eigen::MatrixXd(n, specs[j].dim)});
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& e = manifest.patches[static_cast<std::size_t>(i)];
            set.patch_keys.push_back({static_cast<std::uint32_t>(e.row), static_cast<std::uint32_t>(e.col)});
            const auto patch = crop(image, e.origin_x, e.origin_y, manifest.patch_size);
            for (std::size_t j = 0; j < specs.size(); ++j) {
                set.extractors[j].values.row(i) = extractors[j](patch).transpose();
            }
        }
        const auto sidecar = save_slide_embeddings(out_dir, set);
        out << sidecar.string() << '\t' << n << '\n';
        if (labels) {
            const auto it = labels->find(manifest.slide_id);
            if (it == labels->end()) throw DataError("no label for slide " + manifest.slide_id);
            dataset.slides.push_back({it->second.patient_id, manifest.slide_id, it->second.label,
                                      fs::relative(sidecar, out_dir).generic_string(),
                                      fs::absolute(manifest_path).lexically_normal().generic_string()});
        }
    }
    if (labels) {
        const auto path = out_dir / "dataset.json";
        save_dataset_manifest(path, dataset);
        out << path.string() << '\n';
    }
}

// ---- cv ---------------------------------------------------------------------

struct CvArgs {
    std::string manifest;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> cap;
    std::optional<int> k;
    std::string fusion;
    std::string extractors;
};

void cmd_cv(const CvArgs& a, std::ostream& out) {
    auto config = train_config_from(config_values(a.config));
    if (a.seed) config.seed = *a.seed;
    if (a.cap) config.patches_per_bag = *a.cap;
    if (a.k) config.k = *a.k;
    if (!a.fusion.empty()) config.fusion = parse_fusion_mode(a.fusion);
    config.validate();

    const auto wanted = a.extractors.empty() ? std::vector<std::string>{} : parse_name_list(a.extractors);
    const auto data = load_bags(a.manifest, wanted);
    auto result = cross_validate(data.bags, data.layout, config);
    result.report.provenance.emplace_back("dataset_hash", load_dataset_manifest(a.manifest).config_hash);

    const fs::path dir(a.out);
    write_text(dir / "report.json", to_json(result.report));
    write_text(dir / "report.csv", to_csv(result.report));
    write_text(dir / "predictions.csv", predictions_csv(result.predictions));
    const auto& auc = result.report.stats("roc_auc");
    out << "roc_auc " << auc.mean << " (" << auc.std << ")\n";
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string out;
};

void cmd_report(const ReportArgs& a, std::ostream& out) {
    std::vector<std::pair<std::string, MetricsReport>> reports;
    for (const auto& input : a.inputs) {
        std::string label;
        std::string path = input;
        if (const auto eq = input.find('='); eq != std::string::npos) {
            label = input.substr(0, eq);
            path = input.substr(eq + 1);
        } else {
            const fs::path p(input);
            label = p.has_parent_path() ? p.parent_path().filename().string() : p.stem().string();
        }
        reports.emplace_back(label, report_from_json(read_text(path)));
    }
    const auto table = comparison_csv(reports);
    if (a.out.empty()) {
        out << table;
    } else {
        write_text(a.out, table);
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Whole-slide MIL pipeline"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a planted-signal cohort");
    s->add_option("--config", synth.config, "key = value file with generator settings");
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--seed", synth.seed);
    s->add_option("--signal-rate", synth.signal_rate, "Fraction of signal instances in positive bags");
    s->add_option("--patients", synth.patients);

    TileArgs tile;
    auto* t = app.add_subcommand("tile", "Segment tissue and list patches");
    t->add_option("images", tile.images, "PNG or TIFF rasters")->required();
    t->add_option("--config", tile.config);
    t->add_option("--out", tile.out)->required();
    t->add_option("--patch-size", tile.patch_size);
    t->add_option("--min-coverage", tile.min_coverage);

    EmbedArgs embed;
    auto* e = app.add_subcommand("embed", "Embed listed patches with each extractor");
    e->add_option("manifests", embed.manifests, "Patch manifests written by tile")->required();
    e->add_option("--config", embed.config);
    e->add_option("--out", embed.out)->required();
    e->add_option("--extractors", embed.extractors, "Comma-separated subset of configured extractors");
    e->add_option("--labels", embed.labels, "CSV slide_id,patient_id,label; also writes dataset.json");

    CvArgs cv;
    auto* c = app.add_subcommand("cv", "k-fold cross-validation");
    c->add_option("manifest", cv.manifest, "dataset.json")->required();
    c->add_option("--config", cv.config);
    c->add_option("--out", cv.out)->required();
    c->add_option("--seed", cv.seed);
    c->add_option("--cap", cv.cap, "Patches per bag during training");
    c->add_option("--k", cv.k);
    c->add_option("--fusion", cv.fusion)->check(CLI::IsMember({"concat", "attention"}));
    c->add_option("--extractors", cv.extractors, "Comma-separated extractor subset, in fusion order");

    ReportArgs report;
    auto* r = app.add_subcommand("report", "Tabulate several reports");
    r->add_option("reports", report.inputs, "[label=]report.json")->required();
    r->add_option("--out", report.out);

    std::vector<const char*> argv{"milpath"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& ex) {
        return app.exit(ex, out, err);
    }

    try {
        if (s->parsed()) cmd_synth(synth, out);
        if (t->parsed()) cmd_tile(tile, out);
        if (e->parsed()) cmd_embed(embed, out);
        if (c->parsed()) cmd_cv(cv, out);
        if (r->parsed()) cmd_report(report, out);
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace milpath::cli
