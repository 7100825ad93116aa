#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <fstream>

#include "milpath/config.hpp"
#include "milpath/dataset.hpp"
#include "milpath/error.hpp"
#include "milpath/synth.hpp"

using namespace milpath;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("milpath_data_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

SynthSpec small_spec() {
    SynthSpec s;
    s.n_patients = 12;
    s.positive_fraction = 0.5;
    s.bags_per_patient_max = 2;
    s.instances_min = 10;
    s.instances_max = 30;
    s.extractor_dims = {6, 4};
    s.seed = 5;
    return s;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("key-value config parsing") {
    const auto kv = parse_key_values("# comment\nlearning_rate = 0.01\n\n  epochs=3  # trailing\nhead_widths = 64, 32\n");
    CHECK(kv.at("learning_rate") == "0.01");
    CHECK(kv.at("epochs") == "3");
    const auto c = train_config_from(kv);
    CHECK(c.learning_rate == 0.01);
    CHECK(c.epochs == 3);
    CHECK(c.head_widths == std::vector<int>{64, 32});

    CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_key_values("just words\n"), ConfigError);
    CHECK_THROWS_AS(parse_int("k", "4.5"), ConfigError);
    CHECK_THROWS_AS(parse_double("lr", "abc"), ConfigError);
    CHECK_THROWS_AS(parse_bool("b", "maybe"), ConfigError);
    CHECK(parse_bool("b", "true"));
    CHECK(parse_name_list(" a, b ,c") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("extractor configuration") {
    const auto defaults = extractors_from({});
    REQUIRE(defaults.size() == 2);
    CHECK(defaults[0].name == "synth_a");
    CHECK(defaults[0].dim == 512);
    CHECK(defaults[1].dim == 384);

    const auto custom = extractors_from(parse_key_values(
        "extractors = x, y\nextractor.x.dim = 16\nextractor.x.seed = 9\nextractor.y.kind = imported\n"));
    REQUIRE(custom.size() == 2);
    CHECK(custom[0].dim == 16);
    CHECK(custom[0].seed == 9);
    CHECK(custom[1].kind == ExtractorKind::imported);
    CHECK_THROWS_AS(extractors_from(parse_key_values("extractors = x\nextractor.x.kind = magic\n")), ConfigError);
    CHECK_THROWS_AS(extractors_from(parse_key_values("extractors = x, x\n")), ConfigError);
}

TEST_CASE("synthetic cohort shape") {
    const SynthSpec spec;
    CHECK(spec.positive_count() == 111);
    CHECK(spec.fused_dim() == 896);

    auto s = small_spec();
    const auto data = generate_synthetic(s);
    CHECK(data.layout.total() == 10);
    std::set<std::string> patients;
    for (std::size_t b = 0; b < data.bags.size(); ++b) {
        const auto& bag = data.bags[b];
        patients.insert(bag.patient_id);
        CHECK(bag.size() >= 10);
        CHECK(bag.size() <= 30);
        CHECK(bag.features.cols() == 10);
        const auto planted = std::count(data.signal[b].begin(), data.signal[b].end(), true);
        if (bag.label == 1) {
            CHECK(planted == std::lround(s.signal_rate * static_cast<double>(bag.size())));
        } else {
            CHECK(planted == 0);
        }
        for (Eigen::Index i = 0; i < bag.features.size(); ++i) {
            const double v = bag.features.data()[i];
            CHECK(static_cast<double>(static_cast<float>(v)) == v);
        }
    }
    CHECK(patients.size() == 12);
    CHECK(data.offset.norm() == doctest::Approx(s.offset_norm).epsilon(1e-6));
    CHECK(data.offset.head(6).squaredNorm() == doctest::Approx(data.offset.tail(4).squaredNorm()).epsilon(1e-6));

    const auto again = generate_synthetic(s);
    CHECK(again.bags[3].features == data.bags[3].features);
    s.seed = 6;
    CHECK(generate_synthetic(s).offset != data.offset);
}

TEST_CASE("sparse offset support") {
    auto s = small_spec();
    s.signal_coordinates = 5;
    const auto data = generate_synthetic(s);
    CHECK((data.offset.head(6).array() != 0.0).count() == 3);
    CHECK((data.offset.tail(4).array() != 0.0).count() == 2);
    CHECK(data.offset.norm() == doctest::Approx(s.offset_norm).epsilon(1e-12));
    s.signal_coordinates = 9;
    CHECK_THROWS_AS(generate_synthetic(s), ConfigError);
}

TEST_CASE("null signal plants nothing") {
    auto s = small_spec();
    s.signal_rate = 0.0;
    const auto data = generate_synthetic(s);
    for (const auto& mask : data.signal) {
        CHECK(std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }));
    }
}

TEST_CASE("written cohort loads back bit-exact") {
    const auto dir = scratch("roundtrip");
    const auto s = small_spec();
    const auto data = generate_synthetic(s);
    const auto manifest = write_synthetic(data, s, dir);
    const auto loaded = load_bags(manifest);
    REQUIRE(loaded.bags.size() == data.bags.size());
    CHECK(loaded.layout.names == data.layout.names);
    for (std::size_t i = 0; i < data.bags.size(); ++i) {
        CHECK(loaded.bags[i].slide_id == data.bags[i].slide_id);
        CHECK(loaded.bags[i].patient_id == data.bags[i].patient_id);
        CHECK(loaded.bags[i].label == data.bags[i].label);
        CHECK(loaded.bags[i].features == data.bags[i].features);
    }

    const auto only_b = load_bags(manifest, {"synth_b"});
    CHECK(only_b.layout.total() == 4);
    CHECK(only_b.bags[0].features == data.bags[0].features.rightCols(4));
    CHECK_THROWS_AS(load_bags(manifest, {"nope"}), ConfigError);

    fs::remove(dir / "embeddings" / (data.bags[0].slide_id + ".json"));
    CHECK_THROWS_AS(load_dataset_manifest(manifest), IoError);
    fs::remove_all(dir);
}

TEST_CASE("dataset manifest validation") {
    DatasetManifest m;
    m.extractor_names = {"a"};
    m.extractor_dims = {3};
    m.slides = {{"p1", "s1", 1, "e/s1.json", ""}, {"p2", "s2", 0, "e/s2.json", ""}};
    const auto back = dataset_manifest_from_json(to_json(m));
    CHECK(back.slides.size() == 2);
    CHECK(back.slides[1].label == 0);

    auto dup = m;
    dup.slides[1].slide_id = "s1";
    CHECK_THROWS(dataset_manifest_from_json(to_json(dup)));
    auto bad = m;
    bad.slides[0].label = 2;
    CHECK_THROWS(dataset_manifest_from_json(to_json(bad)));
    CHECK_THROWS(dataset_manifest_from_json("{not json"));
}

}  // TEST_SUITE
