#include "milpath/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "milpath/error.hpp"

namespace milpath {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) {
        throw ConfigError("invalid value '" + value + "' for " + key);
    }
    return out;
}

bool is_extractor_key(const std::string& key) { return key == "extractors" || key.rfind("extractor.", 0) == 0; }

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        }
        if (!out.emplace(key, trim(line.substr(eq + 1))).second) {
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
    }
    return out;
}

std::map<std::string, std::string> load_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_key_values(buf.str());
}

int parse_int(const std::string& key, const std::string& value) { return parse_number<int>(key, value); }
std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    return parse_number<std::uint64_t>(key, value);
}
double parse_double(const std::string& key, const std::string& value) { return parse_number<double>(key, value); }

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on" || value == "yes") {
        return true;
    }
    if (value == "false" || value == "0" || value == "off" || value == "no") {
        return false;
    }
    throw ConfigError("invalid boolean '" + value + "' for " + key);
}

std::vector<std::string> parse_name_list(const std::string& value) {
    std::vector<std::string> out;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const auto& item : parse_name_list(value)) {
        out.push_back(parse_int(key, item));
    }
    return out;
}

void apply_key_values(TrainConfig& c, const std::map<std::string, std::string>& values) {
    for (const auto& [key, value] : values) {
        if (is_extractor_key(key)) {
            continue;
        }
        if (key == "learning_rate") c.learning_rate = parse_double(key, value);
        else if (key == "epochs") c.epochs = parse_int(key, value);
        else if (key == "optimizer") c.optimizer = value;
        else if (key == "beta1") c.beta1 = parse_double(key, value);
        else if (key == "beta2") c.beta2 = parse_double(key, value);
        else if (key == "epsilon") c.epsilon = parse_double(key, value);
        else if (key == "seed") c.seed = parse_u64(key, value);
        else if (key == "patches_per_bag") c.patches_per_bag = parse_u64(key, value);
        else if (key == "k") c.k = parse_int(key, value);
        else if (key == "class_weighting") c.class_weighting = parse_bool(key, value);
        else if (key == "fusion") c.fusion = parse_fusion_mode(value);
        else if (key == "attention_dim") c.attention_dim = parse_int(key, value);
        else if (key == "head_widths") c.head_widths = parse_int_list(key, value);
        else if (key == "fusion_dim") c.fusion_dim = parse_int(key, value);
        else if (key == "fusion_attention_dim") c.fusion_attention_dim = parse_int(key, value);
        else if (key == "threshold") c.threshold = parse_double(key, value);
        else if (key == "bag_level") c.bag_level = parse_bag_level(value);
        else throw ConfigError("unknown training config key '" + key + "'");
    }
}

TrainConfig train_config_from(const std::map<std::string, std::string>& values) {
    TrainConfig c;
    apply_key_values(c, values);
    c.validate();
    return c;
}

std::vector<ExtractorSpec> default_extractors() {
    return {{"synth_a", 512, ExtractorKind::synthetic, 1}, {"synth_b", 384, ExtractorKind::synthetic, 2}};
}

std::vector<ExtractorSpec> extractors_from(const std::map<std::string, std::string>& values) {
    const auto it = values.find("extractors");
    if (it == values.end()) {
        return default_extractors();
    }
    std::vector<ExtractorSpec> out;
    for (const auto& name : parse_name_list(it->second)) {
        ExtractorSpec spec;
        spec.name = name;
        const auto prefix = "extractor." + name + ".";
        if (const auto k = values.find(prefix + "kind"); k != values.end()) {
            spec.kind = parse_extractor_kind(k->second);
        }
        if (const auto d = values.find(prefix + "dim"); d != values.end()) {
            spec.dim = parse_int(d->first, d->second);
        }
        if (const auto s = values.find(prefix + "seed"); s != values.end()) {
            spec.seed = parse_u64(s->first, s->second);
        }
        out.push_back(spec);
    }
    for (const auto& [key, value] : values) {
        if (key.rfind("extractor.", 0) == 0) {
            const auto name = key.substr(10, key.find('.', 10) - 10);
            const bool listed = std::any_of(out.begin(), out.end(), [&](const auto& s) { return s.name == name; });
            if (!listed) {
                throw ConfigError("key '" + key + "' names an extractor missing from 'extractors'");
            }
        }
    }
    validate_extractors(out);
    return out;
}

}  // namespace milpath
