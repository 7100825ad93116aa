#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "milpath/extractor.hpp"
#include "milpath/training.hpp"

namespace milpath {

/// Parses `key = value` lines. '#' starts a comment; blank lines are
/// ignored. Malformed lines and duplicate keys are ConfigError.
std::map<std::string, std::string> parse_key_values(const std::string& text);
std::map<std::string, std::string> load_key_values(const std::filesystem::path& path);

int parse_int(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::vector<int> parse_int_list(const std::string& key, const std::string& value);
std::vector<std::string> parse_name_list(const std::string& value);

/// Defaults overridden by every recognised key; `extractor.*` and
/// `extractors` keys are ignored here so one file can configure both.
TrainConfig train_config_from(const std::map<std::string, std::string>& values);

/// `extractors = a, b` plus `extractor.<name>.{kind,dim,seed}`. Falls back
/// to default_extractors() when no `extractors` key is present.
std::vector<ExtractorSpec> extractors_from(const std::map<std::string, std::string>& values);

/// Two synthetic extractors: synth_a (512-d, seed 1) and synth_b (384-d, seed 2).
std::vector<ExtractorSpec> default_extractors();

}  // namespace milpath
