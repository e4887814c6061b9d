#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsim/orchestrator.hpp"

namespace fedsim {

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// Splits `key = value` lines. '#' starts a comment; blank lines are ignored.
// Throws ConfigError on malformed lines or duplicate keys.
std::vector<ConfigEntry> read_config_entries(std::string_view text);

// Applies one entry and re-validates; errors carry the entry's line.
void apply_config_entry(ExperimentConfig& config, const ConfigEntry& entry);

ExperimentConfig parse_config(std::string_view text);

// Canonical `key = value` rendering; parse_config(config_to_text(c)) == c.
std::string config_to_text(const ExperimentConfig& config);

nlohmann::json config_to_json(const ExperimentConfig& config);

}  // namespace fedsim
