#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtda/trainer.hpp"

namespace mtda {

// Lossless JSON form of a TrainConfig (used inside checkpoints and
// reports). config_from_json rejects unknown keys with ConfigError.
nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& doc);

// Everything a CLI run needs. Parsed from an INI document:
//
//   [train]   every TrainConfig field by name (tau/gamma/alpha included)
//   [data]    source, targets (comma list), eval (optional comma list)
//   [run]     output_dir, replications
//
// Relative data paths resolve against the config file's directory.
struct RunManifest {
  std::filesystem::path config_path;
  TrainConfig config;
  std::filesystem::path source;
  std::vector<std::filesystem::path> targets;
  std::vector<std::filesystem::path> eval;  // empty: each target's eval split
  std::filesystem::path output_dir = "runs/latest";
  std::size_t replications = 3;
};

RunManifest parse_manifest(const std::string& ini_text, const std::filesystem::path& base_dir = {});
RunManifest load_manifest(const std::filesystem::path& path);
// Fully resolved INI echo; parse_manifest(manifest_to_ini(m)) == m.
std::string manifest_to_ini(const RunManifest& manifest);

// Individual key assignment, shared by the file parser and CLI overrides.
void apply_train_key(TrainConfig& config, const std::string& key, const std::string& value);

std::string format_double(double v);

}  // namespace mtda
