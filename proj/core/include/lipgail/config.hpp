#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "lipgail/gail.hpp"

namespace lipgail {

struct EvalConfig {
  std::vector<double> noise_levels = {0.0, 0.05, 0.1, 0.2, 0.3, 0.5};
  int episodes_per_level = 20;
  NoiseKind noise_kind = NoiseKind::Gaussian;
  std::vector<double> ellc_radii = {0.05, 0.1, 0.2};
};

struct PathsConfig {
  std::string demos;
  std::string out_dir;
};

// env and seed are stored once on TrainConfig; the JSON schema hoists them to
// the top level so a config file states them exactly once
struct ExperimentConfig {
  TrainConfig train;
  EvalConfig eval;
  PathsConfig paths;
};

std::string noise_kind_name(NoiseKind k);
NoiseKind noise_kind_from_name(const std::string& name);
std::string norm_name(Norm n);
Norm norm_from_name(const std::string& name);
std::string reg_refresh_name(RegRefresh r);
RegRefresh reg_refresh_from_name(const std::string& name);
std::string perturb_init_name(PerturbInit i);
PerturbInit perturb_init_from_name(const std::string& name);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
// strict: unknown keys rejected with their full path; omitted keys keep defaults
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& path = "train");

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

// parse errors surface as ConfigError with line/column
nlohmann::json parse_json_text(const std::string& text, const std::string& origin);
nlohmann::json parse_json_file(const std::string& path);

// fnv1a64 over the canonical (sorted-key) dump
std::string config_hash(const TrainConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

// full TrainConfig plus config_hash and version_tag
void write_config_snapshot(const std::string& path, const TrainConfig& cfg);

}  // namespace lipgail
