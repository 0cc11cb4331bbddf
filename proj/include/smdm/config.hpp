#pragma once

// Run configuration: one human-readable JSON file plus dotted-path flag
// overrides.  A run is reproducible byte-for-byte from (config, seed).

#include <cstdint>
#include <string>

#include "json.hpp"
#include "smdm/denoiser.hpp"

namespace smdm {

struct ScheduleConfig {
  std::string kind = "cosine";
  int steps = 50;  // T
};

struct TrainConfig {
  double lr = 1e-3;
  int batch = 8;
  int steps = 2000;
  double mask_noise = 0.05;  // reduction-rate noise half-width
  int checkpoint_every = 500;
};

struct SampleConfig {
  double gamma = 0.1;  // dynamic mask update threshold fraction
  bool clamp_x0 = true;
  double clamp_limit = 3.0;  // in normalized units
};

struct DataConfig {
  int n_per_class = 10;
  int frames = 64;
  double noise_sigma = 0.3;
};

struct RunConfig {
  uint64_t seed = 1;
  std::string dataset = "out/dataset";
  std::string out_dir = "out";
  DenoiserConfig model;
  ScheduleConfig schedule;
  TrainConfig train;
  SampleConfig sample;
  DataConfig data;

  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& cfg);
// Starts from defaults; unknown keys are config errors.
RunConfig config_from_json(const nlohmann::json& j);

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

// "model.d_model=128" style overrides applied onto the JSON form; the value
// is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& key_eq_value);

// FNV-1a over the canonical serialization, as 16 hex chars.
std::string config_hash(const RunConfig& cfg);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace smdm
