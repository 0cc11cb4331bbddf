#pragma once

// Checkpoints follow the same manifest + blob pattern as datasets: the JSON
// manifest carries the full run config, data stats, and the tensor index
// (name, shape, byte offset); the blob holds raw little-endian f64 values.

#include <string>

#include "smdm/config.hpp"
#include "smdm/denoiser.hpp"
#include "smdm/motion.hpp"

namespace smdm {

struct Checkpoint {
  RunConfig config;
  SkeletonLayout layout;
  double fps = 20.0;
  std::vector<std::string> classes;
  NormStats stats;
  DenoiserParams params;
};

void save_checkpoint(const Checkpoint& ck, const std::string& base_path);
Checkpoint load_checkpoint(const std::string& base_path);

// Throws config_error naming each mismatched field when the caller's model
// config cannot drive this checkpoint's parameters.
void require_compatible(const DenoiserConfig& requested, const Checkpoint& ck);

}  // namespace smdm
