#pragma once

// CLI entry points, callable in-process so tests can drive them directly.
// Commands throw config_error / io_error / numeric_error; the binary in
// tools/ maps those to exit codes 2 / 3 / 4.

#include <functional>
#include <string>
#include <vector>

#include "smdm/config.hpp"

namespace smdm {

struct SampleArgs {
  std::string checkpoint;   // checkpoint base path (without .json/.bin)
  std::string class_name;   // a motion class name, or "uncond"
  int count = 1;
  bool dump_masks = false;
};

struct EvalArgs {
  std::string samples;  // samples dataset base path
  std::string checkpoint;  // optional; hashes the training config into the CSV
  std::string run_id;      // defaults to the samples file stem
};

struct KeyframesArgs {
  std::string motion_file;  // dataset base path
  double rate = 0.8;
  int index = 0;
  std::vector<int> joints;  // empty = all joints
  std::string out_json;
  std::string out_svg;
};

struct PlotArgs {
  std::vector<std::string> csv_paths;
  std::string out_dir;
};

void cmd_gen_data(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_sample(const RunConfig& cfg, const SampleArgs& args);
void cmd_eval(const RunConfig& cfg, const EvalArgs& args);
void cmd_keyframes(const KeyframesArgs& args);
void cmd_plot(const PlotArgs& args);

// SMDM_THREADS, default 1.  Work is split by item with per-item seeds, so
// the thread count never changes results.
int worker_count();
void parallel_for(int n, const std::function<void(int)>& fn);

void append_metrics_row(const std::string& csv_path, const std::string& run_id,
                        const std::string& metric, double value, uint64_t seed,
                        const std::string& cfg_hash);

}  // namespace smdm
