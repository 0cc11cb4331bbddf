#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "smdm/commands.hpp"

namespace {

// Builds the effective config: file (if given), then --set overrides, then
// the direct --seed/--out flags.  Flags always win.
smdm::RunConfig resolve_config(const std::string& config_path,
                               const std::vector<std::string>& overrides,
                               const std::string& seed_str, const std::string& out_dir) {
  nlohmann::json j = config_path.empty()
                         ? smdm::config_to_json(smdm::RunConfig{})
                         : smdm::config_to_json(smdm::load_config(config_path));
  for (const auto& kv : overrides) smdm::apply_override(j, kv);
  if (!seed_str.empty()) j["seed"] = std::stoull(seed_str);
  if (!out_dir.empty()) j["out_dir"] = out_dir;
  smdm::RunConfig cfg = smdm::config_from_json(j);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse keyframe motion diffusion"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, seed_str, out_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "config file (JSON)");
  app.add_option("--seed", seed_str, "root seed (u64)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--set", overrides, "override, e.g. --set model.d_model=32");

  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  CLI::App* train = app.add_subcommand("train", "train the denoiser");

  smdm::SampleArgs sample_args;
  CLI::App* sample = app.add_subcommand("sample", "sample motions from a checkpoint");
  sample->add_option("--checkpoint", sample_args.checkpoint, "checkpoint base path")
      ->required();
  sample->add_option("--class", sample_args.class_name, "motion class name or 'uncond'")
      ->required();
  sample->add_option("--count", sample_args.count, "number of sequences");
  sample->add_flag("--dump-masks", sample_args.dump_masks,
                   "write the mask used at every step");

  smdm::EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "compute metrics for a sample set");
  eval->add_option("--samples", eval_args.samples, "samples dataset base path")
      ->required();
  eval->add_option("--checkpoint", eval_args.checkpoint,
                   "checkpoint base path (hashes its config into the CSV)");
  eval->add_option("--run-id", eval_args.run_id, "run id for the CSV rows");

  smdm::KeyframesArgs kf_args;
  CLI::App* keyframes = app.add_subcommand("keyframes", "inspect keyframe selection");
  keyframes->add_option("--motion", kf_args.motion_file, "motion dataset base path")
      ->required();
  keyframes->add_option("--rate", kf_args.rate, "reduction rate in [0,1)");
  keyframes->add_option("--index", kf_args.index, "sequence index within the file");
  keyframes->add_option("--joints", kf_args.joints, "joint indices for the overlay");
  keyframes->add_option("--out-json", kf_args.out_json, "output JSON path");
  keyframes->add_option("--out-svg", kf_args.out_svg, "output SVG path");

  smdm::PlotArgs plot_args;
  CLI::App* plot = app.add_subcommand("plot", "render metric/loss charts");
  plot->add_option("csvs", plot_args.csv_paths, "metrics or loss CSV files")
      ->required();
  plot->add_option("--out", plot_args.out_dir, "output directory for SVGs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed() || train->parsed() || sample->parsed() || eval->parsed()) {
      smdm::RunConfig cfg = resolve_config(config_path, overrides, seed_str, out_dir);
      if (gen->parsed()) smdm::cmd_gen_data(cfg);
      if (train->parsed()) smdm::cmd_train(cfg);
      if (sample->parsed()) smdm::cmd_sample(cfg, sample_args);
      if (eval->parsed()) smdm::cmd_eval(cfg, eval_args);
    } else if (keyframes->parsed()) {
      smdm::cmd_keyframes(kf_args);
    } else if (plot->parsed()) {
      smdm::cmd_plot(plot_args);
    }
  } catch (const smdm::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const smdm::io_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const smdm::numeric_error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
