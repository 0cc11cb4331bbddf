#include "smdm/commands.hpp"

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <thread>

#include "json.hpp"
#include "smdm/checkpoint.hpp"
#include "smdm/dataset_io.hpp"
#include "smdm/diffusion.hpp"
#include "smdm/metrics.hpp"
#include "smdm/svg.hpp"

namespace smdm {

namespace fs = std::filesystem;
using nlohmann::json;

int worker_count() {
  const char* env = std::getenv("SMDM_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory " + dir + ": " + ec.message());
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void append_metrics_row(const std::string& csv_path, const std::string& run_id,
                        const std::string& metric, double value, uint64_t seed,
                        const std::string& cfg_hash) {
  bool fresh = !fs::exists(csv_path);
  std::ofstream out(csv_path, std::ios::app);
  if (!out) throw io_error("cannot write metrics CSV: " + csv_path);
  if (fresh) out << "run_id,metric,value,seed,config_hash\n";
  out << run_id << "," << metric << "," << fmt_double(value) << "," << seed << ","
      << cfg_hash << "\n";
}

// ---- gen-data -------------------------------------------------------------

void cmd_gen_data(const RunConfig& cfg) {
  cfg.validate();
  SkeletonLayout layout;  // desk default: 5 planar joints
  Dataset ds = make_dataset(cfg.data.n_per_class, cfg.data.frames, layout, cfg.seed,
                            cfg.data.noise_sigma);
  save_dataset(ds, cfg.dataset);
  std::printf("dataset: %zu sequences (%d/class, %d frames, D=%d) -> %s.{json,bin}\n",
              ds.sequences.size(), cfg.data.n_per_class, cfg.data.frames,
              layout.dims(), cfg.dataset.c_str());
  std::printf("split: %zu train / %zu val\n", ds.train_idx.size(), ds.val_idx.size());
}

// ---- train ------------------------------------------------------------------

void cmd_train(const RunConfig& cfg) {
  cfg.validate();
  Dataset ds = load_dataset(cfg.dataset);
  if (static_cast<int>(ds.classes.size()) != cfg.model.n_classes)
    throw config_error("dataset has " + std::to_string(ds.classes.size()) +
                       " classes but model.n_classes = " +
                       std::to_string(cfg.model.n_classes));
  ensure_dir(cfg.out_dir);

  Rng root(cfg.seed);
  Rng init_rng = root.stream("init");
  DenoiserParams params = init_denoiser(cfg.model, ds.layout.dims(), init_rng);
  NoiseSchedule sched = make_schedule(cfg.schedule.steps,
                                      schedule_kind_from(cfg.schedule.kind));

  // Normalized frames and VW priorities are fixed per sequence; compute once.
  struct Item {
    Tensor x0;
    int class_id;
    PriorityList priority;
  };
  std::vector<Item> items;
  items.reserve(ds.train_idx.size());
  for (int idx : ds.train_idx) {
    Item it;
    it.x0 = normalize(ds.sequences[idx].as_tensor(), ds.stats);
    it.class_id = ds.sequences[idx].class_id;
    it.priority = vw_priority(build_frame_features(it.x0));
    items.push_back(std::move(it));
  }

  Rng train_rng = root.stream("train");
  Rng batch_rng = root.stream("batch");
  AdamState opt = make_adam_state(params);
  std::vector<double> losses;
  losses.reserve(cfg.train.steps);
  std::map<int, long> k_hist;

  auto save = [&](const std::string& tag) {
    Checkpoint ck{cfg, ds.layout, ds.fps, ds.classes, ds.stats, params};
    save_checkpoint(ck, cfg.out_dir + "/checkpoint_" + tag);
  };

  for (int step = 1; step <= cfg.train.steps; ++step) {
    std::vector<TrainBatchItem> batch;
    batch.reserve(cfg.train.batch);
    for (int b = 0; b < cfg.train.batch; ++b) {
      const Item& it = items[batch_rng.uniform_int(0, static_cast<int>(items.size()) - 1)];
      batch.push_back({it.x0, it.class_id, &it.priority});
    }
    TrainStepResult res = training_step(batch, params, sched, cfg.train.mask_noise,
                                        train_rng);
    adam_step(params, res.grads, opt, cfg.train.lr);
    losses.push_back(res.loss);
    for (int k : res.k_used) ++k_hist[k];
    if (step % cfg.train.checkpoint_every == 0 && step != cfg.train.steps)
      save(std::to_string(step));
  }
  save("final");

  std::ofstream loss_csv(cfg.out_dir + "/loss.csv");
  if (!loss_csv) throw io_error("cannot write " + cfg.out_dir + "/loss.csv");
  loss_csv << "step,loss\n";
  for (size_t i = 0; i < losses.size(); ++i)
    loss_csv << (i + 1) << "," << fmt_double(losses[i]) << "\n";

  std::ofstream k_csv(cfg.out_dir + "/k_histogram.csv");
  if (!k_csv) throw io_error("cannot write " + cfg.out_dir + "/k_histogram.csv");
  k_csv << "k,count\n";
  for (const auto& [k, count] : k_hist) k_csv << k << "," << count << "\n";

  std::printf("trained %d steps: loss %.4f -> %.4f\n", cfg.train.steps, losses.front(),
              losses.back());
  std::printf("keyframe counts used: ");
  for (const auto& [k, count] : k_hist) std::printf("K=%d x%ld  ", k, count);
  std::printf("\ncheckpoint: %s/checkpoint_final.{json,bin}\n", cfg.out_dir.c_str());
}

// ---- sample --------------------------------------------------------------

void cmd_sample(const RunConfig& cfg, const SampleArgs& args) {
  cfg.validate();
  if (args.count < 1) throw config_error("sample count must be >= 1");
  Checkpoint ck = load_checkpoint(args.checkpoint);
  require_compatible(cfg.model, ck);
  ensure_dir(cfg.out_dir);

  std::optional<int> cls;
  if (args.class_name != "uncond") {
    for (size_t c = 0; c < ck.classes.size(); ++c)
      if (ck.classes[c] == args.class_name) cls = static_cast<int>(c);
    if (!cls) {
      std::string valid = "uncond";
      for (const auto& n : ck.classes) valid += ", " + n;
      throw config_error("unknown class '" + args.class_name + "' (valid: " + valid + ")");
    }
  }

  // The schedule and reduction rate are the ones the model was trained
  // with; gamma, guidance, and clamping are sampling-time choices.
  NoiseSchedule sched = make_schedule(ck.config.schedule.steps,
                                      schedule_kind_from(ck.config.schedule.kind));
  const int n_frames = ck.config.data.frames;

  Rng root(cfg.seed);
  Rng sample_root = root.stream("sample");
  std::vector<MotionSequence> seqs(args.count);
  std::vector<json> mask_dumps(args.count);

  parallel_for(args.count, [&](int i) {
    Rng rng = sample_root.stream(static_cast<uint64_t>(i));
    SampleOptions opt;
    opt.gamma = cfg.sample.gamma;
    opt.reduction_rate = ck.config.model.reduction_rate;
    opt.guidance_scale = cfg.model.guidance_scale;
    opt.clamp_x0 = cfg.sample.clamp_x0;
    opt.clamp_limit = cfg.sample.clamp_limit;
    json masks = json::array();
    if (args.dump_masks)
      opt.mask_observer = [&masks](int t, const KeyframeMask& m) {
        masks.push_back({{"t", t}, {"indices", m.indices()}});
      };
    Tensor x0 = p_sample_loop(ck.params, sched, cls, n_frames, opt, rng);
    Tensor raw = denormalize(x0, ck.stats);
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%03d", i);
    seqs[i] = MotionSequence::from_tensor(raw, ck.fps, cls ? *cls : -1, name);
    mask_dumps[i] = std::move(masks);
  });

  Dataset out;
  out.layout = ck.layout;
  out.fps = ck.fps;
  out.classes = ck.classes;
  out.stats = ck.stats;
  out.sequences = std::move(seqs);
  save_dataset(out, cfg.out_dir + "/samples");

  if (args.dump_masks) {
    for (int i = 0; i < args.count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "/masks_%03d.json", i);
      std::ofstream mout(cfg.out_dir + name);
      if (!mout) throw io_error("cannot write mask dump in " + cfg.out_dir);
      mout << json{{"sample", i}, {"masks", mask_dumps[i]}}.dump(2) << "\n";
    }
  }
  std::printf("wrote %d samples (class %s) -> %s/samples.{json,bin}\n", args.count,
              args.class_name.c_str(), cfg.out_dir.c_str());
}

// ---- eval -----------------------------------------------------------------

void cmd_eval(const RunConfig& cfg, const EvalArgs& args) {
  cfg.validate();
  Dataset reference = load_dataset(cfg.dataset);
  Dataset samples = load_dataset(args.samples);
  if (samples.sequences.empty()) throw config_error("sample set is empty");

  std::string run_id =
      args.run_id.empty() ? fs::path(args.samples).filename().string() : args.run_id;
  std::string hash;
  if (!args.checkpoint.empty())
    hash = config_hash(load_checkpoint(args.checkpoint).config);
  else
    hash = config_hash(cfg);

  double fid = frechet_distance(feature_stats_of(samples.sequences),
                                feature_stats_of(reference.sequences));

  std::vector<int> intended;
  for (const auto& s : samples.sequences) {
    if (s.class_id < 0)
      throw config_error("sample '" + s.name + "' is unconditional; fidelity undefined");
    intended.push_back(s.class_id);
  }
  double fidelity = condition_fidelity(samples.sequences, intended, reference);

  double ees_mean = 0.0;
  for (const auto& s : samples.sequences) ees_mean += ees(s, reference.layout);
  ees_mean /= static_cast<double>(samples.sequences.size());

  ensure_dir(cfg.out_dir);
  std::string csv = cfg.out_dir + "/metrics.csv";
  append_metrics_row(csv, run_id, "frechet", fid, cfg.seed, hash);
  append_metrics_row(csv, run_id, "condition_fidelity", fidelity, cfg.seed, hash);
  append_metrics_row(csv, run_id, "ees", ees_mean, cfg.seed, hash);
  if (samples.sequences.size() >= 2) {
    Rng root(cfg.seed);
    Rng div_rng = root.stream("diversity");
    double div = diversity(samples.sequences, 100, div_rng);
    append_metrics_row(csv, run_id, "diversity", div, cfg.seed, hash);
  } else {
    std::printf("note: single sample, diversity row skipped\n");
  }
  std::printf("eval %s: frechet=%.6g fidelity=%.3f ees=%.4g -> %s\n", run_id.c_str(),
              fid, fidelity, ees_mean, csv.c_str());
}

// ---- keyframes ----------------------------------------------------------------

void cmd_keyframes(const KeyframesArgs& args) {
  Dataset ds = load_dataset(args.motion_file);
  if (args.index < 0 || args.index >= static_cast<int>(ds.sequences.size()))
    throw config_error("sequence index " + std::to_string(args.index) +
                       " out of range (file has " +
                       std::to_string(ds.sequences.size()) + ")");
  const MotionSequence& seq = ds.sequences[args.index];
  FrameFeatures features = build_frame_features(seq.as_tensor());
  PriorityList priority = vw_priority(features);
  KeyframeMask mask = select_keyframes(priority, args.rate);

  json out{{"frames", seq.frames},
           {"rate", args.rate},
           {"keyframe_count", mask.count},
           {"selected", mask.indices()},
           {"removal_order", priority.removal_order},
           {"removal_areas", priority.areas}};
  std::string json_path = args.out_json.empty() ? "keyframes.json" : args.out_json;
  std::ofstream jout(json_path);
  if (!jout) throw io_error("cannot write " + json_path);
  jout << out.dump(2) << "\n";

  std::vector<int> joints = args.joints;
  if (joints.empty())
    for (int j = 0; j < ds.layout.joints; ++j) joints.push_back(j);
  std::string svg = render_keyframe_overlay(seq, mask, joints, ds.layout.arity);
  std::string svg_path = args.out_svg.empty() ? "keyframes.svg" : args.out_svg;
  std::ofstream sout(svg_path);
  if (!sout) throw io_error("cannot write " + svg_path);
  sout << svg;

  std::printf("keyframes: %d of %d frames at rate %.2f -> %s, %s\n", mask.count,
              seq.frames, args.rate, json_path.c_str(), svg_path.c_str());
}

// ---- plot --------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open CSV: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    size_t pos = 0;
    while (true) {
      size_t comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

// "name-T50" -> {"name", 50}; anything else keeps its id and gets no x.
std::pair<std::string, double> split_run_id(const std::string& run_id) {
  size_t pos = run_id.rfind("-T");
  if (pos != std::string::npos && pos + 2 < run_id.size()) {
    std::string digits = run_id.substr(pos + 2);
    if (digits.find_first_not_of("0123456789") == std::string::npos)
      return {run_id.substr(0, pos), std::stod(digits)};
  }
  return {run_id, std::nan("")};
}

}  // namespace

void cmd_plot(const PlotArgs& args) {
  if (args.csv_paths.empty()) throw config_error("plot: no CSV inputs");
  std::string out_dir = args.out_dir.empty() ? "." : args.out_dir;
  ensure_dir(out_dir);

  // metric -> series label -> points
  std::map<std::string, std::map<std::string, SvgSeries>> charts;
  bool any_rows = false;

  for (const auto& path : args.csv_paths) {
    auto rows = read_csv(path);
    if (rows.size() < 2) continue;
    const auto& header = rows[0];
    if (header.size() == 2 && header[0] == "step") {
      std::string label = fs::path(path).stem().string();
      auto& series = charts["loss"][label];
      series.label = label;
      for (size_t r = 1; r < rows.size(); ++r) {
        series.x.push_back(std::stod(rows[r][0]));
        series.y.push_back(std::stod(rows[r][1]));
        any_rows = true;
      }
    } else if (header.size() >= 3 && header[0] == "run_id" && header[1] == "metric") {
      for (size_t r = 1; r < rows.size(); ++r) {
        auto [label, x] = split_run_id(rows[r][0]);
        auto& series = charts[rows[r][1]][label];
        series.label = label;
        series.x.push_back(std::isnan(x) ? static_cast<double>(series.x.size() + 1) : x);
        series.y.push_back(std::stod(rows[r][2]));
        any_rows = true;
      }
    } else {
      throw config_error("unrecognized CSV header in " + path);
    }
  }
  if (!any_rows) throw config_error("plot: no data rows in inputs");

  for (const auto& [metric, series_map] : charts) {
    std::vector<SvgSeries> series;
    for (const auto& [label, s] : series_map) series.push_back(s);
    std::string x_label = metric == "loss" ? "training step" : "T (diffusion steps)";
    std::string svg = render_line_chart(metric, x_label, metric, series);
    std::string path = out_dir + "/plot_" + metric + ".svg";
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << svg;
    std::printf("plot: %s (%zu series)\n", path.c_str(), series.size());
  }
}

}  // namespace smdm
