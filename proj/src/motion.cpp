#include "smdm/motion.hpp"

#include <algorithm>
#include <cmath>

namespace smdm {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Joint order: 0 root, 1 left hand, 2 right hand, 3 left foot, 4 right foot.
constexpr double kBaseOffset[5][2] = {
    {0.0, 0.0}, {-15.0, 40.0}, {15.0, 40.0}, {-10.0, -80.0}, {10.0, -80.0}};

enum ClassId { kWalk = 0, kRun, kJump, kWave, kCircle, kZigzag };

}  // namespace

const std::vector<std::string>& motion_class_names() {
  static const std::vector<std::string> names = {"walk", "run",    "jump",
                                                 "wave", "circle", "zigzag"};
  return names;
}

int motion_class_id(const std::string& name) {
  const auto& names = motion_class_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  std::string valid;
  for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
  throw config_error("unknown motion class '" + name + "' (valid: " + valid + ")");
}

int class_period_frames(int class_id) {
  switch (class_id) {
    case kWalk: return 16;
    case kRun: return 10;
    case kJump: return 16;  // small sway component
    case kWave: return 13;
    case kCircle: return 16;
    case kZigzag: return 16;
    default: throw config_error("unknown class id " + std::to_string(class_id));
  }
}

double max_channel_speed(int class_id) {
  switch (class_id) {
    case kWalk: return 10.0;
    case kRun: return 22.0;
    case kJump: return 9.0;
    case kWave: return 13.0;
    case kCircle: return 10.0;
    case kZigzag: return 9.0;
    default: throw config_error("unknown class id " + std::to_string(class_id));
  }
}

Tensor MotionSequence::as_tensor() const {
  return Tensor::from(Shape{frames, dims}, data);
}

MotionSequence MotionSequence::from_tensor(const Tensor& t, double fps, int class_id,
                                           std::string name) {
  if (t.shape().rank != 2) throw contract_error("MotionSequence: rank-2 tensor expected");
  MotionSequence seq;
  seq.frames = t.shape().d[0];
  seq.dims = t.shape().d[1];
  seq.data = t.data();
  seq.fps = fps;
  seq.class_id = class_id;
  seq.name = std::move(name);
  return seq;
}

MotionSequence gen_class_motion(int class_id, int frames, const SkeletonLayout& layout,
                                Rng rng, double noise_sigma) {
  if (class_id < 0 || class_id >= static_cast<int>(motion_class_names().size()))
    throw config_error("unknown class id " + std::to_string(class_id));
  if (frames < 2) throw contract_error("gen_class_motion: need at least 2 frames");
  if (layout.joints != 5 || layout.arity != 2)
    throw config_error("gen_class_motion: generator profiles require 5 planar joints");

  const int n = frames;
  const int d = layout.dims();
  // Per-sequence variation: amplitude jitter and a global phase shift keep
  // the class signature while separating individual clips.
  const double amp = 1.0 + 0.1 * rng.uniform(-1.0, 1.0);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const int period = class_period_frames(class_id);

  MotionSequence seq;
  seq.frames = n;
  seq.dims = d;
  seq.fps = 20.0;
  seq.class_id = class_id;
  seq.data.assign(static_cast<size_t>(n) * d, 0.0);

  for (int i = 0; i < n; ++i) {
    double* row = seq.data.data() + static_cast<size_t>(i) * d;
    const double theta = 2.0 * kPi * i / period + phase;
    double jx[5] = {0, 0, 0, 0, 0};
    double jy[5] = {0, 0, 0, 0, 0};
    switch (class_id) {
      case kWalk:
        jx[0] = 1.5 * i;
        jy[0] = 1.5 * amp * std::sin(2.0 * theta);
        jx[1] = 8.0 * amp * std::sin(theta);
        jx[2] = -8.0 * amp * std::sin(theta);
        jx[3] = -12.0 * amp * std::sin(theta);
        jx[4] = 12.0 * amp * std::sin(theta);
        jy[3] = 2.0 * amp * std::cos(theta);
        jy[4] = -2.0 * amp * std::cos(theta);
        break;
      case kRun:
        jx[0] = 3.5 * i;
        jy[0] = 3.0 * amp * std::sin(2.0 * theta);
        jx[1] = 14.0 * amp * std::sin(theta);
        jx[2] = -14.0 * amp * std::sin(theta);
        jx[3] = -20.0 * amp * std::sin(theta);
        jx[4] = 20.0 * amp * std::sin(theta);
        jy[3] = 4.0 * amp * std::cos(theta);
        jy[4] = -4.0 * amp * std::cos(theta);
        break;
      case kJump: {
        const double center = 0.5 * (n - 1);
        const double width = n / 8.0;
        const double u = (i - center) / width;
        const double bump = 35.0 * amp * std::exp(-u * u);
        jx[0] = 0.3 * i;
        jy[0] = bump;
        jy[1] = 0.6 * bump;
        jy[2] = 0.6 * bump;
        for (int j = 1; j < 5; ++j) jx[j] += 2.0 * std::sin(theta);
        break;
      }
      case kWave:
        jx[0] = 0.2 * i;
        jy[0] = 0.3 * amp * std::sin(theta);
        jx[2] = 10.0 * amp * std::cos(theta);
        jy[2] = 18.0 * amp * std::sin(theta);
        jx[1] = 2.0 * amp * std::sin(theta);
        jy[3] = 1.0 * amp * std::sin(theta);
        jy[4] = -1.0 * amp * std::sin(theta);
        break;
      case kCircle: {
        const double phi = 2.0 * kPi * i / (n - 1);
        jx[0] = 30.0 * (std::cos(phi) - 1.0);
        jy[0] = 20.0 * std::sin(phi);
        jx[1] = 6.0 * amp * std::sin(theta);
        jx[2] = -6.0 * amp * std::sin(theta);
        jx[3] = -9.0 * amp * std::sin(theta);
        jx[4] = 9.0 * amp * std::sin(theta);
        break;
      }
      case kZigzag: {
        const double u = 2.0 * kPi * i / 32.0;
        jx[0] = 2.0 * i;
        jy[0] = 15.0 * (2.0 / kPi) * std::asin(std::sin(u));
        jx[1] = 5.0 * amp * std::sin(theta);
        jx[2] = -5.0 * amp * std::sin(theta);
        jx[3] = -5.0 * amp * std::sin(theta);
        jx[4] = 5.0 * amp * std::sin(theta);
        break;
      }
      default: break;
    }
    row[0] = jx[0];
    row[1] = jy[0];
    for (int j = 1; j < 5; ++j) {
      // Limbs ride on the root.
      row[2 * j] = jx[0] + kBaseOffset[j][0] + jx[j];
      row[2 * j + 1] = jy[0] + kBaseOffset[j][1] + jy[j];
    }
  }

  if (noise_sigma > 0.0) {
    // White Gaussian noise smoothed by a centered 5-tap moving average; keeps
    // per-frame deltas well inside the class speed bounds.
    std::vector<double> white(static_cast<size_t>(n) * d);
    for (double& v : white) v = rng.normal() * noise_sigma;
    const int w = 2;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        int cnt = 0;
        for (int k = std::max(0, i - w); k <= std::min(n - 1, i + w); ++k) {
          acc += white[static_cast<size_t>(k) * d + j];
          ++cnt;
        }
        seq.data[static_cast<size_t>(i) * d + j] += acc / cnt;
      }
    }
  }
  return seq;
}

Dataset make_dataset(int n_per_class, int frames, const SkeletonLayout& layout,
                     uint64_t seed, double noise_sigma) {
  if (n_per_class < 1) throw config_error("n_per_class must be >= 1");
  Dataset ds;
  ds.layout = layout;
  ds.fps = 20.0;
  ds.classes = motion_class_names();
  Rng root(seed);
  Rng data_rng = root.stream("data");
  const int n_classes = static_cast<int>(ds.classes.size());
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      Rng seq_rng = data_rng.stream(static_cast<uint64_t>(c) * 100000 + i);
      MotionSequence seq = gen_class_motion(c, frames, layout, seq_rng, noise_sigma);
      seq.name = ds.classes[c] + "_" + std::to_string(i);
      ds.sequences.push_back(std::move(seq));
    }
  }

  // Seed-stable shuffle, first 90% train.
  const int total = static_cast<int>(ds.sequences.size());
  std::vector<int> order(total);
  for (int i = 0; i < total; ++i) order[i] = i;
  Rng split_rng = root.stream("split");
  for (int i = total - 1; i > 0; --i)
    std::swap(order[i], order[split_rng.uniform_int(0, i)]);
  const int n_train = static_cast<int>(total * 0.9);
  ds.train_idx.assign(order.begin(), order.begin() + n_train);
  ds.val_idx.assign(order.begin() + n_train, order.end());

  // Per-dimension stats over the train split (population moments).
  const int d = layout.dims();
  ds.stats.mean.assign(d, 0.0);
  ds.stats.stdev.assign(d, 0.0);
  size_t count = 0;
  for (int idx : ds.train_idx) {
    const auto& s = ds.sequences[idx];
    for (int i = 0; i < s.frames; ++i)
      for (int j = 0; j < d; ++j) ds.stats.mean[j] += s.at(i, j);
    count += s.frames;
  }
  for (int j = 0; j < d; ++j) ds.stats.mean[j] /= static_cast<double>(count);
  for (int idx : ds.train_idx) {
    const auto& s = ds.sequences[idx];
    for (int i = 0; i < s.frames; ++i)
      for (int j = 0; j < d; ++j) {
        double dev = s.at(i, j) - ds.stats.mean[j];
        ds.stats.stdev[j] += dev * dev;
      }
  }
  for (int j = 0; j < d; ++j)
    ds.stats.stdev[j] = std::max(std::sqrt(ds.stats.stdev[j] / count), 1e-12);
  return ds;
}

Tensor normalize(const Tensor& frames, const NormStats& stats) {
  int n = frames.shape().d[0], d = frames.shape().d[1];
  if (d != static_cast<int>(stats.mean.size()))
    throw contract_error("normalize: dim mismatch with stats");
  std::vector<double> out(frames.data());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      double& v = out[static_cast<size_t>(i) * d + j];
      v = (v - stats.mean[j]) / stats.stdev[j];
    }
  return Tensor::from(frames.shape(), std::move(out));
}

Tensor denormalize(const Tensor& frames, const NormStats& stats) {
  int n = frames.shape().d[0], d = frames.shape().d[1];
  if (d != static_cast<int>(stats.mean.size()))
    throw contract_error("denormalize: dim mismatch with stats");
  std::vector<double> out(frames.data());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      double& v = out[static_cast<size_t>(i) * d + j];
      v = v * stats.stdev[j] + stats.mean[j];
    }
  return Tensor::from(frames.shape(), std::move(out));
}

}  // namespace smdm
