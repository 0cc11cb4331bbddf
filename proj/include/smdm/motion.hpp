#pragma once

// Procedural class-labeled motion generator: a 5-joint planar skeleton with
// per-class gait profiles, smooth additive noise, and reproducible
// dataset construction with per-dimension normalization stats.

#include <string>
#include <vector>

#include "smdm/rng.hpp"
#include "smdm/tensor.hpp"

namespace smdm {

struct SkeletonLayout {
  int joints = 5;
  int arity = 2;  // coordinates per joint
  std::vector<int> end_effectors = {3, 4};

  int dims() const { return joints * arity; }
};

struct MotionSequence {
  int frames = 0;
  int dims = 0;
  std::vector<double> data;  // frames x dims, row-major
  double fps = 20.0;
  int class_id = -1;
  std::string name;

  double at(int frame, int dim) const { return data[static_cast<size_t>(frame) * dims + dim]; }
  Tensor as_tensor() const;
  static MotionSequence from_tensor(const Tensor& t, double fps, int class_id,
                                    std::string name = {});
};

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stdev;
};

struct Dataset {
  SkeletonLayout layout;
  double fps = 20.0;
  std::vector<std::string> classes;
  NormStats stats;
  std::vector<MotionSequence> sequences;
  std::vector<int> train_idx;
  std::vector<int> val_idx;
};

const std::vector<std::string>& motion_class_names();
// Throws config_error listing the valid names.
int motion_class_id(const std::string& name);

// Deterministic per rng state; profiles are exactly periodic when
// noise_sigma == 0.
MotionSequence gen_class_motion(int class_id, int frames, const SkeletonLayout& layout,
                                Rng rng, double noise_sigma);

// Per-class bound on |frame-to-frame delta| of any single channel, with
// headroom for the default noise level.
double max_channel_speed(int class_id);

// Period (in frames) of the limb oscillation for each class.
int class_period_frames(int class_id);

// n_per_class sequences per class, 90/10 train/val split by seed-stable
// shuffle, stats computed over the train split only.
Dataset make_dataset(int n_per_class, int frames, const SkeletonLayout& layout,
                     uint64_t seed, double noise_sigma);

// (x - mean) / std per dimension, and back.
Tensor normalize(const Tensor& frames, const NormStats& stats);
Tensor denormalize(const Tensor& frames, const NormStats& stats);

}  // namespace smdm
