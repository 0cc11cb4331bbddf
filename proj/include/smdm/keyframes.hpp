#pragma once

// Keyframe mask construction: Visvalingam-Whyatt priority reduction over
// per-frame feature points, uniform spacing, reduction-rate noise, and the
// inference-time switch from uniform to geometry-driven masks.

#include <cstdint>
#include <vector>

#include "smdm/errors.hpp"
#include "smdm/rng.hpp"
#include "smdm/tensor.hpp"

namespace smdm {

// N points of dimension F = motion dims + 1; the last component of point n
// is the raw frame index n.
struct FrameFeatures {
  int n_points = 0;
  int dim = 0;
  std::vector<double> points;  // row-major n_points x dim

  const double* point(int i) const { return points.data() + static_cast<size_t>(i) * dim; }
};

struct PriorityList {
  int n_frames = 0;
  std::vector<int> removal_order;  // interior indices, first removed first
  std::vector<double> areas;       // effective area at removal time
};

struct KeyframeMask {
  std::vector<uint8_t> bits;  // length N, endpoints always 1
  int count = 0;              // number of set bits

  int frames() const { return static_cast<int>(bits.size()); }
  bool is_keyframe(int i) const { return bits[i] != 0; }
  std::vector<int> indices() const;
  static KeyframeMask from_indices(int n, const std::vector<int>& idx);
};

// Triangle area of (prev, cur, next) in any dimension F >= 2 via the Gram
// form 0.5 * sqrt(|a|^2 |b|^2 - (a.b)^2); equals the 2-D half-determinant.
double effective_area(const double* prev, const double* cur, const double* next, int dim);

FrameFeatures build_frame_features(const Tensor& motion_frames);

// Repeatedly removes the interior point of minimum effective area (ties
// broken by lowest index), reconnecting neighbors across removed points.
PriorityList vw_priority(const FrameFeatures& features);

int keyframe_count(int n_frames, double reduction_rate);

KeyframeMask select_keyframes(const FrameFeatures& features, double reduction_rate);
KeyframeMask select_keyframes(const PriorityList& priority, double reduction_rate);

KeyframeMask uniform_mask(int n_frames, double reduction_rate);

// Draws eps ~ U(-delta, +delta) and selects at reduction_rate + eps,
// clamped into [0, 1).
KeyframeMask perturb_mask(const PriorityList& priority, double base_rate, double delta,
                          Rng& rng);

// Uniform mask while t > gamma*T; once t <= gamma*T, re-select keyframes
// from the current iterate's geometry.
KeyframeMask dynamic_mask_update(const Tensor& x_t, int t, int total_steps, double gamma,
                                 double reduction_rate);

}  // namespace smdm
