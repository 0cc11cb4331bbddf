#include "smdm/keyframes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smdm {

std::vector<int> KeyframeMask::indices() const {
  std::vector<int> out;
  out.reserve(count);
  for (int i = 0; i < frames(); ++i)
    if (bits[i]) out.push_back(i);
  return out;
}

KeyframeMask KeyframeMask::from_indices(int n, const std::vector<int>& idx) {
  if (n < 2) throw contract_error("KeyframeMask: need at least 2 frames");
  KeyframeMask m;
  m.bits.assign(n, 0);
  for (int i : idx) {
    if (i < 0 || i >= n) throw contract_error("KeyframeMask: index out of range");
    m.bits[i] = 1;
  }
  m.bits[0] = 1;
  m.bits[n - 1] = 1;
  m.count = 0;
  for (uint8_t b : m.bits) m.count += b;
  return m;
}

double effective_area(const double* prev, const double* cur, const double* next, int dim) {
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (int k = 0; k < dim; ++k) {
    double a = cur[k] - prev[k];
    double b = next[k] - prev[k];
    aa += a * a;
    bb += b * b;
    ab += a * b;
  }
  double rad = aa * bb - ab * ab;
  if (rad < 0.0) rad = 0.0;  // rounding can push collinear triples negative
  return 0.5 * std::sqrt(rad);
}

FrameFeatures build_frame_features(const Tensor& motion_frames) {
  if (motion_frames.shape().rank != 2)
    throw contract_error("build_frame_features: rank-2 frames expected");
  int n = motion_frames.shape().d[0];
  int d = motion_frames.shape().d[1];
  if (n < 2) throw contract_error("build_frame_features: need at least 2 frames");
  FrameFeatures f;
  f.n_points = n;
  f.dim = d + 1;
  f.points.resize(static_cast<size_t>(n) * f.dim);
  const auto& src = motion_frames.data();
  for (int i = 0; i < n; ++i) {
    double* p = f.points.data() + static_cast<size_t>(i) * f.dim;
    std::copy(src.begin() + static_cast<size_t>(i) * d, src.begin() + static_cast<size_t>(i + 1) * d, p);
    p[d] = static_cast<double>(i);
  }
  return f;
}

PriorityList vw_priority(const FrameFeatures& f) {
  int n = f.n_points;
  if (n < 2) throw contract_error("vw_priority: need at least 2 points");
  PriorityList out;
  out.n_frames = n;
  if (n == 2) return out;

  std::vector<int> prev(n), next(n);
  for (int i = 0; i < n; ++i) {
    prev[i] = i - 1;
    next[i] = i + 1;
  }
  std::vector<double> area(n, 0.0);
  std::vector<char> alive(n, 1);
  for (int i = 1; i < n - 1; ++i)
    area[i] = effective_area(f.point(i - 1), f.point(i), f.point(i + 1), f.dim);

  out.removal_order.reserve(n - 2);
  out.areas.reserve(n - 2);
  for (int step = 0; step < n - 2; ++step) {
    int best = -1;
    double best_area = std::numeric_limits<double>::infinity();
    for (int i = 1; i < n - 1; ++i) {
      if (!alive[i]) continue;
      if (area[i] < best_area) {  // strict <: ties resolve to lowest index
        best_area = area[i];
        best = i;
      }
    }
    out.removal_order.push_back(best);
    out.areas.push_back(best_area);
    alive[best] = 0;
    int p = prev[best], q = next[best];
    next[p] = q;
    prev[q] = p;
    if (p > 0) area[p] = effective_area(f.point(prev[p]), f.point(p), f.point(q), f.dim);
    if (q < n - 1) area[q] = effective_area(f.point(p), f.point(q), f.point(next[q]), f.dim);
  }
  return out;
}

int keyframe_count(int n_frames, double reduction_rate) {
  if (reduction_rate < 0.0 || reduction_rate >= 1.0)
    throw config_error("reduction_rate must be in [0, 1)");
  long k = std::lround(n_frames * (1.0 - reduction_rate));
  return std::max(2L, std::min(static_cast<long>(n_frames), k));
}

KeyframeMask select_keyframes(const PriorityList& priority, double reduction_rate) {
  int n = priority.n_frames;
  int k = keyframe_count(n, reduction_rate);
  // The last-removed interior points are the most important ones.
  std::vector<int> idx = {0, n - 1};
  int interior = k - 2;
  for (int i = 0; i < interior; ++i)
    idx.push_back(priority.removal_order[priority.removal_order.size() - 1 - i]);
  return KeyframeMask::from_indices(n, idx);
}

KeyframeMask select_keyframes(const FrameFeatures& features, double reduction_rate) {
  return select_keyframes(vw_priority(features), reduction_rate);
}

KeyframeMask uniform_mask(int n_frames, double reduction_rate) {
  if (n_frames < 2) throw contract_error("uniform_mask: need at least 2 frames");
  int k = keyframe_count(n_frames, reduction_rate);
  std::vector<int> idx;
  idx.reserve(k);
  for (int i = 0; i < k; ++i) {
    int pos = static_cast<int>(std::lround(static_cast<double>(i) * (n_frames - 1) / (k - 1)));
    if (!idx.empty() && pos <= idx.back()) pos = idx.back() + 1;  // dedupe upward
    idx.push_back(pos);
  }
  return KeyframeMask::from_indices(n_frames, idx);
}

KeyframeMask perturb_mask(const PriorityList& priority, double base_rate, double delta,
                          Rng& rng) {
  if (delta < 0.0 || delta > 0.2)
    throw config_error("mask noise delta must be in [0, 0.2]");
  double eps = rng.uniform(-delta, delta);
  double rate = std::clamp(base_rate + eps, 0.0, std::nextafter(1.0, 0.0));
  return select_keyframes(priority, rate);
}

KeyframeMask dynamic_mask_update(const Tensor& x_t, int t, int total_steps, double gamma,
                                 double reduction_rate) {
  if (t < 1 || t > total_steps) throw contract_error("dynamic_mask_update: t out of range");
  int n = x_t.shape().d[0];
  if (static_cast<double>(t) <= gamma * total_steps)
    return select_keyframes(build_frame_features(x_t), reduction_rate);
  return uniform_mask(n, reduction_rate);
}

}  // namespace smdm
