#pragma once

// Desk-scale metrics: a fixed hand-crafted motion featurizer, Frechet
// feature distance between Gaussian fits, nearest-centroid condition
// fidelity, diversity, end-effector speed, and the analytic attention-cost
// profile that the instrumented tensor core is checked against.

#include <cstdint>
#include <vector>

#include "smdm/denoiser.hpp"
#include "smdm/motion.hpp"
#include "smdm/rng.hpp"

namespace smdm {

constexpr int kFeatureDim = 16;

// Per channel: mean, std, mean |velocity|, dominant-frequency magnitude.
std::vector<double> motion_features_raw(const MotionSequence& seq);

// The 4*D raw features pooled to kFeatureDim by a fixed seed-pinned random
// projection.
std::vector<double> motion_features(const MotionSequence& seq);

struct FeatureStats {
  std::vector<double> mean;        // d_feat
  std::vector<double> covariance;  // d_feat x d_feat, row-major
  int count = 0;

  int dim() const { return static_cast<int>(mean.size()); }
};

FeatureStats feature_stats(const std::vector<std::vector<double>>& features);
FeatureStats feature_stats_of(const std::vector<MotionSequence>& seqs);

// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}); the square root goes
// through symmetric eigendecompositions with negative eigenvalues clamped
// at zero.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

// Mean per-frame displacement norm of the layout's end-effector joints
// (data units per frame).
double ees(const MotionSequence& seq, const SkeletonLayout& layout);

// Mean feature distance over randomly drawn pairs of distinct samples.
double diversity(const std::vector<MotionSequence>& samples, int pairs, Rng& rng);

// Fraction of samples whose features are nearest to the intended class's
// reference centroid.
double condition_fidelity(const std::vector<MotionSequence>& samples,
                          const std::vector<int>& intended_class,
                          const Dataset& reference);

struct OpCount {
  uint64_t attn_score_macs = 0;
  uint64_t value_mix_macs = 0;
  uint64_t ffn_macs = 0;
  uint64_t interp_ops = 0;
};

// Analytic forward-pass counts for one denoise call on K keyframes of an
// N-frame sequence (K + 1 tokens including the condition token).
OpCount profile_denoise(const DenoiserConfig& cfg, int n_frames, int keyframes);

}  // namespace smdm
