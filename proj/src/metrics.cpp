#include "smdm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace smdm {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr uint64_t kProjectionSeed = 0x5EEDF00DCAFEBEEFull;

// Fixed projection matrices keyed by input width; the pinned seed keeps the
// featurizer identical across runs and processes.
const std::vector<double>& projection_matrix(int in_dim) {
  static std::vector<std::pair<int, std::vector<double>>> cache;
  for (auto& e : cache)
    if (e.first == in_dim) return e.second;
  Rng rng(kProjectionSeed);
  Rng stream = rng.stream(static_cast<uint64_t>(in_dim));
  std::vector<double> p(static_cast<size_t>(kFeatureDim) * in_dim);
  double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (double& v : p) v = stream.normal() * scale;
  cache.emplace_back(in_dim, std::move(p));
  return cache.back().second;
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

std::vector<double> motion_features_raw(const MotionSequence& seq) {
  if (seq.frames < 2) throw contract_error("motion_features: need at least 2 frames");
  const int n = seq.frames, d = seq.dims;
  std::vector<double> out(4 * static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) {
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += seq.at(i, j);
    mu /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (seq.at(i, j) - mu) * (seq.at(i, j) - mu);
    var /= n;
    double vel = 0.0;
    for (int i = 1; i < n; ++i) vel += std::fabs(seq.at(i, j) - seq.at(i - 1, j));
    vel /= (n - 1);
    // Dominant single-frequency magnitude of the demeaned channel.
    double dom = 0.0;
    for (int k = 1; k <= n / 2; ++k) {
      double re = 0.0, im = 0.0;
      for (int i = 0; i < n; ++i) {
        double ang = 2.0 * kPi * k * i / n;
        re += (seq.at(i, j) - mu) * std::cos(ang);
        im -= (seq.at(i, j) - mu) * std::sin(ang);
      }
      dom = std::max(dom, 2.0 / n * std::sqrt(re * re + im * im));
    }
    out[j] = mu;
    out[d + j] = std::sqrt(var);
    out[2 * d + j] = vel;
    out[3 * d + j] = dom;
  }
  return out;
}

std::vector<double> motion_features(const MotionSequence& seq) {
  std::vector<double> raw = motion_features_raw(seq);
  const int in_dim = static_cast<int>(raw.size());
  const auto& proj = projection_matrix(in_dim);
  std::vector<double> out(kFeatureDim, 0.0);
  for (int r = 0; r < kFeatureDim; ++r) {
    double acc = 0.0;
    for (int c = 0; c < in_dim; ++c) acc += proj[static_cast<size_t>(r) * in_dim + c] * raw[c];
    out[r] = acc;
  }
  return out;
}

FeatureStats feature_stats(const std::vector<std::vector<double>>& features) {
  if (features.empty()) throw contract_error("feature_stats: no features");
  const int d = static_cast<int>(features[0].size());
  FeatureStats st;
  st.count = static_cast<int>(features.size());
  st.mean.assign(d, 0.0);
  st.covariance.assign(static_cast<size_t>(d) * d, 0.0);
  for (const auto& f : features)
    for (int j = 0; j < d; ++j) st.mean[j] += f[j];
  for (int j = 0; j < d; ++j) st.mean[j] /= st.count;
  for (const auto& f : features)
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        st.covariance[static_cast<size_t>(r) * d + c] +=
            (f[r] - st.mean[r]) * (f[c] - st.mean[c]);
  for (auto& v : st.covariance) v /= st.count;
  return st;
}

FeatureStats feature_stats_of(const std::vector<MotionSequence>& seqs) {
  std::vector<std::vector<double>> feats;
  feats.reserve(seqs.size());
  for (const auto& s : seqs) feats.push_back(motion_features(s));
  return feature_stats(feats);
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  if (a.dim() != b.dim())
    throw contract_error("frechet_distance: feature dims differ, " +
                         std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  const int d = a.dim();
  double mean_term = 0.0;
  for (int j = 0; j < d; ++j) {
    double diff = a.mean[j] - b.mean[j];
    mean_term += diff * diff;
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      sa(a.covariance.data(), d, d), sb(b.covariance.data(), d, d);
  // Rescale so eigenvalues are O(1); sqrt(c*A) = sqrt(c)*sqrt(A) makes this
  // exact algebra, and it keeps the trace cancellation accurate when
  // feature variances are large.
  double scale = std::max({sa.trace(), sb.trace(), 0.0});
  if (scale <= 0.0) return mean_term;
  Eigen::MatrixXd na = sa / scale;
  Eigen::MatrixXd nb = sb / scale;
  Eigen::MatrixXd ra = sym_sqrt(na);
  // tr((Sa Sb)^{1/2}) = tr((ra Sb ra)^{1/2}) with ra = Sa^{1/2}; the inner
  // product is symmetric PSD so its eigendecomposition is stable.
  Eigen::MatrixXd inner = ra * nb * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()));
  double tr_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return mean_term + scale * (na.trace() + nb.trace() - 2.0 * tr_sqrt);
}

double ees(const MotionSequence& seq, const SkeletonLayout& layout) {
  if (seq.frames < 2) throw contract_error("ees: need at least 2 frames");
  if (seq.dims != layout.dims())
    throw contract_error("ees: sequence dims do not match layout");
  double acc = 0.0;
  int count = 0;
  for (int joint : layout.end_effectors) {
    for (int i = 1; i < seq.frames; ++i) {
      double sq = 0.0;
      for (int k = 0; k < layout.arity; ++k) {
        double delta = seq.at(i, joint * layout.arity + k) -
                       seq.at(i - 1, joint * layout.arity + k);
        sq += delta * delta;
      }
      acc += std::sqrt(sq);
      ++count;
    }
  }
  return acc / count;
}

double diversity(const std::vector<MotionSequence>& samples, int pairs, Rng& rng) {
  if (samples.size() < 2) throw config_error("diversity: need at least 2 samples");
  if (pairs < 1) throw contract_error("diversity: pairs >= 1 required");
  std::vector<std::vector<double>> feats;
  feats.reserve(samples.size());
  for (const auto& s : samples) feats.push_back(motion_features(s));
  const int n = static_cast<int>(samples.size());
  double acc = 0.0;
  for (int p = 0; p < pairs; ++p) {
    int i = rng.uniform_int(0, n - 1);
    int j = rng.uniform_int(0, n - 2);
    if (j >= i) ++j;
    double sq = 0.0;
    for (int k = 0; k < kFeatureDim; ++k) {
      double diff = feats[i][k] - feats[j][k];
      sq += diff * diff;
    }
    acc += std::sqrt(sq);
  }
  return acc / pairs;
}

double condition_fidelity(const std::vector<MotionSequence>& samples,
                          const std::vector<int>& intended_class,
                          const Dataset& reference) {
  if (samples.empty() || samples.size() != intended_class.size())
    throw contract_error("condition_fidelity: samples and labels must align");
  const int n_classes = static_cast<int>(reference.classes.size());
  std::vector<std::vector<double>> centroid(n_classes,
                                            std::vector<double>(kFeatureDim, 0.0));
  std::vector<int> counts(n_classes, 0);
  for (const auto& seq : reference.sequences) {
    auto f = motion_features(seq);
    for (int k = 0; k < kFeatureDim; ++k) centroid[seq.class_id][k] += f[k];
    ++counts[seq.class_id];
  }
  for (int c = 0; c < n_classes; ++c) {
    if (counts[c] == 0)
      throw config_error("condition_fidelity: reference has no sequences of class '" +
                         reference.classes[c] + "'");
    for (int k = 0; k < kFeatureDim; ++k) centroid[c][k] /= counts[c];
  }
  int hits = 0;
  for (size_t s = 0; s < samples.size(); ++s) {
    auto f = motion_features(samples[s]);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n_classes; ++c) {
      double sq = 0.0;
      for (int k = 0; k < kFeatureDim; ++k) {
        double diff = f[k] - centroid[c][k];
        sq += diff * diff;
      }
      if (sq < best_d) {
        best_d = sq;
        best = c;
      }
    }
    if (best == intended_class[s]) ++hits;
  }
  return static_cast<double>(hits) / samples.size();
}

OpCount profile_denoise(const DenoiserConfig& cfg, int n_frames, int keyframes) {
  if (keyframes > n_frames) throw contract_error("profile_denoise: K must be <= N");
  if (keyframes < 1) throw contract_error("profile_denoise: K must be >= 1");
  const uint64_t tokens = static_cast<uint64_t>(keyframes) + 1;
  OpCount oc;
  // Per head: (K+1) x d_head queries against (K+1) keys.
  oc.attn_score_macs = static_cast<uint64_t>(cfg.n_layers) * cfg.n_heads * tokens *
                       tokens * cfg.d_head();
  oc.value_mix_macs = oc.attn_score_macs;
  oc.ffn_macs = 2ull * cfg.n_layers * tokens * cfg.d_model * cfg.d_ff();
  oc.interp_ops = 2ull * static_cast<uint64_t>(n_frames - keyframes) * cfg.d_model;
  return oc;
}

}  // namespace smdm
