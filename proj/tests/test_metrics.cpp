#include <cmath>

#include "doctest.h"
#include "smdm/metrics.hpp"

using namespace smdm;

namespace {

MotionSequence make_seq(int frames, int dims, const std::vector<double>& data,
                        int class_id = 0) {
  MotionSequence s;
  s.frames = frames;
  s.dims = dims;
  s.data = data;
  s.class_id = class_id;
  return s;
}

MotionSequence sinusoid_seq(int frames, int dims, double amplitude) {
  std::vector<double> v(static_cast<size_t>(frames) * dims);
  for (int i = 0; i < frames; ++i)
    for (int j = 0; j < dims; ++j)
      v[static_cast<size_t>(i) * dims + j] =
          amplitude * std::sin(2.0 * 3.14159265358979 * i / 16.0 + 0.3 * j);
  return make_seq(frames, dims, v);
}

FeatureStats diag_stats(const std::vector<double>& mean, const std::vector<double>& var) {
  FeatureStats st;
  st.mean = mean;
  int d = static_cast<int>(mean.size());
  st.covariance.assign(static_cast<size_t>(d) * d, 0.0);
  for (int j = 0; j < d; ++j) st.covariance[static_cast<size_t>(j) * d + j] = var[j];
  st.count = 100;
  return st;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("features: static sequences have zero velocity features") {
  MotionSequence s = make_seq(10, 3, std::vector<double>(30, 2.5));
  auto raw = motion_features_raw(s);
  // layout: [means | stds | mean-|velocity| | dominant-frequency]
  for (int j = 0; j < 3; ++j) {
    CHECK(raw[3 + j] == 0.0);      // std
    CHECK(raw[6 + j] == 0.0);      // velocity
    CHECK(raw[9 + j] == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK(motion_features(s) == motion_features(s));
  CHECK(motion_features(s).size() == kFeatureDim);
}

TEST_CASE("features: amplitude doubling doubles the std features") {
  MotionSequence s1 = sinusoid_seq(64, 4, 1.5);
  MotionSequence s2 = sinusoid_seq(64, 4, 3.0);
  auto r1 = motion_features_raw(s1);
  auto r2 = motion_features_raw(s2);
  for (int j = 0; j < 4; ++j)
    CHECK(r2[4 + j] == doctest::Approx(2.0 * r1[4 + j]).epsilon(1e-12));
  // A zero-mean signal scales every raw feature linearly, so the projected
  // features double as well.
  auto f1 = motion_features(s1);
  auto f2 = motion_features(s2);
  for (int k = 0; k < kFeatureDim; ++k)
    CHECK(f2[k] == doctest::Approx(2.0 * f1[k]).epsilon(1e-10));
}

TEST_CASE("frechet: identical stats give zero") {
  Rng rng(601);
  std::vector<std::vector<double>> feats;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> f(kFeatureDim);
    for (double& v : f) v = rng.normal();
    feats.push_back(f);
  }
  FeatureStats st = feature_stats(feats);
  CHECK(std::fabs(frechet_distance(st, st)) < 1e-9);
}

TEST_CASE("frechet: identity covariances reduce to the mean shift") {
  std::vector<double> ones(kFeatureDim, 1.0);
  std::vector<double> mu_a(kFeatureDim, 0.0);
  std::vector<double> mu_b(kFeatureDim, 0.0);
  mu_b[0] = 3.0;
  mu_b[5] = -4.0;  // ||v||^2 = 25
  FeatureStats a = diag_stats(mu_a, ones);
  FeatureStats b = diag_stats(mu_b, ones);
  CHECK(frechet_distance(a, b) == doctest::Approx(25.0).epsilon(1e-9));
}

TEST_CASE("frechet: diagonal closed form and symmetry") {
  Rng rng(607);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> mu_a(kFeatureDim), mu_b(kFeatureDim), va(kFeatureDim), vb(kFeatureDim);
    for (int j = 0; j < kFeatureDim; ++j) {
      mu_a[j] = rng.uniform(-2, 2);
      mu_b[j] = rng.uniform(-2, 2);
      va[j] = rng.uniform(0.1, 3.0);
      vb[j] = rng.uniform(0.1, 3.0);
    }
    FeatureStats a = diag_stats(mu_a, va);
    FeatureStats b = diag_stats(mu_b, vb);
    double expect = 0.0;
    for (int j = 0; j < kFeatureDim; ++j) {
      double dm = mu_a[j] - mu_b[j];
      double ds = std::sqrt(va[j]) - std::sqrt(vb[j]);
      expect += dm * dm + ds * ds;
    }
    double got = frechet_distance(a, b);
    CHECK(got == doctest::Approx(expect).epsilon(1e-9));
    CHECK(frechet_distance(b, a) == doctest::Approx(got).epsilon(1e-9));
  }

  FeatureStats small;
  small.mean.assign(4, 0.0);
  small.covariance.assign(16, 0.0);
  CHECK_THROWS_AS(frechet_distance(small, diag_stats(std::vector<double>(16, 0.0),
                                                     std::vector<double>(16, 1.0))),
                  contract_error);
}

TEST_CASE("ees: static, constant-velocity, and oracle cases") {
  SkeletonLayout layout;
  MotionSequence still = make_seq(8, 10, std::vector<double>(80, 1.0));
  CHECK(ees(still, layout) == 0.0);

  // End-effectors (joints 3 and 4) move 2 units per frame along x.
  std::vector<double> v(8 * 10, 0.0);
  for (int i = 0; i < 8; ++i) {
    v[i * 10 + 6] = 2.0 * i;
    v[i * 10 + 8] = 2.0 * i;
  }
  CHECK(ees(make_seq(8, 10, v), layout) == doctest::Approx(2.0).epsilon(1e-15));

  Rng rng(613);
  std::vector<double> rv(12 * 10);
  for (double& e : rv) e = rng.uniform(-5, 5);
  MotionSequence rand_seq = make_seq(12, 10, rv);
  double direct = 0.0;
  int count = 0;
  for (int joint : layout.end_effectors)
    for (int i = 1; i < 12; ++i) {
      double dx = rand_seq.at(i, joint * 2) - rand_seq.at(i - 1, joint * 2);
      double dy = rand_seq.at(i, joint * 2 + 1) - rand_seq.at(i - 1, joint * 2 + 1);
      direct += std::sqrt(dx * dx + dy * dy);
      ++count;
    }
  CHECK(ees(rand_seq, layout) == doctest::Approx(direct / count).epsilon(1e-12));
}

TEST_CASE("ees is invariant under global translation") {
  SkeletonLayout layout;
  Rng rng(617);
  std::vector<double> v(20 * 10);
  for (double& e : v) e = rng.uniform(-3, 3);
  MotionSequence s = make_seq(20, 10, v);
  std::vector<double> shifted = v;
  for (size_t i = 0; i < shifted.size(); ++i) shifted[i] += (i % 2 == 0) ? 123.0 : -55.0;
  MotionSequence s2 = make_seq(20, 10, shifted);
  CHECK(ees(s2, layout) == doctest::Approx(ees(s, layout)).epsilon(1e-12));
}

TEST_CASE("diversity: identical samples give zero; one pair is exact") {
  SkeletonLayout layout;
  Rng gen(619);
  MotionSequence a = gen_class_motion(0, 32, layout, gen, 0.3);
  MotionSequence b = gen_class_motion(1, 32, layout, gen, 0.3);

  Rng rng(1);
  CHECK(diversity({a, a, a}, 50, rng) == 0.0);

  Rng rng2(2);
  double d = diversity({a, b}, 1, rng2);
  auto fa = motion_features(a);
  auto fb = motion_features(b);
  double expect = 0.0;
  for (int k = 0; k < kFeatureDim; ++k) expect += (fa[k] - fb[k]) * (fa[k] - fb[k]);
  CHECK(d == doctest::Approx(std::sqrt(expect)).epsilon(1e-12));

  Rng r3(3), r4(3);
  CHECK(diversity({a, b, a}, 10, r3) == diversity({a, b, a}, 10, r4));
  Rng r5(4);
  CHECK_THROWS_AS(diversity({a}, 5, r5), config_error);
}

TEST_CASE("condition fidelity: reference copies score high; shuffles score ~1/6") {
  SkeletonLayout layout;
  Dataset ds = make_dataset(8, 64, layout, 4242, 0.3);

  std::vector<int> intended;
  for (const auto& s : ds.sequences) intended.push_back(s.class_id);
  double self_acc = condition_fidelity(ds.sequences, intended, ds);
  CHECK(self_acc >= 0.95);

  // Single class in play.
  std::vector<MotionSequence> walks;
  std::vector<int> walk_labels;
  for (const auto& s : ds.sequences)
    if (s.class_id == 0) {
      walks.push_back(s);
      walk_labels.push_back(0);
    }
  CHECK(condition_fidelity(walks, walk_labels, ds) == 1.0);

  // Derangement of the labels: accuracy collapses to roughly chance.
  std::vector<int> shuffled;
  for (int label : intended) shuffled.push_back((label + 1) % 6);
  double shuffled_acc = condition_fidelity(ds.sequences, shuffled, ds);
  CHECK(shuffled_acc <= 1.0 - self_acc + 0.15);
}

TEST_CASE("profile: full-mask ratio is 1; K=20 vs dense N=100 is (21/101)^2") {
  DenoiserConfig cfg;  // desk defaults: 4 layers, 4 heads, d_model 64
  OpCount dense = profile_denoise(cfg, 100, 100);
  OpCount same = profile_denoise(cfg, 100, 100);
  CHECK(dense.attn_score_macs == same.attn_score_macs);

  OpCount sparse = profile_denoise(cfg, 100, 20);
  // Exact integer identity: sparse * 101^2 == dense * 21^2.
  CHECK(sparse.attn_score_macs * 101ull * 101ull ==
        dense.attn_score_macs * 21ull * 21ull);
  CHECK(sparse.value_mix_macs == sparse.attn_score_macs);
}

TEST_CASE("profile: doubling K quadruples score MACs (+1 token adjusted)") {
  DenoiserConfig cfg;
  for (int k : {8, 16, 32}) {
    OpCount a = profile_denoise(cfg, 100, k);
    OpCount b = profile_denoise(cfg, 100, 2 * k);
    // (2K+1)^2 / (K+1)^2 expressed over integers.
    CHECK(b.attn_score_macs * (k + 1ull) * (k + 1ull) ==
          a.attn_score_macs * (2ull * k + 1) * (2ull * k + 1));
  }
}

TEST_CASE("profile matches the instrumented multiply counts exactly") {
  Rng rng(631);
  DenoiserConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 4;
  cfg.dropout = 0.0;
  DenoiserParams params = init_denoiser(cfg, 6, rng);

  const int n = 40;
  for (double rate : {0.0, 0.5, 0.75}) {
    KeyframeMask mask = uniform_mask(n, rate);
    std::vector<double> v(n * 6);
    for (double& e : v) e = rng.normal();
    Tensor x = Tensor::from(Shape{n, 6}, std::move(v));

    mac_counting_enable(true);
    mac_reset();
    denoise(x, 3, 1, mask, params);
    MacCounters got = mac_counters();
    mac_counting_enable(false);

    OpCount expect = profile_denoise(cfg, n, mask.count);
    CHECK(got.attn_score == expect.attn_score_macs);
    CHECK(got.attn_mix == expect.value_mix_macs);
    CHECK(got.ffn == expect.ffn_macs);
    CHECK(got.interp == expect.interp_ops);
  }
}

TEST_CASE("profile: log-log slope of score MACs over K is ~2") {
  DenoiserConfig cfg;
  std::vector<double> lx, ly;
  for (int k : {8, 16, 32, 64}) {
    lx.push_back(std::log(static_cast<double>(k)));
    ly.push_back(std::log(static_cast<double>(profile_denoise(cfg, 100, k).attn_score_macs)));
  }
  double n = lx.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  INFO("slope " << slope);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.05));
}

}  // TEST_SUITE
