#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "smdm/dataset_io.hpp"
#include "smdm/motion.hpp"

using namespace smdm;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Period estimate: the smallest lag in [2, n/2] whose autocorrelation is
// within 0.1% of the maximum (a periodic signal also peaks at every
// multiple of its period).
int autocorr_peak_lag(const std::vector<double>& x) {
  int n = static_cast<int>(x.size());
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= n;
  std::vector<double> r;
  double best = -1e300;
  for (int lag = 2; lag <= n / 2; ++lag) {
    double acc = 0.0;
    for (int i = 0; i + lag < n; ++i) acc += (x[i] - mu) * (x[i + lag] - mu);
    acc /= (n - lag);
    r.push_back(acc);
    best = std::max(best, acc);
  }
  for (size_t k = 0; k < r.size(); ++k)
    if (r[k] >= 0.999 * best) return static_cast<int>(k) + 2;
  return 2;
}

}  // namespace

TEST_SUITE("motion") {

TEST_CASE("same seed generates identical sequences") {
  SkeletonLayout layout;
  Rng a(42), b(42);
  MotionSequence s1 = gen_class_motion(0, 64, layout, a, 0.3);
  MotionSequence s2 = gen_class_motion(0, 64, layout, b, 0.3);
  CHECK(s1.data == s2.data);
}

TEST_CASE("unknown class id is rejected") {
  SkeletonLayout layout;
  Rng rng(1);
  CHECK_THROWS_AS(gen_class_motion(17, 64, layout, rng, 0.0), config_error);
  CHECK_THROWS_AS(motion_class_id("moonwalk"), config_error);
  CHECK(motion_class_id("walk") == 0);
  CHECK(motion_class_id("zigzag") == 5);
}

TEST_CASE("noise-free walk limb channels are periodic at the class period") {
  SkeletonLayout layout;
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    Rng rng(seed);
    MotionSequence walk = gen_class_motion(0, 64, layout, rng, 0.0);
    // Left-foot x relative to the root isolates the limb oscillation.
    std::vector<double> rel(walk.frames);
    for (int i = 0; i < walk.frames; ++i) rel[i] = walk.at(i, 6) - walk.at(i, 0);
    CHECK(autocorr_peak_lag(rel) == class_period_frames(0));
  }
}

TEST_CASE("jump root height peaks strictly inside the clip") {
  SkeletonLayout layout;
  for (uint64_t seed : {10ull, 11ull, 12ull}) {
    Rng rng(seed);
    MotionSequence jump = gen_class_motion(2, 64, layout, rng, 0.3);
    int argmax = 0;
    for (int i = 1; i < jump.frames; ++i)
      if (jump.at(i, 1) > jump.at(argmax, 1)) argmax = i;
    CHECK(argmax > 0);
    CHECK(argmax < jump.frames - 1);
  }
}

TEST_CASE("per-channel speed stays below the class bound over many samples") {
  SkeletonLayout layout;
  Rng root(77);
  for (int trial = 0; trial < 1000; ++trial) {
    int cls = trial % 6;
    Rng rng = root.stream(static_cast<uint64_t>(trial));
    MotionSequence s = gen_class_motion(cls, 64, layout, rng, 0.3);
    double bound = max_channel_speed(cls);
    for (int i = 1; i < s.frames; ++i)
      for (int j = 0; j < s.dims; ++j) {
        double delta = std::fabs(s.at(i, j) - s.at(i - 1, j));
        REQUIRE(delta <= bound);
      }
  }
}

TEST_CASE("dataset counts, split, and normalization stats") {
  SkeletonLayout layout;
  Dataset ds = make_dataset(10, 64, layout, 99, 0.3);
  CHECK(ds.sequences.size() == 60);
  CHECK(ds.train_idx.size() == 54);
  CHECK(ds.val_idx.size() == 6);

  // Normalizing the train split with the stored stats recovers zero mean,
  // unit variance per dimension.
  const int d = layout.dims();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  size_t count = 0;
  for (int idx : ds.train_idx) {
    Tensor norm = normalize(ds.sequences[idx].as_tensor(), ds.stats);
    for (int i = 0; i < ds.sequences[idx].frames; ++i)
      for (int j = 0; j < d; ++j) mean[j] += norm.at(i, j);
    count += ds.sequences[idx].frames;
  }
  for (int j = 0; j < d; ++j) mean[j] /= count;
  for (int idx : ds.train_idx) {
    Tensor norm = normalize(ds.sequences[idx].as_tensor(), ds.stats);
    for (int i = 0; i < ds.sequences[idx].frames; ++i)
      for (int j = 0; j < d; ++j) var[j] += (norm.at(i, j) - mean[j]) * (norm.at(i, j) - mean[j]);
  }
  for (int j = 0; j < d; ++j) {
    CHECK(std::fabs(mean[j]) < 1e-9);
    CHECK(std::fabs(std::sqrt(var[j] / count) - 1.0) < 1e-9);
  }

  for (const auto& s : ds.sequences) {
    CHECK(s.frames >= 2);
    for (double v : s.data) CHECK(std::isfinite(v));
  }
}

TEST_CASE("regenerating with the same seed gives byte-identical files") {
  SkeletonLayout layout;
  std::string base1 = tmp_path("smdm_ds_a");
  std::string base2 = tmp_path("smdm_ds_b");
  save_dataset(make_dataset(3, 32, layout, 123, 0.3), base1);
  save_dataset(make_dataset(3, 32, layout, 123, 0.3), base2);
  CHECK(read_file(base1 + ".json") != "");
  CHECK(read_file(base1 + ".bin") == read_file(base2 + ".bin"));
  // Manifests differ only in the blob filename they reference.
  Dataset r1 = load_dataset(base1);
  Dataset r2 = load_dataset(base2);
  REQUIRE(r1.sequences.size() == r2.sequences.size());
  for (size_t i = 0; i < r1.sequences.size(); ++i)
    CHECK(r1.sequences[i].data == r2.sequences[i].data);
}

TEST_CASE("dataset round-trips through the manifest + blob pair") {
  SkeletonLayout layout;
  Dataset ds = make_dataset(2, 24, layout, 7, 0.2);
  std::string base = tmp_path("smdm_ds_rt");
  save_dataset(ds, base);
  Dataset back = load_dataset(base);
  CHECK(back.classes == ds.classes);
  CHECK(back.stats.mean == ds.stats.mean);
  CHECK(back.stats.stdev == ds.stats.stdev);
  CHECK(back.train_idx == ds.train_idx);
  REQUIRE(back.sequences.size() == ds.sequences.size());
  for (size_t i = 0; i < ds.sequences.size(); ++i) {
    CHECK(back.sequences[i].data == ds.sequences[i].data);
    CHECK(back.sequences[i].class_id == ds.sequences[i].class_id);
    CHECK(back.sequences[i].name == ds.sequences[i].name);
  }
}

TEST_CASE("classes separate under a nearest-centroid classifier") {
  SkeletonLayout layout;
  Dataset ds = make_dataset(20, 64, layout, 2024, 0.3);
  const int d = layout.dims();

  auto pooled = [&](const MotionSequence& s) {
    std::vector<double> m(d, 0.0);
    for (int i = 0; i < s.frames; ++i)
      for (int j = 0; j < d; ++j) m[j] += s.at(i, j);
    for (double& v : m) v /= s.frames;
    return m;
  };

  std::vector<std::vector<double>> centroid(6, std::vector<double>(d, 0.0));
  std::vector<int> counts(6, 0);
  for (int idx : ds.train_idx) {
    auto m = pooled(ds.sequences[idx]);
    int c = ds.sequences[idx].class_id;
    for (int j = 0; j < d; ++j) centroid[c][j] += m[j];
    ++counts[c];
  }
  for (int c = 0; c < 6; ++c)
    for (int j = 0; j < d; ++j) centroid[c][j] /= counts[c];

  int hits = 0;
  for (int idx : ds.val_idx) {
    auto m = pooled(ds.sequences[idx]);
    int best = -1;
    double best_d = 1e300;
    for (int c = 0; c < 6; ++c) {
      double sq = 0.0;
      for (int j = 0; j < d; ++j) sq += (m[j] - centroid[c][j]) * (m[j] - centroid[c][j]);
      if (sq < best_d) {
        best_d = sq;
        best = c;
      }
    }
    hits += best == ds.sequences[idx].class_id;
  }
  double acc = static_cast<double>(hits) / ds.val_idx.size();
  INFO("val accuracy " << acc);
  CHECK(acc >= 0.95);
}

TEST_CASE("n_per_class = 0 is rejected before any IO") {
  SkeletonLayout layout;
  CHECK_THROWS_AS(make_dataset(0, 64, layout, 1, 0.3), config_error);
}

}  // TEST_SUITE
