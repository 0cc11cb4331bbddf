#include <cmath>
#include <set>

#include "doctest.h"
#include "smdm/denoiser.hpp"

using namespace smdm;

namespace {

DenoiserConfig small_config() {
  DenoiserConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.dropout = 0.1;
  cfg.n_classes = 6;
  return cfg;
}

Tensor random_frames(int n, int d, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(n) * d);
  for (double& x : v) x = rng.normal();
  return Tensor::from(Shape{n, d}, std::move(v));
}

}  // namespace

TEST_SUITE("denoiser") {

TEST_CASE("embed_tokens: token count is K + 1") {
  Rng rng(301);
  DenoiserParams p = init_denoiser(small_config(), 4, rng);
  Tensor x = random_frames(2, 4, rng);
  KeyframeMask mask = KeyframeMask::from_indices(2, {0, 1});
  Tensor tokens = embed_tokens(x, mask, 3, std::nullopt, p);
  CHECK(tokens.shape().d[0] == 3);
  CHECK(tokens.shape().d[1] == 16);
}

TEST_CASE("embed_tokens: missing condition uses the unconditional row") {
  Rng rng(303);
  DenoiserConfig cfg = small_config();
  DenoiserParams p = init_denoiser(cfg, 4, rng);
  Tensor x = random_frames(8, 4, rng);
  KeyframeMask mask = uniform_mask(8, 0.5);

  // Force class 2's embedding to equal the unconditional (last) row; the
  // condition tokens for cls = 2 and cls = none must then coincide.
  std::vector<double> table = p.class_table.data();
  for (int j = 0; j < cfg.d_model; ++j)
    table[2 * cfg.d_model + j] =
        table[static_cast<size_t>(cfg.n_classes) * cfg.d_model + j];
  p.class_table = Tensor::from(p.class_table.shape(), std::move(table));
  Tensor none_tok = embed_tokens(x, mask, 5, std::nullopt, p);
  Tensor cls_tok = embed_tokens(x, mask, 5, 2, p);
  for (int j = 0; j < cfg.d_model; ++j) CHECK(none_tok.at(0, j) == cls_tok.at(0, j));

  CHECK_THROWS_AS(embed_tokens(x, mask, 5, 6, p), config_error);
  CHECK_THROWS_AS(embed_tokens(x, mask, 5, -1, p), config_error);
}

TEST_CASE("positional encodings match a dense table at the original indices") {
  const int d = 16, n = 100;
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  Tensor dense = positional_encoding_rows(all, d);
  Tensor sparse = positional_encoding_rows({0, 50, 99}, d);
  int rows[] = {0, 50, 99};
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < d; ++j) CHECK(sparse.at(r, j) == dense.at(rows[r], j));
}

TEST_CASE("fsq_quantize: zero maps to zero, saturation hits 1") {
  Tensor z = Tensor::from(Shape{1, 2}, {0.0, 10.0});
  Tensor q = fsq_quantize(z, {5, 5});
  CHECK(q.at(0, 0) == 0.0);
  // round(2 * tanh(10)) / 2 = 1 exactly.
  CHECK(q.at(0, 1) == 1.0);
}

TEST_CASE("fsq_quantize: code grid stays bounded") {
  Rng rng(307);
  // Odd level counts: exactly L distinct values per dimension.
  std::vector<int> levels = {7, 5, 5, 5};
  std::set<std::vector<double>> distinct;
  const int batch = 4000;
  std::vector<double> z(static_cast<size_t>(batch) * 4);
  for (double& v : z) v = rng.normal() * 2.0;
  Tensor q = fsq_quantize(Tensor::from(Shape{batch, 4}, std::move(z)), levels);
  std::set<double> per_dim[4];
  for (int i = 0; i < batch; ++i) {
    std::vector<double> row(4);
    for (int j = 0; j < 4; ++j) {
      row[j] = q.at(i, j);
      per_dim[j].insert(row[j]);
      CHECK(row[j] >= -1.0);
      CHECK(row[j] <= 1.0);
    }
    distinct.insert(row);
  }
  CHECK(distinct.size() <= 7ull * 5 * 5 * 5);
  for (int j = 0; j < 4; ++j) CHECK(per_dim[j].size() <= static_cast<size_t>(levels[j]));

  // Even level counts land on the 2*floor(L/2)+1 grid of the pinned
  // formula (round(h tanh z)/h), one more value than L.
  std::vector<double> z8(static_cast<size_t>(batch));
  for (double& v : z8) v = rng.normal() * 2.0;
  Tensor q8 = fsq_quantize(Tensor::from(Shape{batch, 1}, std::move(z8)), {8});
  std::set<double> vals;
  for (int i = 0; i < batch; ++i) vals.insert(q8.at(i, 0));
  CHECK(vals.size() <= 9);
}

TEST_CASE("fsq straight-through gradient equals the tanh-path gradient") {
  // With rounding treated as identity in the backward pass, the gradient of
  // any linear head over fsq_quantize(x) must equal the gradient through
  // the un-rounded tanh path.  A linear head keeps the upstream gradient
  // independent of the (differing) forward values.
  Rng rng(311);
  Tensor point = random_frames(3, 4, rng);
  std::vector<int> levels = {8, 5, 5, 5};
  std::vector<double> h = {4, 2, 2, 2}, ih = {0.25, 0.5, 0.5, 0.5};
  std::vector<double> w(12);
  for (size_t i = 0; i < w.size(); ++i) w[i] = 0.2 + 0.1 * i;
  Tensor weights = Tensor::from(Shape{3, 4}, w);

  Tape t_ste, t_smooth;
  Tensor x1 = t_ste.watch(point);
  Tensor x2 = t_smooth.watch(point);
  t_ste.backward(sum(mul(fsq_quantize(x1, levels), weights)));
  t_smooth.backward(sum(mul(
      mul(mul(tanh(x2), Tensor::from(Shape{4}, h)), Tensor::from(Shape{4}, ih)), weights)));
  Tensor g1 = t_ste.grad(x1);
  Tensor g2 = t_smooth.grad(x2);
  for (int i = 0; i < point.numel(); ++i)
    CHECK(g1.data()[i] == doctest::Approx(g2.data()[i]).epsilon(1e-14));
}

TEST_CASE("attention: a single token attends to itself") {
  Rng rng(313);
  DenoiserConfig cfg = small_config();
  cfg.fsq_levels.clear();
  DenoiserParams p = init_denoiser(cfg, 4, rng);
  Tensor one = random_frames(1, cfg.d_model, rng);
  Tensor out = sparse_attention_layer(one, p.layers[0], cfg, false, nullptr);
  CHECK(out.shape().d[0] == 1);
  CHECK(all_finite(out));
}

TEST_CASE("attention is equivariant to permuting tokens") {
  Rng rng(317);
  DenoiserConfig cfg = small_config();
  DenoiserParams p = init_denoiser(cfg, 4, rng);
  Tensor tokens = random_frames(5, cfg.d_model, rng);
  Tensor out = sparse_attention_layer(tokens, p.layers[0], cfg, false, nullptr);

  std::vector<int> perm = {3, 1, 4, 0, 2};
  Tensor permuted = gather_rows(tokens, perm);
  Tensor out_p = sparse_attention_layer(permuted, p.layers[0], cfg, false, nullptr);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < cfg.d_model; ++j)
      CHECK(out_p.at(i, j) == doctest::Approx(out.at(perm[i], j)).epsilon(1e-12));
}

TEST_CASE("interpolation: midpoint, identity, and exact linear fields") {
  // keyframes {0,2}: f0 = 0, f2 = 4 -> f1 = 2.
  Tensor kf = Tensor::from(Shape{2, 1}, {0, 4});
  KeyframeMask m02 = KeyframeMask::from_indices(3, {0, 2});
  Tensor dense = interpolate_features(kf, m02);
  CHECK(dense.at(1, 0) == 2.0);
  CHECK(dense.at(0, 0) == 0.0);
  CHECK(dense.at(2, 0) == 4.0);

  Rng rng(331);
  Tensor feats = random_frames(6, 5, rng);
  KeyframeMask all = KeyframeMask::from_indices(6, {0, 1, 2, 3, 4, 5});
  Tensor same = interpolate_features(feats, all);
  CHECK(same.data() == feats.data());

  // Linear-in-index features are reconstructed exactly under any mask.
  const int n = 40, d = 8;
  std::vector<double> a(d), b(d);
  for (int j = 0; j < d; ++j) {
    a[j] = rng.uniform(-1, 1);
    b[j] = rng.uniform(-1, 1);
  }
  for (int trial = 0; trial < 50; ++trial) {
    std::set<int> idx = {0, n - 1};
    int k = rng.uniform_int(2, n);
    while (static_cast<int>(idx.size()) < k) idx.insert(rng.uniform_int(0, n - 1));
    std::vector<int> keys(idx.begin(), idx.end());
    std::vector<double> kf_data;
    for (int key : keys)
      for (int j = 0; j < d; ++j) kf_data.push_back(a[j] * key + b[j]);
    Tensor rebuilt = interpolate_features(
        Tensor::from(Shape{static_cast<int>(keys.size()), d}, kf_data),
        KeyframeMask::from_indices(n, keys));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j)
        CHECK(std::fabs(rebuilt.at(i, j) - (a[j] * i + b[j])) <= 1e-12);
  }
}

TEST_CASE("denoise: output shape matches input for any mask") {
  Rng rng(337);
  DenoiserConfig cfg = small_config();
  DenoiserParams p = init_denoiser(cfg, 6, rng);
  for (double rate : {0.0, 0.5, 0.8}) {
    Tensor x = random_frames(24, 6, rng);
    KeyframeMask mask = uniform_mask(24, rate);
    Tensor out = denoise(x, 3, 1, mask, p);
    CHECK(out.shape().d[0] == 24);
    CHECK(out.shape().d[1] == 6);
    CHECK(all_finite(out));
  }
}

TEST_CASE("denoise ignores non-keyframe rows bit-for-bit") {
  Rng rng(347);
  DenoiserConfig cfg = small_config();
  DenoiserParams p = init_denoiser(cfg, 6, rng);
  Tensor x = random_frames(24, 6, rng);
  KeyframeMask mask = uniform_mask(24, 0.7);
  Tensor base = denoise(x, 5, 2, mask, p);

  std::vector<double> tampered = x.data();
  for (int i = 0; i < 24; ++i) {
    if (mask.is_keyframe(i)) continue;
    for (int j = 0; j < 6; ++j) tampered[static_cast<size_t>(i) * 6 + j] = rng.normal() * 50.0;
  }
  Tensor out = denoise(Tensor::from(x.shape(), std::move(tampered)), 5, 2, mask, p);
  CHECK(out.data() == base.data());
}

TEST_CASE("denoise responds to the condition") {
  Rng rng(349);
  DenoiserConfig cfg = small_config();
  DenoiserParams p = init_denoiser(cfg, 6, rng);
  Tensor x = random_frames(16, 6, rng);
  KeyframeMask mask = uniform_mask(16, 0.5);
  Tensor c1 = denoise(x, 4, 1, mask, p);
  Tensor c2 = denoise(x, 4, 3, mask, p);
  double diff = 0.0;
  for (int i = 0; i < c1.numel(); ++i)
    diff = std::max(diff, std::fabs(c1.data()[i] - c2.data()[i]));
  CHECK(diff > 1e-8);
}

TEST_CASE("classifier-free guidance identities") {
  Rng rng(353);
  DenoiserConfig cfg = small_config();
  DenoiserParams p = init_denoiser(cfg, 6, rng);
  Tensor x = random_frames(16, 6, rng);
  KeyframeMask mask = uniform_mask(16, 0.5);

  Tensor cond = denoise(x, 4, 2, mask, p);
  Tensor uncond = denoise(x, 4, std::nullopt, mask, p);

  CHECK(denoise_cfg(x, 4, 2, mask, p, 1.0).data() == cond.data());
  CHECK(denoise_cfg(x, 4, 2, mask, p, 0.0).data() == uncond.data());
  CHECK(denoise_cfg(x, 4, std::nullopt, mask, p, 2.5).data() == uncond.data());

  Tensor guided = denoise_cfg(x, 4, 2, mask, p, 2.5);
  for (int i = 0; i < guided.numel(); ++i) {
    double expect = uncond.data()[i] + 2.5 * (cond.data()[i] - uncond.data()[i]);
    CHECK(guided.data()[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("parameter count is a pure function of the config") {
  DenoiserConfig cfg = small_config();
  Rng r1(1), r2(999);
  CHECK(param_count(init_denoiser(cfg, 6, r1)) == param_count(init_denoiser(cfg, 6, r2)));
}

TEST_CASE("dropout only perturbs training mode") {
  Rng rng(359);
  DenoiserConfig cfg = small_config();
  DenoiserParams p = init_denoiser(cfg, 6, rng);
  Tensor x = random_frames(12, 6, rng);
  KeyframeMask mask = uniform_mask(12, 0.5);
  Tensor a = denoise(x, 2, 1, mask, p);
  Tensor b = denoise(x, 2, 1, mask, p);
  CHECK(a.data() == b.data());  // eval mode is deterministic

  Rng d1(5), d2(6);
  Tensor t1 = denoise(x, 2, 1, mask, p, true, &d1);
  Tensor t2 = denoise(x, 2, 1, mask, p, true, &d2);
  double diff = 0.0;
  for (int i = 0; i < t1.numel(); ++i)
    diff = std::max(diff, std::fabs(t1.data()[i] - t2.data()[i]));
  CHECK(diff > 0.0);
}

}  // TEST_SUITE
