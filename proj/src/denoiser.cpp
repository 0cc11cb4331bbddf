#include "smdm/denoiser.hpp"

#include <algorithm>
#include <cmath>

namespace smdm {

namespace {

constexpr double kPi = 3.14159265358979323846;

Tensor xavier(int rows, int cols, Rng& rng) {
  double lim = std::sqrt(6.0 / (rows + cols));
  std::vector<double> w(static_cast<size_t>(rows) * cols);
  for (double& v : w) v = rng.uniform(-lim, lim);
  return Tensor::from(Shape{rows, cols}, std::move(w));
}

Tensor sinusoid_row(double pos, int d_model) {
  std::vector<double> row(d_model);
  for (int i = 0; i < d_model / 2; ++i) {
    double freq = std::pow(10000.0, -2.0 * i / d_model);
    row[2 * i] = std::sin(pos * freq);
    row[2 * i + 1] = std::cos(pos * freq);
  }
  return Tensor::from(Shape{1, d_model}, std::move(row));
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng* rng) {
  if (!training || rate <= 0.0) return x;
  if (!rng) throw contract_error("dropout: training mode requires an rng");
  std::vector<double> mask(x.numel());
  double keep = 1.0 / (1.0 - rate);
  for (double& v : mask) v = rng->uniform() < rate ? 0.0 : keep;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

}  // namespace

BoundSource DenoiserConfig::bound_source_enum() const {
  if (bound_source == "scalar") return BoundSource::kTrainableScalar;
  if (bound_source == "weight_norm") return BoundSource::kWeightNorm;
  throw config_error("bound_source must be 'scalar' or 'weight_norm', got '" +
                     bound_source + "'");
}

void DenoiserConfig::validate() const {
  if (d_model < 2 || d_model % 2 != 0)
    throw config_error("d_model must be even and >= 2");
  if (n_heads < 1 || d_model % n_heads != 0)
    throw config_error("d_model must be divisible by n_heads");
  if (n_layers < 1) throw config_error("n_layers must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw config_error("dropout must be in [0, 1)");
  if (reduction_rate < 0.0 || reduction_rate >= 1.0)
    throw config_error("reduction_rate must be in [0, 1)");
  if (cfg_dropout < 0.0 || cfg_dropout >= 1.0)
    throw config_error("cfg_dropout must be in [0, 1)");
  if (omega0 <= 0.0) throw config_error("omega0 must be positive");
  if (lambda < 0.0) throw config_error("lambda must be >= 0");
  if (guidance_scale < 0.0) throw config_error("guidance_scale must be >= 0");
  if (n_classes < 1) throw config_error("n_classes must be >= 1");
  for (int l : fsq_levels)
    if (l < 2) throw config_error("fsq levels must all be >= 2");
  bound_source_enum();
}

DenoiserParams init_denoiser(const DenoiserConfig& cfg, int data_dim, Rng& rng) {
  cfg.validate();
  if (data_dim < 1) throw config_error("data_dim must be >= 1");
  DenoiserParams p;
  p.config = cfg;
  p.data_dim = data_dim;
  int d = cfg.d_model;

  Rng mlp_rng = rng.stream("lip_mlp");
  p.input_mlp = make_lipschitz_mlp({data_dim, d, d}, cfg.omega0, mlp_rng);
  p.output_mlp = make_lipschitz_mlp({d, d, data_dim}, cfg.omega0, mlp_rng);
  BoundSource bs = cfg.bound_source_enum();
  p.input_mlp.bound_source = bs;
  p.output_mlp.bound_source = bs;

  Rng attn_rng = rng.stream("attention");
  int n_fsq = static_cast<int>(cfg.fsq_levels.size());
  for (int l = 0; l < cfg.n_layers; ++l) {
    AttentionLayerParams lp;
    lp.ln1_gain = Tensor::full(Shape{d}, 1.0);
    lp.ln1_bias = Tensor::zeros(Shape{d});
    lp.wq = xavier(d, d, attn_rng);
    lp.bq = Tensor::zeros(Shape{d});
    lp.wk = xavier(d, d, attn_rng);
    lp.bk = Tensor::zeros(Shape{d});
    lp.wv = xavier(d, d, attn_rng);
    lp.bv = Tensor::zeros(Shape{d});
    lp.wo = xavier(d, d, attn_rng);
    lp.bo = Tensor::zeros(Shape{d});
    if (cfg.fsq_enabled()) {
      lp.fsq_down = xavier(d, n_fsq, attn_rng);
      lp.fsq_up = xavier(n_fsq, d, attn_rng);
    }
    lp.ln2_gain = Tensor::full(Shape{d}, 1.0);
    lp.ln2_bias = Tensor::zeros(Shape{d});
    lp.ffn_w1 = xavier(d, cfg.d_ff(), attn_rng);
    lp.ffn_b1 = Tensor::zeros(Shape{cfg.d_ff()});
    lp.ffn_w2 = xavier(cfg.d_ff(), d, attn_rng);
    lp.ffn_b2 = Tensor::zeros(Shape{d});
    p.layers.push_back(std::move(lp));
  }

  Rng cond_rng = rng.stream("condition");
  p.t_w1 = xavier(d, d, cond_rng);
  p.t_b1 = Tensor::zeros(Shape{d});
  p.t_w2 = xavier(d, d, cond_rng);
  p.t_b2 = Tensor::zeros(Shape{d});
  std::vector<double> table(static_cast<size_t>(cfg.n_classes + 1) * d);
  for (double& v : table) v = cond_rng.normal() * 0.02;
  p.class_table = Tensor::from(Shape{cfg.n_classes + 1, d}, std::move(table));
  return p;
}

std::vector<ParamRef> collect_params(DenoiserParams& p) {
  std::vector<ParamRef> out;
  auto mlp = [&](const std::string& prefix, LipschitzMLP& m) {
    for (size_t l = 0; l < m.layers.size(); ++l) {
      std::string base = prefix + ".l" + std::to_string(l);
      out.push_back({base + ".weight", &m.layers[l].weight});
      out.push_back({base + ".bias", &m.layers[l].bias});
      out.push_back({base + ".bound", &m.layers[l].bound_param});
    }
  };
  mlp("in_mlp", p.input_mlp);
  mlp("out_mlp", p.output_mlp);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    std::string base = "layer" + std::to_string(l);
    auto& lp = p.layers[l];
    out.push_back({base + ".ln1_gain", &lp.ln1_gain});
    out.push_back({base + ".ln1_bias", &lp.ln1_bias});
    out.push_back({base + ".wq", &lp.wq});
    out.push_back({base + ".bq", &lp.bq});
    out.push_back({base + ".wk", &lp.wk});
    out.push_back({base + ".bk", &lp.bk});
    out.push_back({base + ".wv", &lp.wv});
    out.push_back({base + ".bv", &lp.bv});
    out.push_back({base + ".wo", &lp.wo});
    out.push_back({base + ".bo", &lp.bo});
    if (p.config.fsq_enabled()) {
      out.push_back({base + ".fsq_down", &lp.fsq_down});
      out.push_back({base + ".fsq_up", &lp.fsq_up});
    }
    out.push_back({base + ".ln2_gain", &lp.ln2_gain});
    out.push_back({base + ".ln2_bias", &lp.ln2_bias});
    out.push_back({base + ".ffn_w1", &lp.ffn_w1});
    out.push_back({base + ".ffn_b1", &lp.ffn_b1});
    out.push_back({base + ".ffn_w2", &lp.ffn_w2});
    out.push_back({base + ".ffn_b2", &lp.ffn_b2});
  }
  out.push_back({"t_mlp.w1", &p.t_w1});
  out.push_back({"t_mlp.b1", &p.t_b1});
  out.push_back({"t_mlp.w2", &p.t_w2});
  out.push_back({"t_mlp.b2", &p.t_b2});
  out.push_back({"class_table", &p.class_table});
  return out;
}

size_t param_count(const DenoiserParams& params) {
  auto& mut = const_cast<DenoiserParams&>(params);
  size_t n = 0;
  for (const auto& ref : collect_params(mut)) n += ref.tensor->numel();
  return n;
}

DenoiserParams watch_params(Tape& tape, const DenoiserParams& params) {
  DenoiserParams bound = params;
  for (auto& ref : collect_params(bound)) *ref.tensor = tape.watch(*ref.tensor);
  return bound;
}

Tensor positional_encoding_rows(const std::vector<int>& frame_indices, int d_model) {
  std::vector<double> rows;
  rows.reserve(frame_indices.size() * d_model);
  for (int idx : frame_indices) {
    Tensor r = sinusoid_row(static_cast<double>(idx), d_model);
    rows.insert(rows.end(), r.data().begin(), r.data().end());
  }
  return Tensor::from(Shape{static_cast<int>(frame_indices.size()), d_model},
                      std::move(rows));
}

Tensor timestep_embedding(int t, int d_model) {
  return sinusoid_row(static_cast<double>(t), d_model);
}

Tensor embed_tokens(const Tensor& x_t, const KeyframeMask& mask, int t,
                    std::optional<int> cls, const DenoiserParams& params) {
  const DenoiserConfig& cfg = params.config;
  if (x_t.shape().rank != 2 || x_t.shape().d[1] != params.data_dim)
    throw contract_error("embed_tokens: input shape " + x_t.shape().str() +
                         " does not match data_dim " + std::to_string(params.data_dim));
  if (mask.frames() != x_t.shape().d[0])
    throw contract_error("embed_tokens: mask length does not match frame count");
  if (cls && (*cls < 0 || *cls >= cfg.n_classes))
    throw config_error("class id " + std::to_string(*cls) + " out of range [0, " +
                       std::to_string(cfg.n_classes) + ")");

  std::vector<int> idx = mask.indices();
  Tensor h = lip_forward(params.input_mlp, gather_rows(x_t, idx));
  h = add(h, positional_encoding_rows(idx, cfg.d_model));

  Tensor t_feat = timestep_embedding(t, cfg.d_model);
  t_feat = add(matmul(tanh(add(matmul(t_feat, params.t_w1), params.t_b1)), params.t_w2),
               params.t_b2);
  int row = cls ? *cls : cfg.n_classes;  // last row is the unconditional token
  Tensor cond = add(t_feat, gather_rows(params.class_table, {row}));
  return concat(cond, h, 0);
}

Tensor fsq_quantize(const Tensor& keys, const std::vector<int>& levels) {
  if (keys.shape().rank != 2 || keys.shape().d[1] != static_cast<int>(levels.size()))
    throw contract_error("fsq_quantize: key dim must equal number of levels");
  int n = static_cast<int>(levels.size());
  std::vector<double> h(n), inv_h(n);
  for (int j = 0; j < n; ++j) {
    if (levels[j] < 2) throw config_error("fsq levels must all be >= 2");
    h[j] = static_cast<double>(levels[j] / 2);
    inv_h[j] = 1.0 / h[j];
  }
  Tensor hv = Tensor::from(Shape{n}, std::move(h));
  Tensor ihv = Tensor::from(Shape{n}, std::move(inv_h));
  return mul(round_ste(mul(tanh(keys), hv)), ihv);
}

Tensor sparse_attention_layer(const Tensor& tokens, const AttentionLayerParams& lp,
                              const DenoiserConfig& cfg, bool training, Rng* dropout_rng) {
  if (tokens.shape().rank != 2 || tokens.shape().d[1] != cfg.d_model)
    throw contract_error("sparse_attention_layer: tokens must be rows x d_model");
  int dh = cfg.d_head();
  double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor a = add(mul(layer_norm(tokens), lp.ln1_gain), lp.ln1_bias);
  Tensor q = add(matmul(a, lp.wq), lp.bq);
  Tensor k = add(matmul(a, lp.wk), lp.bk);
  Tensor v = add(matmul(a, lp.wv), lp.bv);
  if (cfg.fsq_enabled())
    k = matmul(fsq_quantize(matmul(k, lp.fsq_down), cfg.fsq_levels), lp.fsq_up);

  Tensor mixed;
  for (int head = 0; head < cfg.n_heads; ++head) {
    Tensor qh = slice(q, 1, head * dh, dh);
    Tensor kh = slice(k, 1, head * dh, dh);
    Tensor vh = slice(v, 1, head * dh, dh);
    Tensor kht = transpose(kh);
    mac_set_tag(MacTag::kAttnScore);
    Tensor scores = matmul(qh, kht);
    mac_set_tag(MacTag::kOther);
    Tensor probs = softmax(scalar_mul(scores, inv_sqrt_dh));
    mac_set_tag(MacTag::kAttnMix);
    Tensor mh = matmul(probs, vh);
    mac_set_tag(MacTag::kOther);
    mixed = head == 0 ? mh : concat(mixed, mh, 1);
  }
  Tensor attn_out = add(matmul(mixed, lp.wo), lp.bo);
  Tensor h1 = add(tokens, dropout(attn_out, cfg.dropout, training, dropout_rng));

  Tensor f = add(mul(layer_norm(h1), lp.ln2_gain), lp.ln2_bias);
  mac_set_tag(MacTag::kFfn);
  Tensor f1 = matmul(f, lp.ffn_w1);
  mac_set_tag(MacTag::kOther);
  f1 = softplus(add(f1, lp.ffn_b1));
  mac_set_tag(MacTag::kFfn);
  Tensor f2 = matmul(f1, lp.ffn_w2);
  mac_set_tag(MacTag::kOther);
  f2 = add(f2, lp.ffn_b2);
  return add(h1, dropout(f2, cfg.dropout, training, dropout_rng));
}

Tensor interpolate_features(const Tensor& keyframe_features, const KeyframeMask& mask) {
  if (keyframe_features.shape().rank != 2)
    throw contract_error("interpolate_features: rank-2 features expected");
  std::vector<int> idx = mask.indices();
  if (static_cast<int>(idx.size()) != keyframe_features.shape().d[0])
    throw contract_error("interpolate_features: feature rows must equal keyframe count");
  int n = mask.frames();
  int d = keyframe_features.shape().d[1];
  const auto& f = keyframe_features.data();

  std::vector<double> out(static_cast<size_t>(n) * d);
  for (size_t a = 0; a < idx.size(); ++a)
    std::copy(f.begin() + a * d, f.begin() + (a + 1) * d,
              out.begin() + static_cast<size_t>(idx[a]) * d);
  for (size_t a = 0; a + 1 < idx.size(); ++a) {
    int i = idx[a], j = idx[a + 1];
    double inv = 1.0 / (j - i);
    for (int nn = i + 1; nn < j; ++nn) {
      double wi = j - nn, wj = nn - i;
      const double* fi = f.data() + a * d;
      const double* fj = f.data() + (a + 1) * d;
      double* dst = out.data() + static_cast<size_t>(nn) * d;
      for (int col = 0; col < d; ++col) dst[col] = (wi * fi[col] + wj * fj[col]) * inv;
    }
  }
  int kf = static_cast<int>(idx.size());
  mac_set_tag(MacTag::kInterp);
  mac_add(2ull * static_cast<uint64_t>(n - kf) * d);
  mac_set_tag(MacTag::kOther);

  Tape* tp = keyframe_features.tape();
  auto data = std::make_shared<const std::vector<double>>(std::move(out));
  if (!tp) return Tensor::with_node(Shape{n, d}, data, nullptr, -1);
  int nf = keyframe_features.node();
  int no = tp->alloc_node(data->size());
  auto ids = std::make_shared<const std::vector<int>>(std::move(idx));
  tp->push_pullback([nf, no, d, ids](Tape& t) {
    if (nf < 0) return;
    const auto& g = t.grad_view(no);
    auto& gf = t.grad_buf(nf);
    for (size_t a = 0; a < ids->size(); ++a)
      for (int col = 0; col < d; ++col)
        gf[a * d + col] += g[static_cast<size_t>((*ids)[a]) * d + col];
    for (size_t a = 0; a + 1 < ids->size(); ++a) {
      int i = (*ids)[a], j = (*ids)[a + 1];
      double inv = 1.0 / (j - i);
      for (int nn = i + 1; nn < j; ++nn) {
        const double* gn = g.data() + static_cast<size_t>(nn) * d;
        double wi = (j - nn) * inv, wj = (nn - i) * inv;
        for (int col = 0; col < d; ++col) {
          gf[a * d + col] += wi * gn[col];
          gf[(a + 1) * d + col] += wj * gn[col];
        }
      }
    }
  });
  return Tensor::with_node(Shape{n, d}, data, tp, no);
}

Tensor denoise(const Tensor& x_t, int t, std::optional<int> cls, const KeyframeMask& mask,
               const DenoiserParams& params, bool training, Rng* dropout_rng) {
  Tensor tokens = embed_tokens(x_t, mask, t, cls, params);
  for (const auto& lp : params.layers)
    tokens = sparse_attention_layer(tokens, lp, params.config, training, dropout_rng);
  Tensor feats = slice(tokens, 0, 1, mask.count);  // drop the condition token
  Tensor dense = interpolate_features(feats, mask);
  return lip_forward(params.output_mlp, dense);
}

Tensor denoise_cfg(const Tensor& x_t, int t, std::optional<int> cls,
                   const KeyframeMask& mask, const DenoiserParams& params,
                   double guidance_scale) {
  if (guidance_scale < 0.0) throw config_error("guidance_scale must be >= 0");
  if (!cls || guidance_scale == 0.0) return denoise(x_t, t, std::nullopt, mask, params);
  if (guidance_scale == 1.0) return denoise(x_t, t, cls, mask, params);
  Tensor uncond = denoise(x_t, t, std::nullopt, mask, params);
  Tensor cond = denoise(x_t, t, cls, mask, params);
  std::vector<double> out(uncond.data());
  const auto& cv = cond.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += guidance_scale * (cv[i] - out[i]);
  return Tensor::from(uncond.shape(), std::move(out));
}

}  // namespace smdm
