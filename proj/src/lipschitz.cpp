#include "smdm/lipschitz.hpp"

#include <algorithm>
#include <cmath>

namespace smdm {

namespace {

double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

Tape* pair_tape(const Tensor& a, const Tensor& b) {
  if (a.on_tape() && b.on_tape() && a.tape() != b.tape())
    throw contract_error("lipschitz op inputs live on different tapes");
  return a.on_tape() ? a.tape() : b.tape();
}

}  // namespace

Tensor normalize_rows(const Tensor& weight, const Tensor& bound) {
  if (weight.shape().rank != 2) throw contract_error("normalize_rows: rank-2 weight expected");
  if (bound.numel() != 1) throw contract_error("normalize_rows: scalar bound expected");
  int rows = weight.shape().d[0], cols = weight.shape().d[1];
  double p = bound.data()[0];
  const auto& w = weight.data();

  std::vector<double> out(w.size());
  std::vector<double> row_norm(rows, 0.0);
  for (int i = 0; i < rows; ++i) {
    double n1 = 0.0;
    for (int j = 0; j < cols; ++j) n1 += std::fabs(w[static_cast<size_t>(i) * cols + j]);
    row_norm[i] = n1;
    double scale = (n1 > 0.0 && p < n1) ? p / n1 : 1.0;
    for (int j = 0; j < cols; ++j)
      out[static_cast<size_t>(i) * cols + j] = w[static_cast<size_t>(i) * cols + j] * scale;
  }

  Tape* tp = pair_tape(weight, bound);
  auto data = std::make_shared<const std::vector<double>>(std::move(out));
  if (!tp) return Tensor::with_node(weight.shape(), data, nullptr, -1);

  int nw = weight.node(), np = bound.node();
  int no = tp->alloc_node(data->size());
  auto wp = weight.data_ptr();
  auto norms = std::make_shared<const std::vector<double>>(std::move(row_norm));
  tp->push_pullback([nw, np, no, rows, cols, p, wp, norms](Tape& t) {
    const auto& g = t.grad_view(no);
    for (int i = 0; i < rows; ++i) {
      double n1 = (*norms)[i];
      const double* wrow = wp->data() + static_cast<size_t>(i) * cols;
      const double* grow = g.data() + static_cast<size_t>(i) * cols;
      bool clamped = n1 > 0.0 && p < n1;
      if (!clamped) {
        if (nw >= 0) {
          auto& gw = t.grad_buf(nw);
          for (int j = 0; j < cols; ++j) gw[static_cast<size_t>(i) * cols + j] += grow[j];
        }
        continue;
      }
      double dot = 0.0;
      for (int j = 0; j < cols; ++j) dot += grow[j] * wrow[j];
      if (nw >= 0) {
        auto& gw = t.grad_buf(nw);
        double s = p / n1;
        double coef = p / (n1 * n1) * dot;
        for (int j = 0; j < cols; ++j)
          gw[static_cast<size_t>(i) * cols + j] += s * grow[j] - coef * sign(wrow[j]);
      }
      if (np >= 0) t.grad_buf(np)[0] += dot / n1;
    }
  });
  return Tensor::with_node(weight.shape(), data, tp, no);
}

Tensor matrix_inf_norm(const Tensor& weight) {
  if (weight.shape().rank != 2) throw contract_error("matrix_inf_norm: rank-2 weight expected");
  int rows = weight.shape().d[0], cols = weight.shape().d[1];
  const auto& w = weight.data();
  int best = 0;
  double best_norm = -1.0;
  for (int i = 0; i < rows; ++i) {
    double n1 = 0.0;
    for (int j = 0; j < cols; ++j) n1 += std::fabs(w[static_cast<size_t>(i) * cols + j]);
    if (n1 > best_norm) {
      best_norm = n1;
      best = i;
    }
  }
  Tape* tp = weight.tape();
  auto data = std::make_shared<const std::vector<double>>(std::vector<double>{best_norm});
  if (!tp) return Tensor::with_node(Shape{}, data, nullptr, -1);
  int nw = weight.node();
  int no = tp->alloc_node(1);
  auto wp = weight.data_ptr();
  tp->push_pullback([nw, no, best, cols, wp](Tape& t) {
    if (nw < 0) return;
    double g = t.grad_view(no)[0];
    auto& gw = t.grad_buf(nw);
    const double* wrow = wp->data() + static_cast<size_t>(best) * cols;
    for (int j = 0; j < cols; ++j) gw[static_cast<size_t>(best) * cols + j] += g * sign(wrow[j]);
  });
  return Tensor::with_node(Shape{}, data, tp, no);
}

LipschitzMLP make_lipschitz_mlp(const std::vector<int>& dims, double omega0_first, Rng& rng) {
  if (dims.size() < 2) throw contract_error("make_lipschitz_mlp: need at least 2 dims");
  LipschitzMLP mlp;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    LipschitzLayer layer;
    bool last = l + 2 == dims.size();
    layer.activation = last ? Activation::kIdentity : Activation::kSine;
    layer.omega0 = (l == 0 && !last) ? omega0_first : 1.0;
    int in = dims[l], out = dims[l + 1];
    std::vector<double> w(static_cast<size_t>(out) * in);
    double lim = 1.0 / in / layer.omega0;
    for (double& v : w) v = rng.uniform(-lim, lim);
    layer.weight = Tensor::from(Shape{out, in}, std::move(w));
    layer.bias = Tensor::zeros(Shape{out});
    // c_i starts at the matrix inf-norm; softplus(c) > c keeps rows
    // unclamped at init.
    layer.bound_param = Tensor::scalar(matrix_inf_norm(layer.weight).value());
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

Tensor layer_bound(const LipschitzLayer& layer, BoundSource source) {
  if (source == BoundSource::kWeightNorm)
    return softplus(matrix_inf_norm(layer.weight));
  return softplus(layer.bound_param);
}

Tensor lip_forward(const LipschitzMLP& mlp, const Tensor& x) {
  if (x.shape().rank != 2 || x.shape().d[1] != mlp.in_dim())
    throw contract_error("lip_forward: input shape " + x.shape().str() +
                         " does not match in_dim " + std::to_string(mlp.in_dim()));
  Tensor h = x;
  for (const auto& layer : mlp.layers) {
    Tensor w_hat = normalize_rows(layer.weight, layer_bound(layer, mlp.bound_source));
    Tensor z = add(matmul(h, transpose(w_hat)), layer.bias);
    if (layer.activation == Activation::kSine)
      h = sin(layer.omega0 == 1.0 ? z : scalar_mul(z, layer.omega0));
    else
      h = z;
  }
  return h;
}

Tensor lipschitz_loss(const LipschitzMLP& mlp) {
  if (mlp.layers.empty()) throw contract_error("lipschitz_loss: empty MLP");
  Tensor prod = layer_bound(mlp.layers[0], mlp.bound_source);
  for (size_t l = 1; l < mlp.layers.size(); ++l)
    prod = mul(prod, layer_bound(mlp.layers[l], mlp.bound_source));
  return prod;
}

double lipschitz_bound(const LipschitzMLP& mlp) {
  double bound = 1.0;
  for (const auto& layer : mlp.layers) {
    double p = layer_bound(layer, mlp.bound_source).value();
    double omega = layer.activation == Activation::kSine ? layer.omega0 : 1.0;
    bound *= omega * p;
  }
  return bound;
}

double empirical_lipschitz(const LipschitzMLP& mlp, int trials, Rng& rng) {
  if (trials < 1) throw contract_error("empirical_lipschitz: trials >= 1 required");
  int d = mlp.in_dim();
  auto eval = [&](const std::vector<double>& v) {
    return lip_forward(mlp, Tensor::from(Shape{1, d}, v)).data();
  };
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> y1(d), y2(d);
    for (double& v : y1) v = rng.normal() * 3.0;
    // Alternate far pairs with close ones; local slopes are what the sine
    // layers maximize.
    double scale = (trial % 2 == 0) ? 1.0 : 1e-3;
    for (int j = 0; j < d; ++j) y2[j] = y1[j] + rng.normal() * scale;
    double din = 0.0;
    for (int j = 0; j < d; ++j) din = std::max(din, std::fabs(y1[j] - y2[j]));
    if (din < 1e-9) continue;
    auto o1 = eval(y1);
    auto o2 = eval(y2);
    double dout = 0.0;
    for (size_t j = 0; j < o1.size(); ++j) dout = std::max(dout, std::fabs(o1[j] - o2[j]));
    worst = std::max(worst, dout / din);
  }
  return worst;
}

}  // namespace smdm
