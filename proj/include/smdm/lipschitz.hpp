#pragma once

// Lipschitz-bounded MLP layers: softplus-parameterized row normalization of
// the weights, sinusoidal activations, and the product-of-bounds
// regularization loss.  Everything differentiates through the
// normalization, so the layers can sit inside the denoiser graph.

#include <vector>

#include "smdm/rng.hpp"
#include "smdm/tensor.hpp"

namespace smdm {

enum class Activation { kSine, kIdentity };

// Where the per-layer bound p_i comes from: a trainable scalar c_i
// (softplus(c_i), the default) or the softplus of the weight matrix's
// inf-norm (bound_source = weight_norm in the config).
enum class BoundSource { kTrainableScalar, kWeightNorm };

struct LipschitzLayer {
  Tensor weight;       // out x in
  Tensor bias;         // out
  Tensor bound_param;  // scalar c_i
  double omega0 = 1.0;
  Activation activation = Activation::kIdentity;

  int in_dim() const { return weight.shape().d[1]; }
  int out_dim() const { return weight.shape().d[0]; }
};

struct LipschitzMLP {
  std::vector<LipschitzLayer> layers;
  BoundSource bound_source = BoundSource::kTrainableScalar;

  int in_dim() const { return layers.front().in_dim(); }
  int out_dim() const { return layers.back().out_dim(); }
};

// dims = {in, hidden..., out}; every layer is sine-activated except the
// last, which stays identity so outputs are unbounded.  omega0_first only
// applies to the first layer; hidden sine layers use omega0 = 1.
LipschitzMLP make_lipschitz_mlp(const std::vector<int>& dims, double omega0_first, Rng& rng);

// Row k of W scaled by min(1, p / ||W_k||_1); zero rows pass through.
// Differentiable in both W and p.
Tensor normalize_rows(const Tensor& weight, const Tensor& bound);

// Max row l1 norm (the matrix inf-norm), with a subgradient into the
// argmax row.
Tensor matrix_inf_norm(const Tensor& weight);

// Per-layer bound p_i as a tensor on whatever tape the layer lives on.
Tensor layer_bound(const LipschitzLayer& layer, BoundSource source);

// sigma(x W_hat^T + b) layer by layer; x is rows x in_dim.
Tensor lip_forward(const LipschitzMLP& mlp, const Tensor& x);

// Product over layers of the bound p_i.
Tensor lipschitz_loss(const LipschitzMLP& mlp);

// prod_i omega0_i * p_i, the l-inf -> l-inf Lipschitz bound of the whole MLP.
double lipschitz_bound(const LipschitzMLP& mlp);

// Max over random pairs of ||g(y1)-g(y2)||_inf / ||y1-y2||_inf.
double empirical_lipschitz(const LipschitzMLP& mlp, int trials, Rng& rng);

}  // namespace smdm
