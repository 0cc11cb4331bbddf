#pragma once

// The denoiser f(x_t, t, c): keyframe rows are gathered, projected by a
// Lipschitz MLP, run through a pre-norm transformer stack restricted to the
// K keyframe tokens plus one condition token, linearly interpolated back to
// dense frames in feature space, and projected out by a second Lipschitz
// MLP.  Non-keyframe rows of the input never enter the network.

#include <optional>
#include <string>
#include <vector>

#include "smdm/keyframes.hpp"
#include "smdm/lipschitz.hpp"
#include "smdm/rng.hpp"
#include "smdm/tensor.hpp"

namespace smdm {

struct DenoiserConfig {
  int d_model = 64;
  int n_layers = 4;
  int n_heads = 4;
  double dropout = 0.1;
  double reduction_rate = 0.8;
  double omega0 = 30.0;
  double lambda = 1e-6;               // Lipschitz loss weight
  std::vector<int> fsq_levels = {8, 5, 5, 5};  // empty disables key quantization
  int n_classes = 6;
  double cfg_dropout = 0.1;           // condition-drop probability in training
  double guidance_scale = 2.5;
  std::string bound_source = "scalar";  // or "weight_norm"

  int d_ff() const { return 4 * d_model; }
  int d_head() const { return d_model / n_heads; }
  bool fsq_enabled() const { return !fsq_levels.empty(); }
  BoundSource bound_source_enum() const;
  void validate() const;
};

struct AttentionLayerParams {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, bq, wk, bk, wv, bv;  // d_model x d_model projections (+ biases)
  Tensor wo, bo;
  Tensor fsq_down, fsq_up;        // around key quantization; unset when disabled
  Tensor ln2_gain, ln2_bias;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

struct DenoiserParams {
  DenoiserConfig config;
  int data_dim = 0;          // D, per-frame feature width
  LipschitzMLP input_mlp;    // D -> d_model
  LipschitzMLP output_mlp;   // d_model -> D
  std::vector<AttentionLayerParams> layers;
  Tensor t_w1, t_b1, t_w2, t_b2;  // timestep-embedding MLP
  Tensor class_table;             // (n_classes + 1) x d_model; last row = unconditional
};

DenoiserParams init_denoiser(const DenoiserConfig& cfg, int data_dim, Rng& rng);

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

// Stable traversal order; shared by the trainer, the optimizer, and the
// checkpoint writer.
std::vector<ParamRef> collect_params(DenoiserParams& params);
size_t param_count(const DenoiserParams& params);

// Copy whose tensors are watched leaves of the tape (data shared).
DenoiserParams watch_params(Tape& tape, const DenoiserParams& params);

// Fixed sinusoidal tables.
Tensor positional_encoding_rows(const std::vector<int>& frame_indices, int d_model);
Tensor timestep_embedding(int t, int d_model);

// K+1 tokens: condition token (timestep + class embedding) followed by the
// projected keyframe rows with positional encodings at their original
// frame indices.
Tensor embed_tokens(const Tensor& x_t, const KeyframeMask& mask, int t,
                    std::optional<int> cls, const DenoiserParams& params);

// Per-dimension j: round(h * tanh(z)) / h with h = floor(L_j / 2);
// straight-through backward (rounding transparent, tanh path kept).
Tensor fsq_quantize(const Tensor& keys, const std::vector<int>& levels);

Tensor sparse_attention_layer(const Tensor& tokens, const AttentionLayerParams& lp,
                              const DenoiserConfig& cfg, bool training, Rng* dropout_rng);

// K x d keyframe features -> N x d dense features.  Keyframe rows are
// copied verbatim; rows between consecutive keyframes i < n < j get
// ((j-n)*f_i + (n-i)*f_j) / (j-i).
Tensor interpolate_features(const Tensor& keyframe_features, const KeyframeMask& mask);

Tensor denoise(const Tensor& x_t, int t, std::optional<int> cls, const KeyframeMask& mask,
               const DenoiserParams& params, bool training = false,
               Rng* dropout_rng = nullptr);

// uncond + s * (cond - uncond); s == 1 and s == 0 short-circuit to the
// single matching call, and cls == nullopt is always unconditional.
Tensor denoise_cfg(const Tensor& x_t, int t, std::optional<int> cls,
                   const KeyframeMask& mask, const DenoiserParams& params,
                   double guidance_scale);

}  // namespace smdm
