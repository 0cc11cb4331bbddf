#pragma once

// Noise schedules, the closed-form forward process, the x0-prediction
// training objective with optional Lipschitz regularization, Adam, and the
// ancestral sampler with the uniform -> geometry-driven mask schedule.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smdm/denoiser.hpp"
#include "smdm/keyframes.hpp"
#include "smdm/rng.hpp"
#include "smdm/tensor.hpp"

namespace smdm {

enum class ScheduleKind { kCosine, kLinear };

ScheduleKind schedule_kind_from(const std::string& name);
std::string schedule_kind_name(ScheduleKind kind);

// Arrays are indexed by timestep t in [1, T]; slot 0 carries the
// alpha_bar = 1 boundary.
struct NoiseSchedule {
  int total_steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;      // cumulative product of (1 - beta)
  std::vector<double> posterior_var;  // beta_t * (1 - ab_{t-1}) / (1 - ab_t)
};

NoiseSchedule make_schedule(int total_steps, ScheduleKind kind);

// Closed-form cosine alpha-bar before per-step clipping; t in [0, T].
double cosine_alpha_bar(double t, double total_steps);

// x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) noise; t = 0 returns x0.
Tensor q_sample(const Tensor& x0, int t, const Tensor& noise, const NoiseSchedule& sched);

// mean over N*D of (x0 - x0_hat)^2.
Tensor reconstruction_loss(const Tensor& x0, const Tensor& x0_hat);

struct TrainBatchItem {
  Tensor x0;                      // normalized N x D frames
  std::optional<int> class_id;
  const PriorityList* priority = nullptr;  // VW priority of x0's features
};

struct TrainStepResult {
  double loss = 0.0;
  std::vector<Tensor> grads;  // aligned with collect_params(params)
  std::vector<int> k_used;    // keyframe count drawn per sample
};

// Per sample: t ~ U{1..T}, eps ~ N(0,I), mask from the sample's VW priority
// with rate noise, condition dropped with prob cfg_dropout; loss is the
// batch mean reconstruction error plus lambda * (L_lip(in) + L_lip(out)).
TrainStepResult training_step(const std::vector<TrainBatchItem>& batch,
                              const DenoiserParams& params, const NoiseSchedule& sched,
                              double mask_noise_delta, Rng& rng);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

AdamState make_adam_state(const DenoiserParams& params);

// beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias correction on.
void adam_step(DenoiserParams& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr);

struct SampleOptions {
  double gamma = 0.1;
  double reduction_rate = 0.8;
  double guidance_scale = 2.5;
  bool clamp_x0 = true;
  double clamp_limit = 3.0;  // +- limit in normalized units
  std::function<void(int, const KeyframeMask&)> mask_observer;
};

// Ancestral sampling from x_T ~ N(0,I); returns the final x0 estimate in
// normalized units.
Tensor p_sample_loop(const DenoiserParams& params, const NoiseSchedule& sched,
                     std::optional<int> cls, int n_frames, const SampleOptions& opt,
                     Rng& rng);

}  // namespace smdm
