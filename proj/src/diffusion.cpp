#include "smdm/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace smdm {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kMaxBeta = 0.999;
}  // namespace

ScheduleKind schedule_kind_from(const std::string& name) {
  if (name == "cosine") return ScheduleKind::kCosine;
  if (name == "linear") return ScheduleKind::kLinear;
  throw config_error("schedule kind must be 'cosine' or 'linear', got '" + name + "'");
}

std::string schedule_kind_name(ScheduleKind kind) {
  return kind == ScheduleKind::kCosine ? "cosine" : "linear";
}

double cosine_alpha_bar(double t, double total_steps) {
  const double s = 0.008;
  double num = std::cos((t / total_steps + s) / (1.0 + s) * kPi / 2.0);
  double den = std::cos(s / (1.0 + s) * kPi / 2.0);
  return (num * num) / (den * den);
}

NoiseSchedule make_schedule(int total_steps, ScheduleKind kind) {
  if (total_steps < 1) throw config_error("schedule needs total_steps >= 1");
  NoiseSchedule s;
  s.total_steps = total_steps;
  s.beta.assign(total_steps + 1, 0.0);
  s.alpha_bar.assign(total_steps + 1, 1.0);
  s.posterior_var.assign(total_steps + 1, 0.0);

  if (kind == ScheduleKind::kCosine) {
    for (int t = 1; t <= total_steps; ++t) {
      double ratio = cosine_alpha_bar(t, total_steps) / cosine_alpha_bar(t - 1, total_steps);
      s.beta[t] = std::min(1.0 - ratio, kMaxBeta);
    }
  } else {
    // Ho et al. linear range rescaled by 1000/T; the top end is capped so
    // small-T schedules keep beta < 1.
    double scale = 1000.0 / total_steps;
    double lo = 1e-4 * scale;
    double hi = std::min(0.02 * scale, kMaxBeta);
    for (int t = 1; t <= total_steps; ++t) {
      double frac = total_steps == 1 ? 0.0 : static_cast<double>(t - 1) / (total_steps - 1);
      s.beta[t] = lo + (hi - lo) * frac;
    }
  }

  for (int t = 1; t <= total_steps; ++t) {
    s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.beta[t]);
    s.posterior_var[t] = s.beta[t] * (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]);
  }
  return s;
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& noise, const NoiseSchedule& sched) {
  if (t == 0) return x0;  // alpha_bar(0) = 1 boundary extension
  if (t < 1 || t > sched.total_steps)
    throw contract_error("q_sample: t = " + std::to_string(t) + " outside [1, " +
                         std::to_string(sched.total_steps) + "]");
  if (x0.shape() != noise.shape())
    throw contract_error("q_sample: noise shape must match x0");
  double scale = std::sqrt(sched.alpha_bar[t]);
  double std_dev = std::sqrt(1.0 - sched.alpha_bar[t]);
  std::vector<double> out(x0.numel());
  const auto& xv = x0.data();
  const auto& ev = noise.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = scale * xv[i] + std_dev * ev[i];
  return Tensor::from(x0.shape(), std::move(out));
}

Tensor reconstruction_loss(const Tensor& x0, const Tensor& x0_hat) {
  return mean(square(sub(x0, x0_hat)));
}

TrainStepResult training_step(const std::vector<TrainBatchItem>& batch,
                              const DenoiserParams& params, const NoiseSchedule& sched,
                              double mask_noise_delta, Rng& rng) {
  if (batch.empty()) throw contract_error("training_step: empty batch");
  const DenoiserConfig& cfg = params.config;

  Tape tape;
  DenoiserParams bound = watch_params(tape, params);

  TrainStepResult result;
  Tensor total;
  bool first = true;
  for (const auto& item : batch) {
    if (!item.priority) throw contract_error("training_step: missing VW priority");
    int t = rng.uniform_int(1, sched.total_steps);
    std::vector<double> eps(item.x0.numel());
    for (double& v : eps) v = rng.normal();
    KeyframeMask mask =
        perturb_mask(*item.priority, cfg.reduction_rate, mask_noise_delta, rng);
    result.k_used.push_back(mask.count);
    std::optional<int> cls = item.class_id;
    if (cls && rng.uniform() < cfg.cfg_dropout) cls = std::nullopt;

    Tensor x_t = q_sample(item.x0, t, Tensor::from(item.x0.shape(), std::move(eps)), sched);
    Tensor x0_hat = denoise(x_t, t, cls, mask, bound, /*training=*/true, &rng);
    Tensor li = reconstruction_loss(item.x0, x0_hat);
    total = first ? li : add(total, li);
    first = false;
  }
  Tensor loss = scalar_mul(total, 1.0 / static_cast<double>(batch.size()));
  if (cfg.lambda > 0.0) {
    Tensor lip = add(lipschitz_loss(bound.input_mlp), lipschitz_loss(bound.output_mlp));
    loss = add(loss, scalar_mul(lip, cfg.lambda));
  }
  if (!all_finite(loss)) throw numeric_error("training_step: non-finite loss");

  tape.backward(loss);
  result.loss = loss.value();
  auto refs = collect_params(bound);
  result.grads.reserve(refs.size());
  for (auto& ref : refs) result.grads.push_back(tape.grad(*ref.tensor));
  return result;
}

AdamState make_adam_state(const DenoiserParams& params) {
  AdamState st;
  auto& mut = const_cast<DenoiserParams&>(params);
  for (const auto& ref : collect_params(mut)) {
    st.m.emplace_back(ref.tensor->numel(), 0.0);
    st.v.emplace_back(ref.tensor->numel(), 0.0);
  }
  return st;
}

void adam_step(DenoiserParams& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr) {
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  auto refs = collect_params(params);
  if (refs.size() != grads.size() || refs.size() != state.m.size())
    throw contract_error("adam_step: grads not aligned with params");
  ++state.step;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t p = 0; p < refs.size(); ++p) {
    if (grads[p].shape() != refs[p].tensor->shape())
      throw contract_error("adam_step: grad shape mismatch at " + refs[p].name);
    const auto& g = grads[p].data();
    std::vector<double> out(refs[p].tensor->data());
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (size_t i = 0; i < out.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      out[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    *refs[p].tensor = Tensor::from(refs[p].tensor->shape(), std::move(out));
  }
}

Tensor p_sample_loop(const DenoiserParams& params, const NoiseSchedule& sched,
                     std::optional<int> cls, int n_frames, const SampleOptions& opt,
                     Rng& rng) {
  const int d = params.data_dim;
  const int total = sched.total_steps;
  std::vector<double> init(static_cast<size_t>(n_frames) * d);
  for (double& v : init) v = rng.normal();
  Tensor x = Tensor::from(Shape{n_frames, d}, std::move(init));

  for (int t = total; t >= 1; --t) {
    KeyframeMask mask = dynamic_mask_update(x, t, total, opt.gamma, opt.reduction_rate);
    if (opt.mask_observer) opt.mask_observer(t, mask);
    Tensor x0_hat = denoise_cfg(x, t, cls, mask, params, opt.guidance_scale);
    if (opt.clamp_x0) {
      std::vector<double> c(x0_hat.data());
      for (double& v : c) v = std::clamp(v, -opt.clamp_limit, opt.clamp_limit);
      x0_hat = Tensor::from(x0_hat.shape(), std::move(c));
    }
    if (t == 1) {
      // Posterior mean at t = 1 has coefficient 1 on x0_hat and 0 on x_t,
      // and the noise term is dropped.
      x = x0_hat;
      break;
    }
    double coef0 = std::sqrt(sched.alpha_bar[t - 1]) * sched.beta[t] /
                   (1.0 - sched.alpha_bar[t]);
    double coeft = std::sqrt(1.0 - sched.beta[t]) * (1.0 - sched.alpha_bar[t - 1]) /
                   (1.0 - sched.alpha_bar[t]);
    double sigma = std::sqrt(sched.posterior_var[t]);
    std::vector<double> next(x.numel());
    const auto& xv = x.data();
    const auto& hv = x0_hat.data();
    for (size_t i = 0; i < next.size(); ++i)
      next[i] = coef0 * hv[i] + coeft * xv[i] + sigma * rng.normal();
    x = Tensor::from(x.shape(), std::move(next));
    if (!all_finite(x)) throw numeric_error("p_sample_loop: non-finite iterate");
  }
  return x;
}

}  // namespace smdm
