#pragma once

// DDPM pieces: noise schedule, closed-form forward marginal, epsilon loss,
// guided reverse step and the ancestral sampler (with inpainting replacement).

#include "audiox/latent_codec.hpp"
#include "audiox/model.hpp"
#include "audiox/schedule.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace audiox::diffusion {

/// Ascending visit order for `steps` sampling steps: t_i = floor(i T / steps), t_0 = 0.
std::vector<int> timestep_sequence(int timesteps, int steps);
/// Schedule over a timestep subsequence: alpha_bar'_i = alpha_bar[seq[i]].
NoiseSchedule respace(const NoiseSchedule& s, const std::vector<int>& seq);

/// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
template <typename Scalar>
Mat<Scalar> q_sample(const Mat<Scalar>& z0, int t, const Mat<Scalar>& eps, const NoiseSchedule& s);

/// One forward-process transition z_{t-1} -> z_t with fresh noise.
template <typename Scalar>
Mat<Scalar> q_step(const Mat<Scalar>& z_prev, int t, const Mat<Scalar>& noise, const NoiseSchedule& s);

/// z_{t-1} = (z_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t) + sqrt(beta_t) noise; no noise at t = 0.
template <typename Scalar>
Mat<Scalar> p_step(const Mat<Scalar>& z_t, int t, const Mat<Scalar>& eps_hat, const NoiseSchedule& s,
                   const Mat<Scalar>& noise);

/// eps_u + s (eps_c - eps_u); exact at s = 0 and s = 1.
template <typename Scalar>
Mat<Scalar> cfg_eps(const Mat<Scalar>& eps_cond, const Mat<Scalar>& eps_uncond, double scale);

// ------------------------------------------------------------------ loss

struct DropoutPolicy {
  double bundle = 0.1;    // whole condition replaced by the null bundle
  double modality = 0.1;  // each present modality dropped on its own
};

/// Condition dropout for guidance training. Dropped text becomes empty text.
cond::PreparedConditions drop_conditions(const cond::PreparedConditions& c, const DropoutPolicy& policy, Rng& rng);

template <typename Scalar>
struct LossDraw {
  std::vector<int> steps;
  Mat<Scalar> eps;  // (B*500 x 16)
  std::vector<cond::PreparedConditions> conditions;
};

/// Uniform t, unit-normal eps and condition dropout for one batch.
template <typename Scalar>
LossDraw<Scalar> draw_loss_inputs(std::span<const cond::PreparedConditions> conditions, const NoiseSchedule& s,
                                  Rng& rng, const DropoutPolicy& policy = {});

template <typename Scalar>
struct LossResult {
  double loss = 0.0;
  ad::Gradients<Scalar> grads;  // empty unless requested
};

/// Mean of (eps - eps_theta(z_t, t, H_c))^2 for a fixed draw. `z0` is (B*500 x 16).
template <typename Scalar>
LossResult<Scalar> eps_loss(const AudioX<Scalar>& model, const Mat<Scalar>& z0, const LossDraw<Scalar>& draw,
                            const NoiseSchedule& s, bool with_grads = true);

/// Mean squared noise-estimation error.
template <typename Scalar>
double noise_mse(const Mat<Scalar>& eps_hat, const Mat<Scalar>& eps);

// --------------------------------------------------------------- sampler

struct SamplerConfig {
  int steps = 250;
  double guidance_scale = 7.0;
  std::uint64_t seed = 0;

  void validate(int timesteps) const;
};

struct Sample {
  codec::LatentSeq latent;
  synth::Waveform wave;  // decoded and clipped to [-1, 1]
};

/// Frames whose 16 samples all lie outside every mask span.
std::vector<bool> known_frames(const std::vector<synth::Interval>& mask, int sample_rate = synth::kSampleRate);

/// Guided ancestral sampling for a batch of bundles. Item i draws its noise
/// from a stream keyed by (seed, i). INPAINT items get known-frame replacement.
template <typename Scalar>
std::vector<Sample> sample(const AudioX<Scalar>& model, std::span<const cond::ConditionBundle> bundles,
                           const SamplerConfig& cfg, const NoiseSchedule& s);

}  // namespace audiox::diffusion
