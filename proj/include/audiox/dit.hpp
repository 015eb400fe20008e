#pragma once

// Denoiser eps(z_t, t, H_c). The latent (500 x 16) is cut into patches of
// `patch_frames` frames, each patch one token. Timestep embedding is added to
// the token stream in front of every block; every block cross-attends to H_c.
// The network output is mixed with z_t by noise-level scalings:
//   eps = c_skip z_t + c_out F(c_in z_t),  v = abar d^2 + (1 - abar)
//   c_in = 1/sqrt(v), c_skip = sqrt(1 - abar)/v, c_out = d sqrt(abar / v)

#include "audiox/layers.hpp"
#include "audiox/model_config.hpp"

#include <span>
#include <vector>

namespace audiox::dit {

struct DitParams {
  Index dim = 0;
  Index patch_frames = 10;
  int timesteps = 1000;
  double data_std = 0.2;
  std::vector<double> alpha_bars;
  nn::Linear input, time_in, time_out, output;
  std::vector<nn::Block> blocks;
  nn::LayerNorm final_norm;
};

template <typename Scalar>
DitParams make_dit(ad::Parameters<Scalar>& p, const ModelConfig& cfg, Rng& rng);

/// Raw sinusoidal features of `t`, before projection. Throws unless 0 <= t < timesteps.
template <typename Scalar>
RowVec<Scalar> timestep_features(int t, Index dim, int timesteps);

/// Projected embedding, one row per entry of `steps`: (B x d).
template <typename Scalar>
ad::Var<Scalar> timestep_embed(ad::Tape<Scalar>& tape, const DitParams& p, std::span<const int> steps);

struct NoiseScalings {
  double in, skip, out;
};
NoiseScalings noise_scalings(double alpha_bar, double data_std);

/// z_t: (B*500 x 16) stacked latents; context: (B*132 x d). Returns (B*500 x 16).
template <typename Scalar>
ad::Var<Scalar> dit_forward(ad::Tape<Scalar>& tape, const DitParams& p, ad::Var<Scalar> z_t, std::span<const int> steps,
                            ad::Var<Scalar> context);

}  // namespace audiox::dit
