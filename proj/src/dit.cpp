#include "audiox/dit.hpp"

#include "audiox/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace audiox::dit {

template <typename Scalar>
DitParams make_dit(ad::Parameters<Scalar>& p, const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  DitParams d;
  d.dim = cfg.dim;
  d.patch_frames = cfg.patch_frames;
  d.timesteps = cfg.timesteps;
  d.data_std = cfg.data_std;
  d.alpha_bars = diffusion::make_schedule(cfg.timesteps, cfg.beta_first, cfg.beta_last).alpha_bars;
  const Index patch = cfg.patch_frames * kLatentChannels;
  d.input = nn::make_linear(p, "dit.input", patch, cfg.dim, rng);
  d.time_in = nn::make_linear(p, "dit.time.in", cfg.dim, cfg.dim, rng);
  d.time_out = nn::make_linear(p, "dit.time.out", cfg.dim, cfg.dim, rng);
  for (int l = 0; l < cfg.layers; ++l)
    d.blocks.push_back(
        nn::make_block(p, "dit.block." + std::to_string(l), cfg.dim, cfg.heads, true, rng, cfg.ff_mult));
  d.final_norm = nn::make_layer_norm(p, "dit.final_norm", cfg.dim);
  d.output = nn::make_linear(p, "dit.output", cfg.dim, patch, rng);
  return d;
}

NoiseScalings noise_scalings(double alpha_bar, double data_std) {
  const double d2 = data_std * data_std;
  const double v = alpha_bar * d2 + (1.0 - alpha_bar);
  return {1.0 / std::sqrt(v), std::sqrt(1.0 - alpha_bar) / v, data_std * std::sqrt(alpha_bar / v)};
}

template <typename Scalar>
RowVec<Scalar> timestep_features(int t, Index dim, int timesteps) {
  if (t < 0 || t >= timesteps)
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [0, " + std::to_string(timesteps) + ")");
  return sinusoid<Scalar>(static_cast<double>(t), dim);
}

template <typename Scalar>
ad::Var<Scalar> timestep_embed(ad::Tape<Scalar>& tape, const DitParams& p, std::span<const int> steps) {
  Mat<Scalar> raw(static_cast<Index>(steps.size()), p.dim);
  for (std::size_t i = 0; i < steps.size(); ++i)
    raw.row(static_cast<Index>(i)) = timestep_features<Scalar>(steps[i], p.dim, p.timesteps);
  auto h = ad::silu(nn::linear(tape, p.time_in, tape.constant(std::move(raw))));
  return nn::linear(tape, p.time_out, h);
}

template <typename Scalar>
ad::Var<Scalar> dit_forward(ad::Tape<Scalar>& tape, const DitParams& p, ad::Var<Scalar> z_t, std::span<const int> steps,
                            ad::Var<Scalar> context) {
  const auto batch = static_cast<Index>(steps.size());
  if (batch == 0) throw std::invalid_argument("dit_forward: empty batch");
  if (z_t.rows() != batch * kLatentFrames || z_t.cols() != kLatentChannels)
    throw std::invalid_argument("dit_forward: latent must be (B*500 x 16)");
  if (context.rows() != batch * kConditionTokens || context.cols() != p.dim)
    throw std::invalid_argument("dit_forward: condition must be (B*132 x d)");

  const Index tokens = kLatentFrames / p.patch_frames;
  const Index patch = p.patch_frames * kLatentChannels;
  Mat<Scalar> c_in(z_t.rows(), z_t.cols()), c_skip(z_t.rows(), z_t.cols()), c_out(z_t.rows(), z_t.cols());
  for (Index b = 0; b < batch; ++b) {
    const int t = steps[static_cast<std::size_t>(b)];
    if (t < 0 || t >= p.timesteps) throw std::out_of_range("dit_forward: timestep outside schedule");
    const auto c = noise_scalings(p.alpha_bars[static_cast<std::size_t>(t)], p.data_std);
    const auto rows = Eigen::seqN(b * kLatentFrames, kLatentFrames);
    c_in(rows, Eigen::all).setConstant(static_cast<Scalar>(c.in));
    c_skip(rows, Eigen::all).setConstant(static_cast<Scalar>(c.skip));
    c_out(rows, Eigen::all).setConstant(static_cast<Scalar>(c.out));
  }
  auto x_in = ad::hadamard(z_t, tape.constant(std::move(c_in)));
  auto x = nn::linear(tape, p.input, ad::reshape(x_in, batch * tokens, patch));
  x = x + tape.constant(sinusoid_table<Scalar>(tokens, p.dim).replicate(batch, 1));
  auto temb = ad::repeat_each_row(timestep_embed(tape, p, steps), tokens);
  const std::optional<ad::Var<Scalar>> ctx = context;
  for (const auto& b : p.blocks) x = nn::block(tape, b, x + temb, tokens, ctx, kConditionTokens);
  auto out = nn::linear(tape, p.output, nn::norm(tape, p.final_norm, x));
  auto f = ad::reshape(out, batch * kLatentFrames, kLatentChannels);
  return ad::hadamard(z_t, tape.constant(std::move(c_skip))) + ad::hadamard(f, tape.constant(std::move(c_out)));
}

#define AUDIOX_INSTANTIATE(S)                                                                                  \
  template DitParams make_dit<S>(ad::Parameters<S>&, const ModelConfig&, Rng&);                               \
  template RowVec<S> timestep_features<S>(int, Index, int);                                                   \
  template ad::Var<S> timestep_embed<S>(ad::Tape<S>&, const DitParams&, std::span<const int>);                \
  template ad::Var<S> dit_forward<S>(ad::Tape<S>&, const DitParams&, ad::Var<S>, std::span<const int>, ad::Var<S>);

AUDIOX_INSTANTIATE(float)
AUDIOX_INSTANTIATE(double)

}  // namespace audiox::dit
