#include "audiox/schedule.hpp"

#include "audiox/io.hpp"

#include <stdexcept>

namespace audiox::diffusion {

std::uint64_t NoiseSchedule::fingerprint() const {
  return io::fnv1a(betas.data(), betas.size() * sizeof(double));
}

NoiseSchedule schedule_from_betas(std::vector<double> betas) {
  if (betas.empty()) throw std::invalid_argument("noise schedule needs at least one step");
  NoiseSchedule s;
  s.betas = std::move(betas);
  s.alphas.reserve(s.betas.size());
  s.alpha_bars.reserve(s.betas.size());
  double prod = 1.0;
  for (double b : s.betas) {
    if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
    s.alphas.push_back(1.0 - b);
    prod *= s.alphas.back();
    s.alpha_bars.push_back(prod);
  }
  return s;
}

NoiseSchedule make_schedule(int timesteps, double beta_first, double beta_last) {
  if (timesteps < 1) throw std::invalid_argument("schedule needs T >= 1");
  if (!(beta_first > 0.0 && beta_first <= beta_last && beta_last < 1.0))
    throw std::invalid_argument("schedule needs 0 < beta_first <= beta_last < 1");
  std::vector<double> betas(static_cast<std::size_t>(timesteps));
  for (int t = 0; t < timesteps; ++t)
    betas[static_cast<std::size_t>(t)] =
        timesteps == 1 ? beta_first : beta_first + (beta_last - beta_first) * t / (timesteps - 1);
  return schedule_from_betas(std::move(betas));
}

NoiseSchedule model_schedule(const ModelConfig& cfg) {
  return make_schedule(cfg.timesteps, cfg.beta_first, cfg.beta_last);
}

}  // namespace audiox::diffusion
