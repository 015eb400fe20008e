#pragma once

#include "audiox/model_config.hpp"

#include <cstdint>
#include <vector>

namespace audiox::diffusion {

struct NoiseSchedule {
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  int size() const { return static_cast<int>(betas.size()); }
  /// Hash of the beta table, written into sidecars and checkpoints.
  std::uint64_t fingerprint() const;
};

/// Linear betas from beta_first to beta_last over T steps.
NoiseSchedule make_schedule(int timesteps, double beta_first = 1e-4, double beta_last = 0.02);
NoiseSchedule schedule_from_betas(std::vector<double> betas);
/// The schedule a model was built for.
NoiseSchedule model_schedule(const ModelConfig& cfg);

}  // namespace audiox::diffusion
