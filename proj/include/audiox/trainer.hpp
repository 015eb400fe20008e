#pragma once

// AdamW with decoupled weight decay, warmup + exponential decay, EMA shadow
// weights, and a checksummed checkpoint format. Every random draw of step k
// comes from a stream keyed by (seed, k).

#include "audiox/diffusion.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace audiox::train {

struct TrainConfig {
  double lr = 1e-5;
  std::int64_t warmup = 500;
  std::int64_t decay_start = 5000;
  double gamma = 0.9995;
  double weight_decay = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_decay = 0.999;
  int batch = 16;
  std::int64_t steps = 1000;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
  std::uint64_t seed = 0;
  diffusion::DropoutPolicy dropout;

  void validate() const;
};

/// base * min(1, step / warmup) * gamma^max(0, step - decay_start)
double lr_at(std::int64_t step, double base, std::int64_t warmup, std::int64_t decay_start, double gamma);

struct TrainState {
  std::vector<Mat<float>> ema, m, v;
  std::int64_t step = 0;
};

TrainState init_state(const ad::Parameters<float>& params);

/// One AdamW update at 1-based step k: theta <- theta (1 - lr wd) - lr mhat / (sqrt(vhat) + eps).
void adamw_update(std::vector<Mat<float>>& theta, const ad::Gradients<float>& grads, std::vector<Mat<float>>& m,
                  std::vector<Mat<float>>& v, std::int64_t k, double lr, const TrainConfig& cfg);
/// ema <- decay ema + (1 - decay) theta
void ema_update(std::vector<Mat<float>>& ema, const std::vector<Mat<float>>& theta, double decay);
/// Scales gradients to global norm `max_norm` when above it; returns the norm before clipping.
double clip_global_norm(ad::Gradients<float>& grads, double max_norm);

struct Example {
  Mat<float> latent;  // 500 x 16
  cond::PreparedConditions conditions;
};

using Dataset = std::vector<Example>;

Example make_example(const synth::Waveform& wave, const cond::ConditionBundle& bundle);

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Draws the batch for state.step from `data`, takes one optimizer step and returns the loss.
double train_step(AudioX<float>& model, TrainState& state, const Dataset& data, const diffusion::NoiseSchedule& sched,
                  const TrainConfig& cfg);

/// Indices of the examples used at `step`.
std::vector<std::size_t> batch_indices(std::size_t dataset_size, std::int64_t step, const TrainConfig& cfg);

/// Mean noise-prediction loss over `data` with no dropout. Example i is scored
/// at `draws` timesteps spread over the schedule, noise keyed by (seed, i).
double heldout_loss(const AudioX<float>& model, const Dataset& data, const diffusion::NoiseSchedule& sched,
                    std::uint64_t seed, int draws = 4, int batch = 8);

/// Single-category clips (1 or 2 events of 1-3 s) cycling through `categories`,
/// each captioned by one of its augmented views.
Dataset toy_dataset(const std::vector<std::string>& categories, int n, std::uint64_t seed);

/// Model with its parameters replaced by the EMA shadow.
AudioX<float> with_ema(const AudioX<float>& model, const TrainState& state);

// ------------------------------------------------------------ checkpoint

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t config_fingerprint(const ModelConfig& cfg, const diffusion::NoiseSchedule& sched);

/// "AXCK", u32 version, u64 fingerprint, u64 step, u32 count, tensor records, u32 CRC32.
std::vector<std::uint8_t> checkpoint_bytes(const AudioX<float>& model, const TrainState& state,
                                           std::uint64_t fingerprint);
/// Restores parameters and state into an already-built model of the same config.
void restore_checkpoint(const std::vector<std::uint8_t>& bytes, AudioX<float>& model, TrainState& state,
                        std::uint64_t fingerprint);

void save_checkpoint(const std::filesystem::path& path, const AudioX<float>& model, const TrainState& state,
                     std::uint64_t fingerprint);
void load_checkpoint(const std::filesystem::path& path, AudioX<float>& model, TrainState& state,
                     std::uint64_t fingerprint);

}  // namespace audiox::train
