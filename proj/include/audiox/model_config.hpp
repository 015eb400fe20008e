#pragma once

#include "audiox/tensor.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace audiox {

constexpr Index kTextTokens = 32;
constexpr Index kVideoTokens = 50;
constexpr Index kAudioTokens = 50;
constexpr Index kConditionTokens = kVideoTokens + kTextTokens + kAudioTokens;
constexpr Index kLatentFrames = 500;
constexpr Index kLatentChannels = 16;
constexpr Index kVideoFrames = 250;
constexpr Index kVideoPixels = 64;

enum class MafMode { full, no_gate, no_query, off };

std::string_view to_string(MafMode m);
MafMode maf_mode_from_string(std::string_view s);

struct ModelConfig {
  Index dim = 64;
  int layers = 4;
  int heads = 4;
  int queries = 8;
  int maf_heads = 1;
  int encoder_layers = 2;
  int encoder_heads = 4;
  Index ff_mult = 4;
  /// Latent frames per DiT token.
  Index patch_frames = 4;
  int timesteps = 1000;
  double beta_first = 1e-4;
  double beta_last = 0.02;
  /// Nominal latent std, sets the input/skip/output scalings of the denoiser.
  double data_std = 0.2;
  std::uint64_t init_seed = 0;
  MafMode maf_mode = MafMode::full;

  Index latent_tokens() const { return kLatentFrames / patch_frames; }
  void validate() const;
  /// Canonical text of every field that shapes the parameter tree.
  std::string shape_key() const;
};

}  // namespace audiox
