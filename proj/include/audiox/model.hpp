#pragma once

// Whole model: condition encoders -> MAF -> DiT, over one parameter store.

#include "audiox/cond_encoders.hpp"
#include "audiox/dit.hpp"
#include "audiox/maf.hpp"

namespace audiox {

template <typename Scalar>
struct AudioX {
  ModelConfig config;
  ad::Parameters<Scalar> params;
  cond::CondEncoders encoders;
  maf::MafParams maf;
  dit::DitParams dit;

  template <typename Other>
  AudioX<Other> cast() const {
    return {config, params.template cast<Other>(), encoders, maf, dit};
  }
};

/// Parameter initialisation depends only on the config (including init_seed).
template <typename Scalar>
AudioX<Scalar> make_model(const ModelConfig& cfg) {
  cfg.validate();
  AudioX<Scalar> m;
  m.config = cfg;
  Rng rng = keyed_rng(cfg.init_seed, {0x1417});
  m.encoders = cond::make_cond_encoders(m.params, cfg, rng);
  m.maf = maf::make_maf(m.params, cfg.dim, cfg.queries, cfg.maf_heads, rng);
  m.dit = dit::make_dit(m.params, cfg, rng);
  return m;
}

/// H_c for a batch of prepared conditions: (B*132 x d).
template <typename Scalar>
ad::Var<Scalar> condition(ad::Tape<Scalar>& t, const AudioX<Scalar>& m, std::span<const cond::PreparedConditions> batch) {
  auto h = cond::encode_conditions(t, m.encoders, batch);
  return maf::maf_forward(t, m.maf, h.video, h.text, h.audio, m.config.maf_mode).fused;
}

template <typename Scalar>
ad::Var<Scalar> denoise(ad::Tape<Scalar>& t, const AudioX<Scalar>& m, ad::Var<Scalar> z_t, std::span<const int> steps,
                        ad::Var<Scalar> context) {
  return dit::dit_forward(t, m.dit, z_t, steps, context);
}

}  // namespace audiox
