#pragma once

// Multimodal adaptive fusion.
//
//   1. gate:        G_m = H_m * sigmoid(H_m Wg_m + bg_m)          (elementwise)
//   2. gather:      three learnable query sets (q rows each) cross-attend to
//                   the row-concatenation [G_v; G_t; G_a]
//   3. consolidate: one self-attention layer (with residual) over the 3q states
//   4. dispatch:    tokens of modality m attend to the q states of their own
//                   set; the result goes through a zero-initialised output
//                   projection and is added back to H_m
//   5. H_c = [H~_v; H~_t; H~_a]
//
// Ablations: no_gate skips 1, no_query replaces 2-3 with a mean-pooled gated
// context, off returns the inputs unchanged.

#include "audiox/layers.hpp"
#include "audiox/model_config.hpp"

#include <array>

namespace audiox::maf {

struct MafParams {
  Index dim = 0;
  int queries = 0;
  int heads = 1;
  std::array<nn::Linear, 3> gate;
  std::array<int, 3> query_sets{-1, -1, -1};
  nn::Attention gather;
  nn::Attention consolidate;
  nn::Linear dispatch_query, dispatch_key, dispatch_value;
  std::array<nn::Linear, 3> output;
};

template <typename Scalar>
MafParams make_maf(ad::Parameters<Scalar>& p, Index dim, int queries, int heads, Rng& rng);

template <typename Scalar>
struct MafOutput {
  ad::Var<Scalar> video, text, audio;
  ad::Var<Scalar> fused;  // H_c, (B*132 x d)
};

/// Inputs are stacked batches: (B*50 x d), (B*32 x d), (B*50 x d).
template <typename Scalar>
MafOutput<Scalar> maf_forward(ad::Tape<Scalar>& t, const MafParams& m, ad::Var<Scalar> video, ad::Var<Scalar> text,
                              ad::Var<Scalar> audio, MafMode mode);

/// Scalars in every tensor owned by the module (independent of the run mode).
template <typename Scalar>
Index maf_param_count(const ad::Parameters<Scalar>& p, const MafParams& m);

}  // namespace audiox::maf
