#pragma once

// Parameterized building blocks. Each layer struct only records indices into
// a Parameters store; the forward functions pull those parameters onto a tape.

#include "audiox/ops.hpp"

#include <optional>
#include <string>

namespace audiox::nn {

using ad::Parameters;
using ad::Tape;
using ad::Var;

struct Linear {
  int weight = -1;
  int bias = -1;
  Index in = 0;
  Index out = 0;
};

struct LayerNorm {
  int gain = -1;
  int shift = -1;
};

struct Attention {
  Linear query, key, value, output;
  int heads = 1;
};

struct FeedForward {
  Linear up, down;
};

/// Pre-norm transformer block; cross-attention is present only when `cross` is set.
struct Block {
  LayerNorm norm_self, norm_cross, norm_ff;
  Attention self;
  std::optional<Attention> cross;
  FeedForward ff;
};

/// Weights ~ N(0, gain^2 / in); zero bias. `gain == 0` gives an all-zero layer.
template <typename Scalar>
Linear make_linear(Parameters<Scalar>& p, const std::string& name, Index in, Index out, Rng& rng, double gain = 1.0,
                   bool with_bias = true) {
  Linear l;
  l.in = in;
  l.out = out;
  Mat<Scalar> w = gain == 0.0 ? Mat<Scalar>::Zero(in, out)
                              : randn<Scalar>(in, out, rng, gain / std::sqrt(static_cast<double>(in)));
  l.weight = p.add(name + ".weight", std::move(w));
  if (with_bias) l.bias = p.add(name + ".bias", Mat<Scalar>::Zero(1, out));
  return l;
}

template <typename Scalar>
LayerNorm make_layer_norm(Parameters<Scalar>& p, const std::string& name, Index dim) {
  return {p.add(name + ".gain", Mat<Scalar>::Ones(1, dim)), p.add(name + ".shift", Mat<Scalar>::Zero(1, dim))};
}

template <typename Scalar>
Attention make_attention(Parameters<Scalar>& p, const std::string& name, Index dim, int heads, Rng& rng,
                         double out_gain = 1.0) {
  Attention a;
  a.query = make_linear(p, name + ".query", dim, dim, rng);
  // keys carry no bias
  a.key = make_linear(p, name + ".key", dim, dim, rng, 1.0, false);
  a.value = make_linear(p, name + ".value", dim, dim, rng);
  a.output = make_linear(p, name + ".output", dim, dim, rng, out_gain);
  a.heads = heads;
  return a;
}

template <typename Scalar>
Block make_block(Parameters<Scalar>& p, const std::string& name, Index dim, int heads, bool with_cross, Rng& rng,
                 Index ff_mult = 4) {
  // residual branch outputs start at half scale
  constexpr double kResidualGain = 0.5;
  Block b;
  b.norm_self = make_layer_norm(p, name + ".norm_self", dim);
  b.self = make_attention(p, name + ".self", dim, heads, rng, kResidualGain);
  if (with_cross) {
    b.norm_cross = make_layer_norm(p, name + ".norm_cross", dim);
    b.cross = make_attention(p, name + ".cross", dim, heads, rng, kResidualGain);
  }
  b.norm_ff = make_layer_norm(p, name + ".norm_ff", dim);
  b.ff.up = make_linear(p, name + ".ff.up", dim, dim * ff_mult, rng);
  b.ff.down = make_linear(p, name + ".ff.down", dim * ff_mult, dim, rng, kResidualGain);
  return b;
}

template <typename Scalar>
Var<Scalar> linear(Tape<Scalar>& t, const Linear& l, Var<Scalar> x) {
  if (l.bias < 0) return ad::matmul(x, t.param(l.weight));
  return ad::affine(x, t.param(l.weight), t.param(l.bias));
}

template <typename Scalar>
Var<Scalar> norm(Tape<Scalar>& t, const LayerNorm& ln, Var<Scalar> x) {
  return ad::layer_norm(x, t.param(ln.gain), t.param(ln.shift));
}

/// Queries from `q_in` (nq rows per item) attend to `kv_in` (nk rows per item).
template <typename Scalar>
Var<Scalar> attend(Tape<Scalar>& t, const Attention& a, Var<Scalar> q_in, Var<Scalar> kv_in, Index nq, Index nk) {
  auto q = linear(t, a.query, q_in);
  auto k = linear(t, a.key, kv_in);
  auto v = linear(t, a.value, kv_in);
  return linear(t, a.output, ad::attention(q, k, v, a.heads, nq, nk));
}

template <typename Scalar>
Var<Scalar> feed_forward(Tape<Scalar>& t, const FeedForward& f, Var<Scalar> x) {
  return linear(t, f.down, ad::silu(linear(t, f.up, x)));
}

/// x: (B*n x d); context: (B*nc x d), required iff the block has cross-attention.
template <typename Scalar>
Var<Scalar> block(Tape<Scalar>& t, const Block& b, Var<Scalar> x, Index n, std::optional<Var<Scalar>> context = {},
                  Index nc = 0) {
  auto h = norm(t, b.norm_self, x);
  x = x + attend(t, b.self, h, h, n, n);
  if (b.cross) {
    if (!context) throw std::invalid_argument("block: cross-attention block needs a context");
    x = x + attend(t, *b.cross, norm(t, b.norm_cross, x), *context, n, nc);
  }
  return x + feed_forward(t, b.ff, norm(t, b.norm_ff, x));
}

}  // namespace audiox::nn
