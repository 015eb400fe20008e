#include "audiox/maf.hpp"

#include <stdexcept>
#include <string>

namespace audiox::maf {

namespace {
const char* const kModality[3] = {"video", "text", "audio"};
}

template <typename Scalar>
MafParams make_maf(ad::Parameters<Scalar>& p, Index dim, int queries, int heads, Rng& rng) {
  if (queries < 1) throw std::invalid_argument("MAF needs at least one query per modality");
  MafParams m;
  m.dim = dim;
  m.queries = queries;
  m.heads = heads;
  for (int i = 0; i < 3; ++i) m.gate[i] = nn::make_linear(p, std::string("maf.gate.") + kModality[i], dim, dim, rng);
  for (int i = 0; i < 3; ++i)
    m.query_sets[i] = p.add(std::string("maf.queries.") + kModality[i], randn<Scalar>(queries, dim, rng, 1.0));
  m.gather = nn::make_attention(p, "maf.gather", dim, heads, rng);
  m.consolidate = nn::make_attention(p, "maf.consolidate", dim, heads, rng);
  m.dispatch_query = nn::make_linear(p, "maf.dispatch.query", dim, dim, rng);
  m.dispatch_key = nn::make_linear(p, "maf.dispatch.key", dim, dim, rng, 1.0, false);
  m.dispatch_value = nn::make_linear(p, "maf.dispatch.value", dim, dim, rng);
  for (int i = 0; i < 3; ++i)
    m.output[i] = nn::make_linear(p, std::string("maf.output.") + kModality[i], dim, dim, rng, 0.0);
  return m;
}

template <typename Scalar>
MafOutput<Scalar> maf_forward(ad::Tape<Scalar>& t, const MafParams& m, ad::Var<Scalar> video, ad::Var<Scalar> text,
                              ad::Var<Scalar> audio, MafMode mode) {
  const std::vector<Index> tokens{kVideoTokens, kTextTokens, kAudioTokens};
  const std::array<ad::Var<Scalar>, 3> in{video, text, audio};
  for (int i = 0; i < 3; ++i)
    if (in[i].cols() != m.dim || in[i].rows() % tokens[static_cast<std::size_t>(i)] != 0)
      throw std::invalid_argument("maf_forward: input shape mismatch");
  const Index batch = video.rows() / kVideoTokens;
  if (text.rows() / kTextTokens != batch || audio.rows() / kAudioTokens != batch)
    throw std::invalid_argument("maf_forward: batch size mismatch across modalities");

  if (mode == MafMode::off) return {video, text, audio, ad::concat_segments<Scalar>({video, text, audio}, tokens)};

  std::array<ad::Var<Scalar>, 3> gated = in;
  if (mode != MafMode::no_gate)
    for (int i = 0; i < 3; ++i) gated[i] = ad::hadamard(in[i], ad::sigmoid(nn::linear(t, m.gate[i], in[i])));
  auto context = ad::concat_segments<Scalar>({gated[0], gated[1], gated[2]}, tokens);

  const Index q = m.queries;
  std::array<ad::Var<Scalar>, 3> expert;
  Index expert_rows = q;
  if (mode == MafMode::no_query) {
    auto pooled = ad::group_mean(context, kConditionTokens);
    expert = {pooled, pooled, pooled};
    expert_rows = 1;
  } else {
    auto sets = ad::concat_segments<Scalar>(
        {t.param(m.query_sets[0]), t.param(m.query_sets[1]), t.param(m.query_sets[2])}, {q, q, q});
    auto queries = ad::tile_rows(sets, batch);
    auto gathered = nn::attend(t, m.gather, queries, context, 3 * q, kConditionTokens);
    auto states = gathered + nn::attend(t, m.consolidate, gathered, gathered, 3 * q, 3 * q);
    for (std::size_t i = 0; i < 3; ++i) expert[i] = ad::select_segment(states, {q, q, q}, i);
  }

  std::array<ad::Var<Scalar>, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    auto qv = nn::linear(t, m.dispatch_query, in[i]);
    auto kv = nn::linear(t, m.dispatch_key, expert[i]);
    auto vv = nn::linear(t, m.dispatch_value, expert[i]);
    auto routed = ad::attention(qv, kv, vv, m.heads, tokens[i], expert_rows);
    out[i] = in[i] + nn::linear(t, m.output[i], routed);
  }
  return {out[0], out[1], out[2], ad::concat_segments<Scalar>({out[0], out[1], out[2]}, tokens)};
}

template <typename Scalar>
Index maf_param_count(const ad::Parameters<Scalar>& p, const MafParams&) {
  return p.scalar_count("maf.");
}

template MafParams make_maf<float>(ad::Parameters<float>&, Index, int, int, Rng&);
template MafParams make_maf<double>(ad::Parameters<double>&, Index, int, int, Rng&);
template MafOutput<float> maf_forward<float>(ad::Tape<float>&, const MafParams&, ad::Var<float>, ad::Var<float>,
                                             ad::Var<float>, MafMode);
template MafOutput<double> maf_forward<double>(ad::Tape<double>&, const MafParams&, ad::Var<double>, ad::Var<double>,
                                               ad::Var<double>, MafMode);
template Index maf_param_count<float>(const ad::Parameters<float>&, const MafParams&);
template Index maf_param_count<double>(const ad::Parameters<double>&, const MafParams&);

}  // namespace audiox::maf
