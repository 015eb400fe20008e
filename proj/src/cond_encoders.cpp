#include "audiox/cond_encoders.hpp"

#include "audiox/latent_codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace audiox::cond {

std::string_view to_string(Task t) {
  switch (t) {
    case Task::T2A: return "T2A";
    case Task::V2A: return "V2A";
    case Task::TV2A: return "TV2A";
    case Task::T2M: return "T2M";
    case Task::V2M: return "V2M";
    case Task::TV2M: return "TV2M";
    case Task::INPAINT: return "INPAINT";
    case Task::COMPLETE: return "COMPLETE";
  }
  return "";
}

Task task_from_string(std::string_view s) {
  for (auto t : {Task::T2A, Task::V2A, Task::TV2A, Task::T2M, Task::V2M, Task::TV2M, Task::INPAINT, Task::COMPLETE})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown task: " + std::string(s));
}

ConditionBundle ConditionBundle::from_text(std::string_view caption, Task task) {
  ConditionBundle b;
  b.text = text::tokenize(caption);
  b.task = task;
  return b;
}

void validate(const ConditionBundle& b) {
  if ((b.task == Task::INPAINT || b.task == Task::COMPLETE) && !b.audio)
    throw std::invalid_argument(std::string(to_string(b.task)) + " requires an audio condition");
  if (!b.mask.empty() && b.task != Task::INPAINT) throw std::invalid_argument("mask is only valid for INPAINT");
  std::vector<synth::Interval> spans = b.mask;
  std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& c) { return a.start_s < c.start_s; });
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].start_s < 0.0 || spans[i].end_s > synth::kClipSeconds || spans[i].start_s >= spans[i].end_s)
      throw std::invalid_argument("mask span outside [0, 10] or empty");
    if (i > 0 && spans[i].start_s < spans[i - 1].end_s) throw std::invalid_argument("mask spans overlap");
  }
  if (b.task == Task::COMPLETE && (b.prefix_s <= 0.0 || b.prefix_s >= synth::kClipSeconds))
    throw std::invalid_argument("completion prefix must lie inside the clip");
  if (b.video && (b.video->rows() != kVideoFrames || b.video->cols() != kVideoPixels))
    throw std::invalid_argument("video must be 250 frames of 8x8 pixels");
  if (b.audio && b.audio->samples.size() != synth::kClipSamples)
    throw std::invalid_argument("audio condition must hold 8000 samples");
}

std::string default_prompt(Task task) {
  switch (task) {
    case Task::T2A:
    case Task::V2A:
    case Task::TV2A: return "Generate audio for the video.";
    case Task::T2M:
    case Task::V2M:
    case Task::TV2M: return "Generate music for the video.";
    case Task::INPAINT: return "Inpaint the missing audio.";
    case Task::COMPLETE: return "Continue the music.";
  }
  return "";
}

synth::Waveform apply_mask(const synth::Waveform& w, const std::vector<synth::Interval>& mask) {
  synth::Waveform out = w;
  for (const auto& span : mask) {
    const auto s0 = static_cast<Index>(std::lround(span.start_s * w.sample_rate));
    const auto s1 = std::min<Index>(static_cast<Index>(std::lround(span.end_s * w.sample_rate)), w.size());
    if (s1 > s0) out.samples.segment(s0, s1 - s0).setZero();
  }
  return out;
}

PreparedConditions prepare(const ConditionBundle& b, const text::Vocabulary& vocab) {
  validate(b);
  PreparedConditions p;
  p.token_ids = vocab.ids(b.text ? *b.text : text::tokenize(default_prompt(b.task)));
  if (static_cast<Index>(p.token_ids.size()) > kTextTokens) p.token_ids.resize(static_cast<std::size_t>(kTextTokens));
  p.video = b.video;
  if (b.audio) {
    if (b.task == Task::INPAINT)
      p.audio = apply_mask(*b.audio, b.mask);
    else if (b.task == Task::COMPLETE)
      p.audio = apply_mask(*b.audio, {{b.prefix_s, synth::kClipSeconds}});
    else
      p.audio = b.audio;
  }
  return p;
}

PreparedConditions null_conditions() { return {}; }

// ------------------------------------------------------------- features

Mat<double> video_semantic_features(const Video& frames) {
  if (frames.rows() != kVideoFrames || frames.cols() != kVideoPixels)
    throw std::invalid_argument("video must be 250 frames of 8x8 pixels");
  Mat<double> out(kVideoTokens, kVideoPixels);
  for (Index g = 0; g < kVideoTokens; ++g) out.row(g) = frames.middleRows(g * 5, 5).colwise().mean();
  return out;
}

Mat<double> video_sync_features(const Video& frames) {
  if (frames.rows() != kVideoFrames || frames.cols() != kVideoPixels)
    throw std::invalid_argument("video must be 250 frames of 8x8 pixels");
  Mat<double> energy = Mat<double>::Zero(kVideoFrames, kVideoPixels);
  for (Index f = 1; f < kVideoFrames; ++f) energy.row(f) = (frames.row(f) - frames.row(f - 1)).array().square();
  Mat<double> out(kVideoTokens, kVideoPixels);
  for (Index g = 0; g < kVideoTokens; ++g) out.row(g) = energy.middleRows(g * 5, 5).colwise().mean();
  return out;
}

Mat<double> audio_features(const synth::Waveform& w) {
  const auto z = codec::encode(w);
  if (z.frames() % kAudioTokens != 0) throw std::invalid_argument("audio condition has the wrong length");
  return Eigen::Map<const Mat<double>>(z.data.data(), kAudioTokens, z.data.size() / kAudioTokens);
}

template <typename Scalar>
Mat<Scalar> text_pre_projection(const ad::Parameters<Scalar>& p, int table, const std::vector<int>& ids, Index dim) {
  Mat<Scalar> out = sinusoid_table<Scalar>(kTextTokens, dim);
  for (Index i = 0; i < kTextTokens; ++i) {
    const int id = i < static_cast<Index>(ids.size()) ? ids[static_cast<std::size_t>(i)] : text::kPad;
    out.row(i) += p[table].row(id);
  }
  return out;
}

// ------------------------------------------------------------- encoders

template <typename Scalar>
CondEncoders make_cond_encoders(ad::Parameters<Scalar>& p, const ModelConfig& cfg, Rng& rng) {
  CondEncoders e;
  const Index d = cfg.dim;
  e.dim = d;
  e.table = p.add("text.table", randn<Scalar>(text::kVocabSize, d, rng, 1.0));
  e.text_proj = nn::make_linear(p, "text.proj", d, d, rng);
  e.video_semantic = nn::make_linear(p, "video.semantic", kVideoPixels, d, rng);
  e.video_sync = nn::make_linear(p, "video.sync", kVideoPixels, d, rng);
  for (int l = 0; l < cfg.encoder_layers; ++l)
    e.video_temporal.push_back(
        nn::make_block(p, "video.temporal." + std::to_string(l), d, cfg.encoder_heads, false, rng, cfg.ff_mult));
  e.video_proj = nn::make_linear(p, "video.proj", d, d, rng);
  e.audio_in = nn::make_linear(p, "audio.in", 10 * kLatentChannels, d, rng);
  for (int l = 0; l < cfg.encoder_layers; ++l)
    e.audio_temporal.push_back(
        nn::make_block(p, "audio.temporal." + std::to_string(l), d, cfg.encoder_heads, false, rng, cfg.ff_mult));
  e.audio_proj = nn::make_linear(p, "audio.proj", d, d, rng);
  return e;
}

template <typename Scalar>
ad::Var<Scalar> embed_text(ad::Tape<Scalar>& t, const CondEncoders& enc, std::span<const std::vector<int>> ids) {
  std::vector<int> flat;
  flat.reserve(ids.size() * static_cast<std::size_t>(kTextTokens));
  for (const auto& seq : ids)
    for (Index i = 0; i < kTextTokens; ++i)
      flat.push_back(i < static_cast<Index>(seq.size()) ? seq[static_cast<std::size_t>(i)] : text::kPad);
  auto rows = ad::gather_rows(t.param(enc.table), std::move(flat));
  auto pos = t.constant(sinusoid_table<Scalar>(kTextTokens, enc.dim).replicate(static_cast<Index>(ids.size()), 1));
  return nn::linear(t, enc.text_proj, rows + pos);
}

template <typename Scalar>
ad::Var<Scalar> embed_video(ad::Tape<Scalar>& t, const CondEncoders& enc, std::span<const Video* const> videos) {
  const auto n = static_cast<Index>(videos.size());
  Mat<Scalar> sem = Mat<Scalar>::Zero(n * kVideoTokens, kVideoPixels);
  Mat<Scalar> sync = Mat<Scalar>::Zero(n * kVideoTokens, kVideoPixels);
  for (Index i = 0; i < n; ++i) {
    if (!videos[static_cast<std::size_t>(i)]) continue;
    sem.middleRows(i * kVideoTokens, kVideoTokens) = video_semantic_features(*videos[static_cast<std::size_t>(i)]).cast<Scalar>();
    sync.middleRows(i * kVideoTokens, kVideoTokens) = video_sync_features(*videos[static_cast<std::size_t>(i)]).cast<Scalar>();
  }
  auto x = nn::linear(t, enc.video_semantic, t.constant(std::move(sem))) +
           nn::linear(t, enc.video_sync, t.constant(std::move(sync)));
  for (const auto& b : enc.video_temporal) x = nn::block(t, b, x, kVideoTokens);
  return nn::linear(t, enc.video_proj, x);
}

template <typename Scalar>
ad::Var<Scalar> embed_audio(ad::Tape<Scalar>& t, const CondEncoders& enc,
                            std::span<const synth::Waveform* const> waves) {
  const auto n = static_cast<Index>(waves.size());
  Mat<Scalar> feats = Mat<Scalar>::Zero(n * kAudioTokens, 10 * kLatentChannels);
  for (Index i = 0; i < n; ++i)
    if (waves[static_cast<std::size_t>(i)])
      feats.middleRows(i * kAudioTokens, kAudioTokens) = audio_features(*waves[static_cast<std::size_t>(i)]).cast<Scalar>();
  auto x = nn::linear(t, enc.audio_in, t.constant(std::move(feats)));
  for (const auto& b : enc.audio_temporal) x = nn::block(t, b, x, kAudioTokens);
  return nn::linear(t, enc.audio_proj, x);
}

namespace {

/// Rows of absent items forced to exactly zero.
template <typename Scalar>
ad::Var<Scalar> zero_absent(ad::Tape<Scalar>& t, ad::Var<Scalar> x, const std::vector<bool>& present, Index rows) {
  Mat<Scalar> mask = Mat<Scalar>::Ones(x.rows(), x.cols());
  bool all = true;
  for (std::size_t i = 0; i < present.size(); ++i)
    if (!present[i]) mask.middleRows(static_cast<Index>(i) * rows, rows).setZero(), all = false;
  return all ? x : ad::hadamard(x, t.constant(std::move(mask)));
}

}  // namespace

template <typename Scalar>
EmbeddingVars<Scalar> encode_conditions(ad::Tape<Scalar>& t, const CondEncoders& enc,
                                        std::span<const PreparedConditions> batch) {
  const auto n = static_cast<Index>(batch.size());
  if (n == 0) throw std::invalid_argument("encode_conditions: empty batch");
  std::vector<std::vector<int>> ids;
  std::vector<const Video*> videos;
  std::vector<const synth::Waveform*> waves;
  std::vector<bool> has_video, has_audio;
  for (const auto& p : batch) {
    ids.push_back(p.token_ids);
    videos.push_back(p.video ? &*p.video : nullptr);
    waves.push_back(p.audio ? &*p.audio : nullptr);
    has_video.push_back(p.video.has_value());
    has_audio.push_back(p.audio.has_value());
  }
  EmbeddingVars<Scalar> out;
  out.text = embed_text<Scalar>(t, enc, ids);
  auto any = [](const std::vector<bool>& v) { return std::find(v.begin(), v.end(), true) != v.end(); };
  out.video = any(has_video) ? zero_absent(t, embed_video<Scalar>(t, enc, videos), has_video, kVideoTokens)
                             : t.constant(Mat<Scalar>::Zero(n * kVideoTokens, enc.dim));
  out.audio = any(has_audio) ? zero_absent(t, embed_audio<Scalar>(t, enc, waves), has_audio, kAudioTokens)
                             : t.constant(Mat<Scalar>::Zero(n * kAudioTokens, enc.dim));
  return out;
}

#define AUDIOX_INSTANTIATE(S)                                                                                        \
  template Mat<S> text_pre_projection<S>(const ad::Parameters<S>&, int, const std::vector<int>&, Index);            \
  template CondEncoders make_cond_encoders<S>(ad::Parameters<S>&, const ModelConfig&, Rng&);                       \
  template ad::Var<S> embed_text<S>(ad::Tape<S>&, const CondEncoders&, std::span<const std::vector<int>>);          \
  template ad::Var<S> embed_video<S>(ad::Tape<S>&, const CondEncoders&, std::span<const Video* const>);             \
  template ad::Var<S> embed_audio<S>(ad::Tape<S>&, const CondEncoders&, std::span<const synth::Waveform* const>);   \
  template EmbeddingVars<S> encode_conditions<S>(ad::Tape<S>&, const CondEncoders&, std::span<const PreparedConditions>);

AUDIOX_INSTANTIATE(float)
AUDIOX_INSTANTIATE(double)
#undef AUDIOX_INSTANTIATE

}  // namespace audiox::cond
