#pragma once

// Condition inputs and their encoders. A ConditionBundle carries optional
// text / video / audio; prepare() applies the missing-modality policy (default
// prompts, masking for inpainting and completion) and the encoders map the
// prepared inputs to fixed-shape embeddings H_v (50 x d), H_t (32 x d),
// H_a (50 x d). Absent video or audio yields exact zeros.

#include "audiox/layers.hpp"
#include "audiox/model_config.hpp"
#include "audiox/synth_data.hpp"
#include "audiox/text.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace audiox::cond {

enum class Task { T2A, V2A, TV2A, T2M, V2M, TV2M, INPAINT, COMPLETE };

std::string_view to_string(Task t);
Task task_from_string(std::string_view s);

/// 250 frames (25 fps x 10 s) of 8x8 grayscale, one flattened frame per row.
using Video = Mat<double>;

struct ConditionBundle {
  std::optional<std::vector<std::string>> text;
  std::optional<Video> video;
  std::optional<synth::Waveform> audio;
  Task task = Task::T2A;
  /// INPAINT: spans to regenerate (zeroed in the audio condition).
  std::vector<synth::Interval> mask;
  /// COMPLETE: length of the given prefix; everything after it is zeroed.
  double prefix_s = 5.0;

  static ConditionBundle from_text(std::string_view caption, Task task = Task::T2A);
};

/// Throws std::invalid_argument on a violated bundle invariant.
void validate(const ConditionBundle& b);

/// Model-ready view of a bundle after the missing-modality policy.
struct PreparedConditions {
  std::vector<int> token_ids;
  std::optional<Video> video;
  std::optional<synth::Waveform> audio;
};

std::string default_prompt(Task task);
PreparedConditions prepare(const ConditionBundle& b, const text::Vocabulary& vocab = text::Vocabulary::builtin());
/// Empty text, no video, no audio: the unconditional branch for guidance.
PreparedConditions null_conditions();

/// Zeroes samples in [start, end) of each span.
synth::Waveform apply_mask(const synth::Waveform& w, const std::vector<synth::Interval>& mask);

// ------------------------------------------------------------ features

/// Mean of every 5 consecutive frames: (250 x 64) -> (50 x 64).
Mat<double> video_semantic_features(const Video& frames);
/// Squared frame differences (first frame 0), mean-pooled 25 -> 5 fps: (50 x 64).
Mat<double> video_sync_features(const Video& frames);
/// Codec latent regrouped to 50 tokens of 10 frames x 16 channels: (50 x 160).
Mat<double> audio_features(const synth::Waveform& w);
/// Token-table rows plus sinusoidal positions, before the projection head: (32 x d).
template <typename Scalar>
Mat<Scalar> text_pre_projection(const ad::Parameters<Scalar>& p, int table, const std::vector<int>& ids, Index dim);

// ------------------------------------------------------------- encoders

struct CondEncoders {
  Index dim = 0;
  int table = -1;
  nn::Linear text_proj;
  nn::Linear video_semantic, video_sync;
  std::vector<nn::Block> video_temporal;
  nn::Linear video_proj;
  nn::Linear audio_in;
  std::vector<nn::Block> audio_temporal;
  nn::Linear audio_proj;
};

template <typename Scalar>
CondEncoders make_cond_encoders(ad::Parameters<Scalar>& p, const ModelConfig& cfg, Rng& rng);

template <typename Scalar>
struct EmbeddingVars {
  ad::Var<Scalar> video, text, audio;
};

/// Batched encoders: returns stacked (B*50 x d), (B*32 x d), (B*50 x d).
template <typename Scalar>
EmbeddingVars<Scalar> encode_conditions(ad::Tape<Scalar>& t, const CondEncoders& enc,
                                        std::span<const PreparedConditions> batch);

template <typename Scalar>
ad::Var<Scalar> embed_text(ad::Tape<Scalar>& t, const CondEncoders& enc, std::span<const std::vector<int>> ids);
template <typename Scalar>
ad::Var<Scalar> embed_video(ad::Tape<Scalar>& t, const CondEncoders& enc, std::span<const Video* const> videos);
template <typename Scalar>
ad::Var<Scalar> embed_audio(ad::Tape<Scalar>& t, const CondEncoders& enc,
                            std::span<const synth::Waveform* const> waves);

}  // namespace audiox::cond
