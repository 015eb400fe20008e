#pragma once

// Procedural event audio with structured annotations (caption, category ->
// count, timestamped event list, temporal relation), caption templates and
// instruction-following prompt sets.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace audiox::synth {

constexpr int kSampleRate = 800;
constexpr double kClipSeconds = 10.0;
constexpr int kClipSamples = 8000;

struct Waveform {
  Eigen::VectorXd samples = Eigen::VectorXd::Zero(kClipSamples);
  int sample_rate = kSampleRate;

  Eigen::Index size() const { return samples.size(); }
  static Waveform silence() { return {}; }
};

enum class Envelope { flat, decay, swell, tremolo };

/// One entry of the fixed sound vocabulary: a tone band, envelope family and noise mix.
struct Category {
  std::string name;
  double freq_hz;
  Envelope envelope;
  double noise_mix;
};

/// Half-width of each category's detection band around its centre frequency.
constexpr double kBandHalfWidthHz = 8.0;

const std::vector<Category>& vocabulary();
/// Case-insensitive lookup; -1 if unknown.
int category_index(std::string_view name);
const Category& category(std::string_view name);

struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

// ------------------------------------------------------------------ schema

struct SedEntry {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string category;
  std::string description;
  friend bool operator==(const SedEntry&, const SedEntry&) = default;
};

/// Count is empty for continuous / uncountable sounds.
using CategoryCount = std::pair<std::string, std::optional<int>>;

struct TimeRelation {
  bool interleave = false;
  std::vector<std::string> order;
  friend bool operator==(const TimeRelation&, const TimeRelation&) = default;
};

struct MusicAttributes {
  std::string genre;
  std::string mood;
  std::vector<std::string> instrument;
  std::string tempo;
  friend bool operator==(const MusicAttributes&, const MusicAttributes&) = default;
};

struct EventAnnotation {
  std::string caption;
  std::vector<CategoryCount> category;
  std::vector<SedEntry> sed;
  TimeRelation time_relation;
  std::string clip_id;
  std::optional<MusicAttributes> music;

  const CategoryCount* find(std::string_view name) const;
  friend bool operator==(const EventAnnotation&, const EventAnnotation&) = default;
};

struct Violation {
  std::string field;
  std::string rule;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(std::string_view rule) const;
};

ValidationReport validate_annotation(const EventAnnotation& ann);

// ------------------------------------------------------------- generation

class InfeasibleRecipe : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TimingPolicy { sequential, interleave };

struct EventRequest {
  std::string category;
  int count = 1;
  /// Explicit placements (one per event) or empty for random placement.
  std::vector<Interval> at;
};

struct ClipRecipe {
  /// Sequential policy places all events of events[0] first, then events[1], ...
  std::vector<EventRequest> events;
  TimingPolicy policy = TimingPolicy::sequential;
  /// Interleave policy: category sounding across the whole clip (count null).
  std::string background;
  double min_event_s = 0.4;
  double max_event_s = 1.5;
  double min_gap_s = 0.3;
  std::string clip_id;
};

struct Clip {
  Waveform wave;
  EventAnnotation annotation;
};

/// Bit-identical for identical (recipe, seed). Throws InfeasibleRecipe when the
/// requested events cannot be packed into the clip under the timing policy.
Clip gen_clip(const ClipRecipe& recipe, std::uint64_t seed);

/// Category/count view, timestamp view and temporal-order view, in that order;
/// views whose source field is absent are skipped (the timestamp view never is).
std::vector<std::string> augment_captions(const EventAnnotation& ann);

/// "one" .. "ten", digits above.
std::string number_word(int n);
/// Timestamp view only; always defined.
std::string sed_caption(const EventAnnotation& ann);

// -------------------------------------------------------------- benchmark

enum class PromptType { category_only, category_count, category_ordering, category_timestamp };

std::string_view to_string(PromptType t);
PromptType prompt_type_from_string(std::string_view s);

struct TimedCategory {
  std::string category;
  Interval interval;
  friend bool operator==(const TimedCategory&, const TimedCategory&) = default;
};

struct BenchPrompt {
  std::string id;
  PromptType type = PromptType::category_only;
  std::string prompt;
  std::vector<std::string> category;
  std::optional<std::vector<std::pair<std::string, int>>> count;
  std::optional<std::vector<std::string>> time_relation;
  std::optional<std::vector<TimedCategory>> timestamp;
  friend bool operator==(const BenchPrompt&, const BenchPrompt&) = default;
};

/// Four prompt types, n_per_type each; n_per_type must be a positive multiple of 5.
std::vector<BenchPrompt> gen_benchmark(int n_per_type, std::uint64_t seed);

/// A recipe whose clip satisfies the prompt (used to sanity-check the judging pipeline).
ClipRecipe recipe_for(const BenchPrompt& prompt);

}  // namespace audiox::synth
