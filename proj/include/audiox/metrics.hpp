#pragma once

// Evaluation: distribution metrics over toy embeddings / class posteriors,
// instruction-following judgments over detected annotations, and an oracle
// detector that recovers annotations from waveforms built from the vocabulary.

#include "audiox/io.hpp"
#include "audiox/synth_data.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace audiox::metrics {

// ------------------------------------------------------- distributions

struct GaussStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Mean and unbiased covariance of the rows of `x` (needs >= 2 rows).
GaussStats gauss_stats(const Eigen::MatrixXd& x);

/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)).
double frechet_distance(const GaussStats& a, const GaussStats& b);

using ClassDist = Eigen::VectorXd;

constexpr double kLogFloor = 1e-10;

/// Throws unless nonnegative and summing to 1 within 1e-9.
void check_dist(const ClassDist& p);
/// KL(p || q) with the floor applied inside the logs.
double kl_divergence(const ClassDist& p, const ClassDist& q);
/// Mean over pairs of KL(ref_i || gen_i).
double kl_score(const std::vector<ClassDist>& ref, const std::vector<ClassDist>& gen);
/// exp(mean_x KL(p(y|x) || p(y))).
double inception_score(const std::vector<ClassDist>& probs);

double cosine_align(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// ---------------------------------------------------- toy audio models

/// Amplitude of the component near `freq_hz`, one value per `hop` samples
/// (frame j centred on sample j*hop + hop/2), Hann window of `window` samples.
std::vector<double> band_amplitude(const synth::Waveform& w, double freq_hz, int hop = 8, int window = 160);

constexpr int kEmbedBands = 32;
constexpr int kEmbedDim = 16;

/// Fixed random projection of log band energies.
Eigen::VectorXd toy_embed(const synth::Waveform& w);
/// Softmax over log energies of the vocabulary bands.
ClassDist toy_classify(const synth::Waveform& w);

// ------------------------------------------------------------ detector

struct DetectorConfig {
  int hop = 8;
  int window = 160;
  double floor = 0.05;       // absolute amplitude for activity
  double edge = 0.4;         // fraction of the segment peak that marks its edges
  double min_event_s = 0.1;  // shorter segments are discarded
  double bridge_s = 0.05;    // shorter dips below the floor do not split a segment
  double continuous_s = 9.5; // segments at least this long get a null count
};

/// Band-demodulation detector over the 16-category vocabulary.
synth::EventAnnotation oracle_detect(const synth::Waveform& w, const DetectorConfig& cfg = {});

/// Category with the longest total detected duration, or empty when nothing is found.
std::string dominant_category(const synth::EventAnnotation& detected);

// ------------------------------------------------------------ judgments

struct Judgment {
  bool cat = false;
  std::optional<bool> cnt, ord, ts;
};

/// cat: every prompt category detected; cnt: exact counts; ord: first-onset
/// order equals the prompt order; ts: detected extent within 1 s at both ends.
Judgment judge_accuracies(const synth::BenchPrompt& prompt, const synth::EventAnnotation& detected);

struct AudioTimeTarget {
  std::string category;  // event whose duration / count / intervals are specified
  std::vector<std::string> order;
  std::optional<double> duration_s;
  std::optional<int> count;
  std::vector<synth::Interval> intervals;
};

struct AudioTimeErrors {
  std::optional<int> ordering;  // 0 when the order matches
  std::optional<double> duration_l1;
  std::optional<double> frequency_l1;
  std::optional<double> timestamp_f1;
};

constexpr double kTolerance = 1.0;

AudioTimeErrors audiotime_errors(const AudioTimeTarget& target, const synth::EventAnnotation& detected);

/// Onset-sorted greedy matching with 1 s onset and offset tolerance.
double timestamp_f1(const std::vector<synth::Interval>& target, const std::vector<synth::Interval>& detected);

// -------------------------------------------------------------- report

struct MetricReport {
  struct Row {
    std::string id;
    std::vector<std::optional<double>> values;
  };
  std::vector<std::string> columns;
  std::vector<Row> rows;
  /// Run-level numbers that are not per-sample means (FD, IS, ...).
  std::vector<std::pair<std::string, double>> globals;
  io::json metadata = io::json::object();

  /// Mean of the non-empty values of each column.
  std::vector<std::optional<double>> summary() const;
  io::json to_json() const;
  /// One row per sample, then a "summary" row; run-level numbers as extra columns.
  std::string to_csv() const;
};

std::string csv_field(const std::string& s);

}  // namespace audiox::metrics
