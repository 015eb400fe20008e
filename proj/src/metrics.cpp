#include "audiox/metrics.hpp"

#include "audiox/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <stdexcept>

namespace audiox::metrics {

// ------------------------------------------------------- distributions

GaussStats gauss_stats(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw std::invalid_argument("gauss_stats needs at least two samples");
  GaussStats s;
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centred = x.rowwise() - s.mean.transpose();
  s.cov = centred.transpose() * centred / static_cast<double>(x.rows() - 1);
  return s;
}

namespace {

void check_stats(const GaussStats& s) {
  const auto d = s.mean.size();
  if (s.cov.rows() != d || s.cov.cols() != d) throw std::invalid_argument("covariance shape does not match mean");
  if ((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() > 1e-9) throw std::invalid_argument("covariance not symmetric");
}

}  // namespace

double frechet_distance(const GaussStats& a, const GaussStats& b) {
  if (a.mean.size() != b.mean.size()) throw std::invalid_argument("frechet_distance: dimension mismatch");
  check_stats(a);
  check_stats(b);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(a.cov);
  if (ea.eigenvalues().minCoeff() < -1e-9) throw std::invalid_argument("frechet_distance: covariance not PSD");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb_check(b.cov, Eigen::EigenvaluesOnly);
  if (eb_check.eigenvalues().minCoeff() < -1e-9) throw std::invalid_argument("frechet_distance: covariance not PSD");

  const Eigen::VectorXd root = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sa = ea.eigenvectors() * root.asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd m = sa * b.cov * sa;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m, Eigen::EigenvaluesOnly);
  const double tr_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double fd = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, fd);
}

void check_dist(const ClassDist& p) {
  if (p.size() == 0) throw std::invalid_argument("empty class distribution");
  if (p.minCoeff() < 0.0) throw std::invalid_argument("class distribution has negative mass");
  if (std::abs(p.sum() - 1.0) > 1e-9) throw std::invalid_argument("class distribution does not sum to 1");
}

double kl_divergence(const ClassDist& p, const ClassDist& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: class count mismatch");
  double kl = 0.0;
  for (Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) kl += p(i) * (std::log(std::max(p(i), kLogFloor)) - std::log(std::max(q(i), kLogFloor)));
  return kl;
}

double kl_score(const std::vector<ClassDist>& ref, const std::vector<ClassDist>& gen) {
  if (ref.size() != gen.size()) throw std::invalid_argument("kl_score: lists differ in length");
  if (ref.empty()) throw std::invalid_argument("kl_score: empty lists");
  double sum = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    check_dist(ref[i]);
    check_dist(gen[i]);
    sum += kl_divergence(ref[i], gen[i]);
  }
  return sum / static_cast<double>(ref.size());
}

double inception_score(const std::vector<ClassDist>& probs) {
  if (probs.empty()) throw std::invalid_argument("inception_score: empty list");
  ClassDist marginal = ClassDist::Zero(probs.front().size());
  for (const auto& p : probs) {
    check_dist(p);
    if (p.size() != marginal.size()) throw std::invalid_argument("inception_score: class count mismatch");
    marginal += p;
  }
  marginal /= static_cast<double>(probs.size());
  double mean_kl = 0.0;
  for (const auto& p : probs) mean_kl += kl_divergence(p, marginal);
  return std::exp(mean_kl / static_cast<double>(probs.size()));
}

double cosine_align(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_align: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine_align: zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

// ---------------------------------------------------- toy audio models

std::vector<double> band_amplitude(const synth::Waveform& w, double freq_hz, int hop, int window) {
  if (hop < 1 || window < 2) throw std::invalid_argument("band_amplitude: bad hop or window");
  const Index n = w.size();
  const double omega = 2.0 * std::numbers::pi * freq_hz / w.sample_rate;
  Eigen::VectorXd re(n), im(n);
  for (Index i = 0; i < n; ++i) {
    re(i) = w.samples(i) * std::cos(omega * static_cast<double>(i));
    im(i) = -w.samples(i) * std::sin(omega * static_cast<double>(i));
  }
  Eigen::VectorXd hann(window);
  for (int m = 0; m < window; ++m) hann(m) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (m + 0.5) / window);
  const double norm = 2.0 / hann.sum();

  std::vector<double> out(static_cast<std::size_t>(n / hop));
  for (std::size_t j = 0; j < out.size(); ++j) {
    const Index first = static_cast<Index>(j) * hop + hop / 2 - window / 2;
    const Index lo = std::max<Index>(0, first), hi = std::min<Index>(n, first + window);
    double sr = 0.0, si = 0.0;
    for (Index i = lo; i < hi; ++i) {
      sr += hann(i - first) * re(i);
      si += hann(i - first) * im(i);
    }
    out[j] = norm * std::hypot(sr, si);
  }
  return out;
}

namespace {

double band_energy(const synth::Waveform& w, double freq_hz) {
  const auto a = band_amplitude(w, freq_hz, 40, 160);
  double e = 0.0;
  for (double v : a) e += v * v;
  return e / static_cast<double>(a.size());
}

const Eigen::MatrixXd& embed_projection() {
  static const Eigen::MatrixXd p = [] {
    Rng rng = keyed_rng(0x656d626564ULL, {});
    return Eigen::MatrixXd(randn<double>(kEmbedDim, kEmbedBands, rng, 1.0 / std::sqrt(double(kEmbedBands))));
  }();
  return p;
}

}  // namespace

Eigen::VectorXd toy_embed(const synth::Waveform& w) {
  Eigen::VectorXd logs(kEmbedBands);
  for (int b = 0; b < kEmbedBands; ++b)
    logs(b) = std::log(1e-6 + band_energy(w, 20.0 + (380.0 - 20.0) * b / (kEmbedBands - 1)));
  return embed_projection() * logs;
}

ClassDist toy_classify(const synth::Waveform& w) {
  const auto& vocab = synth::vocabulary();
  ClassDist p(static_cast<Index>(vocab.size()));
  // softmax of log(E + 1e-6) is the normalised floored energy
  for (std::size_t k = 0; k < vocab.size(); ++k) p(static_cast<Index>(k)) = band_energy(w, vocab[k].freq_hz) + 1e-6;
  return p / p.sum();
}

// ------------------------------------------------------------ detector

synth::EventAnnotation oracle_detect(const synth::Waveform& w, const DetectorConfig& cfg) {
  const auto& vocab = synth::vocabulary();
  const double sr = w.sample_rate;
  const double clip_s = static_cast<double>(w.size()) / sr;
  auto centre_s = [&](std::size_t j) { return (static_cast<double>(j) * cfg.hop + cfg.hop / 2.0) / sr; };
  auto centis = [](double s) { return std::round(s * 100.0) / 100.0; };

  struct Found {
    double start, end;
    std::string category;
  };
  std::vector<Found> found;
  std::map<std::string, bool> continuous;
  for (const auto& cat : vocab) {
    const auto a = band_amplitude(w, cat.freq_hz, cfg.hop, cfg.window);
    std::size_t j = 0;
    while (j < a.size()) {
      if (a[j] <= cfg.floor) {
        ++j;
        continue;
      }
      const auto bridge = static_cast<std::size_t>(std::lround(cfg.bridge_s * sr / cfg.hop));
      std::size_t k = j;
      double peak = 0.0;
      for (;;) {
        while (k < a.size() && a[k] > cfg.floor) peak = std::max(peak, a[k++]);
        std::size_t next = k;
        while (next < a.size() && next - k <= bridge && a[next] <= cfg.floor) ++next;
        if (next >= a.size() || next - k > bridge) break;
        k = next;
      }
      std::size_t s = j, e = k - 1;
      while (a[s] < cfg.edge * peak) ++s;
      while (a[e] < cfg.edge * peak) --e;
      const double start = s == 0 ? 0.0 : centis(centre_s(s));
      const double end = e + 1 == a.size() ? clip_s : centis(centre_s(e));
      if (end - start >= cfg.min_event_s) {
        found.push_back({start, end, cat.name});
        if (end - start >= cfg.continuous_s) continuous[cat.name] = true;
      }
      j = k;
    }
  }
  std::stable_sort(found.begin(), found.end(), [](const Found& x, const Found& y) { return x.start < y.start; });

  synth::EventAnnotation ann;
  ann.clip_id = "detected";
  for (const auto& f : found) {
    if (ann.find(f.category)) continue;
    std::optional<int> count;
    if (!continuous.count(f.category))
      count = static_cast<int>(std::count_if(found.begin(), found.end(),
                                             [&](const Found& g) { return g.category == f.category; }));
    ann.category.push_back({f.category, count});
  }
  for (const auto& f : found) ann.sed.push_back({f.start, f.end, f.category, "The sound of " + f.category + "."});
  if (!continuous.empty())
    ann.time_relation.interleave = true;
  else
    for (const auto& [name, count] : ann.category) ann.time_relation.order.push_back(name);
  ann.caption = ann.category.empty() ? "The audio is silent." : synth::augment_captions(ann).front();
  return ann;
}

std::string dominant_category(const synth::EventAnnotation& detected) {
  std::map<std::string, double> total;
  for (const auto& e : detected.sed) total[e.category] += e.end_s - e.start_s;
  std::string best;
  double best_d = 0.0;
  for (const auto& c : detected.category)
    if (total[c.first] > best_d) best_d = total[c.first], best = c.first;
  return best;
}

// ------------------------------------------------------------ judgments

namespace {

constexpr double kSlack = 1e-9;

std::optional<double> first_onset(const synth::EventAnnotation& ann, const std::string& cat) {
  std::optional<double> t;
  for (const auto& e : ann.sed)
    if (e.category == cat && (!t || e.start_s < *t)) t = e.start_s;
  return t;
}

bool order_matches(const std::vector<std::string>& order, const synth::EventAnnotation& ann) {
  std::optional<double> prev;
  for (const auto& c : order) {
    const auto t = first_onset(ann, c);
    if (!t || (prev && !(*t > *prev))) return false;
    prev = t;
  }
  return true;
}

void check_detected(const synth::EventAnnotation& detected) {
  const auto rep = synth::validate_annotation(detected);
  if (!rep.ok())
    throw std::invalid_argument("detected annotation invalid: " + rep.violations.front().field + ": " +
                                rep.violations.front().rule);
}

}  // namespace

Judgment judge_accuracies(const synth::BenchPrompt& prompt, const synth::EventAnnotation& detected) {
  using synth::PromptType;
  if (prompt.category.empty()) throw std::invalid_argument("prompt " + prompt.id + " names no category");
  const bool wants_cnt = prompt.type == PromptType::category_count;
  const bool wants_ord = prompt.type == PromptType::category_ordering;
  const bool wants_ts = prompt.type == PromptType::category_timestamp;
  if (prompt.count.has_value() != wants_cnt || prompt.time_relation.has_value() != wants_ord ||
      prompt.timestamp.has_value() != wants_ts)
    throw std::invalid_argument("prompt " + prompt.id + " fields do not match its type");
  check_detected(detected);

  Judgment j;
  j.cat = std::all_of(prompt.category.begin(), prompt.category.end(),
                      [&](const std::string& c) { return detected.find(c) != nullptr; });
  if (wants_cnt)
    j.cnt = std::all_of(prompt.count->begin(), prompt.count->end(), [&](const auto& cn) {
      const auto* d = detected.find(cn.first);
      return d && d->second && *d->second == cn.second;
    });
  if (wants_ord) j.ord = order_matches(*prompt.time_relation, detected);
  if (wants_ts)
    j.ts = std::all_of(prompt.timestamp->begin(), prompt.timestamp->end(), [&](const synth::TimedCategory& tc) {
      std::optional<double> lo, hi;
      for (const auto& e : detected.sed)
        if (e.category == tc.category) {
          lo = lo ? std::min(*lo, e.start_s) : e.start_s;
          hi = hi ? std::max(*hi, e.end_s) : e.end_s;
        }
      return lo && std::abs(*lo - tc.interval.start_s) <= kTolerance + kSlack &&
             std::abs(*hi - tc.interval.end_s) <= kTolerance + kSlack;
    });
  return j;
}

double timestamp_f1(const std::vector<synth::Interval>& target, const std::vector<synth::Interval>& detected) {
  if (target.empty() && detected.empty()) return 1.0;
  if (target.empty() || detected.empty()) return 0.0;
  auto by_onset = [](std::vector<synth::Interval> v) {
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
    return v;
  };
  const auto t = by_onset(target), d = by_onset(detected);
  std::vector<bool> used(d.size(), false);
  int tp = 0;
  for (const auto& ti : t)
    for (std::size_t k = 0; k < d.size(); ++k)
      if (!used[k] && std::abs(d[k].start_s - ti.start_s) <= kTolerance + kSlack &&
          std::abs(d[k].end_s - ti.end_s) <= kTolerance + kSlack) {
        used[k] = true;
        ++tp;
        break;
      }
  if (tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(d.size());
  const double r = static_cast<double>(tp) / static_cast<double>(t.size());
  return 2.0 * p * r / (p + r);
}

AudioTimeErrors audiotime_errors(const AudioTimeTarget& target, const synth::EventAnnotation& detected) {
  const bool needs_category = target.duration_s || target.count || !target.intervals.empty();
  if (needs_category && target.category.empty()) throw std::invalid_argument("audiotime target lacks a category");
  if (target.duration_s && !(*target.duration_s >= 0.0)) throw std::invalid_argument("negative target duration");
  if (target.count && *target.count < 0) throw std::invalid_argument("negative target count");
  for (const auto& iv : target.intervals)
    if (!(iv.start_s >= 0.0 && iv.start_s < iv.end_s && iv.end_s <= synth::kClipSeconds))
      throw std::invalid_argument("target interval outside [0, 10] or empty");
  check_detected(detected);

  std::vector<synth::Interval> mine;
  for (const auto& e : detected.sed)
    if (e.category == target.category) mine.push_back({e.start_s, e.end_s});

  AudioTimeErrors r;
  if (!target.order.empty()) r.ordering = order_matches(target.order, detected) ? 0 : 1;
  if (target.duration_s) {
    double total = 0.0;
    for (const auto& iv : mine) total += iv.end_s - iv.start_s;
    r.duration_l1 = std::abs(total - *target.duration_s);
  }
  if (target.count) r.frequency_l1 = std::abs(static_cast<double>(mine.size()) - *target.count);
  if (!target.intervals.empty()) r.timestamp_f1 = timestamp_f1(target.intervals, mine);
  return r;
}

// -------------------------------------------------------------- report

std::vector<std::optional<double>> MetricReport::summary() const {
  std::vector<std::optional<double>> out(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : rows)
      if (c < r.values.size() && r.values[c]) sum += *r.values[c], ++n;
    if (n > 0) out[c] = sum / n;
  }
  return out;
}

io::json MetricReport::to_json() const {
  io::json j;
  j["metadata"] = metadata;
  j["columns"] = columns;
  io::json summ = io::json::object();
  const auto s = summary();
  for (std::size_t c = 0; c < columns.size(); ++c) summ[columns[c]] = s[c] ? io::json(*s[c]) : io::json(nullptr);
  for (const auto& [name, v] : globals) summ[name] = v;
  j["summary"] = summ;
  io::json rs = io::json::array();
  for (const auto& r : rows) {
    io::json row;
    row["id"] = r.id;
    for (std::size_t c = 0; c < columns.size(); ++c)
      row[columns[c]] = c < r.values.size() && r.values[c] ? io::json(*r.values[c]) : io::json(nullptr);
    rs.push_back(row);
  }
  j["samples"] = rs;
  return j;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

namespace {

std::string number(std::optional<double> v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

}  // namespace

std::string MetricReport::to_csv() const {
  std::string out = "id";
  for (const auto& c : columns) out += "," + csv_field(c);
  for (const auto& g : globals) out += "," + csv_field(g.first);
  out += "\r\n";
  for (const auto& r : rows) {
    out += csv_field(r.id);
    for (std::size_t c = 0; c < columns.size(); ++c) out += "," + number(c < r.values.size() ? r.values[c] : std::nullopt);
    for (std::size_t g = 0; g < globals.size(); ++g) out += ",";
    out += "\r\n";
  }
  out += "summary";
  for (const auto& v : summary()) out += "," + number(v);
  for (const auto& g : globals) out += "," + number(g.second);
  out += "\r\n";
  return out;
}

}  // namespace audiox::metrics
