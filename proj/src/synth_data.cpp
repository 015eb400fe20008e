#include "audiox/synth_data.hpp"

#include "audiox/tensor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace audiox::synth {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

const std::vector<Category>& vocabulary() {
  static const std::vector<Category> vocab = [] {
    const char* names[] = {"dog bark",   "thunder",    "explosion",      "gargle",
                           "water splash", "crowd cheering", "wave crash", "rain",
                           "machine gun", "generic impact sounds", "yip", "siren",
                           "church bell", "car engine", "bird chirp",     "female speech"};
    const Envelope envs[] = {Envelope::flat, Envelope::decay, Envelope::swell, Envelope::tremolo};
    const double mixes[] = {0.0, 0.05, 0.1, 0.15};
    std::vector<Category> v;
    for (int k = 0; k < 16; ++k) v.push_back({names[k], 30.0 + 22.0 * k, envs[k % 4], mixes[(k / 4) % 4]});
    return v;
  }();
  return vocab;
}

int category_index(std::string_view name) {
  const std::string key = lower(name);
  const auto& v = vocabulary();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i].name == key) return static_cast<int>(i);
  return -1;
}

const Category& category(std::string_view name) {
  const int i = category_index(name);
  if (i < 0) throw std::invalid_argument("unknown sound category: " + std::string(name));
  return vocabulary()[static_cast<std::size_t>(i)];
}

const CategoryCount* EventAnnotation::find(std::string_view name) const {
  for (const auto& c : category)
    if (c.first == name) return &c;
  return nullptr;
}

bool ValidationReport::has(std::string_view rule) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.rule == rule; });
}

ValidationReport validate_annotation(const EventAnnotation& ann) {
  ValidationReport rep;
  auto flag = [&](std::string field, std::string rule, std::string detail) {
    rep.violations.push_back({std::move(field), std::move(rule), std::move(detail)});
  };

  std::set<std::string> keys;
  for (const auto& [name, count] : ann.category) {
    if (!keys.insert(name).second) flag("category", "duplicate category", name);
    if (count && *count <= 0) flag("category", "invalid count", name);
  }

  for (std::size_t i = 0; i < ann.sed.size(); ++i) {
    const auto& e = ann.sed[i];
    const std::string field = "SED[" + std::to_string(i) + "]";
    if (e.start_s < 0.0 || e.end_s > kClipSeconds || e.start_s > kClipSeconds || e.end_s < 0.0)
      flag(field, "interval out of range", e.category);
    if (e.start_s == e.end_s)
      flag(field, "empty interval", e.category);
    else if (e.start_s > e.end_s)
      flag(field, "inverted interval", e.category);
    if (!keys.count(e.category)) flag(field, "unknown category", e.category);
  }

  for (const auto& [name, count] : ann.category) {
    if (!count || *count <= 0) continue;
    const auto n = std::count_if(ann.sed.begin(), ann.sed.end(), [&](const SedEntry& e) { return e.category == name; });
    if (n != *count)
      flag("category", "count mismatch", name + ": declared " + std::to_string(*count) + ", SED has " + std::to_string(n));
  }

  for (const auto& name : ann.time_relation.order)
    if (!keys.count(name)) flag("time_relation", "unknown category", name);

  if (ann.music) {
    const auto& m = *ann.music;
    if (m.genre.empty()) flag("genre", "empty field", "");
    if (m.mood.empty()) flag("mood", "empty field", "");
    if (m.tempo.empty()) flag("tempo", "empty field", "");
    if (m.instrument.empty()) flag("instrument", "empty field", "");
  }
  return rep;
}

// ------------------------------------------------------------- captions

std::string number_word(int n) {
  static const char* words[] = {"zero", "one", "two", "three", "four", "five",
                                "six",  "seven", "eight", "nine", "ten"};
  if (n >= 0 && n <= 10) return words[n];
  return std::to_string(n);
}

namespace {

std::string strip_sounds(const std::string& name) {
  if (ends_with(name, " sounds")) return name.substr(0, name.size() - 7);
  if (ends_with(name, " sound")) return name.substr(0, name.size() - 6);
  return name;
}

bool is_sound_noun(const std::string& name) { return ends_with(name, " sounds") || ends_with(name, " sound"); }

std::string article(const std::string& word) {
  return !word.empty() && std::string("aeiou").find(word[0]) != std::string::npos ? "an" : "a";
}

std::string the_sound_of(const std::string& name) {
  const std::string core = strip_sounds(lower(name));
  return "the sound of " + article(core) + " " + core;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string join_and(const std::vector<std::string>& parts) {
  if (parts.empty()) return "";
  if (parts.size() == 1) return parts[0];
  if (parts.size() == 2) return parts[0] + " and " + parts[1];
  std::string out;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) out += parts[i] + ", ";
  return out + "and " + parts.back();
}

std::string seconds_text(double s) {
  const double r = std::round(s * 10.0) / 10.0;
  std::ostringstream os;
  if (std::fabs(r - std::round(r)) < 1e-9)
    os << static_cast<long>(std::lround(r));
  else
    os.precision(1), os << std::fixed << r;
  return os.str();
}

std::string count_phrase(const std::string& raw, std::optional<int> count) {
  const std::string name = lower(raw);
  const std::string core = strip_sounds(name);
  if (!count) return "continuous " + core + " sounds";
  const int n = *count;
  if (is_sound_noun(name)) return n == 1 ? "one " + core + " sound" : number_word(n) + " " + core + " sounds";
  return n == 1 ? "one sound of " + article(name) + " " + name : number_word(n) + " sounds of " + article(name) + " " + name;
}

std::string order_phrase(const std::string& raw, std::optional<int> count) {
  const std::string core = strip_sounds(lower(raw));
  if (!count) return "continuous " + core + " sounds";
  if (*count == 1) return the_sound_of(raw);
  return number_word(*count) + " distinct " + core + " sounds";
}

std::string category_caption(const EventAnnotation& ann) {
  std::vector<std::string> parts;
  for (const auto& [name, count] : ann.category) parts.push_back(count_phrase(name, count));
  return "The audio contains " + join_and(parts) + ".";
}

std::string order_caption(const EventAnnotation& ann) {
  const auto& order = ann.time_relation.order;
  auto count_of = [&](const std::string& name) -> std::optional<int> {
    const auto* c = ann.find(name);
    return c ? c->second : std::optional<int>(1);
  };
  std::string first = order_phrase(order[0], count_of(order[0]));
  const bool plural = !count_of(order[0]) || *count_of(order[0]) > 1;
  if (order.size() == 1) return "In this audio, " + first + (plural ? " occur." : " occurs.");
  std::string out = "In this audio, " + first + (plural ? " occur first" : " occurs first");
  for (std::size_t i = 1; i < order.size(); ++i) out += ", followed by " + order_phrase(order[i], count_of(order[i]));
  return out + ".";
}

}  // namespace

std::string sed_caption(const EventAnnotation& ann) {
  if (ann.sed.empty()) return "The audio is silent.";
  std::vector<SedEntry> entries = ann.sed;
  std::stable_sort(entries.begin(), entries.end(),
                   [](const SedEntry& a, const SedEntry& b) { return a.start_s < b.start_s; });
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string span = "from " + seconds_text(e.start_s) + " to " + seconds_text(e.end_s) + " seconds";
    if (i == 0)
      out = capitalize(the_sound_of(e.category)) + " is audible " + span;
    else
      out += ", followed by " + the_sound_of(e.category) + " " + span;
  }
  return out + ".";
}

std::vector<std::string> augment_captions(const EventAnnotation& ann) {
  std::vector<std::string> out;
  if (!ann.category.empty()) out.push_back(category_caption(ann));
  out.push_back(sed_caption(ann));
  if (!ann.time_relation.interleave && !ann.time_relation.order.empty()) out.push_back(order_caption(ann));
  return out;
}

// ------------------------------------------------------------ generation

namespace {

constexpr int kCentis = 1000;     // clip length in 10 ms units
constexpr int kRampSamples = 8;   // 10 ms attack and release

struct Placed {
  std::string category;
  int start_cs;
  int end_cs;
};

double envelope(Envelope env, double u, double t_s) {
  switch (env) {
    case Envelope::flat: return 1.0;
    case Envelope::decay: return 0.6 + 0.4 * std::exp(-3.0 * u);
    case Envelope::swell: return 0.6 + 0.4 * u;
    case Envelope::tremolo: return 0.8 + 0.2 * std::sin(2.0 * std::numbers::pi * 4.0 * t_s);
  }
  return 1.0;
}

void render(Eigen::VectorXd& out, const Category& cat, int s0, int s1, double amplitude, Rng& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> detune(-4.0, 4.0);
  const double tone_phase = phase(rng);
  double side_freq[3], side_phase[3];
  for (int k = 0; k < 3; ++k) side_freq[k] = cat.freq_hz + detune(rng), side_phase[k] = phase(rng);
  const double w = 2.0 * std::numbers::pi / kSampleRate;
  const int len = s1 - s0;
  for (int n = s0; n < s1; ++n) {
    const double u = static_cast<double>(n - s0) / len;
    const double ramp = std::min({1.0, (n - s0 + 1.0) / kRampSamples, static_cast<double>(s1 - n) / kRampSamples});
    double narrow = 0.0;
    for (int k = 0; k < 3; ++k) narrow += std::sin(w * side_freq[k] * n + side_phase[k]);
    const double carrier = (1.0 - cat.noise_mix) * std::sin(w * cat.freq_hz * n + tone_phase) + cat.noise_mix * narrow / 3.0;
    out(n) += amplitude * ramp * envelope(cat.envelope, u, static_cast<double>(n) / kSampleRate) * carrier;
  }
}

int to_cs(double s) { return static_cast<int>(std::lround(s * 100.0)); }

std::vector<Placed> place_random(const std::vector<std::string>& seq, const ClipRecipe& r, Rng& rng) {
  const int n = static_cast<int>(seq.size());
  const int min_d = std::max(1, to_cs(r.min_event_s));
  const int max_d = std::max(min_d, to_cs(r.max_event_s));
  const int gap = to_cs(r.min_gap_s);
  if (n * min_d + (n - 1) * gap > kCentis)
    throw InfeasibleRecipe("cannot pack " + std::to_string(n) + " events of at least " + std::to_string(r.min_event_s) +
                           " s with " + std::to_string(r.min_gap_s) + " s gaps into a 10 s clip");
  std::uniform_int_distribution<int> dur(min_d, max_d);
  std::vector<int> d(static_cast<std::size_t>(n));
  for (auto& x : d) x = dur(rng);
  int total = 0;
  for (int x : d) total += x;
  while (total + (n - 1) * gap > kCentis) {
    auto it = std::max_element(d.begin(), d.end());
    --*it, --total;
  }
  const int slack = kCentis - total - (n - 1) * gap;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> wts(static_cast<std::size_t>(n + 1));
  double wsum = 0.0;
  for (auto& x : wts) x = -std::log(1.0 - unit(rng)), wsum += x;
  std::vector<int> extra(wts.size());
  int used = 0;
  for (std::size_t i = 0; i < wts.size(); ++i) used += extra[i] = static_cast<int>(std::floor(slack * wts[i] / wsum));
  extra.back() += slack - used;

  std::vector<Placed> out;
  int t = extra[0];
  for (int i = 0; i < n; ++i) {
    out.push_back({seq[static_cast<std::size_t>(i)], t, t + d[static_cast<std::size_t>(i)]});
    t += d[static_cast<std::size_t>(i)] + gap + extra[static_cast<std::size_t>(i + 1)];
  }
  return out;
}

std::vector<Placed> place_explicit(const ClipRecipe& r) {
  std::vector<Placed> out;
  for (const auto& req : r.events)
    for (const auto& iv : req.at) {
      if (iv.start_s < 0.0 || iv.end_s > kClipSeconds || iv.start_s >= iv.end_s)
        throw InfeasibleRecipe("event interval outside the clip or empty: " + req.category);
      out.push_back({req.category, to_cs(iv.start_s), to_cs(iv.end_s)});
    }
  // pinned events of different categories may overlap; repeats of one category may not
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = i + 1; j < out.size(); ++j) {
      if (out[i].category != out[j].category) continue;
      const auto& [a, b] = std::minmax(out[i], out[j], [](const Placed& x, const Placed& y) { return x.start_cs < y.start_cs; });
      if (b.start_cs - a.end_cs < to_cs(r.min_gap_s)) throw InfeasibleRecipe("events closer than the minimum gap");
    }
  return out;
}

}  // namespace

Clip gen_clip(const ClipRecipe& recipe, std::uint64_t seed) {
  if (recipe.events.size() > 5) throw std::invalid_argument("a clip holds at most 5 event categories");
  std::set<std::string> seen;
  bool any_explicit = false, all_explicit = true;
  std::vector<std::string> seq;
  for (const auto& req : recipe.events) {
    category(req.category);
    if (!seen.insert(lower(req.category)).second) throw std::invalid_argument("duplicate category: " + req.category);
    if (req.count < 1) throw std::invalid_argument("event count must be positive: " + req.category);
    if (!req.at.empty() && static_cast<int>(req.at.size()) != req.count)
      throw std::invalid_argument("explicit placements must match the count: " + req.category);
    any_explicit = any_explicit || !req.at.empty();
    all_explicit = all_explicit && !req.at.empty();
    for (int i = 0; i < req.count; ++i) seq.push_back(lower(req.category));
  }
  if (any_explicit && !all_explicit) throw std::invalid_argument("mix of explicit and random placements");
  const bool interleave = recipe.policy == TimingPolicy::interleave;
  if (interleave) {
    category(recipe.background);
    if (seen.count(lower(recipe.background))) throw std::invalid_argument("background repeats an event category");
  }

  Rng rng = keyed_rng(seed, {0x636c6970ULL});
  std::vector<Placed> placed;
  if (!seq.empty()) placed = any_explicit ? place_explicit(recipe) : place_random(seq, recipe, rng);

  Clip clip;
  auto& ann = clip.annotation;
  ann.clip_id = recipe.clip_id.empty() ? "clip_" + std::to_string(seed) : recipe.clip_id;
  std::uniform_real_distribution<double> amp(0.5, 0.8);
  if (interleave) {
    const std::string bg = lower(recipe.background);
    render(clip.wave.samples, category(bg), 0, kClipSamples, 0.15, rng);
    ann.category.push_back({bg, std::nullopt});
    ann.sed.push_back({0.0, kClipSeconds, bg, "Continuous " + strip_sounds(bg) + " sounds throughout the clip."});
  }
  for (const auto& req : recipe.events) ann.category.push_back({lower(req.category), req.count});

  std::vector<Placed> by_onset = placed;
  std::stable_sort(by_onset.begin(), by_onset.end(),
                   [](const Placed& a, const Placed& b) { return a.start_cs < b.start_cs; });
  for (const auto& p : by_onset) {
    const int s0 = p.start_cs * kSampleRate / 100, s1 = p.end_cs * kSampleRate / 100;
    render(clip.wave.samples, category(p.category), s0, s1, amp(rng), rng);
    ann.sed.push_back({p.start_cs / 100.0, p.end_cs / 100.0, p.category, capitalize(the_sound_of(p.category)) + "."});
  }
  clip.wave.samples = clip.wave.samples.cwiseMax(-1.0).cwiseMin(1.0);

  if (interleave) {
    ann.time_relation.interleave = true;
  } else {
    for (const auto& p : by_onset)
      if (std::find(ann.time_relation.order.begin(), ann.time_relation.order.end(), p.category) ==
          ann.time_relation.order.end())
        ann.time_relation.order.push_back(p.category);
  }
  ann.caption = ann.category.empty() ? "The audio is silent." : category_caption(ann);
  return clip;
}

// -------------------------------------------------------------- benchmark

std::string_view to_string(PromptType t) {
  switch (t) {
    case PromptType::category_only: return "category-only";
    case PromptType::category_count: return "category+count";
    case PromptType::category_ordering: return "category+ordering";
    case PromptType::category_timestamp: return "category+timestamp";
  }
  return "";
}

PromptType prompt_type_from_string(std::string_view s) {
  for (auto t : {PromptType::category_only, PromptType::category_count, PromptType::category_ordering,
                 PromptType::category_timestamp})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown prompt type: " + std::string(s));
}

namespace {

std::vector<std::string> pick_categories(int k, Rng& rng) {
  std::vector<int> idx(vocabulary().size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::string> out;
  for (int i = 0; i < k; ++i) out.push_back(vocabulary()[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])].name);
  return out;
}

std::string one_decimal(double s) {
  std::ostringstream os;
  os.precision(1);
  os << std::fixed << s;
  return os.str();
}

}  // namespace

std::vector<BenchPrompt> gen_benchmark(int n_per_type, std::uint64_t seed) {
  if (n_per_type <= 0 || n_per_type % 5 != 0)
    throw std::invalid_argument("n_per_type must be a positive multiple of 5, got " + std::to_string(n_per_type));
  Rng rng = keyed_rng(seed, {0x62656e6368ULL});
  std::vector<BenchPrompt> out;
  out.reserve(static_cast<std::size_t>(4 * n_per_type));
  const int per_bucket = n_per_type / 5;
  auto next_id = [&] {
    std::ostringstream os;
    os << "T2A_";
    os.width(5);
    os.fill('0');
    os << out.size();
    return os.str();
  };

  for (int i = 0; i < n_per_type; ++i) {
    BenchPrompt p;
    p.id = next_id();
    p.type = PromptType::category_only;
    p.category = pick_categories(1 + i / per_bucket, rng);
    std::vector<std::string> parts;
    for (const auto& c : p.category) parts.push_back(the_sound_of(c));
    p.prompt = "A scene with " + join_and(parts) + ".";
    out.push_back(std::move(p));
  }
  for (int i = 0; i < n_per_type; ++i) {
    BenchPrompt p;
    p.id = next_id();
    p.type = PromptType::category_count;
    p.category = pick_categories(1, rng);
    const int n = 1 + i / per_bucket;
    p.count = std::vector<std::pair<std::string, int>>{{p.category[0], n}};
    p.prompt = capitalize(the_sound_of(p.category[0])) + " occurs " + (n == 1 ? "exactly once" : "exactly " + number_word(n) + " times") + ".";
    out.push_back(std::move(p));
  }
  for (int i = 0; i < n_per_type; ++i) {
    BenchPrompt p;
    p.id = next_id();
    p.type = PromptType::category_ordering;
    p.category = pick_categories(i < n_per_type / 2 ? 2 : 3, rng);
    p.time_relation = p.category;
    std::string text = capitalize(the_sound_of(p.category[0]));
    for (std::size_t k = 1; k < p.category.size(); ++k) text += ", followed by " + the_sound_of(p.category[k]);
    p.prompt = text + ".";
    out.push_back(std::move(p));
  }
  std::uniform_int_distribution<int> start_half(0, 16);
  for (int i = 0; i < n_per_type; ++i) {
    BenchPrompt p;
    p.id = next_id();
    p.type = PromptType::category_timestamp;
    p.category = pick_categories(1, rng);
    const int s = start_half(rng);
    std::uniform_int_distribution<int> len_half(2, 20 - s);
    const double start = s * 0.5, end = (s + len_half(rng)) * 0.5;
    p.timestamp = std::vector<TimedCategory>{{p.category[0], {start, end}}};
    p.prompt = capitalize(the_sound_of(p.category[0])) + " is present from " + one_decimal(start) + " seconds to " +
               one_decimal(end) + " seconds.";
    out.push_back(std::move(p));
  }
  return out;
}

ClipRecipe recipe_for(const BenchPrompt& prompt) {
  ClipRecipe r;
  r.clip_id = prompt.id;
  r.min_event_s = 0.4;
  r.max_event_s = 1.2;
  switch (prompt.type) {
    case PromptType::category_only:
    case PromptType::category_ordering:
      for (const auto& c : prompt.category) r.events.push_back({c, 1, {}});
      break;
    case PromptType::category_count:
      for (const auto& [c, n] : *prompt.count) r.events.push_back({c, n, {}});
      break;
    case PromptType::category_timestamp:
      for (const auto& tc : *prompt.timestamp) r.events.push_back({tc.category, 1, {tc.interval}});
      break;
  }
  return r;
}

}  // namespace audiox::synth
