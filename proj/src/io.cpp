#include "audiox/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace audiox::io {

namespace {

std::string clock_text(double s) {
  const long ms = std::lround(s * 1000.0);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02ld:%02ld.%03ld", ms / 60000, (ms / 1000) % 60, ms % 1000);
  return buf;
}

double parse_clock(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("bad timestamp: " + s);
  try {
    return std::stod(s.substr(0, colon)) * 60.0 + std::stod(s.substr(colon + 1));
  } catch (const std::logic_error&) {
    throw std::invalid_argument("bad timestamp: " + s);
  }
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

std::string join_list(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

}  // namespace

std::string format_span(double start_s, double end_s) { return clock_text(start_s) + "-" + clock_text(end_s); }

synth::Interval parse_span(const std::string& span) {
  const auto dash = span.find('-');
  if (dash == std::string::npos) throw std::invalid_argument("bad span: " + span);
  return {parse_clock(trim(span.substr(0, dash))), parse_clock(trim(span.substr(dash + 1)))};
}

json to_json(const synth::EventAnnotation& ann) {
  json j;
  j["caption"] = ann.caption;
  json cat = json::object();
  for (const auto& [name, count] : ann.category) cat[name] = count ? json(*count) : json(nullptr);
  j["category"] = cat;
  json sed = json::array();
  for (const auto& e : ann.sed) {
    json entry;
    entry[format_span(e.start_s, e.end_s)] = e.description;
    entry["category"] = e.category;
    sed.push_back(entry);
  }
  j["SED"] = sed;
  j["time_relation"] = ann.time_relation.interleave ? std::string("interleave") : join_list(ann.time_relation.order);
  j["audio_id"] = ann.clip_id;
  if (ann.music) {
    j["genre"] = ann.music->genre;
    j["mood"] = ann.music->mood;
    j["instrument"] = ann.music->instrument;
    j["tempo"] = ann.music->tempo;
  }
  return j;
}

synth::EventAnnotation annotation_from_json(const json& j) {
  synth::EventAnnotation ann;
  ann.caption = j.value("caption", "");
  if (j.contains("category"))
    for (const auto& [name, count] : j.at("category").items())
      ann.category.push_back({name, count.is_null() ? std::nullopt : std::optional<int>(count.get<int>())});
  if (j.contains("SED")) {
    for (const auto& entry : j.at("SED")) {
      synth::SedEntry e;
      bool have_span = false;
      for (const auto& [key, val] : entry.items()) {
        if (key == "category") {
          e.category = val.get<std::string>();
        } else {
          const auto iv = parse_span(key);
          e.start_s = iv.start_s, e.end_s = iv.end_s;
          e.description = val.get<std::string>();
          have_span = true;
        }
      }
      if (!have_span) throw std::invalid_argument("SED entry without a timestamp");
      if (e.category.empty()) {
        // No explicit label: the longest category key mentioned in the description.
        const std::string desc = lower(e.description);
        for (const auto& [name, count] : ann.category)
          if (desc.find(lower(name)) != std::string::npos && name.size() > e.category.size()) e.category = name;
      }
      ann.sed.push_back(std::move(e));
    }
  }
  const std::string rel = j.value("time_relation", "");
  if (lower(trim(rel)) == "interleave")
    ann.time_relation.interleave = true;
  else
    ann.time_relation.order = split_list(rel);
  ann.clip_id = j.value("audio_id", "");
  if (j.contains("genre") || j.contains("mood") || j.contains("instrument") || j.contains("tempo")) {
    synth::MusicAttributes m;
    m.genre = j.value("genre", "");
    m.mood = j.value("mood", "");
    m.tempo = j.value("tempo", "");
    if (j.contains("instrument")) m.instrument = j.at("instrument").get<std::vector<std::string>>();
    ann.music = std::move(m);
  }
  return ann;
}

json to_json(const synth::BenchPrompt& p) {
  json j;
  j["id"] = p.id;
  j["type"] = std::string(synth::to_string(p.type));
  j["prompt"] = p.prompt;
  j["category"] = join_list(p.category);
  if (p.count) {
    json c = json::object();
    for (const auto& [name, n] : *p.count) c[name] = n;
    j["count"] = c;
  }
  if (p.time_relation) j["time_relation"] = join_list(*p.time_relation);
  if (p.timestamp) {
    json ts = json::object();
    for (const auto& t : *p.timestamp) ts[t.category] = {{"start", t.interval.start_s}, {"end", t.interval.end_s}};
    j["timestamp"] = ts;
  }
  return j;
}

synth::BenchPrompt prompt_from_json(const json& j) {
  synth::BenchPrompt p;
  p.id = j.at("id").get<std::string>();
  p.type = synth::prompt_type_from_string(j.at("type").get<std::string>());
  p.prompt = j.value("prompt", "");
  p.category = split_list(j.value("category", ""));
  if (j.contains("count")) {
    std::vector<std::pair<std::string, int>> c;
    for (const auto& [name, n] : j.at("count").items()) c.push_back({name, n.get<int>()});
    p.count = std::move(c);
  }
  if (j.contains("time_relation")) p.time_relation = split_list(j.at("time_relation").get<std::string>());
  if (j.contains("timestamp")) {
    std::vector<synth::TimedCategory> ts;
    for (const auto& [name, v] : j.at("timestamp").items())
      ts.push_back({name, {v.at("start").get<double>(), v.at("end").get<double>()}});
    p.timestamp = std::move(ts);
  }
  return p;
}

json to_json(const std::vector<synth::BenchPrompt>& prompts) {
  json arr = json::array();
  for (const auto& p : prompts) arr.push_back(to_json(p));
  return arr;
}

// --------------------------------------------------------------- binary

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<std::uint8_t> wav_bytes(const synth::Waveform& w) {
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  std::vector<std::uint8_t> out;
  out.reserve(44 + 2 * n);
  auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  tag("RIFF");
  put_u32(out, 36 + 2 * n);
  tag("WAVE");
  tag("fmt ");
  put_u32(out, 16);
  out.push_back(1), out.push_back(0);  // PCM
  out.push_back(1), out.push_back(0);  // mono
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  out.push_back(2), out.push_back(0);   // block align
  out.push_back(16), out.push_back(0);  // bits per sample
  tag("data");
  put_u32(out, 2 * n);
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) {
    const double x = std::clamp(w.samples(i), -1.0, 1.0);
    const auto s = static_cast<std::int16_t>(std::lround(x * 32767.0));
    const auto u = static_cast<std::uint16_t>(s);
    out.push_back(static_cast<std::uint8_t>(u & 0xff));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const synth::Waveform& w) { write_bytes(path, wav_bytes(w)); }

synth::Waveform read_wav(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  auto fail = [&](const char* why) { return std::runtime_error(path.string() + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) || std::memcmp(bytes.data() + 8, "WAVE", 4))
    throw fail("not a RIFF/WAVE file");
  synth::Waveform w;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = get_u32(bytes.data() + pos + 4);
    const std::uint8_t* body = bytes.data() + pos + 8;
    if (pos + 8 + len > bytes.size()) throw fail("truncated chunk");
    if (!std::memcmp(bytes.data() + pos, "fmt ", 4)) {
      if (len < 16 || body[0] != 1 || body[2] != 1 || body[14] != 16) throw fail("only 16-bit PCM mono is supported");
      w.sample_rate = static_cast<int>(get_u32(body + 4));
      have_fmt = true;
    } else if (!std::memcmp(bytes.data() + pos, "data", 4)) {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      w.samples.resize(len / 2);
      for (std::uint32_t i = 0; i < len / 2; ++i) {
        const auto u = static_cast<std::uint16_t>(body[2 * i] | (body[2 * i + 1] << 8));
        w.samples(i) = static_cast<std::int16_t>(u) / 32767.0;
      }
      return w;
    }
    pos += 8 + len + (len & 1);
  }
  throw fail("no data chunk");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace audiox::io
