#include "audiox/text.hpp"

#include "audiox/synth_data.hpp"

#include <cctype>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace audiox::text {

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_digit = [&](std::size_t k) { return k < s.size() && std::isdigit(static_cast<unsigned char>(s[k])); };
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (std::isalpha(c)) {
      std::string w;
      while (i < s.size() && (std::isalpha(static_cast<unsigned char>(s[i])) || s[i] == '\''))
        w += static_cast<char>(std::tolower(static_cast<unsigned char>(s[i++])));
      out.push_back(std::move(w));
    } else if (std::isdigit(c)) {
      std::string w;
      while (is_digit(i)) w += s[i++];
      if (i + 1 < s.size() && s[i] == '.' && is_digit(i + 1)) {
        w += s[i++];
        while (is_digit(i)) w += s[i++];
      }
      out.push_back(std::move(w));
    } else {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
  return out;
}

Vocabulary::Vocabulary() {
  auto add = [&](const std::string& t) {
    if (index_.count(t)) return;
    index_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(t);
  };
  add("<pad>");
  add("<oov>");
  for (const char* p : {".", ",", ":", "-", "'"}) add(p);
  const char* templates =
      "the audio contains one sound sounds of a an and continuous in this occurs occur first followed by "
      "distinct is audible from to seconds silent scene with exactly once times present throughout clip "
      "generate for video music inpaint missing continue bark loud single distance burst fire sustained "
      "second shorter mechanical firearm being handled heard then after before while background faint "
      "clap deep rolling sudden powerful splash sink person gargling crowd cheering storm sea wave crash "
      "at over deck huge violent medieval battlefield catapult launching stone subsequent explosion "
      "there are is no only short long quiet soft start end beginning middle begins ends again twice";
  std::istringstream words(templates);
  for (std::string w; words >> w;) add(w);
  for (const auto& cat : synth::vocabulary())
    for (const auto& t : tokenize(cat.name)) add(t);
  for (int n = 0; n <= 10; ++n) add(synth::number_word(n));
  for (int n = 0; n <= 100; ++n) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%d.%d", n / 10, n % 10);
    add(buf);
    if (n % 10 == 0) add(std::to_string(n / 10));
  }
  if (static_cast<int>(tokens_.size()) > kVocabSize) throw std::logic_error("lexicon exceeds vocabulary size");
}

const Vocabulary& Vocabulary::builtin() {
  static const Vocabulary v;
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kOov : it->second;
}

std::vector<int> Vocabulary::ids(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

}  // namespace audiox::text
