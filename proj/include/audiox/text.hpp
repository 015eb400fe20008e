#pragma once

// Closed-lexicon tokenizer for captions, prompt templates and default prompts.

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace audiox::text {

constexpr int kPad = 0;
constexpr int kOov = 1;
constexpr int kVocabSize = 512;

/// Lower-cases and splits into words, numbers ("2", "2.4") and single punctuation marks.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  /// The built-in lexicon: sound categories, caption/prompt templates, numbers.
  static const Vocabulary& builtin();

  int id(const std::string& token) const;
  std::vector<int> ids(const std::vector<std::string>& tokens) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  /// Assigned entries (<= kVocabSize); the embedding table always has kVocabSize rows.
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  Vocabulary();
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace audiox::text
