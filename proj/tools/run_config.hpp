#pragma once

// Flat run configuration with dotted keys. Precedence: defaults < --config
// file < --key value flags.

#include "audiox/io.hpp"
#include "audiox/trainer.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace audiox::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RunConfig {
 public:
  RunConfig();

  /// Every key with its default, in a fixed order.
  static const io::json& defaults();

  /// Merges a flat JSON object. Unknown keys and wrong types are usage errors.
  void merge(const io::json& flat, const std::string& origin);
  void merge_file(const std::filesystem::path& path);
  /// Parses `text` according to the type of the key's default.
  void set(const std::string& key, const std::string& text);

  const io::json& values() const { return values_; }
  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::string text(const std::string& key) const;

  ModelConfig model() const;
  train::TrainConfig trainer() const;
  diffusion::SamplerConfig sampler() const;
  /// Builds and validates every module config; throws UsageError.
  void validate() const;

  void write_sidecar(const std::filesystem::path& dir) const;

 private:
  io::json values_;
};

std::vector<std::string> split_list(const std::string& s);

}  // namespace audiox::cli
