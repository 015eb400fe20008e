#pragma once

#include "audiox/synth_data.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace audiox::io {

using json = nlohmann::ordered_json;

/// "MM:SS.mmm-MM:SS.mmm"
std::string format_span(double start_s, double end_s);
/// Accepts "MM:SS" or "MM:SS.fff" on both sides of the dash.
synth::Interval parse_span(const std::string& span);

json to_json(const synth::EventAnnotation& ann);
synth::EventAnnotation annotation_from_json(const json& j);

json to_json(const synth::BenchPrompt& p);
synth::BenchPrompt prompt_from_json(const json& j);
json to_json(const std::vector<synth::BenchPrompt>& prompts);

/// 16-bit PCM mono, little-endian RIFF.
std::vector<std::uint8_t> wav_bytes(const synth::Waveform& w);
void write_wav(const std::filesystem::path& path, const synth::Waveform& w);
synth::Waveform read_wav(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

/// FNV-1a, used for fingerprints and artifact checksums.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// Little-endian scalar packing.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32(const std::uint8_t* p);
std::uint64_t get_u64(const std::uint8_t* p);
float get_f32(const std::uint8_t* p);

}  // namespace audiox::io
