#pragma once

// Invertible linear stand-in for an audio autoencoder: the waveform is cut
// into 16-sample frames and every frame is rotated by one fixed orthonormal
// 16x16 matrix. 8000 samples at 800 Hz become 500 frames x 16 channels (50 fps).

#include "audiox/synth_data.hpp"
#include "audiox/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace audiox::codec {

constexpr int kFrameSize = 16;
constexpr int kChannels = kFrameSize;

struct LatentSeq {
  Mat<double> data;  // frames x channels
  int frame_rate = synth::kSampleRate / kFrameSize;

  Index frames() const { return data.rows(); }
  Index channels() const { return data.cols(); }
};

/// The shipped rotation (rows are orthonormal).
const Mat<double>& rotation();

LatentSeq encode(const synth::Waveform& w);
synth::Waveform decode(const LatentSeq& z);

/// Frame f covers samples [16 f, 16 f + 16).
inline Index frame_of_sample(Index sample) { return sample / kFrameSize; }

/// 16-byte header ("AXLT", frames, channels, frame_rate as u32 LE) + row-major float32 LE payload.
std::vector<std::uint8_t> latent_bytes(const LatentSeq& z);
LatentSeq latent_from_bytes(const std::vector<std::uint8_t>& bytes);
void write_latent(const std::filesystem::path& path, const LatentSeq& z);
LatentSeq read_latent(const std::filesystem::path& path);

}  // namespace audiox::codec
