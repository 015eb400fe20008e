#pragma once

#include "audiox/diffusion.hpp"

#include <random>
#include <string>
#include <vector>

namespace fixture {

using namespace audiox;

inline ModelConfig tiny(int layers = 2) {
  ModelConfig c;
  c.dim = 8;
  c.layers = layers;
  c.heads = 2;
  c.queries = 2;
  c.encoder_layers = 1;
  c.encoder_heads = 2;
  c.ff_mult = 2;
  return c;
}

// one TV2A item with random video and one INPAINT item over random audio
inline std::vector<cond::PreparedConditions> rich_batch(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  cond::ConditionBundle a = cond::ConditionBundle::from_text("a dog bark then a siren", cond::Task::TV2A);
  a.video = randn<double>(kVideoFrames, kVideoPixels, rng);
  cond::ConditionBundle b;
  b.task = cond::Task::INPAINT;
  b.audio = synth::Waveform{};
  for (Eigen::Index i = 0; i < b.audio->size(); ++i) b.audio->samples(i) = 0.5 * u(rng);
  b.mask = {{2.0, 4.0}};
  return {cond::prepare(a), cond::prepare(b)};
}

template <typename Scalar>
void randomize(AudioX<Scalar>& m, const std::string& prefix, Rng& rng, double scale) {
  for (std::size_t i = 0; i < m.params.size(); ++i)
    if (m.params.name(static_cast<int>(i)).rfind(prefix, 0) == 0) {
      auto& v = m.params[static_cast<int>(i)];
      v = randn<Scalar>(v.rows(), v.cols(), rng, scale);
    }
}

inline synth::Waveform random_wave(Rng& rng, double amp = 0.5) {
  std::uniform_real_distribution<double> u(-amp, amp);
  synth::Waveform w;
  for (Eigen::Index i = 0; i < w.size(); ++i) w.samples(i) = u(rng);
  return w;
}

}  // namespace fixture
