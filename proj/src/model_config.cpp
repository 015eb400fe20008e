#include "audiox/model_config.hpp"

#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace audiox {

std::string_view to_string(MafMode m) {
  switch (m) {
    case MafMode::full: return "full";
    case MafMode::no_gate: return "no_gate";
    case MafMode::no_query: return "no_query";
    case MafMode::off: return "off";
  }
  return "";
}

MafMode maf_mode_from_string(std::string_view s) {
  for (auto m : {MafMode::full, MafMode::no_gate, MafMode::no_query, MafMode::off})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown MAF mode: " + std::string(s));
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("model config: " + what);
  };
  need(dim >= 2 && dim % 2 == 0, "dim must be even and >= 2");
  need(layers >= 1, "layers must be >= 1");
  need(heads >= 1 && dim % heads == 0, "heads must divide dim");
  need(maf_heads >= 1 && dim % maf_heads == 0, "maf_heads must divide dim");
  need(encoder_heads >= 1 && dim % encoder_heads == 0, "encoder_heads must divide dim");
  need(encoder_layers >= 0, "encoder_layers must be >= 0");
  need(queries >= 1, "queries must be >= 1");
  need(ff_mult >= 1, "ff_mult must be >= 1");
  need(patch_frames >= 1 && kLatentFrames % patch_frames == 0, "patch_frames must divide 500");
  need(timesteps >= 1, "timesteps must be >= 1");
  need(beta_first > 0.0 && beta_last < 1.0 && beta_first <= beta_last, "betas must satisfy 0 < first <= last < 1");
  need(data_std > 0.0, "data_std must be positive");
}

std::string ModelConfig::shape_key() const {
  std::ostringstream s;
  s << std::setprecision(17);
  s << "dim=" << dim << ";layers=" << layers << ";heads=" << heads << ";queries=" << queries
    << ";maf_heads=" << maf_heads << ";encoder_layers=" << encoder_layers << ";encoder_heads=" << encoder_heads
    << ";ff_mult=" << ff_mult << ";patch_frames=" << patch_frames << ";timesteps=" << timesteps
    << ";beta_first=" << beta_first << ";beta_last=" << beta_last << ";data_std=" << data_std
    << ";init_seed=" << init_seed << ";maf_mode=" << to_string(maf_mode);
  return s.str();
}

}  // namespace audiox
