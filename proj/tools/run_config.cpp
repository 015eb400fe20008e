#include "run_config.hpp"

#include <cmath>
#include <sstream>

namespace audiox::cli {

const io::json& RunConfig::defaults() {
  static const io::json d = [] {
    const ModelConfig m;
    const train::TrainConfig t;
    const diffusion::SamplerConfig s;
    io::json j = io::json::object();
    j["model.dim"] = m.dim;
    j["model.layers"] = m.layers;
    j["model.heads"] = m.heads;
    j["model.queries"] = m.queries;
    j["model.maf_heads"] = m.maf_heads;
    j["model.encoder_layers"] = m.encoder_layers;
    j["model.encoder_heads"] = m.encoder_heads;
    j["model.ff_mult"] = m.ff_mult;
    j["model.patch_frames"] = m.patch_frames;
    j["model.timesteps"] = m.timesteps;
    j["model.beta_first"] = m.beta_first;
    j["model.beta_last"] = m.beta_last;
    j["model.data_std"] = m.data_std;
    j["model.init_seed"] = m.init_seed;
    j["model.maf_mode"] = std::string(to_string(m.maf_mode));

    j["train.lr"] = t.lr;
    j["train.warmup"] = t.warmup;
    j["train.decay_start"] = t.decay_start;
    j["train.gamma"] = t.gamma;
    j["train.weight_decay"] = t.weight_decay;
    j["train.beta1"] = t.beta1;
    j["train.beta2"] = t.beta2;
    j["train.adam_eps"] = t.adam_eps;
    j["train.ema_decay"] = t.ema_decay;
    j["train.batch"] = t.batch;
    j["train.steps"] = t.steps;
    j["train.grad_clip"] = t.grad_clip;
    j["train.seed"] = t.seed;
    j["train.dropout_bundle"] = t.dropout.bundle;
    j["train.dropout_modality"] = t.dropout.modality;
    j["train.log_every"] = 50;
    j["train.checkpoint_every"] = 1000;
    j["train.resume"] = "";

    j["sampler.steps"] = s.steps;
    j["sampler.scale"] = s.guidance_scale;
    j["sampler.seed"] = s.seed;
    j["sampler.ema"] = true;

    j["task"] = "T2A";
    j["sample.prompts"] = io::json::array();
    j["sample.audio"] = "";
    j["sample.video"] = "";
    j["sample.mask"] = "";
    j["sample.prefix"] = 5.0;

    j["data.dir"] = "";
    j["data.clips"] = 2000;
    j["data.seed"] = 5;
    j["data.categories"] = "dog bark,crowd cheering,yip,female speech";

    j["bench.n_per_type"] = 5;
    j["bench.seed"] = 0;

    j["ablate.steps"] = 1500;
    j["ablate.heldout"] = 64;
    j["ablate.seed"] = 77;

    j["eval.ref"] = "";
    j["eval.gen"] = "";

    j["checkpoint"] = "";
    j["out"] = "out";
    return j;
  }();
  return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

namespace {

bool compatible(const io::json& def, const io::json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_integer()) return v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()));
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) {
    if (!v.is_array()) return false;
    for (const auto& e : v)
      if (!e.is_string()) return false;
    return true;
  }
  return false;
}

}  // namespace

void RunConfig::merge(const io::json& flat, const std::string& origin) {
  if (!flat.is_object()) throw UsageError(origin + ": config must be a flat JSON object");
  for (const auto& [key, v] : flat.items()) {
    if (!defaults().contains(key)) throw UsageError(origin + ": unknown config key '" + key + "'");
    const auto& def = defaults()[key];
    if (!compatible(def, v)) throw UsageError(origin + ": wrong type for '" + key + "'");
    values_[key] = def.is_number_integer() && v.is_number_float() ? io::json(static_cast<std::int64_t>(v.get<double>())) : v;
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("config file not found: " + path.string());
  io::json j;
  try {
    j = io::json::parse(io::read_text(path));
  } catch (const io::json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  merge(j, path.string());
}

void RunConfig::set(const std::string& key, const std::string& text) {
  if (!defaults().contains(key)) throw UsageError("unknown config key '" + key + "'");
  const auto& def = defaults()[key];
  io::json v;
  if (def.is_string()) {
    v = text;
  } else if (def.is_array()) {
    if (!text.empty() && text.front() == '[') {
      try {
        v = io::json::parse(text);
      } catch (const io::json::parse_error&) {
        throw UsageError("--" + key + ": not a JSON array");
      }
    } else {
      v = io::json::array({text});
    }
  } else if (def.is_boolean()) {
    if (text == "true" || text == "1") v = true;
    else if (text == "false" || text == "0") v = false;
    else throw UsageError("--" + key + " expects true or false");
  } else {
    try {
      v = io::json::parse(text);
    } catch (const io::json::parse_error&) {
      throw UsageError("--" + key + " expects a number, got '" + text + "'");
    }
  }
  merge(io::json{{key, v}}, "--" + key);
}

double RunConfig::real(const std::string& key) const { return values_.at(key).get<double>(); }
std::int64_t RunConfig::integer(const std::string& key) const { return values_.at(key).get<std::int64_t>(); }
std::string RunConfig::text(const std::string& key) const { return values_.at(key).get<std::string>(); }

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.dim = integer("model.dim");
  m.layers = static_cast<int>(integer("model.layers"));
  m.heads = static_cast<int>(integer("model.heads"));
  m.queries = static_cast<int>(integer("model.queries"));
  m.maf_heads = static_cast<int>(integer("model.maf_heads"));
  m.encoder_layers = static_cast<int>(integer("model.encoder_layers"));
  m.encoder_heads = static_cast<int>(integer("model.encoder_heads"));
  m.ff_mult = integer("model.ff_mult");
  m.patch_frames = integer("model.patch_frames");
  m.timesteps = static_cast<int>(integer("model.timesteps"));
  m.beta_first = real("model.beta_first");
  m.beta_last = real("model.beta_last");
  m.data_std = real("model.data_std");
  m.init_seed = static_cast<std::uint64_t>(integer("model.init_seed"));
  try {
    m.maf_mode = maf_mode_from_string(text("model.maf_mode"));
  } catch (const std::exception& e) {
    throw UsageError(std::string("model.maf_mode: ") + e.what());
  }
  return m;
}

train::TrainConfig RunConfig::trainer() const {
  train::TrainConfig t;
  t.lr = real("train.lr");
  t.warmup = integer("train.warmup");
  t.decay_start = integer("train.decay_start");
  t.gamma = real("train.gamma");
  t.weight_decay = real("train.weight_decay");
  t.beta1 = real("train.beta1");
  t.beta2 = real("train.beta2");
  t.adam_eps = real("train.adam_eps");
  t.ema_decay = real("train.ema_decay");
  t.batch = static_cast<int>(integer("train.batch"));
  t.steps = integer("train.steps");
  t.grad_clip = real("train.grad_clip");
  t.seed = static_cast<std::uint64_t>(integer("train.seed"));
  t.dropout.bundle = real("train.dropout_bundle");
  t.dropout.modality = real("train.dropout_modality");
  return t;
}

diffusion::SamplerConfig RunConfig::sampler() const {
  diffusion::SamplerConfig s;
  s.steps = static_cast<int>(integer("sampler.steps"));
  s.guidance_scale = real("sampler.scale");
  s.seed = static_cast<std::uint64_t>(integer("sampler.seed"));
  return s;
}

void RunConfig::validate() const {
  try {
    const auto m = model();
    m.validate();
    trainer().validate();
    sampler().validate(m.timesteps);
    cond::task_from_string(text("task"));
    for (const auto& c : split_list(text("data.categories"))) synth::category(c);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
  for (const char* k : {"train.log_every", "train.checkpoint_every", "data.clips", "bench.n_per_type", "ablate.steps",
                        "ablate.heldout"})
    if (integer(k) < 1) throw UsageError(std::string("invalid configuration: ") + k + " must be positive");
  if (integer("bench.n_per_type") % 5 != 0) throw UsageError("invalid configuration: bench.n_per_type must be a multiple of 5");
  for (const char* k : {"model.init_seed", "train.seed", "sampler.seed", "data.seed", "bench.seed", "ablate.seed"})
    if (integer(k) < 0) throw UsageError(std::string("invalid configuration: ") + k + " must be nonnegative");
}

void RunConfig::write_sidecar(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  io::write_text(dir / "config.json", values_.dump(2) + "\n");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(' '), b = item.find_last_not_of(' ');
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

}  // namespace audiox::cli
