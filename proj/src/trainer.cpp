#include "audiox/trainer.hpp"

#include "audiox/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <cstring>

namespace audiox::train {

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
  };
  need(lr > 0.0 && std::isfinite(lr), "lr must be positive");
  need(warmup >= 1, "warmup must be >= 1");
  need(decay_start >= 0, "decay_start must be >= 0");
  need(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  need(weight_decay >= 0.0, "weight_decay must be >= 0");
  need(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "adam betas must lie in [0, 1)");
  need(adam_eps > 0.0, "adam_eps must be positive");
  need(ema_decay >= 0.0 && ema_decay < 1.0, "ema_decay must lie in [0, 1)");
  need(batch >= 1, "batch must be >= 1");
  need(steps >= 0, "steps must be >= 0");
  need(grad_clip >= 0.0, "grad_clip must be >= 0");
  need(dropout.bundle >= 0.0 && dropout.bundle <= 1.0 && dropout.modality >= 0.0 && dropout.modality <= 1.0,
       "dropout probabilities must lie in [0, 1]");
}

double lr_at(std::int64_t step, double base, std::int64_t warmup, std::int64_t decay_start, double gamma) {
  if (warmup < 1) throw std::invalid_argument("lr_at: warmup must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("lr_at: gamma must lie in (0, 1)");
  if (step < 0) throw std::invalid_argument("lr_at: negative step");
  const double ramp = std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup));
  const auto decay_steps = std::max<std::int64_t>(0, step - decay_start);
  return base * ramp * std::pow(gamma, static_cast<double>(decay_steps));
}

TrainState init_state(const ad::Parameters<float>& params) {
  TrainState s;
  s.ema = params.values();
  for (const auto& p : params.values()) {
    s.m.push_back(Mat<float>::Zero(p.rows(), p.cols()));
    s.v.push_back(Mat<float>::Zero(p.rows(), p.cols()));
  }
  return s;
}

void adamw_update(std::vector<Mat<float>>& theta, const ad::Gradients<float>& grads, std::vector<Mat<float>>& m,
                  std::vector<Mat<float>>& v, std::int64_t k, double lr, const TrainConfig& cfg) {
  if (k < 1) throw std::invalid_argument("adamw_update: step must be >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(k));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(k));
  const auto b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
  const auto decay = static_cast<float>(1.0 - lr * cfg.weight_decay);
  const auto step = static_cast<float>(lr / c1);
  const auto root_c2 = static_cast<float>(std::sqrt(c2));
  const auto eps = static_cast<float>(cfg.adam_eps);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = b1 * m[i] + (1.0f - b1) * grads[i];
    v[i] = b2 * v[i] + (1.0f - b2) * grads[i].cwiseAbs2();
    theta[i] = decay * theta[i] - step * m[i].cwiseQuotient(((v[i].cwiseSqrt() / root_c2).array() + eps).matrix());
  }
}

void ema_update(std::vector<Mat<float>>& ema, const std::vector<Mat<float>>& theta, double decay) {
  const auto d = static_cast<float>(decay);
  for (std::size_t i = 0; i < ema.size(); ++i) ema[i] = d * ema[i] + (1.0f - d) * theta[i];
}

double clip_global_norm(ad::Gradients<float>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto s = static_cast<float>(max_norm / norm);
    for (auto& g : grads) g *= s;
  }
  return norm;
}

Example make_example(const synth::Waveform& wave, const cond::ConditionBundle& bundle) {
  return {codec::encode(wave).data.cast<float>(), cond::prepare(bundle)};
}

std::vector<std::size_t> batch_indices(std::size_t dataset_size, std::int64_t step, const TrainConfig& cfg) {
  if (dataset_size == 0) throw std::invalid_argument("training set is empty");
  Rng rng = keyed_rng(cfg.seed, {static_cast<std::uint64_t>(step), 1});
  std::uniform_int_distribution<std::size_t> pick(0, dataset_size - 1);
  std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.batch));
  for (auto& i : idx) i = pick(rng);
  return idx;
}

double train_step(AudioX<float>& model, TrainState& state, const Dataset& data, const diffusion::NoiseSchedule& sched,
                  const TrainConfig& cfg) {
  const auto idx = batch_indices(data.size(), state.step, cfg);
  Mat<float> z0(static_cast<Index>(idx.size()) * kLatentFrames, kLatentChannels);
  std::vector<cond::PreparedConditions> conds;
  for (std::size_t b = 0; b < idx.size(); ++b) {
    z0.middleRows(static_cast<Index>(b) * kLatentFrames, kLatentFrames) = data[idx[b]].latent;
    conds.push_back(data[idx[b]].conditions);
  }
  Rng rng = keyed_rng(cfg.seed, {static_cast<std::uint64_t>(state.step), 2});
  const auto draw = diffusion::draw_loss_inputs<float>(conds, sched, rng, cfg.dropout);
  auto r = diffusion::eps_loss(model, z0, draw, sched, true);
  if (!std::isfinite(r.loss))
    throw NonFiniteLoss("non-finite loss " + std::to_string(r.loss) + " at step " + std::to_string(state.step));
  const double norm = clip_global_norm(r.grads, cfg.grad_clip);
  if (!std::isfinite(norm))
    throw NonFiniteLoss("non-finite gradient norm at step " + std::to_string(state.step));

  const std::int64_t k = state.step + 1;
  adamw_update(model.params.values(), r.grads, state.m, state.v, k,
               lr_at(k, cfg.lr, cfg.warmup, cfg.decay_start, cfg.gamma), cfg);
  ema_update(state.ema, model.params.values(), cfg.ema_decay);
  state.step = k;
  return r.loss;
}

double heldout_loss(const AudioX<float>& model, const Dataset& data, const diffusion::NoiseSchedule& sched,
                    std::uint64_t seed, int draws, int batch) {
  if (data.empty()) throw std::invalid_argument("held-out set is empty");
  if (draws < 1 || batch < 1) throw std::invalid_argument("heldout_loss: draws and batch must be positive");
  const int T = static_cast<int>(sched.size());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t first = 0; first < data.size(); first += static_cast<std::size_t>(batch)) {
    const std::size_t n = std::min(data.size() - first, static_cast<std::size_t>(batch));
    for (int k = 0; k < draws; ++k) {
      Mat<float> z0(static_cast<Index>(n) * kLatentFrames, kLatentChannels);
      diffusion::LossDraw<float> d;
      d.eps.resize(z0.rows(), z0.cols());
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t i = first + b;
        Rng rng = keyed_rng(seed, {i, static_cast<std::uint64_t>(k)});
        // stratified over the schedule, jittered per example
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        d.steps.push_back(std::min(T - 1, static_cast<int>((k + u) * T / draws)));
        d.eps.middleRows(static_cast<Index>(b) * kLatentFrames, kLatentFrames) = randn<float>(kLatentFrames, kLatentChannels, rng);
        z0.middleRows(static_cast<Index>(b) * kLatentFrames, kLatentFrames) = data[i].latent;
        d.conditions.push_back(data[i].conditions);
      }
      total += diffusion::eps_loss(model, z0, d, sched, false).loss * static_cast<double>(n);
      count += n;
    }
  }
  return total / static_cast<double>(count);
}

Dataset toy_dataset(const std::vector<std::string>& categories, int n, std::uint64_t seed) {
  if (categories.empty()) throw std::invalid_argument("toy_dataset: no categories");
  Dataset out;
  out.reserve(static_cast<std::size_t>(n));
  const auto k = categories.size();
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    Rng rng = keyed_rng(seed, {idx});
    synth::ClipRecipe r;
    r.min_event_s = 1.0;
    r.max_event_s = 3.0;
    r.events.push_back({categories[idx % k], 1 + static_cast<int>(rng() % 2), {}});
    const auto clip = synth::gen_clip(r, rng());
    const auto views = synth::augment_captions(clip.annotation);
    out.push_back(make_example(clip.wave, cond::ConditionBundle::from_text(views[(idx / k) % views.size()])));
  }
  return out;
}

AudioX<float> with_ema(const AudioX<float>& model, const TrainState& state) {
  AudioX<float> out = model;
  out.params.values() = state.ema;
  return out;
}

// ------------------------------------------------------------ checkpoint

namespace {

constexpr char kMagic[4] = {'A', 'X', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFloat32 = 0;

void put_tensor(std::vector<std::uint8_t>& out, const std::string& name, const Mat<float>& t) {
  io::put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  io::put_u32(out, kFloat32);
  io::put_u32(out, 2);
  io::put_u32(out, static_cast<std::uint32_t>(t.rows()));
  io::put_u32(out, static_cast<std::uint32_t>(t.cols()));
  for (Index i = 0; i < t.size(); ++i) io::put_f32(out, t.data()[i]);
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t size) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(size)));
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;
  std::size_t end;

  const std::uint8_t* take(std::size_t n) {
    if (end - pos < n) throw CheckpointError("checkpoint truncated");
    const std::uint8_t* p = bytes.data() + pos;
    pos += n;
    return p;
  }
  std::uint32_t u32() { return io::get_u32(take(4)); }
  std::uint64_t u64() { return io::get_u64(take(8)); }
};

// Names of the four tensor groups, in file order.
const char* const kGroups[4] = {"param/", "ema/", "adam.m/", "adam.v/"};

}  // namespace

std::uint64_t config_fingerprint(const ModelConfig& cfg, const diffusion::NoiseSchedule& sched) {
  const std::string key = cfg.shape_key() + ";schedule=" + io::hex64(sched.fingerprint());
  return io::fnv1a(key.data(), key.size());
}

std::vector<std::uint8_t> checkpoint_bytes(const AudioX<float>& model, const TrainState& state,
                                           std::uint64_t fingerprint) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  io::put_u32(out, kVersion);
  io::put_u64(out, fingerprint);
  io::put_u64(out, static_cast<std::uint64_t>(state.step));
  const auto n = model.params.size();
  io::put_u32(out, static_cast<std::uint32_t>(4 * n));
  const std::vector<Mat<float>>* groups[4] = {&model.params.values(), &state.ema, &state.m, &state.v};
  for (int g = 0; g < 4; ++g)
    for (std::size_t i = 0; i < n; ++i) put_tensor(out, kGroups[g] + model.params.name(static_cast<int>(i)), (*groups[g])[i]);
  io::put_u32(out, crc_of(out.data(), out.size()));
  return out;
}

void restore_checkpoint(const std::vector<std::uint8_t>& bytes, AudioX<float>& model, TrainState& state,
                        std::uint64_t fingerprint) {
  if (bytes.size() < 32) throw CheckpointError("checkpoint truncated");
  const std::size_t body = bytes.size() - 4;
  if (crc_of(bytes.data(), body) != io::get_u32(bytes.data() + body))
    throw CheckpointError("checkpoint checksum mismatch (file corrupted)");
  Reader r{bytes, 0, body};
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw CheckpointError("not a checkpoint file");
  if (const auto v = r.u32(); v != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
  if (const auto f = r.u64(); f != fingerprint)
    throw CheckpointError("checkpoint fingerprint " + io::hex64(f) + " does not match configuration " +
                          io::hex64(fingerprint));
  const auto step = static_cast<std::int64_t>(r.u64());
  const auto n = model.params.size();
  if (r.u32() != 4 * n) throw CheckpointError("checkpoint tensor count does not match model");

  TrainState s = init_state(model.params);
  std::vector<Mat<float>> params = model.params.values();
  std::vector<Mat<float>>* groups[4] = {&params, &s.ema, &s.m, &s.v};
  for (int g = 0; g < 4; ++g)
    for (std::size_t i = 0; i < n; ++i) {
      const std::string expect = kGroups[g] + model.params.name(static_cast<int>(i));
      const auto len = r.u32();
      const auto* name = r.take(len);
      if (std::string(reinterpret_cast<const char*>(name), len) != expect)
        throw CheckpointError("checkpoint tensor order mismatch at " + expect);
      if (r.u32() != kFloat32 || r.u32() != 2) throw CheckpointError("unsupported tensor record " + expect);
      auto& t = (*groups[g])[i];
      const auto rows = r.u32(), cols = r.u32();
      if (rows != t.rows() || cols != t.cols()) throw CheckpointError("tensor shape mismatch for " + expect);
      const auto* p = r.take(4 * static_cast<std::size_t>(t.size()));
      for (Index k = 0; k < t.size(); ++k) t.data()[k] = io::get_f32(p + 4 * k);
    }
  if (r.pos != body) throw CheckpointError("trailing bytes in checkpoint");
  model.params.values() = std::move(params);
  s.step = step;
  state = std::move(s);
}

void save_checkpoint(const std::filesystem::path& path, const AudioX<float>& model, const TrainState& state,
                     std::uint64_t fingerprint) {
  io::write_bytes(path, checkpoint_bytes(model, state, fingerprint));
}

void load_checkpoint(const std::filesystem::path& path, AudioX<float>& model, TrainState& state,
                     std::uint64_t fingerprint) {
  restore_checkpoint(io::read_bytes(path), model, state, fingerprint);
}

}  // namespace audiox::train
