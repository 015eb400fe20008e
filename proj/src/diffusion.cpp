#include "audiox/diffusion.hpp"

#include "audiox/io.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace audiox::diffusion {

std::vector<int> timestep_sequence(int timesteps, int steps) {
  if (steps < 1 || steps > timesteps) throw std::invalid_argument("sampling steps must lie in [1, T]");
  std::vector<int> seq(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i)
    seq[static_cast<std::size_t>(i)] =
        static_cast<int>(static_cast<std::int64_t>(i) * timesteps / steps);
  return seq;
}

NoiseSchedule respace(const NoiseSchedule& s, const std::vector<int>& seq) {
  std::vector<double> betas;
  double prev = 1.0;
  for (int t : seq) {
    if (t < 0 || t >= s.size()) throw std::out_of_range("respace: timestep outside schedule");
    const double ab = s.alpha_bars[static_cast<std::size_t>(t)];
    betas.push_back(1.0 - ab / prev);
    prev = ab;
  }
  return schedule_from_betas(std::move(betas));
}

namespace {

void check_t(int t, const NoiseSchedule& s) {
  if (t < 0 || t >= s.size())
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [0, " + std::to_string(s.size()) + ")");
}

template <typename Scalar>
void check_same(const Mat<Scalar>& a, const Mat<Scalar>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

template <typename Scalar>
Mat<Scalar> q_sample(const Mat<Scalar>& z0, int t, const Mat<Scalar>& eps, const NoiseSchedule& s) {
  check_t(t, s);
  check_same(z0, eps, "q_sample");
  const double ab = s.alpha_bars[static_cast<std::size_t>(t)];
  return static_cast<Scalar>(std::sqrt(ab)) * z0 + static_cast<Scalar>(std::sqrt(1.0 - ab)) * eps;
}

template <typename Scalar>
Mat<Scalar> q_step(const Mat<Scalar>& z_prev, int t, const Mat<Scalar>& noise, const NoiseSchedule& s) {
  check_t(t, s);
  check_same(z_prev, noise, "q_step");
  const double b = s.betas[static_cast<std::size_t>(t)];
  return static_cast<Scalar>(std::sqrt(1.0 - b)) * z_prev + static_cast<Scalar>(std::sqrt(b)) * noise;
}

template <typename Scalar>
Mat<Scalar> p_step(const Mat<Scalar>& z_t, int t, const Mat<Scalar>& eps_hat, const NoiseSchedule& s,
                   const Mat<Scalar>& noise) {
  check_t(t, s);
  check_same(z_t, eps_hat, "p_step");
  const auto i = static_cast<std::size_t>(t);
  const double beta = s.betas[i];
  const auto coef = static_cast<Scalar>(beta / std::sqrt(1.0 - s.alpha_bars[i]));
  const auto inv_sqrt_alpha = static_cast<Scalar>(1.0 / std::sqrt(s.alphas[i]));
  Mat<Scalar> mean = (z_t - coef * eps_hat) * inv_sqrt_alpha;
  if (t == 0) return mean;
  check_same(z_t, noise, "p_step");
  return mean + static_cast<Scalar>(std::sqrt(beta)) * noise;
}

template <typename Scalar>
Mat<Scalar> cfg_eps(const Mat<Scalar>& eps_cond, const Mat<Scalar>& eps_uncond, double scale) {
  check_same(eps_cond, eps_uncond, "cfg_eps");
  const auto s = static_cast<Scalar>(scale);
  return eps_uncond.binaryExpr(eps_cond, [s](Scalar u, Scalar c) { return std::lerp(u, c, s); });
}

cond::PreparedConditions drop_conditions(const cond::PreparedConditions& c, const DropoutPolicy& policy, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // four draws every call
  const double all = u(rng), text = u(rng), video = u(rng), audio = u(rng);
  if (all < policy.bundle) return cond::null_conditions();
  cond::PreparedConditions out = c;
  if (text < policy.modality) out.token_ids.clear();
  if (video < policy.modality) out.video.reset();
  if (audio < policy.modality) out.audio.reset();
  return out;
}

template <typename Scalar>
LossDraw<Scalar> draw_loss_inputs(std::span<const cond::PreparedConditions> conditions, const NoiseSchedule& s,
                                  Rng& rng, const DropoutPolicy& policy) {
  if (conditions.empty()) throw std::invalid_argument("eps_loss: empty batch");
  LossDraw<Scalar> d;
  std::uniform_int_distribution<int> pick(0, s.size() - 1);
  for (std::size_t i = 0; i < conditions.size(); ++i) d.steps.push_back(pick(rng));
  d.eps = randn<Scalar>(static_cast<Index>(conditions.size()) * kLatentFrames, kLatentChannels, rng);
  for (const auto& c : conditions) d.conditions.push_back(drop_conditions(c, policy, rng));
  return d;
}

template <typename Scalar>
LossResult<Scalar> eps_loss(const AudioX<Scalar>& model, const Mat<Scalar>& z0, const LossDraw<Scalar>& draw,
                            const NoiseSchedule& s, bool with_grads) {
  const auto batch = static_cast<Index>(draw.steps.size());
  if (batch == 0) throw std::invalid_argument("eps_loss: empty batch");
  if (z0.rows() != batch * kLatentFrames || z0.cols() != kLatentChannels || draw.eps.rows() != z0.rows() ||
      static_cast<Index>(draw.conditions.size()) != batch)
    throw std::invalid_argument("eps_loss: batch shape mismatch");
  Mat<Scalar> z_t(z0.rows(), z0.cols());
  for (Index b = 0; b < batch; ++b) {
    const auto rows = Eigen::seqN(b * kLatentFrames, kLatentFrames);
    z_t(rows, Eigen::all) = q_sample<Scalar>(z0(rows, Eigen::all), draw.steps[static_cast<std::size_t>(b)],
                                             draw.eps(rows, Eigen::all), s);
  }
  ad::Tape<Scalar> tape(&model.params, with_grads);
  auto context = condition<Scalar>(tape, model, draw.conditions);
  auto eps_hat = denoise<Scalar>(tape, model, tape.constant(std::move(z_t)), draw.steps, context);
  auto loss = ad::mse(eps_hat, draw.eps);
  LossResult<Scalar> r;
  r.loss = static_cast<double>(loss.value()(0, 0));
  if (with_grads) {
    tape.backward(loss);
    r.grads = tape.param_grads();
  }
  return r;
}

template <typename Scalar>
double noise_mse(const Mat<Scalar>& eps_hat, const Mat<Scalar>& eps) {
  check_same(eps_hat, eps, "noise_mse");
  if (eps.size() == 0) throw std::invalid_argument("noise_mse: empty input");
  return (eps_hat - eps).template cast<double>().squaredNorm() / static_cast<double>(eps.size());
}

void SamplerConfig::validate(int timesteps) const {
  if (steps < 1 || steps > timesteps) throw std::invalid_argument("sampler steps must lie in [1, T]");
  if (!std::isfinite(guidance_scale)) throw std::invalid_argument("guidance scale must be finite");
}

std::vector<bool> known_frames(const std::vector<synth::Interval>& mask, int sample_rate) {
  synth::Waveform ones;
  ones.sample_rate = sample_rate;
  ones.samples.setOnes();
  const auto masked = cond::apply_mask(ones, mask);
  std::vector<bool> known(static_cast<std::size_t>(kLatentFrames), true);
  for (Index i = 0; i < masked.size(); ++i)
    if (masked.samples(i) == 0.0) known[static_cast<std::size_t>(codec::frame_of_sample(i))] = false;
  return known;
}

template <typename Scalar>
std::vector<Sample> sample(const AudioX<Scalar>& model, std::span<const cond::ConditionBundle> bundles,
                           const SamplerConfig& cfg, const NoiseSchedule& s) {
  if (bundles.empty()) throw std::invalid_argument("sample: no bundles");
  cfg.validate(s.size());
  if (s.fingerprint() != model_schedule(model.config).fingerprint())
    throw std::invalid_argument("sample: schedule differs from the one the model was built for");
  const auto n = static_cast<Index>(bundles.size());
  const auto seq = timestep_sequence(s.size(), cfg.steps);
  const auto sched = respace(s, seq);

  std::vector<cond::PreparedConditions> conds;
  std::vector<Index> guided;  // items that need a separate unconditional pass
  for (Index i = 0; i < n; ++i) {
    conds.push_back(cond::prepare(bundles[static_cast<std::size_t>(i)]));
    const auto& c = conds.back();
    if (!c.token_ids.empty() || c.video || c.audio) guided.push_back(i);
  }

  // Known regions: latent rows fixed by replacement, plus their clean values.
  struct Known {
    std::vector<Index> frames;
    Mat<double> latent;
  };
  std::vector<std::optional<Known>> known(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto& b = bundles[static_cast<std::size_t>(i)];
    std::vector<synth::Interval> hidden;
    if (b.task == cond::Task::INPAINT)
      hidden = b.mask;
    else if (b.task == cond::Task::COMPLETE)
      hidden = {{b.prefix_s, synth::kClipSeconds}};
    else
      continue;
    Known k;
    k.latent = codec::encode(*conds[static_cast<std::size_t>(i)].audio).data;
    const auto flags = known_frames(hidden);
    for (Index f = 0; f < kLatentFrames; ++f)
      if (flags[static_cast<std::size_t>(f)]) k.frames.push_back(f);
    known[static_cast<std::size_t>(i)] = std::move(k);
  }

  // Conditioning is fixed across steps, so H_c is computed once.
  Mat<Scalar> context;
  {
    ad::Tape<Scalar> tape(&model.params, false);
    const cond::PreparedConditions null = cond::null_conditions();
    auto hc = condition<Scalar>(tape, model, conds).value();
    auto hn = condition<Scalar>(tape, model, std::span(&null, 1)).value();
    context.resize((n + static_cast<Index>(guided.size())) * kConditionTokens, hc.cols());
    context.topRows(hc.rows()) = hc;
    for (std::size_t g = 0; g < guided.size(); ++g)
      context.middleRows((n + static_cast<Index>(g)) * kConditionTokens, kConditionTokens) = hn;
  }

  std::vector<Rng> rngs;
  for (Index i = 0; i < n; ++i) rngs.push_back(keyed_rng(cfg.seed, {static_cast<std::uint64_t>(i)}));
  auto item = [](Mat<double>& z, Index i) { return z.middleRows(i * kLatentFrames, kLatentFrames); };

  Mat<double> z(n * kLatentFrames, kLatentChannels);
  for (Index i = 0; i < n; ++i) item(z, i) = randn<double>(kLatentFrames, kLatentChannels, rngs[i]);

  const Index rows = n + static_cast<Index>(guided.size());
  for (int k = cfg.steps - 1; k >= 0; --k) {
    Mat<Scalar> input(rows * kLatentFrames, kLatentChannels);
    input.topRows(z.rows()) = z.cast<Scalar>();
    for (std::size_t g = 0; g < guided.size(); ++g)
      input.middleRows((n + static_cast<Index>(g)) * kLatentFrames, kLatentFrames) =
          item(z, guided[g]).template cast<Scalar>();
    const std::vector<int> steps(static_cast<std::size_t>(rows), seq[static_cast<std::size_t>(k)]);

    ad::Tape<Scalar> tape(&model.params, false);
    auto ctx = tape.constant(context);
    Mat<double> eps = denoise<Scalar>(tape, model, tape.constant(std::move(input)), steps, ctx).value().template cast<double>();
    Mat<double> guided_eps = eps.topRows(z.rows());
    for (std::size_t g = 0; g < guided.size(); ++g) {
      const Index i = guided[g];
      const Mat<double> c = item(guided_eps, i);
      const Mat<double> u = eps.middleRows((n + static_cast<Index>(g)) * kLatentFrames, kLatentFrames);
      item(guided_eps, i) = cfg_eps(c, u, cfg.guidance_scale);
    }

    for (Index i = 0; i < n; ++i) {
      Mat<double> noise = k > 0 ? randn<double>(kLatentFrames, kLatentChannels, rngs[i])
                                : Mat<double>::Zero(kLatentFrames, kLatentChannels);
      const Mat<double> zi = item(z, i);
      item(z, i) = p_step<double>(zi, k, item(guided_eps, i), sched, noise);
      if (const auto& kn = known[static_cast<std::size_t>(i)]) {
        Mat<double> target = kn->latent;
        if (k > 0)
          target = q_sample<double>(kn->latent, k - 1, randn<double>(kLatentFrames, kLatentChannels, rngs[i]), sched);
        for (Index f : kn->frames) z.row(i * kLatentFrames + f) = target.row(f);
      }
    }
  }

  std::vector<Sample> out;
  for (Index i = 0; i < n; ++i) {
    Sample smp;
    smp.latent.data = item(z, i);
    smp.wave = codec::decode(smp.latent);
    smp.wave.samples = smp.wave.samples.cwiseMax(-1.0).cwiseMin(1.0);
    out.push_back(std::move(smp));
  }
  return out;
}

#define AUDIOX_INSTANTIATE(S)                                                                                     \
  template Mat<S> q_sample<S>(const Mat<S>&, int, const Mat<S>&, const NoiseSchedule&);                          \
  template Mat<S> q_step<S>(const Mat<S>&, int, const Mat<S>&, const NoiseSchedule&);                            \
  template Mat<S> p_step<S>(const Mat<S>&, int, const Mat<S>&, const NoiseSchedule&, const Mat<S>&);             \
  template Mat<S> cfg_eps<S>(const Mat<S>&, const Mat<S>&, double);                                              \
  template LossDraw<S> draw_loss_inputs<S>(std::span<const cond::PreparedConditions>, const NoiseSchedule&, Rng&, \
                                           const DropoutPolicy&);                                                \
  template LossResult<S> eps_loss<S>(const AudioX<S>&, const Mat<S>&, const LossDraw<S>&, const NoiseSchedule&,  \
                                     bool);                                                                      \
  template double noise_mse<S>(const Mat<S>&, const Mat<S>&);                                                    \
  template std::vector<Sample> sample<S>(const AudioX<S>&, std::span<const cond::ConditionBundle>,               \
                                         const SamplerConfig&, const NoiseSchedule&);

AUDIOX_INSTANTIATE(float)
AUDIOX_INSTANTIATE(double)

}  // namespace audiox::diffusion
