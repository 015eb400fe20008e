#include "audiox/diffusion.hpp"

#include <doctest.h>

#include <cmath>

using namespace audiox;
using namespace audiox::diffusion;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.dim = 8;
  c.layers = 1;
  c.heads = 2;
  c.queries = 2;
  c.encoder_layers = 1;
  c.encoder_heads = 2;
  c.ff_mult = 2;
  return c;
}

synth::Waveform random_wave(Rng& rng, double amp = 0.8) {
  std::uniform_real_distribution<double> u(-amp, amp);
  synth::Waveform w;
  for (Eigen::Index i = 0; i < w.size(); ++i) w.samples(i) = u(rng);
  return w;
}

}  // namespace

TEST_CASE("schedule tables") {
  const auto one = schedule_from_betas({0.5});
  CHECK(one.alpha_bars == std::vector<double>{0.5});
  const auto two = schedule_from_betas({0.1, 0.2});
  CHECK(two.alpha_bars[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(two.alpha_bars[1] == doctest::Approx(0.72).epsilon(1e-15));

  const auto s = make_schedule(1000, 1e-4, 0.02);
  CHECK(s.size() == 1000);
  CHECK(s.betas.front() == 1e-4);
  CHECK(s.betas.back() == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(s.betas[500] - s.betas[499] == doctest::Approx((0.02 - 1e-4) / 999).epsilon(1e-9));
  double prod = 1.0;
  for (int t = 0; t < 1000; ++t) prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * t / 999.0);
  CHECK(s.alpha_bars[999] == doctest::Approx(prod).epsilon(1e-12));
  for (int t = 1; t < 1000; ++t) {
    CHECK(s.alpha_bars[t] == s.alpha_bars[t - 1] * s.alphas[t]);
    CHECK(s.alpha_bars[t] < s.alpha_bars[t - 1]);
    CHECK(s.alphas[t] == 1.0 - s.betas[t]);
  }
  CHECK(make_schedule(1, 0.5, 0.5).alpha_bars == std::vector<double>{0.5});
  CHECK_THROWS_AS(make_schedule(0), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(10, 0.03, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(10, 1e-4, 1.0), std::invalid_argument);
  CHECK(make_schedule(1000).fingerprint() == s.fingerprint());
  CHECK(make_schedule(1000, 1e-4, 0.03).fingerprint() != s.fingerprint());
}

TEST_CASE("q_sample closed form") {
  const auto s = schedule_from_betas({0.1, 0.2});
  Mat<double> one = Mat<double>::Ones(1, 1);
  CHECK(q_sample<double>(one, 1, one, s)(0, 0) == doctest::Approx(std::sqrt(0.72) + std::sqrt(0.28)).epsilon(1e-15));
  // vanishing noise keeps z0
  const auto tiny_beta = schedule_from_betas({1e-300});
  Rng rng(1);
  const Mat<double> z0 = randn<double>(4, 3, rng), eps = randn<double>(4, 3, rng);
  CHECK(q_sample<double>(z0, 0, eps, tiny_beta) == z0);
  CHECK_THROWS_AS(q_sample<double>(z0, 0, randn<double>(3, 3, rng), s), std::invalid_argument);
  CHECK_THROWS_AS(q_sample<double>(z0, 2, eps, s), std::out_of_range);
}

TEST_CASE("iterated forward process matches the marginal") {
  const auto s = make_schedule(1000);
  Rng rng(2);
  const int trials = 4000;
  const double z0 = 0.7;
  const int t = 200;
  Mat<double> z = Mat<double>::Constant(trials, 1, z0);
  for (int k = 0; k <= t; ++k) z = q_step<double>(z, k, randn<double>(trials, 1, rng), s);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().sum() / (trials - 1);
  CHECK(std::abs(mean - std::sqrt(s.alpha_bars[t]) * z0) < 0.05);
  CHECK(std::abs(var / (1.0 - s.alpha_bars[t]) - 1.0) < 0.08);
}

TEST_CASE("reverse step") {
  const auto s = schedule_from_betas({0.1});
  Mat<double> z(1, 1), e(1, 1), noise(1, 1);
  z << 1.0;
  e << 0.5;
  noise << 123.0;
  const double expect = (1.0 - (0.1 / std::sqrt(0.1)) * 0.5) / std::sqrt(0.9);
  CHECK(p_step<double>(z, 0, e, s, noise)(0, 0) == doctest::Approx(expect).epsilon(1e-15));

  Rng rng(3);
  const auto one = schedule_from_betas({0.37});
  const Mat<double> z0 = randn<double>(20, 16, rng), eps = randn<double>(20, 16, rng);
  const auto zt = q_sample<double>(z0, 0, eps, one);
  CHECK((p_step<double>(zt, 0, eps, one, Mat<double>::Zero(0, 0)) - z0).cwiseAbs().maxCoeff() <= 1e-12);

  const auto two = schedule_from_betas({0.1, 0.2});
  const Mat<double> n = randn<double>(20, 16, rng);
  const auto mean = p_step<double>(zt, 1, eps, two, Mat<double>::Zero(20, 16));
  CHECK((p_step<double>(zt, 1, eps, two, n) - mean - std::sqrt(0.2) * n).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(p_step<double>(zt, 1, eps.topRows(3), two, n), std::invalid_argument);
}

TEST_CASE("guidance combination") {
  Rng rng(4);
  const Mat<float> c = randn<float>(50, 16, rng), u = randn<float>(50, 16, rng);
  CHECK(cfg_eps<float>(c, u, 1.0) == c);
  CHECK(cfg_eps<float>(c, u, 0.0) == u);
  const Mat<float> zero = Mat<float>::Zero(50, 16);
  CHECK(cfg_eps<float>(c, zero, 7.0) == (7.0f * c).eval());
  CHECK((cfg_eps<double>(c.cast<double>(), u.cast<double>(), 2.5) - (u + 2.5f * (c - u)).cast<double>())
            .cwiseAbs()
            .maxCoeff() < 1e-5);
}

TEST_CASE("timestep subsequence and respacing") {
  const auto full = timestep_sequence(1000, 1000);
  for (int t = 0; t < 1000; ++t) CHECK(full[static_cast<std::size_t>(t)] == t);
  const auto seq = timestep_sequence(1000, 250);
  CHECK(seq.size() == 250);
  CHECK(seq.front() == 0);
  CHECK(seq[1] == 4);
  CHECK(seq.back() == 996);
  CHECK(timestep_sequence(1000, 3) == std::vector<int>{0, 333, 666});
  CHECK_THROWS(timestep_sequence(1000, 0));
  CHECK_THROWS(timestep_sequence(1000, 1001));

  const auto s = make_schedule(1000);
  const auto r = respace(s, seq);
  for (std::size_t i = 0; i < seq.size(); ++i)
    CHECK(r.alpha_bars[i] == doctest::Approx(s.alpha_bars[static_cast<std::size_t>(seq[i])]).epsilon(1e-12));
  const auto same = respace(s, full);
  for (int t = 0; t < 1000; ++t) CHECK(same.betas[t] == doctest::Approx(s.betas[t]).epsilon(1e-10));
}

TEST_CASE("condition dropout") {
  cond::ConditionBundle b = cond::ConditionBundle::from_text("a siren", cond::Task::TV2A);
  b.video = Mat<double>::Ones(kVideoFrames, kVideoPixels);
  const auto p = cond::prepare(b);
  DropoutPolicy never{0.0, 0.0}, always{1.0, 0.0}, modal{0.0, 1.0};
  Rng rng(5);
  const auto kept = drop_conditions(p, never, rng);
  CHECK(kept.token_ids == p.token_ids);
  CHECK(kept.video.has_value());
  const auto gone = drop_conditions(p, always, rng);
  CHECK(gone.token_ids.empty());
  CHECK(!gone.video);
  const auto each = drop_conditions(p, modal, rng);
  CHECK(each.token_ids.empty());
  CHECK(!each.video);

  // stream position does not depend on outcomes
  Rng a(9), c(9);
  drop_conditions(p, always, a);
  drop_conditions(p, never, c);
  CHECK(a() == c());

  // empirical rates
  Rng r(6);
  int none = 0, text_only_dropped = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto d = drop_conditions(p, {}, r);
    if (d.token_ids.empty() && !d.video) ++none;
    if (d.token_ids.empty() && d.video) ++text_only_dropped;
  }
  CHECK(none / double(n) == doctest::Approx(0.1 + 0.9 * 0.01).epsilon(0.1));
  CHECK(text_only_dropped / double(n) == doctest::Approx(0.9 * 0.1 * 0.9).epsilon(0.1));
}

TEST_CASE("loss edge cases") {
  auto m = make_model<double>(tiny());
  const auto sched = model_schedule(m.config);
  Rng rng(7);
  const std::vector<cond::PreparedConditions> conds{cond::prepare(cond::ConditionBundle::from_text("a yip"))};
  const Mat<double> z0 = randn<double>(500, 16, rng, 0.2);
  auto draw = draw_loss_inputs<double>(conds, sched, rng);
  CHECK(draw.steps.size() == 1);
  CHECK(draw.eps.rows() == 500);
  const auto r = eps_loss(m, z0, draw, sched, true);
  CHECK(std::isfinite(r.loss));
  CHECK(r.grads.size() == m.params.size());

  // oracle checks on the plain error
  const Mat<double> eps = randn<double>(500, 16, rng);
  CHECK(noise_mse<double>(eps, eps) == 0.0);
  CHECK(noise_mse<double>(Mat<double>::Zero(500, 16), eps) == doctest::Approx(eps.squaredNorm() / 8000.0));
  Rng big(8);
  const Mat<double> many = randn<double>(500, 160, big);
  CHECK(noise_mse<double>(Mat<double>::Zero(500, 160), many) == doctest::Approx(1.0).epsilon(0.02));

  const std::vector<cond::PreparedConditions> empty;
  CHECK_THROWS_AS(draw_loss_inputs<double>(empty, sched, rng), std::invalid_argument);
  LossDraw<double> none;
  CHECK_THROWS_AS(eps_loss(m, z0, none, sched, false), std::invalid_argument);
}

TEST_CASE("sampler determinism and seeds") {
  auto m = make_model<float>(tiny());
  const auto sched = model_schedule(m.config);
  const std::vector<cond::ConditionBundle> bundles{cond::ConditionBundle::from_text("a siren"), cond::ConditionBundle{}};
  SamplerConfig cfg;
  cfg.steps = 4;
  cfg.seed = 7;
  const auto a = sample(m, bundles, cfg, sched);
  const auto b = sample(m, bundles, cfg, sched);
  REQUIRE(a.size() == 2);
  CHECK(a[0].wave.samples == b[0].wave.samples);
  CHECK(a[1].latent.data == b[1].latent.data);
  CHECK(a[0].wave.samples.cwiseAbs().maxCoeff() <= 1.0);
  cfg.seed = 8;
  CHECK(sample(m, bundles, cfg, sched)[0].wave.samples != a[0].wave.samples);

  // an item's stream does not depend on the rest of the batch; only GEMM
  // blocking differs, so allow float roundoff
  cfg.seed = 7;
  const std::vector<cond::ConditionBundle> first{bundles[0]};
  const auto solo = sample(m, first, cfg, sched);
  CHECK((solo[0].latent.data - a[0].latent.data).cwiseAbs().maxCoeff() < 1e-4f);

  cfg.steps = 0;
  CHECK_THROWS_AS(sample(m, bundles, cfg, sched), std::invalid_argument);
  cfg.steps = 4;
  CHECK_THROWS_AS(sample(m, bundles, cfg, make_schedule(1000, 1e-4, 0.03)), std::invalid_argument);
  cfg.guidance_scale = std::nan("");
  CHECK_THROWS_AS(sample(m, bundles, cfg, sched), std::invalid_argument);
}

TEST_CASE("known frames") {
  const auto k = known_frames({{4.0, 6.0}});
  for (int f = 0; f < 500; ++f) CHECK(k[static_cast<std::size_t>(f)] == (f < 200 || f >= 300));
  // a span ending inside a frame hides that frame
  const auto p = known_frames({{1.0, 1.01}});
  CHECK(!p[50]);
  CHECK(p[49]);
  CHECK(p[51]);
}

TEST_CASE("inpainting and completion keep the known signal") {
  auto m = make_model<float>(tiny());
  const auto sched = model_schedule(m.config);
  Rng rng(9);
  const auto a = random_wave(rng);
  cond::ConditionBundle inp;
  inp.task = cond::Task::INPAINT;
  inp.audio = a;
  inp.mask = {{4.0, 6.0}, {8.5, 9.0}};
  cond::ConditionBundle comp;
  comp.task = cond::Task::COMPLETE;
  comp.audio = a;
  comp.prefix_s = 3.0;
  const std::vector<cond::ConditionBundle> bundles{inp, comp};
  SamplerConfig cfg;
  cfg.steps = 10;
  const auto out = sample(m, bundles, cfg, sched);

  const auto known = known_frames(inp.mask);
  double err = 0.0;
  for (int f = 0; f < 500; ++f)
    if (known[static_cast<std::size_t>(f)])
      err = std::max(err, (out[0].wave.samples.segment(16 * f, 16) - a.samples.segment(16 * f, 16)).cwiseAbs().maxCoeff());
  CHECK(err <= 1e-5);
  CHECK(out[0].wave.samples.segment(3200, 1600) != a.samples.segment(3200, 1600));
  CHECK((out[1].wave.samples.head(2400) - a.samples.head(2400)).cwiseAbs().maxCoeff() <= 1e-5);
}
