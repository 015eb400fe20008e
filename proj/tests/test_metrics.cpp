#include "audiox/metrics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace audiox;
using namespace audiox::metrics;
using synth::BenchPrompt;
using synth::EventAnnotation;
using synth::PromptType;

namespace {

GaussStats stats(Eigen::VectorXd m, Eigen::MatrixXd s) { return {std::move(m), std::move(s)}; }

EventAnnotation detected(std::vector<synth::SedEntry> sed) {
  EventAnnotation a;
  a.caption = "detected";
  a.clip_id = "d";
  for (const auto& e : sed) {
    if (a.find(e.category)) continue;
    const int n = static_cast<int>(std::count_if(sed.begin(), sed.end(), [&](const auto& x) { return x.category == e.category; }));
    a.category.push_back({e.category, n});
  }
  a.sed = std::move(sed);
  return a;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("Frechet distance") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  CHECK(frechet_distance(stats(vec({0, 0}), I), stats(vec({0, 0}), I)) == doctest::Approx(0.0));
  CHECK(frechet_distance(stats(vec({1, 0}), I), stats(vec({0, 0}), I)) == doctest::Approx(1.0));
  CHECK(frechet_distance(stats(vec({3}), Eigen::MatrixXd::Constant(1, 1, 4.0)),
                         stats(vec({3}), Eigen::MatrixXd::Constant(1, 1, 1.0))) == doctest::Approx(1.0));

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 6;
    const Eigen::MatrixXd xa = randn<double>(40, d, rng), xb = randn<double>(30, d, rng) * 1.7;
    const auto a = gauss_stats(xa), b = gauss_stats(xb);
    const double fd = frechet_distance(a, b);
    CHECK(fd >= 0.0);
    CHECK(fd == doctest::Approx(frechet_distance(b, a)).epsilon(1e-9));
    CHECK(fd == doctest::Approx(oracle::frechet(a.mean, a.cov, b.mean, b.cov)).epsilon(1e-7));
    CHECK(frechet_distance(a, a) <= 1e-9);
  }

  CHECK_THROWS(frechet_distance(stats(vec({0, 0}), I), stats(vec({0}), Eigen::MatrixXd::Identity(1, 1))));
  Eigen::MatrixXd bad = I;
  bad(0, 0) = -1.0;
  CHECK_THROWS(frechet_distance(stats(vec({0, 0}), bad), stats(vec({0, 0}), I)));
  Eigen::MatrixXd skew = I;
  skew(0, 1) = 0.5;
  CHECK_THROWS(frechet_distance(stats(vec({0, 0}), skew), stats(vec({0, 0}), I)));
  CHECK_THROWS(gauss_stats(Eigen::MatrixXd::Zero(1, 3)));
}

TEST_CASE("KL score") {
  const std::vector<ClassDist> a{vec({0.2, 0.8}), vec({0.5, 0.5})};
  CHECK(kl_score(a, a) == doctest::Approx(0.0));
  CHECK(kl_score({vec({1, 0})}, {vec({0.5, 0.5})}) == doctest::Approx(std::numbers::ln2));

  Rng rng(2);
  for (int i = 0; i < 30; ++i) {
    const auto p = oracle::random_dist(5, rng), q = oracle::random_dist(5, rng);
    CHECK(kl_divergence(p, q) == doctest::Approx(oracle::kl(p, q)).epsilon(1e-12));
    CHECK(kl_divergence(q, p) == doctest::Approx(oracle::kl(q, p)).epsilon(1e-12));
  }
  const auto p = vec({0.9, 0.1}), q = vec({0.5, 0.5});
  CHECK(kl_divergence(p, q) != doctest::Approx(kl_divergence(q, p)));
  // the floor keeps a missing class finite
  CHECK(std::isfinite(kl_divergence(vec({0.5, 0.5}), vec({1, 0}))));

  CHECK_THROWS(kl_score(a, {a[0]}));
  CHECK_THROWS(kl_score({vec({0.7, 0.7})}, {vec({0.5, 0.5})}));
}

TEST_CASE("inception score") {
  const int K = 6;
  CHECK(inception_score(std::vector<ClassDist>(5, ClassDist::Constant(K, 1.0 / K))) == doctest::Approx(1.0));
  std::vector<ClassDist> hots;
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < K; ++k) hots.push_back(ClassDist::Unit(K, k));
  CHECK(inception_score(hots) == doctest::Approx(K));
  CHECK(inception_score(std::vector<ClassDist>(4, ClassDist::Unit(K, 2))) == doctest::Approx(1.0));

  Rng rng(8);
  for (int t = 0; t < 40; ++t) {
    std::vector<ClassDist> rows;
    for (int i = 0; i < 1 + t % 9; ++i) rows.push_back(oracle::random_dist(K, rng));
    const double is = inception_score(rows);
    CHECK(is >= 1.0 - 1e-12);
    CHECK(is <= K + 1e-9);
    CHECK(is == doctest::Approx(oracle::inception(rows)).epsilon(1e-10));
    auto twice = rows;
    twice.insert(twice.end(), rows.begin(), rows.end());
    CHECK(inception_score(twice) == doctest::Approx(is).epsilon(1e-12));
  }
  CHECK_THROWS(inception_score({}));
}

TEST_CASE("cosine alignment") {
  CHECK(cosine_align(vec({1, 2}), vec({1, 2})) == doctest::Approx(1.0));
  CHECK(cosine_align(vec({1, 0}), vec({0, 3})) == doctest::Approx(0.0));
  CHECK(cosine_align(vec({1, 2}), vec({-2, -4})) == doctest::Approx(-1.0));
  CHECK_THROWS(cosine_align(vec({0, 0}), vec({1, 0})));
  CHECK_THROWS(cosine_align(vec({1}), vec({1, 0})));
}

TEST_CASE("toy embedder and classifier") {
  const auto a = synth::gen_clip({.events = {{"siren", 1, {}}}}, 1).wave;
  const auto b = synth::gen_clip({.events = {{"thunder", 1, {}}}}, 1).wave;
  CHECK(toy_embed(a).size() == kEmbedDim);
  CHECK(toy_embed(a) == toy_embed(a));
  CHECK(toy_embed(a) != toy_embed(b));
  const auto p = toy_classify(a);
  CHECK_NOTHROW(check_dist(p));
  Eigen::Index arg;
  p.maxCoeff(&arg);
  CHECK(arg == synth::category_index("siren"));
}

TEST_CASE("judge examples") {
  BenchPrompt ts;
  ts.id = "T2A_01105";
  ts.type = PromptType::category_timestamp;
  ts.category = {"crowd cheering"};
  ts.timestamp = std::vector<synth::TimedCategory>{{"crowd cheering", {2.0, 6.0}}};
  auto j = judge_accuracies(ts, detected({{2.5, 6.8, "crowd cheering", "x"}}));
  CHECK(j.cat);
  CHECK(j.ts == true);
  CHECK_FALSE(j.cnt.has_value());
  CHECK_FALSE(j.ord.has_value());
  CHECK(judge_accuracies(ts, detected({{2.5, 7.2, "crowd cheering", "x"}})).ts == false);
  // the extent spans every detected segment of the category
  CHECK(judge_accuracies(ts, detected({{2.1, 3.0, "crowd cheering", "x"}, {4.0, 5.9, "crowd cheering", "x"}})).ts == true);

  BenchPrompt ord;
  ord.id = "T2A_00575";
  ord.type = PromptType::category_ordering;
  ord.category = {"gargle", "water splash"};
  ord.time_relation = std::vector<std::string>{"gargle", "water splash"};
  CHECK(judge_accuracies(ord, detected({{1.0, 2.0, "gargle", "x"}, {3.0, 4.0, "water splash", "x"}})).ord == true);
  j = judge_accuracies(ord, detected({{1.0, 2.0, "water splash", "x"}, {3.0, 4.0, "gargle", "x"}}));
  CHECK(j.cat);
  CHECK(j.ord == false);

  BenchPrompt cat;
  cat.id = "wave";
  cat.category = {"thunder", "wave crash"};
  j = judge_accuracies(cat, detected({{1.0, 2.0, "thunder", "x"}, {3.0, 4.0, "rain", "x"}}));
  CHECK_FALSE(j.cat);

  BenchPrompt cnt;
  cnt.id = "c";
  cnt.type = PromptType::category_count;
  cnt.category = {"dog bark"};
  cnt.count = std::vector<std::pair<std::string, int>>{{"dog bark", 2}};
  CHECK(judge_accuracies(cnt, detected({{1, 2, "dog bark", "x"}, {3, 4, "dog bark", "x"}})).cnt == true);
  CHECK(judge_accuracies(cnt, detected({{1, 2, "dog bark", "x"}})).cnt == false);

  BenchPrompt broken = cnt;
  broken.count.reset();
  CHECK_THROWS(judge_accuracies(broken, detected({})));
  auto inverted = detected({{3, 2, "dog bark", "x"}});
  CHECK_THROWS(judge_accuracies(cnt, inverted));
}

TEST_CASE("judge agrees with the direct oracle") {
  const auto prompts = synth::gen_benchmark(25, 4);
  Rng rng(12);
  int positives = 0, total = 0;
  for (int round = 0; round < 3; ++round)
    for (const auto& p : prompts) {
      const auto det = oracle::perturbed_detection(p, rng);
      REQUIRE(synth::validate_annotation(det).ok());
      const auto got = judge_accuracies(p, det);
      const auto want = oracle::judge(p, det);
      CHECK(got.cat == want.cat);
      CHECK(got.cnt == want.cnt);
      CHECK(got.ord == want.ord);
      CHECK(got.ts == want.ts);
      positives += got.cat;
      ++total;
    }
  CHECK(positives > total / 4);
  CHECK(positives < total);
}

TEST_CASE("AudioTime errors") {
  AudioTimeTarget t;
  t.category = "dog bark";
  t.count = 2;
  auto e = audiotime_errors(t, detected({{1, 2, "dog bark", "x"}, {3, 4, "dog bark", "x"}, {5, 6, "dog bark", "x"}}));
  CHECK(*e.frequency_l1 == 1.0);
  CHECK_FALSE(e.duration_l1.has_value());

  t = {};
  t.category = "rain";
  t.duration_s = 4.0;
  e = audiotime_errors(t, detected({{1.0, 2.5, "rain", "x"}, {4.0, 5.2, "rain", "x"}}));
  CHECK(*e.duration_l1 == doctest::Approx(1.3));

  t = {};
  t.category = "siren";
  t.intervals = {{1.0, 3.0}, {5.0, 7.0}};
  CHECK(*audiotime_errors(t, detected({{1.0, 3.0, "siren", "x"}, {5.0, 7.0, "siren", "x"}})).timestamp_f1 == 1.0);
  // one hit of two targets, two detections: P = R = 1/2
  CHECK(*audiotime_errors(t, detected({{1.5, 3.5, "siren", "x"}, {8.0, 9.0, "siren", "x"}})).timestamp_f1 ==
        doctest::Approx(0.5));

  t = {};
  t.order = {"thunder", "rain"};
  CHECK(*audiotime_errors(t, detected({{1, 2, "thunder", "x"}, {3, 4, "rain", "x"}})).ordering == 0);
  CHECK(*audiotime_errors(t, detected({{3, 4, "thunder", "x"}, {1, 2, "rain", "x"}})).ordering == 1);

  AudioTimeTarget bad;
  bad.count = 1;
  CHECK_THROWS(audiotime_errors(bad, detected({})));
  bad.category = "x";
  bad.intervals = {{4.0, 3.0}};
  CHECK_THROWS(audiotime_errors(bad, detected({})));
}

TEST_CASE("timestamp F1 greedy matching") {
  CHECK(timestamp_f1({}, {}) == 1.0);
  CHECK(timestamp_f1({{1, 2}}, {}) == 0.0);
  CHECK(timestamp_f1({{1, 2}}, {{2.0, 3.0}}) == 1.0);
  CHECK(timestamp_f1({{1, 2}}, {{2.1, 3.0}}) == 0.0);
  // greedy by onset: first target grabs the first fitting detection
  CHECK(timestamp_f1({{1, 3}, {2, 3.5}}, {{1.5, 3.2}, {3.5, 4.6}}) == doctest::Approx(0.5));
}

TEST_CASE("oracle detector") {
  CHECK(oracle_detect(synth::Waveform::silence()).category.empty());
  CHECK(dominant_category(oracle_detect(synth::Waveform::silence())).empty());

  synth::ClipRecipe both;
  both.events = {{"thunder", 1, {{1.0, 5.0}}}, {"siren", 1, {{3.0, 7.0}}}};
  const auto clip = synth::gen_clip(both, 3);
  const auto det = oracle_detect(clip.wave);
  REQUIRE(det.find("thunder"));
  REQUIRE(det.find("siren"));
  CHECK(det.category.size() == 2);
  const auto dom = dominant_category(det);
  CHECK((dom == "siren" || dom == "thunder"));

  Rng rng(21);
  const auto& vocab = synth::vocabulary();
  for (int trial = 0; trial < 60; ++trial) {
    synth::ClipRecipe r;
    const int kinds = 1 + static_cast<int>(rng() % 3);
    std::set<std::size_t> used;
    while (static_cast<int>(used.size()) < kinds) used.insert(rng() % vocab.size());
    for (auto k : used) r.events.push_back({vocab[k].name, 1 + static_cast<int>(rng() % 2), {}});
    const auto c = synth::gen_clip(r, rng());
    const auto d = oracle_detect(c.wave);
    REQUIRE(d.category.size() == c.annotation.category.size());
    for (const auto& [name, n] : c.annotation.category) {
      const auto* got = d.find(name);
      REQUIRE_MESSAGE(got, name);
      CHECK(got->second == n);
    }
    for (const auto& e : c.annotation.sed) {
      const bool close = std::any_of(d.sed.begin(), d.sed.end(), [&](const synth::SedEntry& x) {
        return x.category == e.category && std::abs(x.start_s - e.start_s) <= 0.1 && std::abs(x.end_s - e.end_s) <= 0.1;
      });
      CHECK_MESSAGE(close, e.category << " " << e.start_s << "-" << e.end_s);
    }
  }
}

TEST_CASE("metric report") {
  MetricReport r;
  r.columns = {"cat", "cnt"};
  r.rows = {{"a", {1.0, std::nullopt}}, {"b,c", {0.0, 1.0}}, {"d", {1.0, 0.0}}};
  r.globals = {{"fd", 2.5}};
  r.metadata["seed"] = 3;
  const auto s = r.summary();
  CHECK(*s[0] == doctest::Approx(2.0 / 3.0));
  CHECK(*s[1] == doctest::Approx(0.5));

  const auto j = r.to_json();
  CHECK(j["summary"]["cnt"].get<double>() == doctest::Approx(0.5));
  CHECK(j["summary"]["fd"].get<double>() == 2.5);
  CHECK(j["samples"][0]["cnt"].is_null());
  CHECK(j["metadata"]["seed"] == 3);
  CHECK(io::json::parse(j.dump()) == j);

  const auto csv = r.to_csv();
  CHECK(csv.rfind("id,cat,cnt,fd\r\n", 0) == 0);
  CHECK(csv.find("\"b,c\",0,1,\r\n") != std::string::npos);
  CHECK(csv.find("a,1,,\r\n") != std::string::npos);
  CHECK(csv.find("summary,0.6666666667,0.5,2.5\r\n") != std::string::npos);
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}
