#include "audiox/io.hpp"
#include "audiox/synth_data.hpp"
#include "audiox/tensor.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace audiox;
using synth::ClipRecipe;

namespace {

double rms(const Eigen::VectorXd& x) { return x.size() ? std::sqrt(x.squaredNorm() / static_cast<double>(x.size())) : 0.0; }

ClipRecipe random_recipe(Rng& rng) {
  const auto& vocab = synth::vocabulary();
  std::vector<std::string> names;
  for (const auto& c : vocab) names.push_back(c.name);
  std::shuffle(names.begin(), names.end(), rng);
  ClipRecipe r;
  const int ncat = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < ncat; ++i) r.events.push_back({names[static_cast<std::size_t>(i)], 1 + static_cast<int>(rng() % 2), {}});
  if (rng() % 4 == 0) {
    r.policy = synth::TimingPolicy::interleave;
    r.background = names[static_cast<std::size_t>(ncat)];
  }
  return r;
}

}  // namespace

TEST_CASE("single dog bark at a fixed time") {
  ClipRecipe r;
  r.events.push_back({"dog bark", 1, {{2.0, 2.4}}});
  const auto clip = synth::gen_clip(r, 31);
  REQUIRE(clip.annotation.category.size() == 1);
  CHECK(clip.annotation.category[0].first == "dog bark");
  CHECK(clip.annotation.category[0].second == 1);
  REQUIRE(clip.annotation.sed.size() == 1);
  CHECK(clip.annotation.sed[0].start_s == doctest::Approx(2.0));
  CHECK(clip.annotation.sed[0].end_s == doctest::Approx(2.4));
  CHECK(synth::validate_annotation(clip.annotation).ok());
}

TEST_CASE("empty recipe gives silence") {
  const auto clip = synth::gen_clip({}, 1);
  CHECK(clip.wave.samples.isZero(0.0));
  CHECK(clip.wave.size() == synth::kClipSamples);
  CHECK(clip.annotation.category.empty());
  CHECK(clip.annotation.sed.empty());
}

TEST_CASE("thunder then explosion keeps order") {
  ClipRecipe r;
  r.events = {{"thunder", 1, {}}, {"explosion", 1, {}}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto clip = synth::gen_clip(r, seed);
    CHECK(clip.annotation.time_relation.order == std::vector<std::string>{"thunder", "explosion"});
    REQUIRE(clip.annotation.sed.size() == 2);
    CHECK(clip.annotation.sed[0].start_s < clip.annotation.sed[1].start_s);
  }
}

TEST_CASE("generation is reproducible and seed dependent") {
  ClipRecipe r;
  r.events = {{"siren", 2, {}}, {"rain", 1, {}}};
  const auto a = synth::gen_clip(r, 9), b = synth::gen_clip(r, 9), c = synth::gen_clip(r, 10);
  CHECK(a.wave.samples == b.wave.samples);
  CHECK(a.annotation == b.annotation);
  CHECK(a.wave.samples != c.wave.samples);
}

TEST_CASE("infeasible packing and bad recipes throw") {
  ClipRecipe r;
  r.events = {{"yip", 5, {}}, {"siren", 5, {}}};
  r.min_event_s = r.max_event_s = 1.5;
  CHECK_THROWS_AS(synth::gen_clip(r, 0), synth::InfeasibleRecipe);

  ClipRecipe overlap;
  overlap.events = {{"yip", 2, {{1.0, 2.0}, {1.5, 3.0}}}};
  CHECK_THROWS_AS(synth::gen_clip(overlap, 0), synth::InfeasibleRecipe);

  ClipRecipe six;
  for (const char* c : {"yip", "rain", "siren", "thunder", "gargle", "explosion"}) six.events.push_back({c, 1, {}});
  CHECK_THROWS(synth::gen_clip(six, 0));

  ClipRecipe unknown;
  unknown.events = {{"tuba", 1, {}}};
  CHECK_THROWS(synth::gen_clip(unknown, 0));
}

TEST_CASE("random clips satisfy the schema and localize energy") {
  Rng rng(123);
  for (int i = 0; i < 200; ++i) {
    const auto r = random_recipe(rng);
    const auto clip = synth::gen_clip(r, static_cast<std::uint64_t>(i));
    const auto rep = synth::validate_annotation(clip.annotation);
    CHECK_MESSAGE(rep.ok(), "clip " << i);
    CHECK(clip.wave.samples.cwiseAbs().maxCoeff() <= 1.0);

    std::vector<bool> inside(synth::kClipSamples, false);
    for (const auto& e : clip.annotation.sed)
      for (auto n = static_cast<long>(std::lround(e.start_s * synth::kSampleRate));
           n < std::lround(e.end_s * synth::kSampleRate); ++n)
        inside[static_cast<std::size_t>(n)] = true;
    std::vector<double> out;
    for (int n = 0; n < synth::kClipSamples; ++n)
      if (!inside[static_cast<std::size_t>(n)]) out.push_back(clip.wave.samples(n));
    const double out_rms = rms(Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())));
    for (const auto& e : clip.annotation.sed) {
      const auto s0 = std::lround(e.start_s * synth::kSampleRate), s1 = std::lround(e.end_s * synth::kSampleRate);
      const double in_rms = rms(clip.wave.samples.segment(s0, s1 - s0));
      CHECK(in_rms >= 10.0 * out_rms);
    }
  }
}

TEST_CASE("validation reports named violations") {
  synth::EventAnnotation ann;
  ann.category = {{"yip", 2}};
  ann.sed = {{1.0, 2.0, "yip", "A yip."}};
  auto rep = synth::validate_annotation(ann);
  CHECK(rep.has("count mismatch"));
  CHECK(rep.violations[0].field == "category");

  ann.category = {{"yip", 1}};
  ann.sed = {{3.0, 3.0, "yip", "A yip."}};
  rep = synth::validate_annotation(ann);
  CHECK(rep.has("empty interval"));

  ann.sed = {{3.0, 11.0, "yip", "A yip."}};
  CHECK(synth::validate_annotation(ann).has("interval out of range"));
  ann.sed = {{3.0, 4.0, "rain", "Rain."}};
  CHECK(synth::validate_annotation(ann).has("unknown category"));
  ann.sed = {{3.0, 4.0, "yip", "A yip."}};
  ann.time_relation.order = {"siren"};
  CHECK(synth::validate_annotation(ann).has("unknown category"));
  ann.time_relation.order = {"yip"};
  CHECK(synth::validate_annotation(ann).ok());
}

TEST_CASE("machine gun record from the annotation examples is valid") {
  const auto j = io::json::parse(R"({
    "caption": "The audio features the mechanical sound of a firearm being handled, immediately followed by two separate bursts of machine gun fire.",
    "category": {"Machine gun": 2, "Generic impact sounds": 1},
    "SED": [
      {"00:00-00:01": "The mechanical sound of a firearm being handled, possibly being cocked or loaded.", "category": "Generic impact sounds"},
      {"00:01-00:05": "A sustained burst of automatic gunfire from a machine gun."},
      {"00:06-00:08": "A second, shorter burst of machine gun fire."}
    ],
    "time_relation": "Generic impact sounds, Machine gun",
    "audio_id": "c9OnubhhvZY_0"})");
  const auto ann = io::annotation_from_json(j);
  CHECK(ann.sed[1].category == "Machine gun");
  CHECK(ann.time_relation.order == std::vector<std::string>{"Generic impact sounds", "Machine gun"});
  CHECK(synth::validate_annotation(ann).ok());
}

TEST_CASE("caption augmentation templates") {
  synth::EventAnnotation ann;
  ann.category = {{"machine gun", 2}, {"generic impact sounds", 1}};
  ann.sed = {{0.0, 1.0, "generic impact sounds", ""}, {1.0, 5.0, "machine gun", ""}, {6.0, 8.0, "machine gun", ""}};
  ann.time_relation.order = {"generic impact sounds", "machine gun"};
  const auto views = synth::augment_captions(ann);
  REQUIRE(views.size() == 3);
  CHECK(views[0] == "The audio contains two sounds of a machine gun and one generic impact sound.");
  CHECK(views[1].find("from 1 to 5 seconds") != std::string::npos);
  CHECK(views[2].find("the sound of a generic impact occurs first, followed by two distinct machine gun sounds.") !=
        std::string::npos);

  synth::EventAnnotation one;
  one.category = {{"siren", 1}};
  one.sed = {{2.0, 3.5, "siren", ""}};
  one.time_relation.order = {"siren"};
  const auto v1 = synth::augment_captions(one);
  CHECK(v1[0] == "The audio contains one sound of a siren.");
  CHECK(v1[0].find(" and ") == std::string::npos);

  synth::EventAnnotation bg;
  bg.category = {{"rain", std::nullopt}};
  bg.sed = {{0.0, 10.0, "rain", ""}};
  bg.time_relation.interleave = true;
  const auto vb = synth::augment_captions(bg);
  CHECK(vb.size() == 2);  // no order view for an interleaved clip
  CHECK(vb.back() == synth::sed_caption(bg));

  synth::EventAnnotation bare;
  bare.sed = {{2.0, 3.0, "siren", ""}};
  const auto vs = synth::augment_captions(bare);
  REQUIRE(vs.size() == 1);
  CHECK(vs[0] == synth::sed_caption(bare));
}

TEST_CASE("augmentation is deterministic and has three views for counted ordered clips") {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    auto r = random_recipe(rng);
    r.policy = synth::TimingPolicy::sequential;
    const auto clip = synth::gen_clip(r, static_cast<std::uint64_t>(i));
    const auto a = synth::augment_captions(clip.annotation);
    CHECK(a.size() == 3);
    CHECK(a == synth::augment_captions(clip.annotation));
  }
}

TEST_CASE("number words") {
  CHECK(synth::number_word(1) == "one");
  CHECK(synth::number_word(2) == "two");
  CHECK(synth::number_word(10) == "ten");
  CHECK(synth::number_word(11) == "11");
}

TEST_CASE("benchmark composition") {
  const auto small = synth::gen_benchmark(5, 0);
  CHECK(small.size() == 20);
  std::map<synth::PromptType, int> hist;
  std::map<std::size_t, int> only, counted;
  for (const auto& p : small) {
    ++hist[p.type];
    if (p.type == synth::PromptType::category_only) ++only[p.category.size()];
    if (p.type == synth::PromptType::category_count) ++counted[static_cast<std::size_t>(p.count->front().second)];
  }
  for (const auto& [t, n] : hist) CHECK(n == 5);
  for (std::size_t k = 1; k <= 5; ++k) {
    CHECK(only[k] == 1);
    CHECK(counted[k] == 1);
  }
  CHECK(io::to_json(small).dump() == io::to_json(synth::gen_benchmark(5, 0)).dump());
  CHECK(io::to_json(small).dump() != io::to_json(synth::gen_benchmark(5, 1)).dump());
  CHECK_THROWS_AS(synth::gen_benchmark(7, 0), std::invalid_argument);
  CHECK_THROWS_AS(synth::gen_benchmark(0, 0), std::invalid_argument);
}

TEST_CASE("benchmark prompts carry exactly their type's fields") {
  for (const auto& p : synth::gen_benchmark(50, 3)) {
    using T = synth::PromptType;
    CHECK(p.count.has_value() == (p.type == T::category_count));
    CHECK(p.time_relation.has_value() == (p.type == T::category_ordering));
    CHECK(p.timestamp.has_value() == (p.type == T::category_timestamp));
    std::set<std::string> uniq(p.category.begin(), p.category.end());
    CHECK(uniq.size() == p.category.size());
    if (p.count)
      for (const auto& [c, n] : *p.count) CHECK((n >= 1 && n <= 5));
    if (p.time_relation) {
      CHECK(p.category.size() >= 2);
      CHECK(p.category.size() <= 3);
    }
    if (p.timestamp) {
      REQUIRE(p.timestamp->size() == 1);
      const auto& iv = p.timestamp->front().interval;
      CHECK(0.0 <= iv.start_s);
      CHECK(iv.start_s < iv.end_s);
      CHECK(iv.end_s <= 10.0);
    }
    // the recipe built from a prompt always packs
    CHECK_NOTHROW(synth::gen_clip(synth::recipe_for(p), 1));
  }
}
