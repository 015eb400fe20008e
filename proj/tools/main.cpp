// audiox command line: synth, train, sample, eval, bench, ablate.
// Exit codes: 0 ok, 1 usage or configuration error, 2 runtime failure.

#include "run_config.hpp"

#include "audiox/metrics.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

using namespace audiox;
namespace fs = std::filesystem;

namespace {

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu%s", stem, i, ext);
  return buf;
}

std::vector<std::string> categories_of(const cli::RunConfig& cfg) {
  auto cats = cli::split_list(cfg.text("data.categories"));
  if (cats.empty())
    for (const auto& c : synth::vocabulary()) cats.push_back(c.name);
  return cats;
}

std::vector<fs::path> wavs_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".wav") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// clips written by `synth`, each captioned by one of its views in turn
train::Dataset load_dataset(const fs::path& dir) {
  train::Dataset data;
  std::size_t i = 0;
  for (const auto& wav : wavs_in(dir)) {
    auto captions_path = wav;
    captions_path.replace_extension(".captions.json");
    std::vector<std::string> views;
    if (fs::exists(captions_path)) {
      views = io::json::parse(io::read_text(captions_path)).get<std::vector<std::string>>();
    } else {
      auto ann = wav;
      ann.replace_extension(".json");
      views = synth::augment_captions(io::annotation_from_json(io::json::parse(io::read_text(ann))));
    }
    if (views.empty()) throw std::runtime_error("no caption for " + wav.string());
    data.push_back(train::make_example(io::read_wav(wav), cond::ConditionBundle::from_text(views[i++ % views.size()])));
  }
  if (data.empty()) throw std::runtime_error("no .wav clips in " + dir.string());
  return data;
}

train::Dataset training_data(const cli::RunConfig& cfg) {
  if (!cfg.text("data.dir").empty()) return load_dataset(cfg.text("data.dir"));
  return train::toy_dataset(categories_of(cfg), static_cast<int>(cfg.integer("data.clips")),
                            static_cast<std::uint64_t>(cfg.integer("data.seed")));
}

AudioX<float> load_model(const cli::RunConfig& cfg, bool warn_untrained = true) {
  auto model = make_model<float>(cfg.model());
  const auto ck = cfg.text("checkpoint");
  if (ck.empty()) {
    if (warn_untrained) std::cerr << "warning: no checkpoint given, using the initial parameters\n";
    return model;
  }
  if (!fs::exists(ck)) throw std::runtime_error("checkpoint not found: " + ck);
  const auto sched = diffusion::model_schedule(model.config);
  train::TrainState state;
  train::load_checkpoint(ck, model, state, train::config_fingerprint(model.config, sched));
  return cfg.values().at("sampler.ema").get<bool>() ? train::with_ema(model, state) : model;
}

// ------------------------------------------------------------------ synth

int run_synth(const cli::RunConfig& cfg) {
  const fs::path out = cfg.text("out");
  fs::create_directories(out);
  const auto cats = categories_of(cfg);
  const auto n = static_cast<std::size_t>(cfg.integer("data.clips"));
  const auto seed = static_cast<std::uint64_t>(cfg.integer("data.seed"));
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = keyed_rng(seed, {i});
    synth::ClipRecipe r;
    r.clip_id = numbered("clip", i, "");
    const std::size_t kinds = std::min<std::size_t>(cats.size(), 1 + rng() % 2);
    std::vector<std::string> pool = cats;
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t k = 0; k < kinds; ++k) r.events.push_back({pool[k], 1 + static_cast<int>(rng() % 2), {}});
    const auto clip = synth::gen_clip(r, rng());
    io::write_wav(out / numbered("clip", i, ".wav"), clip.wave);
    io::write_text(out / numbered("clip", i, ".json"), io::to_json(clip.annotation).dump(2) + "\n");
    io::write_text(out / numbered("clip", i, ".captions.json"),
                   io::json(synth::augment_captions(clip.annotation)).dump(2) + "\n");
  }
  cfg.write_sidecar(out);
  std::cout << "wrote " << n << " clips to " << out.string() << "\n";
  return 0;
}

// ------------------------------------------------------------------ train

int run_train(const cli::RunConfig& cfg) {
  const fs::path out = cfg.text("out");
  fs::create_directories(out);
  auto model = make_model<float>(cfg.model());
  const auto sched = diffusion::model_schedule(model.config);
  const auto fp = train::config_fingerprint(model.config, sched);
  const auto tc = cfg.trainer();
  const auto data = training_data(cfg);
  auto state = train::init_state(model.params);
  if (const auto resume = cfg.text("train.resume"); !resume.empty()) {
    if (!fs::exists(resume)) throw std::runtime_error("checkpoint not found: " + resume);
    train::load_checkpoint(resume, model, state, fp);
  }
  cfg.write_sidecar(out);

  std::ofstream csv(out / "loss.csv", std::ios::binary);
  csv << "step,loss,lr\r\n";
  const auto every = cfg.integer("train.log_every"), ck_every = cfg.integer("train.checkpoint_every");
  while (state.step < tc.steps) {
    const double loss = train::train_step(model, state, data, sched, tc);
    char row[96];
    std::snprintf(row, sizeof row, "%lld,%.9g,%.9g\r\n", static_cast<long long>(state.step), loss,
                  train::lr_at(state.step, tc.lr, tc.warmup, tc.decay_start, tc.gamma));
    csv << row;
    if (state.step % every == 0) std::cerr << "step " << state.step << " loss " << loss << "\n";
    if (state.step % ck_every == 0) train::save_checkpoint(out / "checkpoint.bin", model, state, fp);
  }
  train::save_checkpoint(out / "checkpoint.bin", model, state, fp);
  std::cout << "trained to step " << state.step << ", checkpoint " << (out / "checkpoint.bin").string() << "\n";
  return 0;
}

// ----------------------------------------------------------------- sample

cond::Video read_video_csv(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("video file not found: " + path.string());
  std::istringstream in(io::read_text(path));
  cond::Video v(kVideoFrames, kVideoPixels);
  std::string line;
  Index r = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \r") == std::string::npos) continue;
    if (r >= kVideoFrames) throw std::runtime_error("video CSV has more than 250 rows");
    std::stringstream ls(line);
    std::string cell;
    Index c = 0;
    while (std::getline(ls, cell, ',')) {
      if (c >= kVideoPixels) throw std::runtime_error("video CSV row has more than 64 values");
      v(r, c++) = std::stod(cell);
    }
    if (c != kVideoPixels) throw std::runtime_error("video CSV row has fewer than 64 values");
    ++r;
  }
  if (r != kVideoFrames) throw std::runtime_error("video CSV needs 250 rows");
  return v;
}

std::vector<synth::Interval> parse_mask(const std::string& s) {
  std::vector<synth::Interval> out;
  for (const auto& span : cli::split_list(s)) {
    const auto dash = span.find('-');
    try {
      if (dash == std::string::npos) throw std::invalid_argument(span);
      out.push_back({std::stod(span.substr(0, dash)), std::stod(span.substr(dash + 1))});
    } catch (const std::exception&) {
      throw cli::UsageError("sample.mask: expected start-end seconds, got '" + span + "'");
    }
  }
  return out;
}

std::vector<cond::ConditionBundle> bundles_of(const cli::RunConfig& cfg) {
  cond::ConditionBundle base;
  base.task = cond::task_from_string(cfg.text("task"));
  if (const auto v = cfg.text("sample.video"); !v.empty()) base.video = read_video_csv(v);
  if (const auto a = cfg.text("sample.audio"); !a.empty()) {
    if (!fs::exists(a)) throw std::runtime_error("audio file not found: " + a);
    base.audio = io::read_wav(a);
  }
  base.mask = parse_mask(cfg.text("sample.mask"));
  base.prefix_s = cfg.real("sample.prefix");
  std::vector<cond::ConditionBundle> out;
  const auto prompts = cfg.values().at("sample.prompts").get<std::vector<std::string>>();
  if (prompts.empty()) out.push_back(base);
  for (const auto& p : prompts) {
    auto b = base;
    b.text = std::vector<std::string>{p};
    out.push_back(b);
  }
  for (const auto& b : out) {
    try {
      cond::validate(b);
    } catch (const std::invalid_argument& e) {
      throw cli::UsageError(std::string("condition bundle: ") + e.what());
    }
  }
  return out;
}

int run_sample(const cli::RunConfig& cfg) {
  const fs::path out = cfg.text("out");
  const auto bundles = bundles_of(cfg);
  const auto model = load_model(cfg);
  const auto sched = diffusion::model_schedule(model.config);
  const auto sc = cfg.sampler();
  const auto samples = diffusion::sample<float>(model, bundles, sc, sched);
  fs::create_directories(out);
  cfg.write_sidecar(out);
  const auto prompts = cfg.values().at("sample.prompts");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto wav = io::wav_bytes(samples[i].wave);
    const auto sum = io::hex64(io::fnv1a(wav.data(), wav.size()));
    io::write_bytes(out / numbered("sample", i, ".wav"), wav);
    io::json side;
    side["index"] = i;
    side["prompt"] = i < prompts.size() ? prompts[i] : io::json(nullptr);
    side["task"] = cfg.text("task");
    side["seed"] = sc.seed;
    side["steps"] = sc.steps;
    side["scale"] = sc.guidance_scale;
    side["schedule_fingerprint"] = io::hex64(sched.fingerprint());
    side["checkpoint"] = cfg.text("checkpoint");
    side["wav_fnv1a"] = sum;
    io::write_text(out / numbered("sample", i, ".json"), side.dump(2) + "\n");
    std::cout << numbered("sample", i, ".wav") << " " << sum << "\n";
  }
  return 0;
}

// ------------------------------------------------------------------- eval

void write_report(const metrics::MetricReport& r, const fs::path& out) {
  io::write_text(out / "report.json", r.to_json().dump(2) + "\n");
  io::write_text(out / "report.csv", r.to_csv());
  const auto s = r.summary();
  for (std::size_t c = 0; c < r.columns.size(); ++c)
    if (s[c]) std::cout << r.columns[c] << " " << *s[c] << "\n";
  for (const auto& [name, v] : r.globals) std::cout << name << " " << v << "\n";
}

int run_eval(const cli::RunConfig& cfg) {
  const fs::path ref = cfg.text("eval.ref"), gen = cfg.text("eval.gen");
  if (ref.empty() || gen.empty()) throw cli::UsageError("eval needs --eval.ref and --eval.gen directories");
  const auto gens = wavs_in(gen);
  if (gens.size() < 2) throw std::runtime_error("eval needs at least two generated clips");
  metrics::MetricReport r;
  r.columns = {"kl", "cosine"};
  Eigen::MatrixXd er(static_cast<Index>(gens.size()), metrics::kEmbedDim), eg = er;
  std::vector<metrics::ClassDist> pg;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const auto rp = ref / gens[i].filename();
    if (!fs::exists(rp)) throw std::runtime_error("no reference clip for " + gens[i].filename().string());
    const auto wg = io::read_wav(gens[i]), wr = io::read_wav(rp);
    const auto a = metrics::toy_embed(wr), b = metrics::toy_embed(wg);
    er.row(static_cast<Index>(i)) = a.transpose();
    eg.row(static_cast<Index>(i)) = b.transpose();
    const auto cr = metrics::toy_classify(wr), cg = metrics::toy_classify(wg);
    pg.push_back(cg);
    r.rows.push_back({gens[i].filename().string(), {metrics::kl_divergence(cr, cg), metrics::cosine_align(a, b)}});
  }
  r.globals = {{"fd", metrics::frechet_distance(metrics::gauss_stats(er), metrics::gauss_stats(eg))},
               {"is", metrics::inception_score(pg)}};
  r.metadata = cfg.values();
  const fs::path out = cfg.text("out");
  fs::create_directories(out);
  cfg.write_sidecar(out);
  write_report(r, out);
  return 0;
}

// ------------------------------------------------------------------ bench

int run_bench(const cli::RunConfig& cfg) {
  const fs::path out = cfg.text("out");
  const auto prompts = synth::gen_benchmark(static_cast<int>(cfg.integer("bench.n_per_type")),
                                            static_cast<std::uint64_t>(cfg.integer("bench.seed")));
  std::vector<synth::Waveform> waves;
  const bool from_model = !cfg.text("checkpoint").empty();
  if (from_model) {
    const auto model = load_model(cfg);
    const auto sched = diffusion::model_schedule(model.config);
    std::vector<cond::ConditionBundle> bundles;
    for (const auto& p : prompts) bundles.push_back(cond::ConditionBundle::from_text(p.prompt));
    for (const auto& s : diffusion::sample<float>(model, bundles, cfg.sampler(), sched)) waves.push_back(s.wave);
  } else {
    for (std::size_t i = 0; i < prompts.size(); ++i)
      waves.push_back(synth::gen_clip(synth::recipe_for(prompts[i]), keyed_rng(cfg.integer("bench.seed"), {i})()).wave);
  }
  metrics::MetricReport r;
  r.columns = {"cat", "cnt", "ord", "ts"};
  auto bin = [](std::optional<bool> b) { return b ? std::optional<double>(*b ? 1.0 : 0.0) : std::nullopt; };
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto j = metrics::judge_accuracies(prompts[i], metrics::oracle_detect(waves[i]));
    r.rows.push_back({prompts[i].id, {bin(j.cat), bin(j.cnt), bin(j.ord), bin(j.ts)}});
  }
  r.metadata = cfg.values();
  r.metadata["audio_source"] = from_model ? "model" : "recipe";
  fs::create_directories(out);
  cfg.write_sidecar(out);
  io::write_text(out / "prompts.json", io::to_json(prompts).dump(2) + "\n");
  std::cout << prompts.size() << " prompts evaluated\n";
  write_report(r, out);
  return 0;
}

// ----------------------------------------------------------------- ablate

// scalars the variant actually uses
std::int64_t active_maf_params(const ad::Parameters<float>& p, MafMode mode) {
  if (mode == MafMode::off) return 0;
  std::int64_t n = p.scalar_count("maf.");
  if (mode == MafMode::no_gate) n -= p.scalar_count("maf.gate.");
  if (mode == MafMode::no_query)
    n -= p.scalar_count("maf.queries.") + p.scalar_count("maf.gather.") + p.scalar_count("maf.consolidate.");
  return n;
}

int run_ablate(const cli::RunConfig& cfg) {
  const fs::path out = cfg.text("out");
  const auto data = training_data(cfg);
  const auto heldout = train::toy_dataset(categories_of(cfg), static_cast<int>(cfg.integer("ablate.heldout")),
                                          static_cast<std::uint64_t>(cfg.integer("data.seed")) + 0x9e3779b9ULL);
  auto tc = cfg.trainer();
  tc.steps = cfg.integer("ablate.steps");
  fs::create_directories(out);
  cfg.write_sidecar(out);
  std::string csv = "variant,maf_params,final_train_loss,heldout_loss\r\n";
  for (auto mode : {MafMode::off, MafMode::no_gate, MafMode::no_query, MafMode::full}) {
    auto mc = cfg.model();
    mc.maf_mode = mode;
    auto model = make_model<float>(mc);
    const auto sched = diffusion::model_schedule(mc);
    auto state = train::init_state(model.params);
    double tail = 0.0;
    const std::int64_t window = std::min<std::int64_t>(100, tc.steps);
    for (std::int64_t s = 0; s < tc.steps; ++s) {
      const double l = train::train_step(model, state, data, sched, tc);
      if (s >= tc.steps - window) tail += l / static_cast<double>(window);
    }
    const double held = train::heldout_loss(train::with_ema(model, state), heldout, sched,
                                            static_cast<std::uint64_t>(cfg.integer("ablate.seed")));
    const auto params = active_maf_params(model.params, mode);
    char row[160];
    std::snprintf(row, sizeof row, "%s,%lld,%.9g,%.9g\r\n", std::string(to_string(mode)).c_str(),
                  static_cast<long long>(params), tail, held);
    csv += row;
    std::cout << row << std::flush;
  }
  io::write_text(out / "ablation.csv", csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"audiox: toy anything-to-audio diffusion"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show every config key");

  using Runner = int (*)(const cli::RunConfig&);
  const std::vector<std::tuple<std::string, std::string, Runner>> commands{
      {"synth", "Generate an annotated synthetic dataset", run_synth},
      {"train", "Train a model; writes checkpoints and loss.csv", run_train},
      {"sample", "Sample WAVs for condition bundles", run_sample},
      {"eval", "Distribution metrics between reference and generated clips", run_eval},
      {"bench", "Instruction-following benchmark judged by the oracle detector", run_bench},
      {"ablate", "Train and compare the four fusion variants", run_ablate},
  };

  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> prompts;
  std::optional<std::int64_t> seed, n_per_type;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help, run] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Flat JSON config with dotted keys");
    sub->add_option("--seed", seed, "Seed of this command's random stream");
    if (name == "sample") sub->add_option("--prompt", prompts, "Text prompt; repeat for a batch");
    if (name == "bench") sub->add_option("--n-per-type", n_per_type, "Prompts per type (multiple of 5)");
    for (const auto& [key, def] : cli::RunConfig::defaults().items()) {
      auto* opt = sub->add_option_function<std::string>(
          "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, "default " + def.dump());
      opt->group("Config keys")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    cli::RunConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (const auto& [key, v] : overrides) cfg.set(key, v);
    std::string command;
    Runner run = nullptr;
    for (const auto& [name, help, r] : commands)
      if (subs[name]->parsed()) command = name, run = r;
    if (seed) {
      const std::map<std::string, std::string> seed_key{{"synth", "data.seed"},    {"train", "train.seed"},
                                                        {"sample", "sampler.seed"}, {"eval", "sampler.seed"},
                                                        {"bench", "bench.seed"},    {"ablate", "train.seed"}};
      cfg.set(seed_key.at(command), std::to_string(*seed));
    }
    if (!prompts.empty()) cfg.merge(io::json{{"sample.prompts", prompts}}, "--prompt");
    if (n_per_type) cfg.set("bench.n_per_type", std::to_string(*n_per_type));
    cfg.validate();
    return run(cfg);
  } catch (const cli::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
