// vip: command-line entry point.

#include "vip/evaluation.hpp"
#include "vip/run_config.hpp"
#include "vip/scene_synth.hpp"
#include "vip/training.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
};

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& s) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw vip::DataError("cannot write " + path.string());
  out << s;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json file_config(const Common& c) { return c.config_path.empty() ? json::object() : vip::read_json_file(c.config_path); }

// Prints the fingerprint and dumps the effective config. Paths are recorded
// but not fingerprinted.
std::string announce(const std::string& command, const json& options, const json& paths, const Common& c) {
  json effective = {{"command", command}, {"options", options}};
  const std::string fp = vip::fingerprint(effective);
  effective["paths"] = paths;
  effective["fingerprint"] = fp;
  std::cout << "fingerprint: " << fp << "\n";
  if (!c.out.empty()) write_json(fs::path(c.out) / "config.json", effective);
  return fp;
}

vip::Split split_or_all(const std::string& s, bool& all) {
  all = s == "all";
  return all ? vip::Split::test : vip::split_from_string(s);
}

std::vector<vip::Clip> load_corpus(const fs::path& dir, const std::string& split) {
  bool all = false;
  const vip::Split want = split_or_all(split, all);
  std::vector<vip::Clip> clips;
  for (const auto& d : vip::list_clip_dirs(dir)) {
    auto loaded = vip::load_clip(d);
    if (all || loaded.clip.split == want) clips.push_back(std::move(loaded.clip));
  }
  if (clips.empty()) throw vip::ConfigError("no clips for split '" + split + "' under " + dir.string());
  return clips;
}

vip::TrainData make_train_data(const std::vector<vip::Clip>& clips, const vip::ModelConfig& m, int jobs) {
  const auto provider = vip::cues::make_feature_provider(m.cue.action_provider, m.cue.provider_seed);
  vip::TrainData d;
  d.inputs.resize(clips.size());
  vip::parallel_for(static_cast<int>(clips.size()), jobs,
                    [&](int i) { d.inputs[i] = vip::make_input(clips[i], m, *provider); });
  for (const auto& c : clips) d.rationales.push_back(c.rationale_text);
  return d;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw vip::ConfigError("not a number list: " + s);
    }
  }
  return out;
}

// --- synth -----------------------------------------------------------------

// Flag, then the config section's "seed", then VIP_SEED, then 0.
std::uint64_t seed_for(const Common& c, const json& section) {
  if (!c.seed && section.contains("seed")) return section["seed"].get<std::uint64_t>();
  return vip::resolve_seed(c.seed, 0);
}

// Flags win over the config file, which wins over the defaults.
template <class T>
T pick(const std::optional<T>& flag, const json& file, const char* key, T fallback) {
  if (flag) return *flag;
  return file.contains(key) ? file[key].get<T>() : fallback;
}

struct SynthArgs {
  std::optional<int> count, frames;
  std::optional<std::string> profile, ratios;
  std::optional<bool> central_distractor;
  std::optional<double> noise;
};

int cmd_synth(const Common& c, const SynthArgs& a) {
  if (c.out.empty()) throw vip::ConfigError("--out is required");
  json file = file_config(c).value("synth", json::object());
  vip::synth::CorpusOptions o;
  o.profile = vip::synth::profile_from_string(pick(a.profile, file, "profile", std::string("mixed")));
  o.central_distractor = pick(a.central_distractor, file, "central_distractor", false);
  o.frames = pick(a.frames, file, "frames", o.frames);
  o.noise_level = pick(a.noise, file, "noise_level", o.noise_level);
  const auto r = parse_list(pick(a.ratios, file, "ratios", std::string("0.6,0.2,0.2")));
  if (r.size() != 3) throw vip::ConfigError("--ratios needs three values");
  o.split_ratios = {r[0], r[1], r[2]};
  const int count = pick(a.count, file, "count", 100);
  const std::uint64_t seed = seed_for(c, file);
  if (count < 1) throw vip::ConfigError("--count must be positive");

  json options = {{"count", count},
                  {"seed", seed},
                  {"profile", vip::synth::to_string(o.profile)},
                  {"central_distractor", o.central_distractor},
                  {"frames", o.frames},
                  {"noise_level", o.noise_level},
                  {"ratios", r},
                  {"min_margin", o.min_margin}};
  announce("synth", options, {{"out", c.out}}, c);

  const auto corpus = vip::synth::make_corpus(count, o, seed);
  json oracle = {{"schema", "vip.oracle/1"}, {"clips", json::object()}};
  vip::parallel_for(static_cast<int>(corpus.size()), c.jobs,
                    [&](int i) { vip::save_clip(corpus[i].clip, fs::path(c.out) / corpus[i].clip.clip_id); });
  for (const auto& item : corpus) oracle["clips"][item.clip.clip_id] = vip::synth::to_json(item.label);
  write_json(fs::path(c.out) / "oracle.json", oracle);
  std::cout << "wrote " << corpus.size() << " clips to " << c.out << "\n";
  return 0;
}

// --- ingest ----------------------------------------------------------------

int cmd_ingest(const Common& c, const std::string& npz, const std::string& annotation) {
  if (c.out.empty()) throw vip::ConfigError("--out is required");
  announce("ingest", json::object(), {{"npz", npz}, {"annotation", annotation}, {"out", c.out}}, c);
  auto loaded = vip::load_dataset_clip(npz, annotation);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w.describe() << "\n";
  const auto errors = vip::validate_clip(loaded.clip);
  if (vip::has_errors(errors)) {
    for (const auto& v : errors)
      if (v.severity == vip::Severity::error) std::cerr << "error: " << v.describe() << "\n";
    throw ValidationFailure("clip " + loaded.clip.clip_id + " failed validation");
  }
  vip::save_clip(loaded.clip, fs::path(c.out) / loaded.clip.clip_id);
  std::cout << "ingested " << loaded.clip.clip_id << " (" << loaded.clip.person_count() << " persons)\n";
  return 0;
}

// --- baseline / eval ---------------------------------------------------------

struct EvalArgs {
  std::string corpus;
  std::string split = "all";
  std::string checkpoint;
  std::string cue = "centrality";
  std::optional<std::string> refine;
  std::optional<int> overlays;
};

vip::EvalOptions eval_options(const Common& c, const EvalArgs& a, const json& file) {
  vip::EvalOptions o;
  o.jobs = c.jobs;
  o.refinement_client = pick(a.refine, file, "refine", o.refinement_client);
  if (file.contains("indoor")) o.indoor = file["indoor"].get<std::set<std::string>>();
  const int overlays = pick(a.overlays, file, "overlays", 0);
  if (overlays > 0) {
    if (c.out.empty()) throw vip::ConfigError("--overlays needs --out");
    o.overlay_dir = fs::path(c.out) / "overlays";
    o.overlay_frames = overlays;
  }
  return o;
}

void emit_report(const Common& c, const vip::EvalReport& r) {
  const json j = vip::to_json(r);
  if (!c.out.empty()) write_json(fs::path(c.out) / "report.json", j);
  std::cout << j.dump(2) << "\n";
}

int cmd_baseline(const Common& c, const EvalArgs& a) {
  if (a.corpus.empty()) throw vip::ConfigError("--corpus is required");
  const json file = file_config(c).value("eval", json::object());
  const auto o = eval_options(c, a, file);
  json options = {{"cue", a.cue}, {"split", a.split}, {"indoor", o.indoor}, {"overlays", o.overlay_frames}};
  const auto fp = announce("baseline", options, {{"corpus", a.corpus}, {"out", c.out}}, c);
  const auto clips = load_corpus(a.corpus, a.split);
  emit_report(c, vip::evaluate_baseline(a.cue, clips, o, fp));
  return 0;
}

int cmd_eval(const Common& c, const EvalArgs& a) {
  if (a.corpus.empty() || a.checkpoint.empty()) throw vip::ConfigError("--corpus and --checkpoint are required");
  const json file = file_config(c).value("eval", json::object());
  const auto o = eval_options(c, a, file);
  auto m = vip::load_checkpoint(a.checkpoint);
  json options = {{"split", a.split},
                  {"indoor", o.indoor},
                  {"refine", o.refinement_client},
                  {"model", vip::to_json(m.model)},
                  {"training", vip::to_json(m.train)}};
  const auto fp = announce("eval", options, {{"corpus", a.corpus}, {"checkpoint", a.checkpoint}, {"out", c.out}}, c);
  const auto clips = load_corpus(a.corpus, a.split);
  emit_report(c, vip::evaluate_model(m.params, m.model, clips, o, fp));
  return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string corpus;
  std::string val_corpus;
  std::string train_split = "train";
  std::string val_split = "val";
  std::optional<int> epochs, batch, dim, warmup;
  std::optional<double> lr, lambda_cont, lambda_text, lambda_reg;
  std::optional<std::string> fusion;
  bool no_text = false;
  std::string sweep;
};

std::vector<vip::Clip> load_optional(const fs::path& dir, const std::string& split) {
  try {
    return load_corpus(dir, split);
  } catch (const vip::ConfigError&) {
    return {};
  }
}

int cmd_train(const Common& c, const TrainArgs& a) {
  if (a.corpus.empty() || c.out.empty()) throw vip::ConfigError("--corpus and --out are required");
  const json file = file_config(c);
  vip::ModelConfig m = vip::model_config_from_json(file.value("model", json::object()));
  vip::TrainConfig t = vip::train_config_from_json(file.value("train", json::object()));
  if (a.dim) m.dim = *a.dim;
  if (a.fusion) m.fusion = vip::fusion_from_string(*a.fusion);
  if (a.no_text) m.use_text = false;
  if (a.epochs) t.epochs = *a.epochs;
  if (a.batch) t.batch_size = *a.batch;
  if (a.warmup) t.warmup_epochs = *a.warmup;
  if (a.lr) t.base_lr = *a.lr;
  if (a.lambda_cont) t.lambda.cont = *a.lambda_cont;
  if (a.lambda_text) t.lambda.text = *a.lambda_text;
  if (a.lambda_reg) t.lambda.reg = *a.lambda_reg;
  t.seed = seed_for(c, file.value("train", json::object()));
  m.seed = t.seed;
  vip::validate(m);
  vip::validate(t);
  const auto sweep = parse_list(a.sweep);

  json options = {{"model", vip::to_json(m)},
                  {"train", vip::to_json(t)},
                  {"train_split", a.train_split},
                  {"val_split", a.val_split},
                  {"sweep_lambda_cont", sweep}};
  announce("train", options, {{"corpus", a.corpus}, {"val_corpus", a.val_corpus}, {"out", c.out}}, c);

  const auto train_clips = load_corpus(a.corpus, a.train_split);
  const auto val_clips = load_optional(a.val_corpus.empty() ? a.corpus : a.val_corpus, a.val_split);
  const auto data = make_train_data(train_clips, m, c.jobs);
  const auto val = make_train_data(val_clips, m, c.jobs);
  std::cout << "train clips: " << train_clips.size() << ", val clips: " << val_clips.size() << "\n";

  auto progress = [](const vip::EpochMetrics& e) {
    std::printf("epoch %3d  lr %.3g  loss %.4f  cls %.4f  cont %.4f  rank1 %.3f", e.epoch, e.lr, e.loss.total,
                e.loss.cls, e.loss.cont, e.train_rank1);
    if (e.val_rank1) std::printf("  val %.3f", *e.val_rank1);
    std::printf("\n");
    std::fflush(stdout);
  };

  if (sweep.empty()) {
    const auto model = vip::train(data, val, m, t, c.out, progress);
    if (!std::isfinite(model.history.back().loss.total)) throw vip::TrainingError("training diverged");
    std::cout << "checkpoint: " << (fs::path(c.out) / "checkpoint").string() << "\n";
    return 0;
  }

  json rows = json::array();
  bool finite = true;
  for (double lc : sweep) {
    vip::TrainConfig tc = t;
    tc.lambda.cont = lc;
    char name[32];
    std::snprintf(name, sizeof name, "lambda_cont_%.2f", lc);
    std::cout << "== " << name << "\n";
    const auto model = vip::train(data, val, m, tc, fs::path(c.out) / name, progress);
    const auto& last = model.history.back();
    const bool ok = std::isfinite(last.loss.total);
    finite = finite && ok;
    json row = {{"lambda_cont", lc}, {"final_loss", ok ? json(last.loss.total) : json(nullptr)},
                {"train_rank1", last.train_rank1}, {"finite", ok}, {"run", name}};
    row["val_rank1"] = last.val_rank1 ? json(*last.val_rank1) : json(nullptr);
    rows.push_back(row);
  }
  const json report = {{"schema", "vip.sweep/1"}, {"parameter", "lambda_cont"}, {"rows", rows}};
  write_json(fs::path(c.out) / "sweep.json", report);
  std::cout << report.dump(2) << "\n";
  if (!finite) throw vip::TrainingError("a sweep run produced a non-finite loss");
  return 0;
}

// --- predict / explain ---------------------------------------------------------

struct PredictArgs {
  std::string checkpoint;
  std::vector<std::string> clips;
  std::string corpus;
  std::string split = "all";
  std::string mode = "guided";
  std::string refine = "mock";
};

std::vector<vip::Clip> gather_clips(const PredictArgs& a) {
  std::vector<vip::Clip> out;
  for (const auto& d : a.clips) out.push_back(vip::load_clip(d).clip);
  if (!a.corpus.empty()) {
    auto more = load_corpus(a.corpus, a.split);
    out.insert(out.end(), more.begin(), more.end());
  }
  if (out.empty()) throw vip::ConfigError("give --clip or --corpus");
  return out;
}

int cmd_predict(const Common& c, const PredictArgs& a, bool explain) {
  if (a.checkpoint.empty()) throw vip::ConfigError("--checkpoint is required");
  auto m = vip::load_checkpoint(a.checkpoint);
  const auto mode = vip::guidance_from_string(a.mode);
  json options = {{"model", vip::to_json(m.model)}};
  if (explain) {
    options["mode"] = a.mode;
    options["refine"] = a.refine;
  }
  announce(explain ? "explain" : "predict", options,
           {{"checkpoint", a.checkpoint}, {"clips", a.clips}, {"corpus", a.corpus}, {"out", c.out}}, c);
  const auto clips = gather_clips(a);
  const auto provider = vip::cues::make_feature_provider(m.model.cue.action_provider, m.model.cue.provider_seed);
  std::vector<vip::ImportanceResult> results(clips.size());
  vip::parallel_for(static_cast<int>(clips.size()), c.jobs, [&](int i) {
    results[i] = vip::predict(m.params, m.model, vip::make_input(clips[i], m.model, *provider));
  });
  auto client = explain ? vip::make_refinement_client(a.refine) : nullptr;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    json j;
    if (explain) {
      auto r = vip::make_rationale(results[i].per_cue_rank);
      r = vip::refine_rationale(client.get(), {clips[i].clip_id, clips[i].category}, results[i].vip_id, std::move(r),
                                mode);
      j = vip::to_json(r);
      j["clip_id"] = clips[i].clip_id;
      j["vip_id"] = results[i].vip_id;
      if (r.fallback_warning) std::cerr << "warning: " << r.warning << "\n";
    } else {
      j = vip::to_json(results[i]);
    }
    std::cout << j.dump() << "\n";
    if (!c.out.empty())
      write_json(fs::path(c.out) / (explain ? "rationales" : "predictions") / (clips[i].clip_id + ".json"), j);
  }
  return 0;
}

// --- gradcheck -----------------------------------------------------------------

int cmd_gradcheck(const Common& c, double tolerance) {
  const std::uint64_t seed = seed_for(c, file_config(c).value("gradcheck", json::object()));
  json options = {{"seed", seed}, {"tolerance", tolerance}};
  announce("gradcheck", options, {{"out", c.out}}, c);
  auto toy = vip::make_toy_problem(seed);
  auto params = vip::init_params<double>(toy.model);
  vip::GradCheckOptions go;
  go.seed = seed;
  const auto report = vip::grad_check(params, toy.model, toy.train, toy.batch(), go);
  json groups = json::array();
  for (const auto& g : report.groups) {
    std::printf("%-28s checked %4d  max rel %.3e  max abs %.3e\n", g.name.c_str(), g.checked, g.max_rel_error,
                g.max_abs_error);
    groups.push_back({{"name", g.name}, {"checked", g.checked}, {"max_rel_error", g.max_rel_error},
                      {"max_abs_error", g.max_abs_error}});
  }
  std::printf("max relative error: %.3e\n", report.max_rel_error);
  if (!c.out.empty())
    write_json(fs::path(c.out) / "gradcheck.json",
               {{"schema", "vip.gradcheck/1"}, {"max_rel_error", report.max_rel_error}, {"groups", groups}});
  if (!(report.max_rel_error < tolerance)) throw ValidationFailure("gradient check above tolerance");
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool with_out = true) {
  sub->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "seed (falls back to VIP_SEED)");
  sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  if (with_out) sub->add_option("--out", c.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VIP-Net: video important-person identification"};
  app.require_subcommand(1);
  Common common;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(s, common);
  s->add_option("--count", synth.count);
  s->add_option("--profile", synth.profile)->check(CLI::IsMember({"spatial", "speech", "gesture", "mixed"}));
  s->add_flag("--central-distractor", synth.central_distractor, "park a never-VIP person at the centre");
  s->add_option("--frames", synth.frames);
  s->add_option("--noise", synth.noise);
  s->add_option("--ratios", synth.ratios, "train,val,test fractions");

  std::string npz, annotation;
  auto* ing = app.add_subcommand("ingest", "convert a dataset clip to the canonical format");
  add_common(ing, common);
  ing->add_option("--npz", npz)->required()->check(CLI::ExistingFile);
  ing->add_option("--annotation", annotation)->required()->check(CLI::ExistingFile);

  EvalArgs ev;
  auto* bl = app.add_subcommand("baseline", "evaluate a heuristic baseline");
  add_common(bl, common);
  bl->add_option("--cue", ev.cue)->check(CLI::IsMember({"centrality", "area", "clarity"}));
  bl->add_option("--corpus", ev.corpus)->required();
  bl->add_option("--split", ev.split);
  bl->add_option("--overlays", ev.overlays, "overlay frames per clip");

  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(e, common);
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--corpus", ev.corpus)->required();
  e->add_option("--split", ev.split);
  e->add_option("--refine", ev.refine, "refinement client: mock, failing or http:<url>");
  e->add_option("--overlays", ev.overlays, "overlay frames per clip");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train VIP-Net");
  add_common(t, common);
  t->add_option("--corpus", tr.corpus)->required();
  t->add_option("--train-split", tr.train_split);
  t->add_option("--val-split", tr.val_split);
  t->add_option("--val-corpus", tr.val_corpus, "validation corpus (default: --corpus)");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch", tr.batch);
  t->add_option("--warmup", tr.warmup, "warmup epochs");
  t->add_option("--lr", tr.lr);
  t->add_option("--dim", tr.dim);
  t->add_option("--fusion", tr.fusion)->check(CLI::IsMember({"transformer", "mlp", "gated", "none"}));
  t->add_flag("--no-text", tr.no_text);
  t->add_option("--lambda-cont", tr.lambda_cont);
  t->add_option("--lambda-text", tr.lambda_text);
  t->add_option("--lambda-reg", tr.lambda_reg);
  t->add_option("--sweep-lambda-cont", tr.sweep, "comma-separated values, one run each");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "rank persons in clips");
  add_common(p, common);
  p->add_option("--checkpoint", pr.checkpoint)->required();
  p->add_option("--clip", pr.clips, "clip directory (repeatable)");
  p->add_option("--corpus", pr.corpus);
  p->add_option("--split", pr.split);

  PredictArgs ex;
  auto* x = app.add_subcommand("explain", "rationale for the predicted VIP");
  add_common(x, common);
  x->add_option("--checkpoint", ex.checkpoint)->required();
  x->add_option("--clip", ex.clips, "clip directory (repeatable)");
  x->add_option("--corpus", ex.corpus);
  x->add_option("--split", ex.split);
  x->add_option("--mode", ex.mode)->check(CLI::IsMember({"baseline", "unguided", "guided"}));
  x->add_option("--refine", ex.refine, "refinement client: mock, failing or http:<url>");

  double tolerance = 1e-4;
  auto* g = app.add_subcommand("gradcheck", "finite-difference check on the toy model");
  add_common(g, common);
  g->add_option("--tolerance", tolerance);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  }

  try {
    if (*s) return cmd_synth(common, synth);
    if (*ing) return cmd_ingest(common, npz, annotation);
    if (*bl) return cmd_baseline(common, ev);
    if (*e) return cmd_eval(common, ev);
    if (*t) return cmd_train(common, tr);
    if (*p) return cmd_predict(common, pr, false);
    if (*x) return cmd_predict(common, ex, true);
    if (*g) return cmd_gradcheck(common, tolerance);
  } catch (const ValidationFailure& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const vip::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 1;
  } catch (const vip::DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return 1;
  } catch (const vip::SpecError& err) {
    std::cerr << "spec error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return 2;
  }
  return 1;
}
