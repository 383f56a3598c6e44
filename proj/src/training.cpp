#include "vip/training.hpp"

#include "vip/scene_synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace vip {

using ad::Var;

nlohmann::json to_json(const LossBreakdown& l) {
  return {{"total", l.total},
          {"cls", l.cls},
          {"text", l.text},
          {"cont", l.cont},
          {"reg", l.reg},
          {"lambda_text", l.weights.text},
          {"lambda_cont", l.weights.cont},
          {"lambda_reg", l.weights.reg}};
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"base_lr", c.base_lr},
          {"weight_decay", c.weight_decay},
          {"warmup_epochs", c.warmup_epochs},
          {"seed", c.seed},
          {"lambda_text", c.lambda.text},
          {"lambda_cont", c.lambda.cont},
          {"lambda_reg", c.lambda.reg},
          {"tau_cont", c.tau_cont},
          {"view_fraction", c.view_fraction},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"embedder", c.embedder}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.base_lr = j.value("base_lr", c.base_lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.seed = j.value("seed", c.seed);
    c.lambda.text = j.value("lambda_text", c.lambda.text);
    c.lambda.cont = j.value("lambda_cont", c.lambda.cont);
    c.lambda.reg = j.value("lambda_reg", c.lambda.reg);
    c.tau_cont = j.value("tau_cont", c.tau_cont);
    c.view_fraction = j.value("view_fraction", c.view_fraction);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.embedder = j.value("embedder", c.embedder);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad train config: ") + e.what());
  }
  validate(c);
  return c;
}

void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(c.base_lr > 0)) throw ConfigError("base_lr must be > 0");
  if (c.weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
  if (c.warmup_epochs < 0 || c.warmup_epochs > c.epochs) throw ConfigError("warmup_epochs must lie in [0, epochs]");
  if (c.lambda.text < 0 || c.lambda.cont < 0 || c.lambda.reg < 0) throw ConfigError("loss weights must be >= 0");
  if (!(c.tau_cont > 0)) throw ConfigError("tau_cont must be > 0");
  if (!(c.view_fraction > 0) || c.view_fraction > 1) throw ConfigError("view_fraction must lie in (0, 1]");
}

double lr_at(long step, long total_steps, long warmup_steps, double base_lr) {
  if (step < warmup_steps) return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const long decay = total_steps - warmup_steps;
  if (decay <= 0) return base_lr;
  const double p = std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(decay));
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * p));
}

double loss_cls(const std::vector<double>& probabilities, int truth, const std::vector<bool>& valid) {
  if (truth < 0 || truth >= static_cast<int>(probabilities.size()) || !valid[truth])
    throw DataError("ground-truth VIP is not a valid person");
  double z = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i)
    if (valid[i]) z += probabilities[i];
  return -std::log(probabilities[truth] / z);
}

double loss_text(const std::string& pred, const std::string& truth, const text::SentenceEmbeddingProvider& provider) {
  if (truth.empty()) return 0.0;
  return 1.0 - text::cosine_similarity(provider.embed(pred), provider.embed(truth));
}

double loss_cont(const Eigen::RowVectorXd& anchor, const Eigen::RowVectorXd& positive,
                 const std::vector<Eigen::RowVectorXd>& negatives, double tau) {
  if (negatives.empty()) return 0.0;
  auto cos = [](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); };
  std::vector<double> z{cos(anchor, positive) / tau};
  for (const auto& n : negatives) z.push_back(cos(anchor, n) / tau);
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s) - z.front();
}

namespace {

template <class S>
Var<S> normalize_rows(Var<S> x) {
  return ad::div_col(x, ad::row_norms(x));
}

template <class S>
Var<S> sum_vars(const std::vector<Var<S>>& xs) {
  Var<S> acc = xs.front();
  for (std::size_t i = 1; i < xs.size(); ++i) acc = ad::add(acc, xs[i]);
  return acc;
}

int position(const std::vector<int>& v, int x) {
  const auto it = std::find(v.begin(), v.end(), x);
  return it == v.end() ? -1 : static_cast<int>(it - v.begin());
}

}  // namespace

template <class S>
BatchObjective<S> batch_objective(Binder<S>& bind, const ModelConfig& model, const TrainConfig& train,
                                  const std::vector<TrainSample>& batch,
                                  const text::SentenceEmbeddingProvider& embedder) {
  if (batch.empty()) throw DataError("empty batch");
  BatchObjective<S> out;
  out.loss.weights = train.lambda;
  const bool want_cont = train.lambda.cont > 0;

  std::vector<Var<S>> cls_terms, anchors, positives, negatives;
  std::vector<double> text_terms;
  for (const auto& sample : batch) {
    const ClipInput& in = *sample.view;
    auto fwd = forward(bind, model, in);
    out.results.push_back(summarize(fwd, in));
    const int v = position(fwd.valid, in.vip_index);
    const int k = v < 0 ? -1 : position(fwd.scored, v);
    if (k < 0) throw DataError("clip " + in.clip_id + ": ground-truth VIP is not a valid person");
    cls_terms.push_back(ad::sub(ad::logsumexp(*fwd.logits), ad::pick(*fwd.logits, k, 0)));

    if (!sample.rationale.empty()) {
      const Rationale r = make_rationale(out.results.back().per_cue_rank);
      text_terms.push_back(loss_text(r.template_text, sample.rationale, embedder));
    }

    if (want_cont) {
      anchors.push_back(ad::gather_rows(fwd.h, {v}));
      std::vector<int> others;
      for (int j = 0; j < static_cast<int>(fwd.valid.size()); ++j)
        if (j != v) others.push_back(j);
      if (!others.empty()) negatives.push_back(ad::gather_rows(fwd.h, others));
      const ClipInput& second = sample.second != nullptr ? *sample.second : in;
      auto fwd2 = forward(bind, model, second);
      const int v2 = position(fwd2.valid, second.vip_index);
      if (v2 < 0) throw DataError("clip " + in.clip_id + ": VIP missing from the augmented view");
      positives.push_back(ad::gather_rows(fwd2.h, {v2}));
    }
  }

  const S inv_b = S(1) / static_cast<S>(batch.size());
  Var<S> cls = ad::scale(sum_vars(cls_terms), inv_b);
  out.loss.cls = static_cast<double>(cls.scalar());
  Var<S> graph = cls;

  if (want_cont && !negatives.empty()) {
    Var<S> neg = normalize_rows(negatives.size() == 1 ? negatives.front() : ad::concat_rows<S>(negatives));
    const S inv_tau = static_cast<S>(1.0 / train.tau_cont);
    std::vector<Var<S>> terms;
    for (std::size_t b = 0; b < anchors.size(); ++b) {
      Var<S> a = normalize_rows(anchors[b]);
      Var<S> pos = ad::sum_all(ad::mul(a, normalize_rows(positives[b])));
      Var<S> z = ad::scale(ad::concat_rows<S>(std::vector<Var<S>>{pos, ad::matmul_nt(neg, a)}), inv_tau);
      terms.push_back(ad::sub(ad::logsumexp(z), ad::pick(z, 0, 0)));
    }
    Var<S> cont = ad::scale(sum_vars(terms), inv_b);
    out.loss.cont = static_cast<double>(cont.scalar());
    graph = ad::add(graph, ad::scale(cont, static_cast<S>(train.lambda.cont)));
    out.cont_in_graph = true;
  }

  if (!text_terms.empty())
    out.loss.text = std::accumulate(text_terms.begin(), text_terms.end(), 0.0) / static_cast<double>(text_terms.size());
  out.loss.reg = squared_norm(bind.store());
  out.loss.total = out.loss.combined();
  out.graph = graph;
  return out;
}

template <class S>
double squared_norm(const ParamStore<S>& store) {
  double s = 0;
  for (const auto& p : store.all()) s += static_cast<double>(p.value.squaredNorm());
  return s;
}

template <class S>
void add_reg_grad(ParamStore<S>& store, double lambda_reg) {
  if (lambda_reg == 0) return;
  for (auto& p : store.all()) p.grad += p.value * static_cast<S>(2 * lambda_reg);
}

template BatchObjective<float> batch_objective<float>(Binder<float>&, const ModelConfig&, const TrainConfig&,
                                                      const std::vector<TrainSample>&,
                                                      const text::SentenceEmbeddingProvider&);
template BatchObjective<double> batch_objective<double>(Binder<double>&, const ModelConfig&, const TrainConfig&,
                                                        const std::vector<TrainSample>&,
                                                        const text::SentenceEmbeddingProvider&);
template double squared_norm<float>(const ParamStore<float>&);
template double squared_norm<double>(const ParamStore<double>&);
template void add_reg_grad<float>(ParamStore<float>&, double);
template void add_reg_grad<double>(ParamStore<double>&, double);

ClipInput jitter_view(const ClipInput& in, double fraction, std::mt19937_64& rng) {
  const int t = in.series.frames;
  const int min_len = std::max(1, static_cast<int>(std::ceil(fraction * t)));
  for (int attempt = 0; attempt < 16; ++attempt) {
    const int len = min_len + static_cast<int>(rng() % static_cast<std::uint64_t>(t - min_len + 1));
    const int start = static_cast<int>(rng() % static_cast<std::uint64_t>(t - len + 1));
    ClipInput v = crop_frames(in, start, start + len);
    if (in.vip_index >= 0 && v.series.person_valid(in.vip_index)) return v;
  }
  return in;
}

void Adam::step(ParamStore<float>& store, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float step = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(eps_), wd = static_cast<float>(wd_);
  for (auto& p : store.all()) {
    auto& [m, v] = moments_[p.name];
    if (m.size() == 0) {
      m = Mat<float>::Zero(p.value.rows(), p.value.cols());
      v = Mat<float>::Zero(p.value.rows(), p.value.cols());
    }
    const Mat<float> g = p.grad + wd * p.value;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseProduct(g);
    p.value.array() -= step * m.array() / ((v.array() * inv_c2).sqrt() + eps);
  }
}

nlohmann::json to_json(const EpochMetrics& m) {
  nlohmann::json j = {{"epoch", m.epoch}, {"lr", m.lr}, {"loss", to_json(m.loss)}, {"train_rank1", m.train_rank1}};
  j["val_rank1"] = m.val_rank1 ? nlohmann::json(*m.val_rank1) : nlohmann::json(nullptr);
  return j;
}

double rank1(const std::vector<ImportanceResult>& results, const std::vector<ClipInput>& inputs) {
  if (results.empty()) return 0.0;
  int hit = 0;
  for (std::size_t i = 0; i < results.size(); ++i)
    if (inputs[i].vip_index >= 0 && results[i].vip_id == inputs[i].person_ids[inputs[i].vip_index]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(results.size());
}

namespace {

std::vector<ImportanceResult> predict_all(ParamStore<float>& params, const ModelConfig& model,
                                          const std::vector<ClipInput>& inputs) {
  std::vector<ImportanceResult> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(predict(params, model, in));
  return out;
}

void check_finite(const LossBreakdown& l, int epoch, long step) {
  const std::pair<const char*, double> terms[] = {{"cls", l.cls}, {"text", l.text}, {"cont", l.cont}, {"reg", l.reg}};
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v))
      throw TrainingError("non-finite loss term '" + std::string(name) + "' at epoch " + std::to_string(epoch) +
                          ", step " + std::to_string(step));
}

}  // namespace

TrainedModel train(const TrainData& data, const TrainData& val, const ModelConfig& model, const TrainConfig& config,
                   const std::filesystem::path& out, const std::function<void(const EpochMetrics&)>& on_epoch) {
  validate(model);
  validate(config);
  if (data.inputs.empty()) throw DataError("training corpus is empty");
  const auto embedder = text::make_embedder(config.embedder);

  TrainedModel tm{model, config, init_params<float>(model), {}};
  Adam adam(config.beta1, config.beta2, config.adam_eps, config.weight_decay);
  std::mt19937_64 rng(splitmix64(config.seed ^ 0x7a11ULL));

  const int n = static_cast<int>(data.inputs.size());
  const int per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const long total = static_cast<long>(per_epoch) * config.epochs;
  const long warmup = static_cast<long>(per_epoch) * config.warmup_epochs;

  std::ofstream metrics;
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    metrics.open(out / "metrics.jsonl", std::ios::trunc);
    if (!metrics) throw DataError("cannot write " + (out / "metrics.jsonl").string());
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochMetrics em;
    em.epoch = epoch;
    em.loss.weights = config.lambda;
    for (int b = 0; b < per_epoch; ++b) {
      const int lo = b * config.batch_size;
      const int hi = std::min(n, lo + config.batch_size);
      std::vector<ClipInput> views;
      views.reserve(hi - lo);
      if (config.lambda.cont > 0)
        for (int i = lo; i < hi; ++i) views.push_back(jitter_view(data.inputs[order[i]], config.view_fraction, rng));
      std::vector<TrainSample> batch;
      for (int i = lo; i < hi; ++i) {
        const int idx = order[i];
        batch.push_back({&data.inputs[idx], views.empty() ? nullptr : &views[i - lo],
                         idx < static_cast<int>(data.rationales.size()) ? data.rationales[idx] : std::string()});
      }
      tm.params.zero_grad();
      ad::Tape<float> tape;
      Binder<float> bind(tape, tm.params, true);
      auto obj = batch_objective(bind, model, config, batch, *embedder);
      check_finite(obj.loss, epoch, step);
      tape.backward(*obj.graph);
      add_reg_grad(tm.params, config.lambda.reg);
      em.lr = lr_at(step, total, warmup, config.base_lr);
      adam.step(tm.params, em.lr);
      ++step;
      em.loss.cls += obj.loss.cls / per_epoch;
      em.loss.text += obj.loss.text / per_epoch;
      em.loss.cont += obj.loss.cont / per_epoch;
      em.loss.reg += obj.loss.reg / per_epoch;
    }
    em.loss.total = em.loss.combined();
    em.train_rank1 = rank1(predict_all(tm.params, model, data.inputs), data.inputs);
    if (!val.inputs.empty()) em.val_rank1 = rank1(predict_all(tm.params, model, val.inputs), val.inputs);
    tm.history.push_back(em);
    if (metrics.is_open()) metrics << to_json(em).dump() << "\n" << std::flush;
    if (on_epoch) on_epoch(em);
  }
  if (!out.empty()) save_checkpoint(tm, out / "checkpoint");
  return tm;
}

void save_checkpoint(const TrainedModel& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_params(m.params, dir / "params");
  nlohmann::json j = {{"schema", "vip.checkpoint/1"}, {"model", to_json(m.model)}, {"train", to_json(m.train)}};
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << "\n";
  if (!out) throw DataError("cannot write checkpoint manifest in " + dir.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("missing checkpoint manifest in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad checkpoint manifest: " + std::string(e.what()));
  }
  if (j.value("schema", "") != "vip.checkpoint/1") throw FormatError("unknown checkpoint schema");
  TrainedModel m{model_config_from_json(j.at("model")), train_config_from_json(j.at("train")),
                 load_params(dir / "params"), {}};
  const auto expected = init_params<float>(m.model);
  for (const auto& p : expected.all()) {
    if (!m.params.contains(p.name)) throw FormatError("checkpoint lacks parameter " + p.name);
    const auto& got = m.params.at(p.name).value;
    if (got.rows() != p.value.rows() || got.cols() != p.value.cols())
      throw FormatError("checkpoint parameter " + p.name + " has the wrong shape");
  }
  return m;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckReport grad_check(ParamStore<double>& params, const ModelConfig& model, const TrainConfig& train,
                           const std::vector<TrainSample>& batch, const GradCheckOptions& options) {
  const auto embedder = text::make_embedder(train.embedder);
  GradCheckReport report;

  params.zero_grad();
  {
    ad::Tape<double> tape;
    Binder<double> bind(tape, params, true);
    auto obj = batch_objective(bind, model, train, batch, *embedder);
    tape.backward(*obj.graph);
    report.loss = obj.loss;
  }
  std::map<std::string, Mat<double>> graph_grad;
  for (auto& p : params.all()) graph_grad[p.name] = p.grad;
  add_reg_grad(params, train.lambda.reg);

  auto loss = [&] {
    ad::Tape<double> tape;
    Binder<double> bind(tape, params, false);
    return batch_objective(bind, model, train, batch, *embedder).loss.total;
  };

  std::mt19937_64 rng(splitmix64(options.seed ^ 0x6c3cULL));
  for (auto& p : params.all()) {
    GroupError ge;
    ge.name = p.name;
    const Mat<double> analytic = p.grad;
    const double floor = std::max(1e-6, 1e-3 * analytic.cwiseAbs().maxCoeff());
    const Mat<double>& from_graph = graph_grad.at(p.name);
    std::vector<Eigen::Index> entries;
    const Eigen::Index size = p.value.size();
    if (size <= options.dense_limit) {
      entries.resize(size);
      std::iota(entries.begin(), entries.end(), Eigen::Index{0});
    } else {
      std::vector<Eigen::Index> rest;
      for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        const bool touched = from_graph.row(r).cwiseAbs().maxCoeff() > 0;
        for (Eigen::Index c = 0; c < p.value.cols(); ++c) (touched ? entries : rest).push_back(c * p.value.rows() + r);
      }
      std::shuffle(rest.begin(), rest.end(), rng);
      entries.insert(entries.end(), rest.begin(), rest.begin() + std::min<std::size_t>(rest.size(), options.sample));
    }
    for (Eigen::Index e : entries) {
      double& x = p.value.data()[e];
      const double saved = x;
      x = saved + options.step;
      const double up = loss();
      x = saved - options.step;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2 * options.step);
      const double a = analytic.data()[e];
      ge.max_rel_error = std::max(ge.max_rel_error, relative_error(a, numeric, floor));
      ge.max_abs_error = std::max(ge.max_abs_error, std::abs(a - numeric));
      ++ge.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, ge.max_rel_error);
    report.groups.push_back(ge);
  }
  params.zero_grad();
  return report;
}

std::vector<TrainSample> ToyProblem::batch() const {
  std::vector<TrainSample> b;
  for (std::size_t i = 0; i < inputs.size(); ++i) b.push_back({&inputs[i], &views[i], rationales[i]});
  return b;
}

ToyProblem make_toy_problem(std::uint64_t seed) {
  ToyProblem tp;
  tp.model.dim = 8;
  tp.model.heads = 2;
  tp.model.lip_dim = 4;
  tp.model.max_tokens = 16;
  tp.model.max_frames = 8;
  tp.model.seed = seed;
  tp.train.seed = seed;

  using synth::Channel;
  const std::vector<std::vector<synth::Interval>> schedules = {
      {{0, 4, 0, Channel::speech}, {4, 6, 2, Channel::spatial}},
      {{0, 2, 1, Channel::gesture}, {2, 6, 1, Channel::speech}},
  };
  const auto provider = cues::make_feature_provider(tp.model.cue.action_provider, tp.model.cue.provider_seed);
  for (std::size_t i = 0; i < schedules.size(); ++i) {
    synth::ScenarioSpec spec;
    spec.seed = splitmix64(seed + i);
    spec.num_persons = 3;
    spec.frames = 6;
    spec.schedule = schedules[i];
    spec.category = i == 0 ? "Office" : "Classroom";
    auto sc = synth::synthesize(spec);
    sc.clip.clip_id = "toy_" + std::to_string(i);
    tp.inputs.push_back(make_input(sc.clip, tp.model, *provider));
    tp.rationales.push_back(sc.clip.rationale_text);
  }
  for (const auto& in : tp.inputs) tp.views.push_back(crop_frames(in, 1, 6));
  return tp;
}

}  // namespace vip
