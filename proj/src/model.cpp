#include "vip/model.hpp"

#include "vip/text.hpp"

#include <cmath>
#include <random>

namespace vip {

using ad::Var;

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::transformer:
      return "transformer";
    case Fusion::mlp:
      return "mlp";
    case Fusion::gated:
      return "gated";
    case Fusion::none:
      return "none";
  }
  return "transformer";
}

Fusion fusion_from_string(const std::string& s) {
  if (s == "transformer") return Fusion::transformer;
  if (s == "mlp") return Fusion::mlp;
  if (s == "gated") return Fusion::gated;
  if (s == "none") return Fusion::none;
  throw ConfigError("unknown fusion variant '" + s + "'");
}

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["dim"] = c.dim;
  j["heads"] = c.heads;
  j["text_depth"] = c.text_depth;
  j["relate_depth"] = c.relate_depth;
  j["lip_dim"] = c.lip_dim;
  j["vocab"] = c.vocab;
  j["max_tokens"] = c.max_tokens;
  j["max_frames"] = c.max_frames;
  j["tau_c"] = c.tau_c;
  j["ln_eps"] = c.ln_eps;
  j["fusion"] = to_string(c.fusion);
  j["use_text"] = c.use_text;
  j["disabled_cues"] = std::vector<std::string>(c.disabled_cues.begin(), c.disabled_cues.end());
  j["seed"] = c.seed;
  j["cue"] = {{"action_provider", c.cue.action_provider},
              {"provider_seed", c.cue.provider_seed},
              {"block_length", c.cue.block_length},
              {"lip_mode", c.cue.lip_mode == cues::LipMode::per_frame ? "per_frame" : "inter_frame"},
              {"flow_surrogate", c.cue.flow_surrogate}};
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.dim = j.value("dim", c.dim);
    c.heads = j.value("heads", c.heads);
    c.text_depth = j.value("text_depth", c.text_depth);
    c.relate_depth = j.value("relate_depth", c.relate_depth);
    c.lip_dim = j.value("lip_dim", c.lip_dim);
    c.vocab = j.value("vocab", c.vocab);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.max_frames = j.value("max_frames", c.max_frames);
    c.tau_c = j.value("tau_c", c.tau_c);
    c.ln_eps = j.value("ln_eps", c.ln_eps);
    if (j.contains("fusion")) c.fusion = fusion_from_string(j.at("fusion").get<std::string>());
    c.use_text = j.value("use_text", c.use_text);
    if (j.contains("disabled_cues")) {
      for (const auto& s : j.at("disabled_cues")) c.disabled_cues.insert(s.get<std::string>());
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("cue")) {
      const auto& q = j.at("cue");
      c.cue.action_provider = q.value("action_provider", c.cue.action_provider);
      c.cue.provider_seed = q.value("provider_seed", c.cue.provider_seed);
      c.cue.block_length = q.value("block_length", c.cue.block_length);
      const std::string mode = q.value("lip_mode", std::string("per_frame"));
      if (mode == "per_frame") {
        c.cue.lip_mode = cues::LipMode::per_frame;
      } else if (mode == "inter_frame") {
        c.cue.lip_mode = cues::LipMode::inter_frame;
      } else {
        throw ConfigError("unknown lip_mode '" + mode + "'");
      }
      c.cue.flow_surrogate = q.value("flow_surrogate", c.cue.flow_surrogate);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  validate(c);
  return c;
}

void validate(const ModelConfig& c) {
  if (c.dim < 1 || c.heads < 1 || c.dim % c.heads != 0) throw ConfigError("dim must be a positive multiple of heads");
  if (c.text_depth < 0 || c.relate_depth < 0) throw ConfigError("encoder depths must be >= 0");
  if (c.lip_dim < 1 || c.vocab < 1 || c.max_tokens < 1 || c.max_frames < 1) throw ConfigError("sizes must be >= 1");
  if (!(c.tau_c > 0)) throw ConfigError("tau_c must be > 0");
  if (!(c.ln_eps > 0)) throw ConfigError("ln_eps must be > 0");
  if (c.cue.block_length < 1) throw ConfigError("block_length must be >= 1");
  for (const auto& k : c.disabled_cues) cues::cue_index(k);
}

ClipInput make_input(const Clip& clip, const ModelConfig& config, const cues::FeatureProvider& provider) {
  if (clip.num_frames > config.max_frames)
    throw ConfigError("clip " + clip.clip_id + " has more frames than max_frames");
  ClipInput in;
  in.clip_id = clip.clip_id;
  in.category = clip.category;
  in.series = cues::extract_cues(clip, config.cue, provider);
  if (!in.series.has_clarity && !config.disabled_cues.contains("clarity"))
    throw ConfigError("clip " + clip.clip_id + " has neither pixels nor precomputed clarity");
  for (const auto& p : clip.persons) in.person_ids.push_back(p.person_id);
  in.vip_index = clip.person_index(clip.vip_person_id);
  if (config.use_text) {
    auto add = [&](const std::string& s) {
      auto ids = text::tokenize(s, config.vocab);
      if (static_cast<int>(ids.size()) > config.max_tokens) ids.resize(config.max_tokens);
      if (!ids.empty()) in.text_segments.push_back(std::move(ids));
    };
    add(clip.scene_description);
    for (int n = 0; n < clip.person_count(); ++n)
      if (in.series.person_valid(n)) add(clip.persons[n].description);
  }
  return in;
}

ClipInput crop_frames(const ClipInput& in, int start, int stop) {
  ClipInput out = in;
  auto& s = out.series;
  for (int n = 0; n < s.persons; ++n) {
    for (int f = 0; f < s.frames; ++f) {
      if (f >= start && f < stop) continue;
      s.frame_valid(n, f) = false;
      s.lip_valid(n, f) = false;
      s.centrality(n, f) = s.area(n, f) = s.clarity(n, f) = s.action(n, f) = s.motion(n, f) = 0;
      s.lip_aperture[n].row(f).setZero();
    }
    s.person_valid(n) = s.frame_valid.row(n).any();
  }
  return out;
}

namespace {

template <class S>
void add_attention(ParamStore<S>& ps, const std::string& prefix, int d, std::mt19937_64& rng) {
  for (const char* w : {"wq", "wk", "wv", "wo"}) ps.add(prefix + w, scaled_uniform<S>(d, d, rng));
}

template <class S>
void add_norm(ParamStore<S>& ps, const std::string& prefix, int d) {
  ps.add(prefix + "g", Mat<S>::Ones(1, d));
  ps.add(prefix + "b", Mat<S>::Zero(1, d));
}

template <class S>
void add_mlp(ParamStore<S>& ps, const std::string& prefix, int in, int hidden, int out, std::mt19937_64& rng) {
  ps.add(prefix + "w1", scaled_uniform<S>(in, hidden, rng));
  ps.add(prefix + "b1", Mat<S>::Zero(1, hidden));
  ps.add(prefix + "w2", scaled_uniform<S>(hidden, out, rng));
  ps.add(prefix + "b2", Mat<S>::Zero(1, out));
}

template <class S>
void add_encoder(ParamStore<S>& ps, const std::string& prefix, int d, std::mt19937_64& rng) {
  add_attention(ps, prefix + "attn.", d, rng);
  add_norm(ps, prefix + "ln1.", d);
  add_mlp(ps, prefix + "ff.", d, 2 * d, d, rng);
  add_norm(ps, prefix + "ln2.", d);
}

template <class S>
rect::AttentionParams<S> attention(Binder<S>& b, const std::string& p) {
  return {b(p + "wq"), b(p + "wk"), b(p + "wv"), b(p + "wo")};
}

template <class S>
rect::NormParams<S> norm(Binder<S>& b, const std::string& p) {
  return {b(p + "g"), b(p + "b")};
}

template <class S>
rect::MlpParams<S> mlp(Binder<S>& b, const std::string& p) {
  return {b(p + "w1"), b(p + "b1"), b(p + "w2"), b(p + "b2")};
}

template <class S>
rect::EncoderLayerParams<S> encoder(Binder<S>& b, const std::string& p) {
  return {attention(b, p + "attn."), norm(b, p + "ln1."), mlp(b, p + "ff."), norm(b, p + "ln2.")};
}

}  // namespace

template <class S>
ParamStore<S> init_params(const ModelConfig& c) {
  validate(c);
  ParamStore<S> ps;
  std::mt19937_64 rng(splitmix64(c.seed));
  const int d = c.dim, e = c.lip_dim;

  // softplus(log(e - 1)) = 1
  ps.add("lip.lambda", Mat<S>::Constant(c.max_frames, 1, static_cast<S>(std::log(std::exp(1.0) - 1.0))));
  ps.add("lip.w_in", scaled_uniform<S>(2, e, rng));
  for (const char* w : {"lip.wq", "lip.wk", "lip.wv", "lip.w_out"}) ps.add(w, scaled_uniform<S>(e, e, rng));

  for (auto cue : cues::kCueNames) {
    const std::string p = "lift." + std::string(cue) + ".";
    ps.add(p + "w", scaled_uniform<S>(1, d, rng));
    ps.add(p + "b", Mat<S>::Zero(1, d));
  }
  ps.add("fuse.w_v", scaled_uniform<S>(d, d, rng));
  ps.add("fuse.b_v", Mat<S>::Zero(1, d));
  ps.add("fuse.q_spatial", scaled_uniform<S>(d, 1, rng).transpose());
  ps.add("fuse.q_temporal", scaled_uniform<S>(d, 1, rng).transpose());

  if (c.use_text) {
    ps.add("text.tok", scaled_uniform<S>(d, c.vocab, rng).transpose());
    ps.add("text.pos", scaled_uniform<S>(d, c.max_tokens, rng).transpose());
    for (int l = 0; l < c.text_depth; ++l) add_encoder(ps, "text.l" + std::to_string(l) + ".", d, rng);
    add_mlp(ps, "text.mlp.", d, d, d, rng);
    add_mlp(ps, "gate.", d, d, d, rng);
  }

  switch (c.fusion) {
    case Fusion::transformer:
      add_attention(ps, "align.attn.", d, rng);
      break;
    case Fusion::mlp:
      add_mlp(ps, "align.mix.", 2 * d, d, d, rng);
      break;
    case Fusion::gated:
      ps.add("align.gate.w", scaled_uniform<S>(2 * d, d, rng));
      ps.add("align.gate.b", Mat<S>::Zero(1, d));
      break;
    case Fusion::none:
      break;
  }
  add_norm(ps, "align.ln.", d);

  ps.add("pool.w_p", scaled_uniform<S>(d, d, rng));
  ps.add("pool.b_p", Mat<S>::Zero(1, d));
  ps.add("pool.q_p", scaled_uniform<S>(d, 1, rng).transpose());

  for (int l = 0; l < c.relate_depth; ++l) add_encoder(ps, "relate.l" + std::to_string(l) + ".", d, rng);
  ps.add("cls.w", scaled_uniform<S>(d, 1, rng).transpose());
  return ps;
}

template <class S>
std::optional<Var<S>> encode_text(Binder<S>& bind, const ModelConfig& config,
                                  const std::vector<std::vector<int>>& segments) {
  if (segments.empty()) return std::nullopt;
  ad::Tape<S>& tape = bind.tape();
  Param<S>& tok = bind.store().at("text.tok");
  Param<S>& pos = bind.store().at("text.pos");
  std::vector<rect::EncoderLayerParams<S>> layers;
  for (int l = 0; l < config.text_depth; ++l) layers.push_back(encoder(bind, "text.l" + std::to_string(l) + "."));
  const S eps = static_cast<S>(config.ln_eps);
  std::vector<Var<S>> encoded;
  for (const auto& seg : segments) {
    std::vector<int> ids(seg.begin(), seg.begin() + std::min<std::size_t>(seg.size(), config.max_tokens));
    if (ids.empty()) continue;
    std::vector<int> where(ids.size());
    for (std::size_t i = 0; i < where.size(); ++i) where[i] = static_cast<int>(i);
    Var<S> x = ad::add(ad::embed(tape, tok.value, bind.tracking() ? &tok.grad : nullptr, ids),
                       ad::embed(tape, pos.value, bind.tracking() ? &pos.grad : nullptr, where));
    for (const auto& l : layers) x = rect::encoder_layer(x, l, config.heads, eps);
    encoded.push_back(x);
  }
  if (encoded.empty()) return std::nullopt;
  Var<S> all = encoded.size() == 1 ? encoded.front() : ad::concat_rows<S>(encoded);
  return rect::mlp(ad::mean_rows(all), mlp(bind, "text.mlp."));
}

template <class S>
Var<S> lip_salience(Binder<S>& bind, const ModelConfig& config, Var<S> aperture, const std::vector<int>& frames) {
  ad::Tape<S>& tape = bind.tape();
  const Eigen::Index rows = aperture.rows();
  if (rows < 2) return tape.constant(Mat<S>::Zero(rows, 1));
  std::vector<int> at(frames);
  for (auto& f : at) f = std::min(f, config.max_frames - 1);
  Var<S> lambda = ad::softplus(ad::gather_rows(bind("lip.lambda"), at));
  Var<S> x = ad::matmul(ad::mul_col(aperture, lambda), bind("lip.w_in"));
  const S inv_sqrt = S(1) / std::sqrt(S(config.lip_dim));
  Var<S> q = ad::matmul(x, bind("lip.wq"));
  Var<S> k = ad::matmul(x, bind("lip.wk"));
  Var<S> v = ad::matmul(x, bind("lip.wv"));
  Var<S> a = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv_sqrt));
  Var<S> y = ad::add(x, ad::matmul(a, v));
  Var<S> z = ad::matmul(y, bind("lip.w_out"));
  return ad::smooth_row_norms(z, static_cast<S>(1e-6));
}

template <class S>
Var<S> lift_cue(Binder<S>& bind, int cue, Var<S> column) {
  const std::string p = "lift." + std::string(cues::kCueNames[cue]) + ".";
  return ad::add_row(ad::matmul(column, bind(p + "w")), bind(p + "b"));
}

template <class S>
ForwardResult<S> forward(Binder<S>& bind, const ModelConfig& config, const ClipInput& in,
                         const ForwardOptions& options) {
  ad::Tape<S>& tape = bind.tape();
  const auto& s = in.series;
  const int n = s.persons, t = s.frames, d = config.dim;
  const S eps = static_cast<S>(config.ln_eps);

  ForwardResult<S> r;
  for (int i = 0; i < n; ++i)
    if (s.person_valid(i)) r.valid.push_back(i);
  if (r.valid.empty()) throw DataError("clip " + in.clip_id + " has no valid person");

  // Stacked row layout: valid persons in order, each person's valid frames.
  std::vector<std::vector<int>> frames(n);
  std::vector<std::pair<int, int>> cells;
  std::vector<Eigen::Index> offset(n, 0);
  for (int i : r.valid) {
    offset[i] = static_cast<Eigen::Index>(cells.size());
    for (int f = 0; f < t; ++f) {
      if (!s.frame_valid(i, f)) continue;
      frames[i].push_back(f);
      cells.emplace_back(i, f);
    }
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(cells.size());

  const Eigen::MatrixXd* series[4] = {&s.centrality, &s.area, &s.clarity, &s.action};
  std::vector<Var<S>> column(5);
  for (int k = 0; k < 4; ++k) {
    if (options.track_inputs) {
      Var<S> leaf = tape.variable(series[k]->template cast<S>());
      r.inputs.push_back(leaf);
      column[k == 3 ? cues::kAction : k] = ad::gather_entries(leaf, cells);
    } else {
      Mat<S> m(rows, 1);
      for (Eigen::Index j = 0; j < rows; ++j) m(j, 0) = static_cast<S>((*series[k])(cells[j].first, cells[j].second));
      column[k == 3 ? cues::kAction : k] = tape.constant(std::move(m));
    }
  }

  // Lip salience per person, placed on that person's valid-frame rows.
  r.lip_scores = Mat<S>::Zero(n, t);
  {
    std::vector<Var<S>> parts;
    for (int i = 0; i < n; ++i) {
      Var<S> leaf;
      if (options.track_inputs) {
        leaf = tape.variable(s.lip_aperture[i].template cast<S>());
        r.lip_inputs.push_back(leaf);
      }
      if (!s.person_valid(i)) continue;
      std::vector<int> lip_frames, lip_pos;
      for (std::size_t j = 0; j < frames[i].size(); ++j) {
        if (!s.lip_valid(i, frames[i][j])) continue;
        lip_frames.push_back(frames[i][j]);
        lip_pos.push_back(static_cast<int>(j));
      }
      Var<S> ap = options.track_inputs ? ad::gather_rows(leaf, lip_frames) : [&] {
        Mat<S> m(static_cast<Eigen::Index>(lip_frames.size()), 2);
        for (std::size_t j = 0; j < lip_frames.size(); ++j) m.row(j) = s.lip_aperture[i].row(lip_frames[j]).template cast<S>();
        return tape.constant(std::move(m));
      }();
      Var<S> score = lip_salience(bind, config, ap, lip_frames);
      Var<S> placed = ad::scatter_rows(score, lip_pos, static_cast<Eigen::Index>(frames[i].size()));
      for (std::size_t j = 0; j < lip_frames.size(); ++j) r.lip_scores(i, lip_frames[j]) = score.value()(j, 0);
      parts.push_back(placed);
    }
    column[cues::kLip] = parts.size() == 1 ? parts.front() : ad::concat_rows<S>(parts);
  }

  // Lift each scalar to D and fuse within each modality.
  auto lift = [&](int k) { return lift_cue(bind, k, column[k]); };
  auto fuse = [&](std::initializer_list<int> ks, const char* q, std::vector<Mat<S>>& gate_out) {
    std::vector<Var<S>> xs;
    std::vector<int> kept;
    for (int k : ks) {
      if (config.disabled_cues.contains(std::string(cues::kCueNames[k]))) continue;
      xs.push_back(lift(k));
      kept.push_back(k);
    }
    if (xs.empty()) return tape.constant(Mat<S>::Zero(rows, d));
    std::vector<Mat<S>> g;
    Var<S> f = rect::intra_fuse<S>(xs, bind("fuse.w_v"), bind("fuse.b_v"), bind(q), &g);
    for (const auto& col : g) {
      Mat<S> full = Mat<S>::Zero(n, t);
      for (Eigen::Index j = 0; j < rows; ++j) full(cells[j].first, cells[j].second) = col(j, 0);
      gate_out.push_back(std::move(full));
    }
    return f;
  };
  Var<S> f_s = fuse({cues::kCentrality, cues::kArea, cues::kClarity}, "fuse.q_spatial", r.spatial_gates);
  Var<S> f_d = fuse({cues::kAction, cues::kLip}, "fuse.q_temporal", r.temporal_gates);

  if (config.use_text) {
    r.text = encode_text(bind, config, in.text_segments);
    if (r.text) {
      const auto gate = mlp(bind, "gate.");
      f_s = rect::semantic_gate(f_s, r.text, gate);
      f_d = rect::semantic_gate(f_d, r.text, gate);
    }
  }

  // Alignment, then per-person pooling.
  const auto ln = norm(bind, "align.ln.");
  std::optional<Var<S>> mixed;
  switch (config.fusion) {
    case Fusion::transformer:
      break;
    case Fusion::mlp:
      mixed = rect::layer_norm(
          ad::add(f_s, rect::mlp(ad::concat_cols<S>(std::vector<Var<S>>{f_s, f_d}), mlp(bind, "align.mix."))), ln, eps);
      break;
    case Fusion::gated: {
      Var<S> g = ad::sigmoid(ad::add_row(ad::matmul(ad::concat_cols<S>(std::vector<Var<S>>{f_s, f_d}), bind("align.gate.w")),
                                         bind("align.gate.b")));
      mixed = rect::layer_norm(ad::add(f_s, ad::mul(g, f_d)), ln, eps);
      break;
    }
    case Fusion::none:
      mixed = rect::layer_norm(ad::add(f_s, f_d), ln, eps);
      break;
  }
  const rect::PoolParams<S> pool{bind("pool.w_p"), bind("pool.b_p"), bind("pool.q_p")};
  r.pool_weights = Mat<S>::Zero(n, t);
  r.maps.assign(n, {});
  r.empty_align.assign(n, false);
  std::vector<Var<S>> persons;
  for (int i : r.valid) {
    const Eigen::Index len = static_cast<Eigen::Index>(frames[i].size());
    Var<S> aligned;
    if (config.fusion == Fusion::transformer) {
      std::vector<Mat<S>> local;
      aligned = rect::align(ad::slice_rows(f_s, offset[i], len), ad::slice_rows(f_d, offset[i], len),
                            attention(bind, "align.attn."), ln, config.heads, eps, options.keep_maps ? &local : nullptr);
      for (const auto& m : local) {
        Mat<S> full = Mat<S>::Zero(t, t);
        for (Eigen::Index a = 0; a < len; ++a)
          for (Eigen::Index b = 0; b < len; ++b) full(frames[i][a], frames[i][b]) = m(a, b);
        r.maps[i].push_back(std::move(full));
      }
    } else {
      aligned = ad::slice_rows(*mixed, offset[i], len);
    }
    auto pooled = rect::temporal_pool(aligned, pool);
    for (Eigen::Index j = 0; j < len; ++j) r.pool_weights(i, frames[i][j]) = pooled.weights.value()(0, j);
    persons.push_back(pooled.person);
  }
  Var<S> p = persons.size() == 1 ? persons.front() : ad::concat_rows<S>(persons);

  std::vector<rect::EncoderLayerParams<S>> layers;
  for (int l = 0; l < config.relate_depth; ++l) layers.push_back(encoder(bind, "relate.l" + std::to_string(l) + "."));
  r.h = rect::relate<S>(p, layers, config.heads, eps);

  // Cosine classifier over rows with a non-zero norm, non-finite ones included.
  const Vec<S> norms = r.h.value().rowwise().norm();
  for (Eigen::Index j = 0; j < norms.size(); ++j)
    if (norms(j) != S(0)) r.scored.push_back(static_cast<int>(j));
  r.probabilities.assign(n, 0.0);
  if (r.scored.empty()) return r;
  Var<S> hs = r.scored.size() == r.valid.size() ? r.h : ad::gather_rows(r.h, r.scored);
  r.logits = ad::div_col(ad::matmul_nt(hs, bind("cls.w")), ad::scale(ad::row_norms(hs), static_cast<S>(config.tau_c)));
  const Mat<S>& lg = r.logits->value();
  const double m = static_cast<double>(lg.maxCoeff());
  double z = 0;
  for (Eigen::Index j = 0; j < lg.rows(); ++j) z += std::exp(static_cast<double>(lg(j, 0)) - m);
  for (Eigen::Index j = 0; j < lg.rows(); ++j)
    r.probabilities[r.valid[r.scored[j]]] = std::exp(static_cast<double>(lg(j, 0)) - m) / z;
  return r;
}

Eigen::MatrixXd cue_means(const cues::CueSeries& s, const Eigen::MatrixXd& lip_scores) {
  Eigen::MatrixXd out(s.persons, 5);
  for (int i = 0; i < s.persons; ++i) {
    out(i, cues::kCentrality) = cues::mean_over_valid(s.centrality, s.frame_valid, i);
    out(i, cues::kArea) = cues::mean_over_valid(s.area, s.frame_valid, i);
    out(i, cues::kClarity) = cues::mean_over_valid(s.clarity, s.frame_valid, i);
    out(i, cues::kLip) = cues::mean_over_valid(lip_scores, s.frame_valid, i);
    out(i, cues::kAction) = cues::mean_over_valid(s.action, s.frame_valid, i);
  }
  return out;
}

template ParamStore<float> init_params<float>(const ModelConfig&);
template ParamStore<double> init_params<double>(const ModelConfig&);
template ForwardResult<float> forward<float>(Binder<float>&, const ModelConfig&, const ClipInput&, const ForwardOptions&);
template ForwardResult<double> forward<double>(Binder<double>&, const ModelConfig&, const ClipInput&,
                                               const ForwardOptions&);
template std::optional<Var<float>> encode_text<float>(Binder<float>&, const ModelConfig&,
                                                      const std::vector<std::vector<int>>&);
template std::optional<Var<double>> encode_text<double>(Binder<double>&, const ModelConfig&,
                                                        const std::vector<std::vector<int>>&);
template Var<float> lip_salience<float>(Binder<float>&, const ModelConfig&, Var<float>, const std::vector<int>&);
template Var<double> lip_salience<double>(Binder<double>&, const ModelConfig&, Var<double>, const std::vector<int>&);
template Var<float> lift_cue<float>(Binder<float>&, int, Var<float>);
template Var<double> lift_cue<double>(Binder<double>&, int, Var<double>);

}  // namespace vip
