#include "vip/evaluation.hpp"

#include "vip/run_config.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace vip {

double rank_k_accuracy(const std::vector<std::vector<int>>& ranked, const std::vector<int>& truths, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (ranked.size() != truths.size()) throw std::invalid_argument("rankings and truths differ in length");
  if (ranked.empty()) return 0.0;
  int hit = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    const auto end = r.begin() + std::min<std::size_t>(r.size(), static_cast<std::size_t>(k));
    if (std::find(r.begin(), end, truths[i]) != end) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(ranked.size());
}

std::vector<int> heuristic_baseline(const cues::CueSeries& s, const std::vector<int>& person_ids,
                                    const std::string& cue) {
  const Eigen::MatrixXd* series = nullptr;
  if (cue == "centrality") {
    series = &s.centrality;
  } else if (cue == "area") {
    series = &s.area;
  } else if (cue == "clarity") {
    if (!s.has_clarity) throw ConfigError("clarity baseline needs pixels or precomputed clarity");
    series = &s.clarity;
  } else {
    throw ConfigError("unknown baseline cue '" + cue + "'");
  }
  std::vector<int> order(s.persons);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> mean(s.persons);
  for (int i = 0; i < s.persons; ++i) mean[i] = cues::mean_over_valid(*series, s.frame_valid, i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (s.person_valid(a) != s.person_valid(b)) return s.person_valid(a);
    if (mean[a] != mean[b]) return mean[a] > mean[b];
    return person_ids[a] < person_ids[b];
  });
  for (auto& o : order) o = person_ids[o];
  return order;
}

std::vector<int> heuristic_baseline(const Clip& clip, const std::string& cue) {
  const cues::MotionEnergyProvider provider;
  cues::CueConfig cc;
  const auto s = cues::extract_cues(clip, cc, provider);
  std::vector<int> ids;
  for (const auto& p : clip.persons) ids.push_back(p.person_id);
  return heuristic_baseline(s, ids, cue);
}

SimilarityStats description_similarity(const std::vector<std::string>& preds, const std::vector<std::string>& truths,
                                       const text::SentenceEmbeddingProvider& provider) {
  if (preds.size() != truths.size()) throw std::invalid_argument("prediction and truth lists differ in length");
  SimilarityStats st;
  st.count = static_cast<int>(preds.size());
  if (preds.empty()) return st;
  std::vector<double> sims;
  for (std::size_t i = 0; i < preds.size(); ++i)
    sims.push_back(text::cosine_similarity(provider.embed(preds[i]), provider.embed(truths[i])));
  st.mean = std::accumulate(sims.begin(), sims.end(), 0.0) / static_cast<double>(sims.size());
  for (double s : sims) st.variance += (s - st.mean) * (s - st.mean);
  st.variance /= static_cast<double>(sims.size());
  return st;
}

std::set<std::string> default_indoor() {
  return {"Office", "Classroom", "Conference", "Restaurant", "Home", "Courtroom", "Laboratory"};
}

namespace {

RankStats stats(const std::vector<std::vector<int>>& ranked, const std::vector<int>& truths) {
  RankStats s;
  s.count = static_cast<int>(ranked.size());
  if (ranked.empty()) return s;
  s.rank1 = rank_k_accuracy(ranked, truths, 1);
  s.rank2 = rank_k_accuracy(ranked, truths, 2);
  s.rank3 = rank_k_accuracy(ranked, truths, 3);
  return s;
}

nlohmann::json to_json(const RankStats& s) {
  return {{"count", s.count}, {"rank1", s.rank1}, {"rank2", s.rank2}, {"rank3", s.rank3}};
}

void fill_rank_tables(EvalReport& r, const std::vector<Clip>& clips, const std::vector<std::vector<int>>& ranked,
                      const EvalOptions& options) {
  std::vector<int> truths;
  std::map<std::string, std::pair<std::vector<std::vector<int>>, std::vector<int>>> by_cat;
  std::vector<std::vector<int>> in_ranked;
  std::vector<int> in_truth;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    truths.push_back(clips[i].vip_person_id);
    auto& c = by_cat[clips[i].category];
    c.first.push_back(ranked[i]);
    c.second.push_back(clips[i].vip_person_id);
    if (options.indoor.contains(clips[i].category)) {
      in_ranked.push_back(ranked[i]);
      in_truth.push_back(clips[i].vip_person_id);
    }
    r.clip_ids.push_back(clips[i].clip_id);
    r.predicted.push_back(ranked[i].empty() ? -1 : ranked[i].front());
  }
  r.overall = stats(ranked, truths);
  for (const auto& [cat, v] : by_cat) r.per_category[cat] = stats(v.first, v.second);
  r.indoor = stats(in_ranked, in_truth);
}

void write_overlays(const std::vector<Clip>& clips, const std::vector<int>& predicted, const EvalOptions& options) {
  if (options.overlay_dir.empty()) return;
  std::filesystem::create_directories(options.overlay_dir);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const int t = clips[i].num_frames;
    const int k = std::max(1, std::min(options.overlay_frames, t));
    for (int j = 0; j < k; ++j) {
      const int frame = k == 1 ? t / 2 : j * (t - 1) / (k - 1);
      write_overlay_png(clips[i], frame, predicted[i],
                        options.overlay_dir / (clips[i].clip_id + "_" + std::to_string(frame) + ".png"));
    }
  }
}

}  // namespace

EvalReport evaluate_model(ParamStore<float>& params, const ModelConfig& config, const std::vector<Clip>& clips,
                          const EvalOptions& options, const std::string& fp) {
  if (clips.empty()) throw std::invalid_argument("evaluation split is empty");
  const auto provider = cues::make_feature_provider(config.cue.action_provider, config.cue.provider_seed);
  std::vector<ClipInput> inputs(clips.size());
  std::vector<ImportanceResult> results(clips.size());
  parallel_for(static_cast<int>(clips.size()), options.jobs, [&](int i) {
    inputs[i] = make_input(clips[i], config, *provider);
    results[i] = predict(params, config, inputs[i]);
  });

  EvalReport r;
  r.source = "model";
  r.fingerprint = fp;
  std::vector<std::vector<int>> ranked;
  for (const auto& res : results) ranked.push_back(res.ranked_ids);
  fill_rank_tables(r, clips, ranked, options);

  if (options.include_baselines) {
    for (auto cue : kBaselineCues) {
      std::vector<std::vector<int>> br;
      std::vector<int> truths;
      try {
        for (std::size_t i = 0; i < clips.size(); ++i) {
          br.push_back(heuristic_baseline(inputs[i].series, inputs[i].person_ids, std::string(cue)));
          truths.push_back(clips[i].vip_person_id);
        }
      } catch (const ConfigError&) {
        continue;
      }
      r.baselines[std::string(cue)] = stats(br, truths);
    }
  }

  const auto embedder = text::make_embedder(options.embedder);
  auto client = make_refinement_client(options.refinement_client);
  for (auto mode : {GuidanceMode::baseline, GuidanceMode::unguided, GuidanceMode::guided}) {
    std::vector<std::string> preds, truths;
    for (std::size_t i = 0; i < clips.size(); ++i) {
      if (results[i].vip_id != clips[i].vip_person_id || clips[i].rationale_text.empty()) continue;
      Rationale base = make_rationale(results[i].per_cue_rank);
      Rationale out = refine_rationale(client.get(), {clips[i].clip_id, clips[i].category}, results[i].vip_id,
                                       std::move(base), mode);
      preds.push_back(out.text());
      truths.push_back(clips[i].rationale_text);
    }
    r.description[to_string(mode)] = description_similarity(preds, truths, *embedder);
  }
  write_overlays(clips, r.predicted, options);
  return r;
}

EvalReport evaluate_baseline(const std::string& cue, const std::vector<Clip>& clips, const EvalOptions& options,
                             const std::string& fp) {
  if (clips.empty()) throw std::invalid_argument("evaluation split is empty");
  std::vector<std::vector<int>> ranked(clips.size());
  parallel_for(static_cast<int>(clips.size()), options.jobs,
               [&](int i) { ranked[i] = heuristic_baseline(clips[i], cue); });
  EvalReport r;
  r.source = "baseline:" + cue;
  r.fingerprint = fp;
  fill_rank_tables(r, clips, ranked, options);
  write_overlays(clips, r.predicted, options);
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["schema"] = "vip.eval_report/1";
  j["source"] = r.source;
  j["count"] = r.overall.count;
  j["rank1"] = r.overall.rank1;
  j["rank2"] = r.overall.rank2;
  j["rank3"] = r.overall.rank3;
  j["per_category"] = nlohmann::json::object();
  for (const auto& [k, v] : r.per_category) j["per_category"][k] = to_json(v);
  j["indoor"] = to_json(r.indoor);
  j["baselines"] = nlohmann::json::object();
  for (const auto& [k, v] : r.baselines) j["baselines"][k] = to_json(v);
  j["description"] = nlohmann::json::object();
  for (const auto& [k, v] : r.description) j["description"][k] = {{"mean", v.mean}, {"variance", v.variance}, {"count", v.count}};
  j["fingerprint"] = r.fingerprint;
  nlohmann::json preds = nlohmann::json::array();
  for (std::size_t i = 0; i < r.clip_ids.size(); ++i) preds.push_back({{"clip_id", r.clip_ids[i]}, {"predicted", r.predicted[i]}});
  j["predictions"] = preds;
  return j;
}

namespace {

void put_chunk(std::ofstream& out, const char* type, const std::vector<std::uint8_t>& data) {
  auto be32 = [&](std::uint32_t v) {
    const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
    out.write(b, 4);
  };
  be32(static_cast<std::uint32_t>(data.size()));
  out.write(type, 4);
  if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  be32(static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw std::invalid_argument("RGB buffer size mismatch");
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(height) * (width * 3 + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), rgb.begin() + static_cast<std::ptrdiff_t>(y) * width * 3,
               rgb.begin() + static_cast<std::ptrdiff_t>(y + 1) * width * 3);
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(len);
  if (compress2(z.data(), &len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("PNG compression failed");
  z.resize(len);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.write(reinterpret_cast<const char*>(sig), 8);
  std::vector<std::uint8_t> ihdr = {
      std::uint8_t(width >> 24), std::uint8_t(width >> 16), std::uint8_t(width >> 8), std::uint8_t(width),
      std::uint8_t(height >> 24), std::uint8_t(height >> 16), std::uint8_t(height >> 8), std::uint8_t(height),
      8, 2, 0, 0, 0};
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
}

void write_overlay_png(const Clip& clip, int frame, int highlight_id, const std::filesystem::path& path) {
  const int w = clip.width, h = clip.height;
  std::vector<std::uint8_t> rgb;
  if (clip.frames) {
    const std::size_t plane = static_cast<std::size_t>(w) * h * 3;
    rgb.assign(clip.frames->begin() + static_cast<std::ptrdiff_t>(plane * frame),
               clip.frames->begin() + static_cast<std::ptrdiff_t>(plane * (frame + 1)));
  } else {
    rgb.assign(static_cast<std::size_t>(w) * h * 3, 128);
  }
  auto px = [&](int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    std::uint8_t* p = rgb.data() + (static_cast<std::size_t>(y) * w + x) * 3;
    p[0] = r;
    p[1] = g;
    p[2] = b;
  };
  for (const auto& p : clip.persons) {
    if (!p.present(frame)) continue;
    const int x1 = static_cast<int>(std::lround(p.boxes(frame, 0))), y1 = static_cast<int>(std::lround(p.boxes(frame, 1)));
    const int x2 = static_cast<int>(std::lround(p.boxes(frame, 2))), y2 = static_cast<int>(std::lround(p.boxes(frame, 3)));
    const bool hl = p.person_id == highlight_id;
    const int thick = hl ? 3 : 1;
    const std::uint8_t r = hl ? 230 : 255, g = hl ? 30 : 255, b = hl ? 30 : 255;
    for (int k = 0; k < thick; ++k) {
      for (int x = x1; x <= x2; ++x) {
        px(x, y1 + k, r, g, b);
        px(x, y2 - k, r, g, b);
      }
      for (int y = y1; y <= y2; ++y) {
        px(x1 + k, y, r, g, b);
        px(x2 - k, y, r, g, b);
      }
    }
  }
  write_png(path, w, h, rgb);
}

}  // namespace vip
