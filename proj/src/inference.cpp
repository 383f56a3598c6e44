#include "vip/inference.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace vip {

std::vector<double> classify(const Eigen::MatrixXd& h, const VectorXb& valid, const Eigen::RowVectorXd& w_c,
                             double tau_c) {
  if (!(tau_c > 0)) throw ConfigError("tau_c must be > 0");
  const Eigen::Index n = h.rows();
  std::vector<double> logits(n, -INFINITY);
  bool any = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!valid(i)) continue;
    const double norm = h.row(i).norm();
    if (norm == 0) continue;
    logits[i] = w_c.dot(h.row(i)) / (tau_c * norm);
    any = true;
  }
  if (!any) throw InferenceError("no valid person to classify");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(n, 0.0);
  double z = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isinf(logits[i])) continue;
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

std::vector<int> rank(const std::vector<double>& probabilities, const std::vector<int>& ids) {
  std::vector<int> order(probabilities.size());
  std::iota(order.begin(), order.end(), 0);
  auto id = [&](int i) { return ids.empty() ? i : ids[i]; };
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (probabilities[a] != probabilities[b]) return probabilities[a] > probabilities[b];
    return id(a) < id(b);
  });
  for (auto& o : order) o = id(o);
  return order;
}

double percentile_rank(const std::vector<double>& scores, int vip, const std::vector<bool>& valid) {
  if (vip < 0 || vip >= static_cast<int>(scores.size()) || !valid[vip]) throw InferenceError("VIP is not a valid person");
  int others = 0, below = 0;
  for (std::size_t m = 0; m < scores.size(); ++m) {
    if (!valid[m] || static_cast<int>(m) == vip) continue;
    ++others;
    if (scores[m] < scores[vip]) ++below;
  }
  if (others == 0) return 1.0;
  return static_cast<double>(below) / others;
}

nlohmann::json to_json(const ImportanceResult& r) {
  nlohmann::json j;
  j["schema"] = "vip.importance/1";
  j["clip_id"] = r.clip_id;
  j["person_ids"] = r.person_ids;
  j["probabilities"] = r.probabilities;
  j["ranked_ids"] = r.ranked_ids;
  j["vip_id"] = r.vip_id;
  j["per_cue_rank"] = r.per_cue_rank;
  j["cue_scores"] = r.cue_scores;
  return j;
}

template <class S>
ImportanceResult summarize(const ForwardResult<S>& fwd, const ClipInput& in) {
  ImportanceResult r;
  r.clip_id = in.clip_id;
  r.person_ids = in.person_ids;
  r.probabilities = fwd.probabilities;
  r.ranked_ids = rank(r.probabilities, in.person_ids);
  // Invalid persons sort after every valid one even at equal (zero) mass.
  std::stable_partition(r.ranked_ids.begin(), r.ranked_ids.end(), [&](int id) {
    const auto it = std::find(in.person_ids.begin(), in.person_ids.end(), id);
    return in.series.person_valid(it - in.person_ids.begin());
  });
  r.vip_id = r.ranked_ids.front();
  const int vip = static_cast<int>(std::find(in.person_ids.begin(), in.person_ids.end(), r.vip_id) - in.person_ids.begin());
  const Eigen::MatrixXd means = cue_means(in.series, fwd.lip_scores.template cast<double>());
  std::vector<bool> valid(in.series.persons);
  for (int i = 0; i < in.series.persons; ++i) valid[i] = in.series.person_valid(i);
  for (std::size_t k = 0; k < cues::kCueNames.size(); ++k) {
    std::vector<double> col(means.rows());
    for (Eigen::Index i = 0; i < means.rows(); ++i) col[i] = means(i, k);
    const std::string name(cues::kCueNames[k]);
    r.cue_scores[name] = col;
    r.per_cue_rank[name] = percentile_rank(col, vip, valid);
  }
  return r;
}

template ImportanceResult summarize<float>(const ForwardResult<float>&, const ClipInput&);
template ImportanceResult summarize<double>(const ForwardResult<double>&, const ClipInput&);

ImportanceResult predict(ParamStore<float>& params, const ModelConfig& config, const ClipInput& in) {
  ad::Tape<float> tape;
  Binder<float> bind(tape, params, false);
  return summarize(forward(bind, config, in), in);
}

std::string to_string(GuidanceMode m) {
  switch (m) {
    case GuidanceMode::baseline:
      return "baseline";
    case GuidanceMode::unguided:
      return "unguided";
    case GuidanceMode::guided:
      return "guided";
  }
  return "baseline";
}

GuidanceMode guidance_from_string(const std::string& s) {
  if (s == "baseline") return GuidanceMode::baseline;
  if (s == "unguided") return GuidanceMode::unguided;
  if (s == "guided") return GuidanceMode::guided;
  throw ConfigError("unknown guidance mode '" + s + "'");
}

nlohmann::json to_json(const Rationale& r) {
  nlohmann::json j;
  j["schema"] = "vip.rationale/1";
  nlohmann::json cues = nlohmann::json::array();
  for (const auto& c : r.retained) cues.push_back({{"cue", c.cue}, {"rank", c.rank}, {"clause", c.clause}});
  j["retained_cues"] = cues;
  j["template_text"] = r.template_text;
  j["refined_text"] = r.refined_text ? nlohmann::json(*r.refined_text) : nlohmann::json(nullptr);
  j["guidance_mode"] = to_string(r.mode);
  j["fallback_warning"] = r.fallback_warning;
  if (!r.warning.empty()) j["warning"] = r.warning;
  return j;
}

namespace {

std::string join_clauses(const std::vector<std::string>& clauses) {
  std::string s;
  for (std::size_t i = 0; i < clauses.size(); ++i) s += (i == 0 ? "" : " and ") + clauses[i];
  return s;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

Rationale make_rationale(const std::map<std::string, double>& ranks, double tau_m) {
  Rationale r;
  std::vector<std::string> clauses;
  for (std::size_t k = 0; k < cues::kCueNames.size(); ++k) {
    const auto it = ranks.find(std::string(cues::kCueNames[k]));
    if (it == ranks.end() || !(it->second > tau_m)) continue;
    r.retained.push_back({it->first, it->second, std::string(cues::kCueClauses[k])});
    clauses.emplace_back(cues::kCueClauses[k]);
  }
  r.template_text = clauses.empty() ? std::string(kFallbackRationale) : "The person " + join_clauses(clauses) + ".";
  return r;
}

std::string MockRefinementClient::refine(const RefinementRequest& request) {
  if (!request.clauses.empty()) {
    std::string scene = request.video.category.empty() ? "" : lower(request.video.category) + " ";
    return "In this " + scene + "scene, the person " + join_clauses(request.clauses) + ".";
  }
  // The template is the last line of the instruction.
  std::string sentence = request.instruction;
  const auto nl = sentence.find_last_of('\n');
  if (nl != std::string::npos) sentence = sentence.substr(nl + 1);
  if (!sentence.empty()) sentence[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(sentence[0])));
  return "In this scene, " + sentence;
}

HttpRefinementClient::HttpRefinementClient(std::string url, double timeout_seconds)
    : url_(std::move(url)), timeout_(timeout_seconds) {}

std::string HttpRefinementClient::refine(const RefinementRequest& request) {
  httplib::Client cli(url_);
  const auto usec = static_cast<long>(timeout_ * 1e6);
  cli.set_connection_timeout(0, usec);
  cli.set_read_timeout(0, usec);
  cli.set_write_timeout(0, usec);
  auto res = cli.Post("/refine", to_json(request).dump(), "application/json");
  if (!res) throw RefinementError("refinement request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw RefinementError("refinement backend returned HTTP " + std::to_string(res->status));
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw RefinementError(std::string("malformed refinement response: ") + e.what());
  }
}

std::unique_ptr<RefinementClient> make_refinement_client(const std::string& spec, double timeout_seconds) {
  if (spec == "mock") return std::make_unique<MockRefinementClient>();
  if (spec == "failing") return std::make_unique<FailingRefinementClient>();
  if (spec.rfind("http:", 0) == 0) return std::make_unique<HttpRefinementClient>(spec.substr(5), timeout_seconds);
  throw ConfigError("unknown refinement client '" + spec + "'");
}

nlohmann::json to_json(const RefinementRequest& r) {
  return {{"video", {{"clip_id", r.video.clip_id}, {"category", r.video.category}}},
          {"vip_id", r.vip_id},
          {"clauses", r.clauses},
          {"instruction", r.instruction},
          {"prompt_version", kRefinePromptVersion}};
}

RefinementRequest make_request(const VideoRef& video, int vip_id, const Rationale& r, GuidanceMode mode) {
  RefinementRequest q;
  q.video = video;
  q.vip_id = vip_id;
  if (mode == GuidanceMode::guided)
    for (const auto& c : r.retained) q.clauses.push_back(c.clause);
  q.instruction = std::string(refine_prompt());
  while (!q.instruction.empty() && (q.instruction.back() == '\n' || q.instruction.back() == ' ')) q.instruction.pop_back();
  q.instruction += "\n" + r.template_text;
  return q;
}

Rationale refine_rationale(RefinementClient* client, const VideoRef& video, int vip_id, Rationale r,
                           GuidanceMode mode) {
  r.mode = mode;
  r.refined_text.reset();
  r.fallback_warning = false;
  r.warning.clear();
  if (mode == GuidanceMode::baseline) return r;
  if (client == nullptr) {
    r.fallback_warning = true;
    r.warning = "no refinement client configured";
    return r;
  }
  try {
    r.refined_text = client->refine(make_request(video, vip_id, r, mode));
  } catch (const std::exception& e) {
    r.fallback_warning = true;
    r.warning = e.what();
  }
  return r;
}

}  // namespace vip
