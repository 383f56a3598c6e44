#pragma once

// VIP inference: classification, ranking, per-cue percentile ranks, template
// rationales and the refinement client.

#include "vip/model.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vip {

struct InferenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// softmax over valid persons of (w_c . h_n) / (tau_c |h_n|). Invalid persons
// and zero rows get probability 0.
std::vector<double> classify(const Eigen::MatrixXd& h, const VectorXb& valid, const Eigen::RowVectorXd& w_c,
                             double tau_c);

// Person ids by descending probability, ties by ascending id. `ids` defaults
// to 0..N-1.
std::vector<int> rank(const std::vector<double>& probabilities, const std::vector<int>& ids = {});

// Fraction of the other valid persons scoring strictly below `vip`; 1.0 when
// the VIP is the only valid person.
double percentile_rank(const std::vector<double>& scores, int vip, const std::vector<bool>& valid);

struct ImportanceResult {
  std::string clip_id;
  std::vector<int> person_ids;
  std::vector<double> probabilities;
  std::vector<int> ranked_ids;
  int vip_id = -1;
  std::map<std::string, double> per_cue_rank;
  std::map<std::string, std::vector<double>> cue_scores;  // per-person means
};

nlohmann::json to_json(const ImportanceResult& r);

template <class S>
ImportanceResult summarize(const ForwardResult<S>& fwd, const ClipInput& in);

// Parameter-free forward on a float store.
ImportanceResult predict(ParamStore<float>& params, const ModelConfig& config, const ClipInput& in);

enum class GuidanceMode { baseline, unguided, guided };
std::string to_string(GuidanceMode m);
GuidanceMode guidance_from_string(const std::string& s);

inline constexpr double kRetentionThreshold = 0.7;
inline constexpr std::string_view kFallbackRationale =
    "The person is the most contextually significant individual in the scene.";

struct RetainedCue {
  std::string cue;
  double rank = 0;
  std::string clause;
};

struct Rationale {
  std::vector<RetainedCue> retained;
  std::string template_text;
  std::optional<std::string> refined_text;
  GuidanceMode mode = GuidanceMode::baseline;
  bool fallback_warning = false;
  std::string warning;

  // Refined text when present, else the template.
  const std::string& text() const { return refined_text ? *refined_text : template_text; }
};

nlohmann::json to_json(const Rationale& r);

Rationale make_rationale(const std::map<std::string, double>& ranks, double tau_m = kRetentionThreshold);

// Versioned refinement instruction shipped with the binary.
std::string_view refine_prompt();
inline constexpr std::string_view kRefinePromptVersion = "refine_v1";

struct VideoRef {
  std::string clip_id;
  std::string category;
};

struct RefinementRequest {
  VideoRef video;
  int vip_id = -1;
  std::vector<std::string> clauses;  // empty in unguided mode
  std::string instruction;           // prompt followed by the template sentence
};

struct RefinementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class RefinementClient {
 public:
  virtual ~RefinementClient() = default;
  virtual std::string name() const = 0;
  // Throws RefinementError when the backend cannot answer.
  virtual std::string refine(const RefinementRequest& request) = 0;
};

// Offline stand-in. Unguided: the template sentence behind "In this scene, ".
// Guided: the clauses recomposed into "In this <category> scene, the person
// ...". Deterministic.
class MockRefinementClient final : public RefinementClient {
 public:
  std::string name() const override { return "mock"; }
  std::string refine(const RefinementRequest& request) override;
};

// POSTs the request as JSON to `<url>/refine` and reads {"text": ...}.
class HttpRefinementClient final : public RefinementClient {
 public:
  HttpRefinementClient(std::string url, double timeout_seconds = 10.0);
  std::string name() const override { return "http"; }
  std::string refine(const RefinementRequest& request) override;

 private:
  std::string url_;
  double timeout_;
};

class FailingRefinementClient final : public RefinementClient {
 public:
  std::string name() const override { return "failing"; }
  std::string refine(const RefinementRequest&) override { throw RefinementError("refinement backend unreachable"); }
};

// "mock", "http:<url>" or "failing".
std::unique_ptr<RefinementClient> make_refinement_client(const std::string& spec, double timeout_seconds = 10.0);

nlohmann::json to_json(const RefinementRequest& r);

RefinementRequest make_request(const VideoRef& video, int vip_id, const Rationale& r, GuidanceMode mode);

// Baseline returns the template unchanged; client failures fall back to the
// template with `fallback_warning` set.
Rationale refine_rationale(RefinementClient* client, const VideoRef& video, int vip_id, Rationale r,
                           GuidanceMode mode);

}  // namespace vip
