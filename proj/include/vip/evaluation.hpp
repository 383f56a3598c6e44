#pragma once

// Rank-k metrics, heuristic baselines, description similarity and reports.

#include "vip/inference.hpp"
#include "vip/text.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace vip {

// Fraction of samples whose truth is among the first k ranked ids.
double rank_k_accuracy(const std::vector<std::vector<int>>& ranked, const std::vector<int>& truths, int k);

inline constexpr std::array<std::string_view, 3> kBaselineCues = {"centrality", "area", "clarity"};

// Persons by descending mean cue over valid frames, ties by ascending id;
// persons without valid frames come last.
std::vector<int> heuristic_baseline(const cues::CueSeries& series, const std::vector<int>& person_ids,
                                    const std::string& cue);
std::vector<int> heuristic_baseline(const Clip& clip, const std::string& cue);

struct SimilarityStats {
  double mean = 0;
  double variance = 0;  // population variance
  int count = 0;
};

SimilarityStats description_similarity(const std::vector<std::string>& preds, const std::vector<std::string>& truths,
                                       const text::SentenceEmbeddingProvider& provider);

// Default "Indoor" subset.
std::set<std::string> default_indoor();

struct EvalOptions {
  std::set<std::string> indoor = default_indoor();
  bool include_baselines = true;
  std::string refinement_client = "mock";
  std::string embedder = "hashing";
  std::filesystem::path overlay_dir;  // empty: no overlays
  int overlay_frames = 1;             // per clip, evenly spaced
  int jobs = 1;
};

struct RankStats {
  int count = 0;
  double rank1 = 0, rank2 = 0, rank3 = 0;
};

struct EvalReport {
  std::string source;  // "model" or "baseline:<cue>"
  RankStats overall;
  std::map<std::string, RankStats> per_category;
  RankStats indoor;
  std::map<std::string, RankStats> baselines;
  std::map<std::string, SimilarityStats> description;  // per guidance mode, correct predictions only
  std::string fingerprint;
  std::vector<std::string> clip_ids;
  std::vector<int> predicted;
};

nlohmann::json to_json(const EvalReport& r);

EvalReport evaluate_model(ParamStore<float>& params, const ModelConfig& config, const std::vector<Clip>& clips,
                          const EvalOptions& options, const std::string& fingerprint);
EvalReport evaluate_baseline(const std::string& cue, const std::vector<Clip>& clips, const EvalOptions& options,
                             const std::string& fingerprint);

// RGB canvas of the clip frame (mid-grey without pixels) with every person
// box outlined and `highlight` drawn thicker in red.
void write_overlay_png(const Clip& clip, int frame, int highlight_id, const std::filesystem::path& path);

// Minimal 8-bit RGB PNG encoder.
void write_png(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb);

}  // namespace vip
