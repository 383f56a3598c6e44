#pragma once

// VIP-Net forward pass: cue lifting, lip and text encoders, the rectifier and
// the temperature-scaled person classifier.

#include "vip/cues.hpp"
#include "vip/params.hpp"
#include "vip/rectifier.hpp"

#include <json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vip {

enum class Fusion { transformer, mlp, gated, none };
std::string to_string(Fusion f);
Fusion fusion_from_string(const std::string& s);

struct ModelConfig {
  int dim = 64;
  int heads = 4;
  int text_depth = 2;
  int relate_depth = 1;
  int lip_dim = 8;
  int vocab = 4096;
  int max_tokens = 64;
  int max_frames = 512;
  double tau_c = 0.07;
  double ln_eps = 1e-5;
  Fusion fusion = Fusion::transformer;
  bool use_text = true;
  std::set<std::string> disabled_cues;
  std::uint64_t seed = 0;
  cues::CueConfig cue;
};

nlohmann::json to_json(const ModelConfig& c);
// Missing keys keep their defaults; unknown values raise ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);
void validate(const ModelConfig& c);

// Everything the forward pass needs from one clip, computed once.
struct ClipInput {
  std::string clip_id;
  std::string category;
  std::vector<int> person_ids;
  int vip_index = -1;  // index into person_ids; -1 when unknown
  cues::CueSeries series;
  std::vector<std::vector<int>> text_segments;  // scene text, then each valid person's description
};

ClipInput make_input(const Clip& clip, const ModelConfig& config, const cues::FeatureProvider& provider);

// Same clip restricted to frames [start, stop); other frames become invalid.
ClipInput crop_frames(const ClipInput& in, int start, int stop);

template <class S>
ParamStore<S> init_params(const ModelConfig& config);

struct ForwardOptions {
  bool keep_maps = false;
  // Feed the raw cue series in as tracked leaves (gradient tests).
  bool track_inputs = false;
};

template <class S>
struct ForwardResult {
  std::vector<int> valid;          // indices of valid persons; rows of h
  std::vector<int> scored;         // positions in `valid` with a non-zero embedding
  ad::Var<S> h;                    // V x D
  std::optional<ad::Var<S>> logits;  // |scored| x 1
  std::vector<double> probabilities;  // N; exactly 0 for invalid persons
  std::optional<ad::Var<S>> text;  // 1 x D
  Mat<S> pool_weights;             // N x T
  Mat<S> lip_scores;               // N x T
  std::vector<std::vector<Mat<S>>> maps;  // per person, per head T x T
  std::vector<Mat<S>> spatial_gates, temporal_gates;  // per sub-cue, N x T
  std::vector<bool> empty_align;   // per person
  // Tracked raw inputs: centrality, area, clarity, action (N x T each).
  std::vector<ad::Var<S>> inputs;
  std::vector<ad::Var<S>> lip_inputs;  // per person T x 2
};

template <class S>
ForwardResult<S> forward(Binder<S>& bind, const ModelConfig& config, const ClipInput& in,
                         const ForwardOptions& options = {});

// Text embedding alone; nullopt when there are no tokens.
template <class S>
std::optional<ad::Var<S>> encode_text(Binder<S>& bind, const ModelConfig& config,
                                      const std::vector<std::vector<int>>& segments);

// Per-frame lip salience of one person from its T_l x 2 aperture rows at the
// given frame indices. Zero when fewer than two rows.
template <class S>
ad::Var<S> lip_salience(Binder<S>& bind, const ModelConfig& config, ad::Var<S> aperture,
                        const std::vector<int>& frames);

// Affine lift of an R x 1 cue column to R x D: s w_k + b_k.
template <class S>
ad::Var<S> lift_cue(Binder<S>& bind, int cue, ad::Var<S> column);

// Per-person cue means over valid frames, N x 5 in cue order. The lip column
// is the mean lip salience.
Eigen::MatrixXd cue_means(const cues::CueSeries& s, const Eigen::MatrixXd& lip_scores);

}  // namespace vip
