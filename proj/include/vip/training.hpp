#pragma once

// Training objective, optimizer, schedule, checkpoints and gradient checks.

#include "vip/inference.hpp"
#include "vip/text.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace vip {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LossWeights {
  double text = 0.5;
  double cont = 0.3;
  double reg = 0.0005;
};

struct LossBreakdown {
  double total = 0, cls = 0, text = 0, cont = 0, reg = 0;
  LossWeights weights;

  // cls + w.text * text + w.cont * cont + w.reg * reg
  double combined() const { return cls + weights.text * text + weights.cont * cont + weights.reg * reg; }
};

nlohmann::json to_json(const LossBreakdown& l);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  double base_lr = 5e-5;
  double weight_decay = 1e-4;
  int warmup_epochs = 5;
  std::uint64_t seed = 0;
  LossWeights lambda;
  double tau_cont = 0.1;
  // Each contrastive view keeps a random window covering at least this
  // fraction of the clip.
  double view_fraction = 0.75;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string embedder = "hashing";
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
void validate(const TrainConfig& c);

// Linear warmup from 0 over `warmup_steps`, then cosine decay to 0 at
// `total_steps`.
double lr_at(long step, long total_steps, long warmup_steps, double base_lr);

// --- plain-value loss terms -------------------------------------------------

// -log p[truth]; throws DataError when the truth is not a valid person.
double loss_cls(const std::vector<double>& probabilities, int truth, const std::vector<bool>& valid);
// 1 - cos of the provider embeddings; 0 when the truth is empty.
double loss_text(const std::string& pred, const std::string& truth, const text::SentenceEmbeddingProvider& provider);
// -log(exp(s+/tau) / (exp(s+/tau) + sum exp(s-/tau))) with cosine similarities;
// 0 without negatives.
double loss_cont(const Eigen::RowVectorXd& anchor, const Eigen::RowVectorXd& positive,
                 const std::vector<Eigen::RowVectorXd>& negatives, double tau);

// --- differentiable batch objective ----------------------------------------

struct TrainSample {
  const ClipInput* view = nullptr;    // full clip
  const ClipInput* second = nullptr;  // augmented view for the contrastive positive
  std::string rationale;              // ground-truth rationale text
};

template <class S>
struct BatchObjective {
  LossBreakdown loss;
  std::optional<ad::Var<S>> graph;  // cls + lambda_cont * cont; absent when nothing is tracked
  bool cont_in_graph = false;
  std::vector<ImportanceResult> results;
};

// Builds the objective on `bind`'s tape. L_reg is evaluated on the store but
// stays out of the graph; add_reg_grad() supplies its gradient.
template <class S>
BatchObjective<S> batch_objective(Binder<S>& bind, const ModelConfig& model, const TrainConfig& train,
                                  const std::vector<TrainSample>& batch,
                                  const text::SentenceEmbeddingProvider& embedder);

template <class S>
double squared_norm(const ParamStore<S>& store);
template <class S>
void add_reg_grad(ParamStore<S>& store, double lambda_reg);

// Random contiguous window covering at least `fraction` of the frames; the
// VIP keeps at least one valid frame.
ClipInput jitter_view(const ClipInput& in, double fraction, std::mt19937_64& rng);

class Adam {
 public:
  Adam(double beta1, double beta2, double eps, double weight_decay)
      : beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {}
  void step(ParamStore<float>& store, double lr);
  long steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_, wd_;
  long t_ = 0;
  std::map<std::string, std::pair<Mat<float>, Mat<float>>> moments_;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0;
  LossBreakdown loss;
  double train_rank1 = 0;
  std::optional<double> val_rank1;
};

nlohmann::json to_json(const EpochMetrics& m);

struct TrainedModel {
  ModelConfig model;
  TrainConfig train;
  ParamStore<float> params;
  std::vector<EpochMetrics> history;
};

struct TrainData {
  std::vector<ClipInput> inputs;
  std::vector<std::string> rationales;
};

// Deterministic for a fixed config. When `out` is non-empty the checkpoint and
// metrics.jsonl are written there; `on_epoch` sees every epoch as it ends.
TrainedModel train(const TrainData& data, const TrainData& val, const ModelConfig& model, const TrainConfig& config,
                   const std::filesystem::path& out = {},
                   const std::function<void(const EpochMetrics&)>& on_epoch = {});

void save_checkpoint(const TrainedModel& m, const std::filesystem::path& dir);
TrainedModel load_checkpoint(const std::filesystem::path& dir);

double rank1(const std::vector<ImportanceResult>& results, const std::vector<ClipInput>& inputs);

// --- gradient check --------------------------------------------------------

struct GradCheckOptions {
  double step = 1e-4;
  // Entries above this count are subsampled: every row the loss graph
  // touches plus `sample` others.
  int dense_limit = 600;
  int sample = 24;
  std::uint64_t seed = 0;
};

struct GroupError {
  std::string name;
  int checked = 0;
  double max_rel_error = 0;
  double max_abs_error = 0;
};

struct GradCheckReport {
  std::vector<GroupError> groups;
  double max_rel_error = 0;
  LossBreakdown loss;
};

// Relative error of one entry: |a - n| / max(|a|, |n|, floor), where floor is
// 1e-3 of the largest gradient magnitude in the group (and at least 1e-6), so
// entries that are numerically zero compare on the group's scale.
double relative_error(double analytic, double numeric, double floor);

GradCheckReport grad_check(ParamStore<double>& params, const ModelConfig& model, const TrainConfig& train,
                           const std::vector<TrainSample>& batch, const GradCheckOptions& options = {});

// Toy model and batch used by `vip gradcheck`: N=3, T=6, D=8.
struct ToyProblem {
  ModelConfig model;
  TrainConfig train;
  std::vector<ClipInput> inputs;
  std::vector<ClipInput> views;
  std::vector<std::string> rationales;
  std::vector<TrainSample> batch() const;
};

ToyProblem make_toy_problem(std::uint64_t seed);

}  // namespace vip
