#include "test_support.hpp"
#include "vip/model.hpp"

#include <gtest/gtest.h>

using namespace vip;
using vip::testing::make_clip;

namespace {

ModelConfig small_config() {
  ModelConfig m;
  m.dim = 8;
  m.heads = 2;
  m.lip_dim = 4;
  m.max_tokens = 16;
  m.max_frames = 32;
  m.text_depth = 1;
  m.seed = 3;
  return m;
}

template <class S>
struct Run {
  std::unique_ptr<ad::Tape<S>> tape = std::make_unique<ad::Tape<S>>();
  ForwardResult<S> r;
  const ForwardResult<S>* operator->() const { return &r; }
};

template <class S>
Run<S> run(ParamStore<S>& params, const ModelConfig& cfg, const Clip& clip, bool maps = false) {
  const cues::MotionEnergyProvider provider;
  const auto in = make_input(clip, cfg, provider);
  Run<S> out;
  Binder<S> bind(*out.tape, params, false);
  ForwardOptions o;
  o.keep_maps = maps;
  out.r = forward(bind, cfg, in, o);
  return out;
}

Clip pad_frames(Clip c, int extra) {
  const int t = c.num_frames + extra;
  for (auto& p : c.persons) {
    p.boxes.conservativeResize(t, 4);
    p.boxes.bottomRows(extra).setZero();
    p.present.conservativeResize(t);
    p.present.tail(extra).setConstant(false);
    p.face_boxes->conservativeResize(t, 4);
    p.face_boxes->bottomRows(extra).setZero();
    p.lip_points->conservativeResize(t, 4);
    p.lip_points->bottomRows(extra).setZero();
    p.clarity->conservativeResize(t);
    p.clarity->tail(extra).setZero();
    p.motion->conservativeResize(t);
    p.motion->tail(extra).setZero();
  }
  c.num_frames = t;
  return c;
}

}  // namespace

TEST(ModelConfig, JsonRoundTripAndValidation) {
  ModelConfig m = small_config();
  m.fusion = Fusion::gated;
  m.disabled_cues = {"lip"};
  const auto back = model_config_from_json(to_json(m));
  EXPECT_EQ(to_json(back), to_json(m));
  nlohmann::json bad = to_json(m);
  bad["fusion"] = "wavelet";
  EXPECT_THROW(model_config_from_json(bad), ConfigError);
  ModelConfig odd = small_config();
  odd.heads = 3;
  EXPECT_THROW(validate(odd), ConfigError);
}

TEST(Model, ProbabilitiesSumToOneAndInvalidPersonsGetZero) {
  auto cfg = small_config();
  auto params = init_params<double>(cfg);
  Clip c = make_clip(4, 10);
  c.persons[2].present.setConstant(false);
  c.persons[2].boxes.setZero();
  const auto r = run(params, cfg, c);
  EXPECT_EQ(r->probabilities[2], 0.0);
  double sum = 0;
  for (double p : r->probabilities) sum += p;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_EQ(r->valid, (std::vector<int>{0, 1, 3}));
}

TEST(Model, PaddingWithInvalidFramesIsBitExact) {
  auto cfg = small_config();
  auto params = init_params<double>(cfg);
  Clip c = make_clip(3, 10);
  c.persons[1].present(4) = false;
  const auto a = run(params, cfg, c, true);
  const auto b = run(params, cfg, pad_frames(c, 5), true);
  EXPECT_EQ(a->probabilities, b->probabilities);
  EXPECT_TRUE((a->h.value().array() == b->h.value().array()).all());
  EXPECT_TRUE((a->pool_weights.array() == b->pool_weights.leftCols(10).array()).all());
  EXPECT_EQ(b->pool_weights.rightCols(5).cwiseAbs().maxCoeff(), 0.0);
  for (int i = 0; i < 3; ++i)
    for (std::size_t h = 0; h < b->maps[i].size(); ++h) {
      EXPECT_EQ(b->maps[i][h].rightCols(5).cwiseAbs().maxCoeff(), 0.0);
      EXPECT_TRUE((a->maps[i][h].array() == b->maps[i][h].topLeftCorner(10, 10).array()).all());
    }
}

TEST(Model, PaddingWithInvalidPersonIsBitExact) {
  auto cfg = small_config();
  auto params = init_params<double>(cfg);
  Clip c = make_clip(3, 10);
  Clip padded = c;
  auto ghost = c.persons[0];
  ghost.person_id = 7;
  ghost.present.setConstant(false);
  ghost.boxes.setZero();
  padded.persons.push_back(ghost);
  const auto a = run(params, cfg, c);
  const auto b = run(params, cfg, padded);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a->probabilities[i], b->probabilities[i]);
  EXPECT_EQ(b->probabilities[3], 0.0);
  EXPECT_TRUE((a->h.value().array() == b->h.value().array()).all());
}

TEST(Model, MaskedFramesHaveZeroAttentionColumns) {
  auto cfg = small_config();
  auto params = init_params<double>(cfg);
  Clip c = make_clip(3, 10);
  c.persons[0].present(6) = false;
  const auto r = run(params, cfg, c, true);
  for (const auto& m : r->maps[0]) {
    EXPECT_EQ(m.col(6).cwiseAbs().maxCoeff(), 0.0);
    for (int q = 0; q < 10; ++q)
      if (q != 6) EXPECT_NEAR(m.row(q).sum(), 1.0, 1e-12);
  }
  EXPECT_NEAR(r->pool_weights.row(0).sum(), 1.0, 1e-12);
}

TEST(Model, AbsentTextMatchesTextFreeModelBitExactly) {
  auto cfg = small_config();
  auto params = init_params<double>(cfg);
  Clip c = make_clip(3, 10);
  c.scene_description.clear();
  for (auto& p : c.persons) p.description.clear();
  const auto with_gate = run(params, cfg, c);
  EXPECT_FALSE(with_gate->text.has_value());
  auto off = cfg;
  off.use_text = false;
  const auto without = run(params, off, c);
  EXPECT_EQ(with_gate->probabilities, without->probabilities);
  EXPECT_TRUE((with_gate->h.value().array() == without->h.value().array()).all());
}

TEST(Model, PersonPermutationPermutesOutputs) {
  auto cfg = small_config();
  auto params = init_params<double>(cfg);
  Clip c = make_clip(4, 10);
  c.persons[1].description = "the person in the blue shirt";
  Clip p = c;
  std::swap(p.persons[0], p.persons[3]);
  const auto a = run(params, cfg, c);
  const auto b = run(params, cfg, p);
  EXPECT_NEAR(a->probabilities[0], b->probabilities[3], 1e-12);
  EXPECT_NEAR(a->probabilities[3], b->probabilities[0], 1e-12);
  EXPECT_NEAR(a->probabilities[1], b->probabilities[1], 1e-12);
  EXPECT_LT((a->h.value().row(0) - b->h.value().row(3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Model, FusionVariantsProduceDistributions) {
  for (auto f : {Fusion::transformer, Fusion::mlp, Fusion::gated, Fusion::none}) {
    auto cfg = small_config();
    cfg.fusion = f;
    auto params = init_params<double>(cfg);
    const auto r = run(params, cfg, make_clip(3, 10));
    double sum = 0;
    for (double p : r->probabilities) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12) << to_string(f);
    EXPECT_EQ(fusion_from_string(to_string(f)), f);
  }
}

TEST(Model, DisabledCuesDropTheirGates) {
  auto cfg = small_config();
  cfg.disabled_cues = {"clarity", "lip"};
  auto params = init_params<double>(cfg);
  const auto r = run(params, cfg, make_clip(3, 10));
  EXPECT_EQ(r->spatial_gates.size(), 2u);
  EXPECT_EQ(r->temporal_gates.size(), 1u);
}

TEST(Model, FloatAndDoubleAgree) {
  auto cfg = small_config();
  auto pd = init_params<double>(cfg);
  auto pf = pd.cast<float>();
  const Clip c = make_clip(3, 10);
  const auto a = run(pd, cfg, c);
  const auto b = run(pf, cfg, c);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a->probabilities[i], b->probabilities[i], 1e-4);
}

TEST(Model, CropFramesInvalidatesOutsideWindow) {
  auto cfg = small_config();
  const cues::MotionEnergyProvider provider;
  const auto in = make_input(make_clip(3, 10), cfg, provider);
  const auto cr = crop_frames(in, 2, 7);
  for (int i = 0; i < 3; ++i)
    for (int f = 0; f < 10; ++f) EXPECT_EQ(cr.series.frame_valid(i, f), f >= 2 && f < 7);
  EXPECT_EQ(cr.vip_index, in.vip_index);
}
