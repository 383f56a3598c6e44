#include "test_support.hpp"
#include "vip/model.hpp"
#include "vip/text.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace vip;
using namespace vip::cues;
using vip::testing::make_clip;

namespace {

Box centred_box(double cx, double cy, double w, double h, int width, int height) {
  return {cx * width - w / 2, cy * height - h / 2, cx * width + w / 2, cy * height + h / 2};
}

// Direct 3x3 convolution and two-pass variance.
double brute_laplacian_variance(const GrayImage& g) {
  std::vector<double> r;
  for (int y = 1; y + 1 < g.height; ++y)
    for (int x = 1; x + 1 < g.width; ++x) {
      double acc = 0;
      const int k[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) acc += k[dy + 1][dx + 1] * g.at(x + dx, y + dy);
      r.push_back(acc);
    }
  double mean = 0;
  for (double v : r) mean += v;
  mean /= static_cast<double>(r.size());
  double var = 0;
  for (double v : r) var += (v - mean) * (v - mean);
  return var / static_cast<double>(r.size());
}

Clip pixel_clip(int t, int w, int h) {
  Clip c = make_clip(1, t, w, h);
  c.frames = std::vector<std::uint8_t>(static_cast<std::size_t>(t) * w * h * 3, 0);
  c.persons[0].boxes.rowwise() = Eigen::RowVector4f(0, 0, float(w), float(h));
  c.persons[0].face_boxes.reset();
  c.persons[0].lip_points.reset();
  c.persons[0].clarity.reset();
  c.persons[0].motion.reset();
  return c;
}

ModelConfig small_config() {
  ModelConfig m;
  m.dim = 8;
  m.heads = 2;
  m.lip_dim = 4;
  m.max_tokens = 16;
  m.max_frames = 16;
  m.text_depth = 1;
  return m;
}

}  // namespace

TEST(Centrality, HandValues) {
  EXPECT_NEAR(centrality(centred_box(0.5, 0.5, 10, 10, 640, 360), 640, 360), 1.0, 1e-12);
  EXPECT_NEAR(centrality(Box{0, 0, 2, 2}, 640, 360), 0.0, 1e-12);
  // |(0.25, 0.5) - (0.5, 0.5)| = 0.25, so 1 - 2 * 0.25.
  EXPECT_NEAR(centrality(centred_box(0.25, 0.5, 20, 20, 640, 360), 640, 360), 0.5, 1e-9);
  EXPECT_EQ(centrality(Box{5, 5, 5, 9}, 640, 360), 0.0);
}

TEST(Area, HandValues) {
  EXPECT_NEAR(area(Box{0, 0, 1920, 1080}, 1920, 1080), 1.0, 1e-12);
  EXPECT_NEAR(area(Box{0, 0, 960, 540}, 1920, 1080), 0.25, 1e-12);
  EXPECT_EQ(area(Box{3, 3, 3, 8}, 1920, 1080), 0.0);
}

TEST(Centrality, ResolutionScalingLeavesSpatialCuesUnchanged) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    const double x1 = 600 * u(rng), y1 = 300 * u(rng);
    const Box b{x1, y1, x1 + 1 + 30 * u(rng), y1 + 1 + 50 * u(rng)};
    const double s = 4.0;  // power of two keeps every product exact
    const Box bs{b.x1 * s, b.y1 * s, b.x2 * s, b.y2 * s};
    EXPECT_EQ(centrality(b, 640, 360), centrality(bs, 2560, 1440));
    EXPECT_EQ(area(b, 640, 360), area(bs, 2560, 1440));
  }
}

TEST(Clarity, ConstantCropIsZero) {
  GrayImage g{7, 6, std::vector<double>(42, 0.4)};
  EXPECT_NEAR(laplacian_variance(g), 0.0, 1e-15);
}

TEST(Clarity, SingleBrightPixelMatchesDirectConvolution) {
  GrayImage g{5, 5, std::vector<double>(25, 0.0)};
  g.at(2, 2) = 1.0;
  const double v = laplacian_variance(g);
  EXPECT_GT(v, 0.0);
  EXPECT_NEAR(v, brute_laplacian_variance(g), 1e-12);
  // Responses over the 3x3 interior: -4 once, +1 four times, 0 four times.
  const double mean = 0.0;
  EXPECT_NEAR(v, (16.0 + 4.0) / 9.0 - mean * mean, 1e-12);
}

TEST(Clarity, RandomCropsMatchDirectConvolution) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 20; ++k) {
    GrayImage g{4 + k % 5, 3 + k % 7, {}};
    g.px.resize(static_cast<std::size_t>(g.width) * g.height);
    for (auto& p : g.px) p = u(rng);
    EXPECT_NEAR(laplacian_variance(g), brute_laplacian_variance(g), 1e-12);
  }
}

TEST(Clarity, TinyCropIsZero) {
  GrayImage g{2, 2, {0.0, 1.0, 1.0, 0.0}};
  EXPECT_EQ(laplacian_variance(g), 0.0);
}

TEST(Clarity, MissingPixelsAndChannelDisablesClarity) {
  Clip c = make_clip(2, 40);
  for (auto& p : c.persons) p.clarity.reset();
  const MotionEnergyProvider provider;
  EXPECT_FALSE(extract_cues(c, CueConfig{}, provider).has_clarity);
}

TEST(Action, IdenticalFramesGiveZero) {
  Clip c = pixel_clip(6, 12, 10);
  for (std::size_t i = 0; i < c.frames->size(); ++i) (*c.frames)[i] = static_cast<std::uint8_t>(i % 13);
  // identical frames: copy frame 0 everywhere
  const std::size_t plane = 12 * 10 * 3;
  for (int f = 1; f < 6; ++f) std::copy_n(c.frames->begin(), plane, c.frames->begin() + f * plane);
  const MotionEnergyProvider provider;
  const auto s = extract_cues(c, CueConfig{}, provider);
  EXPECT_EQ(s.action.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Action, OnePixelChangeIsProportionalToDifference) {
  for (int v : {5, 40, 200}) {
    Clip c = pixel_clip(2, 8, 8);
    const std::size_t plane = 8 * 8 * 3;
    (*c.frames)[plane + (3 * 8 + 4) * 3 + 1] = static_cast<std::uint8_t>(v);
    // Direct sum of absolute differences over the region.
    double sad = 0;
    for (std::size_t i = 0; i < plane; ++i) sad += std::abs(int((*c.frames)[plane + i]) - int((*c.frames)[i]));
    const double oracle = sad / (3.0 * 255.0 * 64.0);
    const Box region{0, 0, 8, 8};
    EXPECT_NEAR(motion_energy(c, 1, region), oracle, 1e-12);
    EXPECT_NEAR(motion_energy(c, 1, region), v / (3.0 * 255.0 * 64.0), 1e-12);
  }
}

TEST(Action, IntensityIsMeanBlockNorm) {
  const MotionEnergyProvider provider;
  std::vector<ActionBlock> blocks(3);
  blocks[0].motion = {0.1, 0.3};
  blocks[1].motion = {0.5};
  blocks[2].motion = {0.0, 0.0, 0.6};
  const auto a = action_intensity(blocks, provider);
  ASSERT_EQ(a.per_block.size(), 3u);
  EXPECT_NEAR(a.per_block[0], 0.2, 1e-12);
  EXPECT_NEAR(a.intensity, (0.2 + 0.5 + 0.2) / 3, 1e-12);
}

TEST(Action, ConvProviderIsDeterministicPerSeed) {
  Clip c = pixel_clip(8, 16, 16);
  std::mt19937_64 rng(1);
  for (auto& b : *c.frames) b = static_cast<std::uint8_t>(rng() % 256);
  const Conv3dProvider p1(5), p2(5), p3(6);
  CueConfig cfg;
  cfg.block_length = 4;
  const auto a = extract_cues(c, cfg, p1);
  const auto b = extract_cues(c, cfg, p2);
  const auto d = extract_cues(c, cfg, p3);
  EXPECT_EQ(a.action, b.action);
  EXPECT_NE(a.action, d.action);
  EXPECT_GT(a.action.maxCoeff(), 0.0);
}

TEST(Action, ShortClipFormsOneTruncatedBlock) {
  Clip c = make_clip(1, 3);
  CueConfig cfg;
  cfg.block_length = 8;
  const MotionEnergyProvider provider;
  const auto s = extract_cues(c, cfg, provider);
  const double mean = (s.motion(0, 0) + s.motion(0, 1) + s.motion(0, 2)) / 3;
  for (int f = 0; f < 3; ++f) EXPECT_NEAR(s.action(0, f), mean, 1e-12);
}

TEST(Cues, DegenerateBoxInvalidatesFrame) {
  Clip c = make_clip(2, 6);
  c.persons[1].boxes(3, 2) = c.persons[1].boxes(3, 0);
  const MotionEnergyProvider provider;
  const auto s = extract_cues(c, CueConfig{}, provider);
  EXPECT_FALSE(s.frame_valid(1, 3));
  EXPECT_EQ(s.centrality(1, 3), 0.0);
  EXPECT_EQ(s.area(1, 3), 0.0);
  EXPECT_TRUE(s.frame_valid(1, 2));
}

TEST(Cues, NanLipAnchorMasksLipFrameOnly) {
  Clip c = make_clip(2, 6);
  (*c.persons[0].lip_points)(2, 1) = std::nanf("");
  const MotionEnergyProvider provider;
  const auto s = extract_cues(c, CueConfig{}, provider);
  EXPECT_TRUE(s.frame_valid(0, 2));
  EXPECT_FALSE(s.lip_valid(0, 2));
  EXPECT_TRUE(s.lip_valid(0, 3));
}

TEST(Cues, PermutingPersonsPermutesSeries) {
  Clip c = make_clip(3, 10);
  Clip p = c;
  std::swap(p.persons[0], p.persons[2]);
  const MotionEnergyProvider provider;
  const auto a = extract_cues(c, CueConfig{}, provider);
  const auto b = extract_cues(p, CueConfig{}, provider);
  EXPECT_EQ(a.centrality.row(0), b.centrality.row(2));
  EXPECT_EQ(a.area.row(2), b.area.row(0));
  EXPECT_EQ(a.action.row(1), b.action.row(1));
  EXPECT_EQ(a.lip_aperture[0], b.lip_aperture[2]);
}

TEST(Lip, ClosedMouthScoresZero) {
  const auto cfg = small_config();
  auto params = init_params<double>(cfg);
  ad::Tape<double> tape;
  Binder<double> bind(tape, params, false);
  const auto s = lip_salience(bind, cfg, tape.constant(Mat<double>::Zero(6, 2)), {0, 1, 2, 3, 4, 5});
  EXPECT_LT(s.value().cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Lip, DoublingApertureIncreasesScore) {
  const auto cfg = small_config();
  auto params = init_params<double>(cfg);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.4);
  for (int trial = 0; trial < 20; ++trial) {
    Mat<double> ap(6, 2);
    for (int i = 0; i < ap.size(); ++i) ap.data()[i] = u(rng);
    ad::Tape<double> tape;
    Binder<double> bind(tape, params, false);
    const std::vector<int> frames = {0, 1, 2, 3, 4, 5};
    const double one = lip_salience(bind, cfg, tape.constant(ap), frames).value().mean();
    const double two = lip_salience(bind, cfg, tape.constant(Mat<double>(2 * ap)), frames).value().mean();
    EXPECT_GT(two, one) << trial;
  }
}

TEST(Lip, SingleFrameScoresZero) {
  const auto cfg = small_config();
  auto params = init_params<double>(cfg);
  ad::Tape<double> tape;
  Binder<double> bind(tape, params, false);
  const auto s = lip_salience(bind, cfg, tape.constant(Mat<double>::Constant(1, 2, 0.3)), {4});
  EXPECT_EQ(s.value()(0, 0), 0.0);
}

TEST(Text, EmptyTextIsAbsent) {
  const auto cfg = small_config();
  auto params = init_params<double>(cfg);
  ad::Tape<double> tape;
  Binder<double> bind(tape, params, false);
  EXPECT_FALSE(encode_text(bind, cfg, {text::tokenize("", cfg.vocab)}).has_value());
  EXPECT_FALSE(encode_text(bind, cfg, {}).has_value());
}

TEST(Text, IdenticalAndDifferingTexts) {
  const auto cfg = small_config();
  auto params = init_params<double>(cfg);
  ad::Tape<double> tape;
  Binder<double> bind(tape, params, false);
  const auto a = encode_text(bind, cfg, {text::tokenize("a person in a red coat", cfg.vocab)});
  const auto b = encode_text(bind, cfg, {text::tokenize("a person in a red coat", cfg.vocab)});
  const auto c = encode_text(bind, cfg, {text::tokenize("a person in a blue coat", cfg.vocab)});
  EXPECT_EQ(a->value(), b->value());
  EXPECT_GT((a->value() - c->value()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Text, HashingEmbedderIsNormalizedBagOfWords) {
  const text::HashingEmbedder e;
  EXPECT_NEAR(e.embed("The person speaks").norm(), 1.0, 1e-12);
  EXPECT_NEAR(text::cosine_similarity(e.embed("the person speaks"), e.embed("speaks the PERSON")), 1.0, 1e-12);
  EXPECT_EQ(text::cosine_similarity(e.embed(""), e.embed("x")), 0.0);
  EXPECT_EQ(text::tokenize("Hello  world", 64), text::tokenize("hello world", 64));
}

TEST(Lift, ZeroScalarWithZeroBiasIsZero) {
  const auto cfg = small_config();
  auto params = init_params<double>(cfg);
  ad::Tape<double> tape;
  Binder<double> bind(tape, params, false);
  const auto x = lift_cue(bind, kArea, tape.constant(Mat<double>::Zero(4, 1)));
  EXPECT_EQ(x.value().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lift, ProbeRecoversAffineMap) {
  const auto cfg = small_config();
  auto params = init_params<double>(cfg);
  params.at("lift.clarity.b").value.setConstant(0.25);
  Mat<double> s(10, 1);
  for (int i = 0; i < 10; ++i) s(i, 0) = 0.1 * i - 0.3;
  ad::Tape<double> tape;
  Binder<double> bind(tape, params, false);
  const Mat<double> x = lift_cue(bind, kClarity, tape.constant(s)).value();
  Eigen::VectorXd probe = Eigen::VectorXd::LinSpaced(cfg.dim, -1.0, 1.0);
  const Eigen::VectorXd y = x * probe;
  // Least squares for y = a s + b.
  Eigen::MatrixXd design(10, 2);
  design.col(0) = s.col(0);
  design.col(1).setOnes();
  const Eigen::Vector2d ab = design.colPivHouseholderQr().solve(y);
  const double slope = params.at("lift.clarity.w").value.row(0).dot(probe.transpose());
  const double intercept = params.at("lift.clarity.b").value.row(0).dot(probe.transpose());
  EXPECT_NEAR(ab(0), slope, 1e-9);
  EXPECT_NEAR(ab(1), intercept, 1e-9);
  EXPECT_LT((design * ab - y).norm(), 1e-9);
}

TEST(Lift, MaskedFrameLiftsToZero) {
  auto cfg = small_config();
  Clip c = make_clip(2, 6);
  c.persons[0].present(3) = false;
  const MotionEnergyProvider provider;
  const auto in = make_input(c, cfg, provider);
  auto params = init_params<double>(cfg);
  params.at("lift.centrality.b").value.setConstant(0.5);
  ad::Tape<double> tape;
  Binder<double> bind(tape, params, false);
  ForwardOptions o;
  o.keep_maps = true;
  const auto r = forward(bind, cfg, in, o);
  for (const auto& g : r.spatial_gates) EXPECT_EQ(g(0, 3), 0.0);
  EXPECT_EQ(r.pool_weights(0, 3), 0.0);
}
