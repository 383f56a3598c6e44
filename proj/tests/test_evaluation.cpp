#include "test_support.hpp"
#include "vip/evaluation.hpp"
#include "vip/scene_synth.hpp"

#include <gtest/gtest.h>
#include <zlib.h>

#include <fstream>
#include <iterator>

using namespace vip;
using vip::testing::make_clip;

namespace {

// Enough of JSON Schema for the report schema: type, const, required,
// properties, additionalProperties, items, minimum, maximum and local $ref.
void check_schema(const nlohmann::json& v, const nlohmann::json& s, const nlohmann::json& root, const std::string& at,
                  std::vector<std::string>& errors) {
  if (s.contains("$ref")) {
    const auto ref = s["$ref"].get<std::string>();
    check_schema(v, root.at(nlohmann::json::json_pointer(ref.substr(1))), root, at, errors);
    return;
  }
  if (s.contains("const") && v != s["const"]) errors.push_back(at + ": const mismatch");
  if (s.contains("type")) {
    const auto t = s["type"].get<std::string>();
    const bool ok = (t == "object" && v.is_object()) || (t == "array" && v.is_array()) ||
                    (t == "string" && v.is_string()) || (t == "number" && v.is_number()) ||
                    (t == "integer" && v.is_number_integer());
    if (!ok) {
      errors.push_back(at + ": expected " + t);
      return;
    }
  }
  if (v.is_number()) {
    if (s.contains("minimum") && v.get<double>() < s["minimum"].get<double>()) errors.push_back(at + ": below minimum");
    if (s.contains("maximum") && v.get<double>() > s["maximum"].get<double>()) errors.push_back(at + ": above maximum");
  }
  if (v.is_object()) {
    for (const auto& k : s.value("required", nlohmann::json::array()))
      if (!v.contains(k.get<std::string>())) errors.push_back(at + ": missing " + k.get<std::string>());
    for (const auto& [k, sub] : v.items()) {
      if (s.contains("properties") && s["properties"].contains(k))
        check_schema(sub, s["properties"][k], root, at + "/" + k, errors);
      else if (s.contains("additionalProperties"))
        check_schema(sub, s["additionalProperties"], root, at + "/" + k, errors);
    }
  }
  if (v.is_array() && s.contains("items"))
    for (std::size_t i = 0; i < v.size(); ++i) check_schema(v[i], s["items"], root, at + "/" + std::to_string(i), errors);
}

std::vector<std::string> validate_report(const nlohmann::json& report) {
  std::ifstream in(std::string(VIP_SOURCE_DIR) + "/schemas/eval_report.v1.json");
  const auto schema = nlohmann::json::parse(in);
  std::vector<std::string> errors;
  check_schema(report, schema, schema, "", errors);
  return errors;
}

std::vector<Clip> small_corpus(int n, std::uint64_t seed) {
  synth::CorpusOptions o;
  o.frames = 12;
  std::vector<Clip> clips;
  for (auto& item : synth::make_corpus(n, o, seed)) clips.push_back(std::move(item.clip));
  return clips;
}

ModelConfig eval_model() {
  ModelConfig m;
  m.dim = 8;
  m.heads = 2;
  m.lip_dim = 4;
  m.max_frames = 16;
  m.seed = 6;
  return m;
}

std::uint32_t be32(const std::string& b, std::size_t at) {
  return (std::uint32_t(std::uint8_t(b[at])) << 24) | (std::uint32_t(std::uint8_t(b[at + 1])) << 16) |
         (std::uint32_t(std::uint8_t(b[at + 2])) << 8) | std::uint32_t(std::uint8_t(b[at + 3]));
}

}  // namespace

TEST(RankK, WorkedExample) {
  const std::vector<std::vector<int>> ranked = {{1, 2, 3}, {2, 1, 3}, {3, 2, 1}};
  const std::vector<int> truth = {1, 1, 1};
  EXPECT_DOUBLE_EQ(rank_k_accuracy(ranked, truth, 1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(rank_k_accuracy(ranked, truth, 2), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(rank_k_accuracy(ranked, truth, 3), 1.0);
  EXPECT_DOUBLE_EQ(rank_k_accuracy(ranked, truth, 9), 1.0);
  EXPECT_THROW(rank_k_accuracy(ranked, truth, 0), std::invalid_argument);
}

TEST(Baseline, AreaMatchesRawBoxOrder) {
  Clip c = make_clip(4, 6);
  const float widths[] = {60, 140, 100, 120};
  for (int i = 0; i < 4; ++i)
    for (int f = 0; f < 6; ++f) c.persons[i].boxes(f, 2) = c.persons[i].boxes(f, 0) + widths[i];
  EXPECT_EQ(heuristic_baseline(c, "area"), (std::vector<int>{1, 3, 2, 0}));
}

TEST(Baseline, CentralityPrefersFrameCentre) {
  const Clip c = make_clip(3, 6);
  // Box centres at x = 90, 270, 450 in a 640 wide frame.
  EXPECT_EQ(heuristic_baseline(c, "centrality"), (std::vector<int>{1, 2, 0}));
  EXPECT_EQ(heuristic_baseline(c, "clarity"), (std::vector<int>{2, 1, 0}));
  EXPECT_THROW(heuristic_baseline(c, "loudness"), ConfigError);
}

TEST(Baseline, IdenticalBoxesRankByAscendingId) {
  Clip c = make_clip(3, 6);
  const int ids[] = {5, 2, 9};
  for (int i = 0; i < 3; ++i) {
    c.persons[i].person_id = ids[i];
    c.persons[i].boxes = c.persons[0].boxes;
  }
  EXPECT_EQ(heuristic_baseline(c, "area"), (std::vector<int>{2, 5, 9}));
  EXPECT_EQ(heuristic_baseline(c, "centrality"), (std::vector<int>{2, 5, 9}));
}

TEST(Baseline, AbsentPersonComesLast) {
  Clip c = make_clip(3, 6);
  c.persons[1].present.setConstant(false);
  c.persons[1].boxes.setZero();
  const auto r = heuristic_baseline(c, "centrality");
  EXPECT_EQ(r.back(), 1);
}

TEST(Baseline, ClarityNeedsData) {
  Clip c = make_clip(3, 6);
  for (auto& p : c.persons) p.clarity.reset();
  EXPECT_THROW(heuristic_baseline(c, "clarity"), ConfigError);
}

TEST(Similarity, MeanAndPopulationVariance) {
  const auto e = text::make_embedder("hashing");
  const auto st = description_similarity({"red coat", "blue hat"}, {"red coat", "green shoe"}, *e);
  EXPECT_EQ(st.count, 2);
  EXPECT_NEAR(st.mean, 0.5, 1e-12);
  EXPECT_NEAR(st.variance, 0.25, 1e-12);
  EXPECT_THROW(description_similarity({"a"}, {}, *e), std::invalid_argument);
}

TEST(Evaluate, EmptySplitThrows) {
  auto cfg = eval_model();
  auto params = init_params<float>(cfg);
  EXPECT_THROW(evaluate_model(params, cfg, {}, {}, "x"), std::invalid_argument);
  EXPECT_THROW(evaluate_baseline("area", {}, {}, "x"), std::invalid_argument);
}

TEST(Evaluate, ReportIsDeterministicAndMatchesSchema) {
  auto cfg = eval_model();
  auto params = init_params<float>(cfg);
  const auto clips = small_corpus(12, 31);
  EvalOptions one;
  EvalOptions four;
  four.jobs = 4;
  const auto a = to_json(evaluate_model(params, cfg, clips, one, "fp"));
  const auto b = to_json(evaluate_model(params, cfg, clips, four, "fp"));
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a["count"], 12);
  EXPECT_EQ(a["baselines"].size(), 3u);
  EXPECT_EQ(a["description"].size(), 3u);
  EXPECT_LE(a["rank1"].get<double>(), a["rank2"].get<double>());
  EXPECT_LE(a["rank2"].get<double>(), a["rank3"].get<double>());
  const auto errors = validate_report(a);
  EXPECT_TRUE(errors.empty()) << errors.front();
  const auto base = to_json(evaluate_baseline("centrality", clips, one, "fp"));
  EXPECT_EQ(base["source"], "baseline:centrality");
  EXPECT_TRUE(validate_report(base).empty());
}

TEST(Evaluate, SchemaCheckerRejectsBrokenReports) {
  auto cfg = eval_model();
  auto params = init_params<float>(cfg);
  auto j = to_json(evaluate_baseline("area", small_corpus(4, 2), {}, "fp"));
  j.erase("rank2");
  j["indoor"]["rank1"] = 3.0;
  EXPECT_EQ(validate_report(j).size(), 2u);
}

TEST(Evaluate, BaselineReportMatchesPerClipOracle) {
  const auto clips = small_corpus(20, 5);
  const auto r = evaluate_baseline("area", clips, {}, "fp");
  int hits = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const int pred = heuristic_baseline(clips[i], "area").front();
    EXPECT_EQ(r.predicted[i], pred);
    hits += pred == clips[i].vip_person_id ? 1 : 0;
  }
  EXPECT_DOUBLE_EQ(r.overall.rank1, hits / 20.0);
  int total = 0;
  for (const auto& [_, s] : r.per_category) total += s.count;
  EXPECT_EQ(total, 20);
}

TEST(Png, EncoderProducesValidFile) {
  const auto dir = vip::testing::temp_dir("png");
  const std::vector<std::uint8_t> rgb = {255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30, 40, 50, 60, 70, 80, 90};
  write_png(dir / "a.png", 3, 2, rgb);
  std::ifstream in(dir / "a.png", std::ios::binary);
  const std::string b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_GT(b.size(), 8u);
  EXPECT_EQ(b.substr(0, 8), std::string("\x89PNG\r\n\x1a\n", 8));
  std::size_t at = 8;
  std::string idat;
  std::vector<std::string> types;
  while (at + 8 <= b.size()) {
    const std::uint32_t len = be32(b, at);
    const std::string type = b.substr(at + 4, 4);
    const std::string data = b.substr(at + 8, len);
    const std::uint32_t crc = be32(b, at + 8 + len);
    uLong want = crc32(0L, reinterpret_cast<const Bytef*>(type.data()), 4);
    want = crc32(want, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size()));
    EXPECT_EQ(crc, want) << type;
    types.push_back(type);
    if (type == "IHDR") {
      EXPECT_EQ(be32(data, 0), 3u);
      EXPECT_EQ(be32(data, 4), 2u);
      EXPECT_EQ(data[8], 8);
      EXPECT_EQ(data[9], 2);
    }
    if (type == "IDAT") idat += data;
    at += 12 + len;
  }
  EXPECT_EQ(types, (std::vector<std::string>{"IHDR", "IDAT", "IEND"}));
  std::vector<std::uint8_t> raw(2 * (3 * 3 + 1));
  uLongf n = raw.size();
  ASSERT_EQ(uncompress(raw.data(), &n, reinterpret_cast<const Bytef*>(idat.data()), idat.size()), Z_OK);
  ASSERT_EQ(n, raw.size());
  for (int y = 0; y < 2; ++y) {
    EXPECT_EQ(raw[y * 10], 0);
    for (int x = 0; x < 9; ++x) EXPECT_EQ(raw[y * 10 + 1 + x], rgb[y * 9 + x]);
  }
  EXPECT_THROW(write_png(dir / "b.png", 2, 2, rgb), std::invalid_argument);
}

TEST(Png, OverlaysWrittenPerClip) {
  const auto dir = vip::testing::temp_dir("overlay");
  const auto clips = small_corpus(4, 8);
  EvalOptions o;
  o.overlay_dir = dir;
  o.overlay_frames = 2;
  evaluate_baseline("area", clips, o, "fp");
  int files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 8);
  EXPECT_TRUE(std::filesystem::exists(dir / (clips[0].clip_id + "_0.png")));
  EXPECT_TRUE(std::filesystem::exists(dir / (clips[0].clip_id + "_11.png")));
}

TEST(Indoor, DefaultSetIsNonEmpty) {
  const auto s = default_indoor();
  EXPECT_FALSE(s.empty());
  EXPECT_TRUE(s.contains("Office") || s.contains("Classroom"));
}
