#include "vip/inference.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace vip;

namespace {

VectorXb all_valid(int n) { return VectorXb::Constant(n, true); }

// Repeatedly pick the highest remaining probability, lowest id on ties.
std::vector<int> selection_rank(std::vector<double> p, const std::vector<int>& ids) {
  std::vector<int> out;
  std::vector<bool> used(p.size(), false);
  for (std::size_t k = 0; k < p.size(); ++k) {
    int best = -1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (used[i]) continue;
      if (best < 0 || p[i] > p[best] || (p[i] == p[best] && ids[i] < ids[best])) best = static_cast<int>(i);
    }
    used[best] = true;
    out.push_back(ids[best]);
  }
  return out;
}

}  // namespace

TEST(Classify, HandComputedSoftmax) {
  Eigen::MatrixXd h(2, 2);
  h << 1, 0, 0, 1;
  Eigen::RowVectorXd w(2);
  w << 1, 0;
  const auto p = classify(h, all_valid(2), w, 1.0);
  EXPECT_NEAR(p[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
  EXPECT_NEAR(p[1], 1.0 / (std::exp(1.0) + 1.0), 1e-15);
}

TEST(Classify, IdenticalRowsSplitEvenly) {
  Eigen::MatrixXd h(2, 3);
  h << 0.3, -1, 2, 0.3, -1, 2;
  const Eigen::RowVectorXd w = Eigen::RowVectorXd::Constant(3, 0.7);
  const auto p = classify(h, all_valid(2), w, 0.07);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Classify, SingleValidPersonTakesAllMass) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Random(3, 4);
  VectorXb valid(3);
  valid << false, true, false;
  const auto p = classify(h, valid, Eigen::RowVectorXd::Ones(4), 0.07);
  EXPECT_EQ(p, (std::vector<double>{0, 1, 0}));
}

TEST(Classify, NoValidPersonThrows) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Random(2, 4);
  EXPECT_THROW(classify(h, VectorXb::Constant(2, false), Eigen::RowVectorXd::Ones(4), 0.07), InferenceError);
  EXPECT_THROW(classify(h, all_valid(2), Eigen::RowVectorXd::Ones(4), 0.0), ConfigError);
}

TEST(Classify, ArgmaxInvariantAndPeakFlattensWithTemperature) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int s = 0; s < 200; ++s) {
    const int n = 2 + s % 5;
    Eigen::MatrixXd h(n, 6);
    for (int i = 0; i < h.size(); ++i) h.data()[i] = g(rng);
    Eigen::RowVectorXd w(6);
    for (int i = 0; i < 6; ++i) w(i) = g(rng);
    int first = -1;
    double prev = 2.0;
    for (double tau : {0.05, 0.07, 0.1, 0.5, 1.0, 5.0}) {
      const auto p = classify(h, all_valid(n), w, tau);
      const auto it = std::max_element(p.begin(), p.end());
      const int arg = static_cast<int>(it - p.begin());
      if (first < 0) first = arg;
      EXPECT_EQ(arg, first);
      EXPECT_LE(*it, prev + 1e-12);
      prev = *it;
    }
  }
}

TEST(Rank, MatchesSelectionSortOracle) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> level(0, 3);
  for (int s = 0; s < 300; ++s) {
    const int n = 1 + s % 7;
    std::vector<double> p(n);
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) {
      p[i] = 0.25 * level(rng);
      ids[i] = (i * 7 + s) % 11 + 11 * i;
    }
    EXPECT_EQ(rank(p, ids), selection_rank(p, ids));
  }
  EXPECT_EQ(rank({0.2, 0.5, 0.5}), (std::vector<int>{1, 2, 0}));
}

TEST(PercentileRank, WorkedExamples) {
  EXPECT_DOUBLE_EQ(percentile_rank({0.2, 0.5, 0.9}, 1, {true, true, true}), 0.5);
  EXPECT_DOUBLE_EQ(percentile_rank({0.4, 0.4, 0.4}, 0, {true, true, true}), 0.0);
  EXPECT_DOUBLE_EQ(percentile_rank({0.9, 0.1}, 0, {true, false}), 1.0);
  EXPECT_THROW(percentile_rank({0.9, 0.1}, 1, {true, false}), InferenceError);
}

TEST(PercentileRank, MatchesSortedPositionOracle) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> level(0, 4);
  std::bernoulli_distribution keep(0.8);
  for (int n = 1; n <= 6; ++n)
    for (int s = 0; s < 200; ++s) {
      std::vector<double> sc(n);
      std::vector<bool> valid(n);
      for (int i = 0; i < n; ++i) {
        sc[i] = level(rng);
        valid[i] = keep(rng);
      }
      const int vip = s % n;
      valid[vip] = true;
      std::vector<double> others;
      for (int i = 0; i < n; ++i)
        if (valid[i] && i != vip) others.push_back(sc[i]);
      std::sort(others.begin(), others.end());
      const double expect =
          others.empty() ? 1.0
                         : static_cast<double>(std::lower_bound(others.begin(), others.end(), sc[vip]) - others.begin()) /
                               static_cast<double>(others.size());
      EXPECT_DOUBLE_EQ(percentile_rank(sc, vip, valid), expect);
    }
}

TEST(Rationale, CentralSpeakerSentence) {
  const auto r = make_rationale({{"centrality", 0.9}, {"area", 0.5}, {"clarity", 0.2}, {"lip", 0.8}, {"action", 0.1}});
  EXPECT_EQ(r.template_text, "The person holds central prominence and engages in continuous active speech.");
  ASSERT_EQ(r.retained.size(), 2u);
  EXPECT_EQ(r.retained[0].cue, "centrality");
  EXPECT_EQ(r.retained[1].cue, "lip");
}

TEST(Rationale, FallbackWhenNothingRetained) {
  const auto r = make_rationale({{"centrality", 0.7}, {"area", 0.0}});
  EXPECT_TRUE(r.retained.empty());
  EXPECT_EQ(r.template_text, "The person is the most contextually significant individual in the scene.");
}

TEST(Rationale, AllFiveClausesInCueOrder) {
  std::map<std::string, double> ranks;
  for (auto n : cues::kCueNames) ranks[std::string(n)] = 1.0;
  const auto r = make_rationale(ranks);
  EXPECT_EQ(r.template_text,
            "The person holds central prominence and occupies a dominant share of the frame and appears in sharp "
            "focus and engages in continuous active speech and performs salient physical actions.");
}

TEST(Rationale, ThresholdGridRetainsStrictlyAbove) {
  const std::map<std::string, double> ranks = {
      {"centrality", 0.0}, {"area", 0.25}, {"clarity", 0.5}, {"lip", 0.75}, {"action", 1.0}};
  for (int k = 0; k <= 20; ++k) {
    const double tau = 0.05 * k;
    const auto r = make_rationale(ranks, tau);
    std::size_t expect = 0;
    for (const auto& [_, v] : ranks) expect += v > tau ? 1 : 0;
    EXPECT_EQ(r.retained.size(), expect) << tau;
    for (const auto& c : r.retained) EXPECT_GT(c.rank, tau);
  }
}

TEST(Refine, BaselineReturnsTemplateUnchanged) {
  MockRefinementClient mock;
  const auto r = make_rationale({{"centrality", 0.9}});
  const auto out = refine_rationale(&mock, {"c", "Office"}, 3, r, GuidanceMode::baseline);
  EXPECT_FALSE(out.refined_text.has_value());
  EXPECT_EQ(out.text(), r.template_text);
}

TEST(Refine, GuidedKeepsEveryRetainedClause) {
  MockRefinementClient mock;
  const auto r = make_rationale({{"centrality", 0.9}, {"lip", 1.0}});
  const auto out = refine_rationale(&mock, {"c", "Office"}, 3, r, GuidanceMode::guided);
  ASSERT_TRUE(out.refined_text.has_value());
  EXPECT_NE(out.text().find("holds central prominence"), std::string::npos);
  EXPECT_NE(out.text().find("engages in continuous active speech"), std::string::npos);
  EXPECT_NE(out.text().find("office"), std::string::npos);
  const auto q = make_request({"c", "Office"}, 3, r, GuidanceMode::guided);
  EXPECT_EQ(q.clauses.size(), 2u);
  EXPECT_TRUE(make_request({"c", "Office"}, 3, r, GuidanceMode::unguided).clauses.empty());
  EXPECT_EQ(to_json(q)["prompt_version"], "refine_v1");
}

TEST(Refine, UnguidedRewritesTemplate) {
  MockRefinementClient mock;
  const auto r = make_rationale({{"area", 0.9}});
  const auto out = refine_rationale(&mock, {"c", "Office"}, 3, r, GuidanceMode::unguided);
  EXPECT_EQ(out.text(), "In this scene, the person occupies a dominant share of the frame.");
}

TEST(Refine, FailingBackendFallsBackWithWarning) {
  FailingRefinementClient bad;
  const auto r = make_rationale({{"centrality", 0.9}});
  const auto out = refine_rationale(&bad, {"c", "Office"}, 3, r, GuidanceMode::guided);
  EXPECT_TRUE(out.fallback_warning);
  EXPECT_EQ(out.text(), r.template_text);
  EXPECT_TRUE(to_json(out)["fallback_warning"].get<bool>());
}

TEST(Refine, UnreachableHttpBackendFallsBack) {
  auto client = make_refinement_client("http:http://127.0.0.1:9", 0.5);
  const auto r = make_rationale({{"centrality", 0.9}});
  const auto out = refine_rationale(client.get(), {"c", "Office"}, 3, r, GuidanceMode::guided);
  EXPECT_TRUE(out.fallback_warning);
  EXPECT_EQ(out.text(), r.template_text);
  EXPECT_THROW(make_refinement_client("carrier-pigeon"), ConfigError);
}

TEST(Refine, PromptIsShipped) {
  EXPECT_NE(refine_prompt().find("most important person"), std::string_view::npos);
  EXPECT_EQ(guidance_from_string("guided"), GuidanceMode::guided);
  EXPECT_THROW(guidance_from_string("loud"), ConfigError);
}
