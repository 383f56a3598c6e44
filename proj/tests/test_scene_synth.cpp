#include "vip/cues.hpp"
#include "vip/evaluation.hpp"
#include "vip/scene_synth.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace vip;
using namespace vip::synth;

namespace {

double aperture(const PersonTrack& p, int f) {
  const auto& l = *p.lip_points;
  return std::hypot(l(f, 2) - l(f, 0), l(f, 3) - l(f, 1));
}

double centrality_at(const Clip& c, int i, int f) {
  return cues::centrality(cues::box_at(c.persons[i].boxes, f), c.width, c.height);
}

}  // namespace

TEST(Synth, SpatialIntervalMakesPersonZeroVip) {
  ScenarioSpec s;
  s.seed = 3;
  s.num_persons = 2;
  s.frames = 20;
  s.schedule = {{0, 20, 0, Channel::spatial}};
  const auto sc = synthesize(s);
  EXPECT_EQ(sc.label.vip_person_id, 0);
  EXPECT_EQ(sc.clip.vip_person_id, 0);
  double m0 = 0, m1 = 0;
  for (int f = 0; f < 20; ++f) {
    m0 += centrality_at(sc.clip, 0, f);
    m1 += centrality_at(sc.clip, 1, f);
  }
  EXPECT_GT(m0, m1);
}

TEST(Synth, SpeechHandoverOracleMatchesDirectSum) {
  ScenarioSpec s;
  s.seed = 9;
  s.num_persons = 3;
  s.frames = 24;
  s.schedule = {{0, 10, 0, Channel::speech}, {10, 24, 2, Channel::speech}};
  std::map<int, double> total;
  for (const auto& iv : s.schedule) total[iv.person] += 1.0 * (iv.end - iv.start);
  int best = -1;
  for (const auto& [id, v] : total)
    if (best < 0 || v > total[best]) best = id;
  EXPECT_EQ(best, 2);
  EXPECT_EQ(oracle(s).vip_person_id, best);
}

TEST(Synth, WeightedDominanceUsesChannelWeights) {
  ScenarioSpec s;
  s.num_persons = 3;
  s.frames = 30;
  s.schedule = {{0, 10, 0, Channel::speech}, {10, 22, 1, Channel::gesture}, {22, 30, 2, Channel::spatial}};
  const auto w = weighted_dominance(s);
  EXPECT_DOUBLE_EQ(w[0], 10.0);
  EXPECT_DOUBLE_EQ(w[1], 12 * 0.8);
  EXPECT_DOUBLE_EQ(w[2], 8 * 0.5);
  EXPECT_EQ(oracle(s).vip_person_id, 0);
}

TEST(Synth, TiesGoToLowestId) {
  ScenarioSpec s;
  s.num_persons = 3;
  s.frames = 20;
  s.schedule = {{0, 10, 2, Channel::speech}, {10, 20, 1, Channel::speech}};
  EXPECT_EQ(oracle(s).vip_person_id, 1);
}

TEST(Synth, SameSpecTwoSeedsSameOracleDifferentNoise) {
  ScenarioSpec s;
  s.num_persons = 3;
  s.frames = 24;
  s.schedule = {{0, 12, 1, Channel::gesture}, {12, 24, 0, Channel::speech}};
  s.seed = 1;
  const auto a = synthesize(s);
  const auto a2 = synthesize(s);
  s.seed = 2;
  const auto b = synthesize(s);
  EXPECT_TRUE(a.clip == a2.clip);
  EXPECT_EQ(a.label, b.label);
  EXPECT_FALSE(a.clip.persons[0].boxes.isApprox(b.clip.persons[0].boxes));
}

TEST(Synth, SpeechDominantApertureIsThreeTimesOthers) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ScenarioSpec s;
    s.seed = seed;
    s.num_persons = 4;
    s.frames = 48;
    s.schedule = {{0, 20, 1, Channel::speech}, {20, 48, 3, Channel::speech}};
    const auto sc = synthesize(s);
    for (const auto& iv : s.schedule) {
      double lead = 1e9, other = 0;
      for (int f = iv.start; f < iv.end; ++f)
        for (int i = 0; i < s.num_persons; ++i) {
          if (i == iv.person) {
            lead = std::min(lead, aperture(sc.clip.persons[i], f));
          } else {
            other = std::max(other, aperture(sc.clip.persons[i], f));
          }
        }
      EXPECT_GE(lead, 3.0 * other) << "seed " << seed;
    }
  }
}

TEST(Synth, SpatialLeaderIsMostCentralOnNinetyPercentOfFrames) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ScenarioSpec s;
    s.seed = seed;
    s.num_persons = 5;
    s.frames = 48;
    s.schedule = {{0, 24, 2, Channel::spatial}, {24, 48, 4, Channel::spatial}};
    const auto sc = synthesize(s);
    for (const auto& iv : s.schedule) {
      int wins = 0;
      for (int f = iv.start; f < iv.end; ++f) {
        bool best = true;
        for (int i = 0; i < s.num_persons; ++i)
          if (i != iv.person && centrality_at(sc.clip, i, f) >= centrality_at(sc.clip, iv.person, f)) best = false;
        wins += best;
      }
      EXPECT_GE(wins, 0.9 * (iv.end - iv.start)) << "seed " << seed;
    }
  }
}

TEST(Synth, InvalidSchedulesAreRejected) {
  ScenarioSpec s;
  s.num_persons = 3;
  s.frames = 20;
  s.schedule = {{0, 8, 0, Channel::speech}, {9, 20, 1, Channel::speech}};
  EXPECT_THROW(validate_spec(s), SpecError);
  s.schedule = {{0, 12, 0, Channel::speech}, {10, 20, 1, Channel::speech}};
  EXPECT_THROW(validate_spec(s), SpecError);
  s.schedule = {{0, 20, 3, Channel::speech}};
  EXPECT_THROW(validate_spec(s), SpecError);
  s.schedule = {{0, 15, 0, Channel::speech}};
  EXPECT_THROW(synthesize(s), SpecError);
  s.schedule = {{0, 20, 1, Channel::spatial}};
  s.central_distractor = 1;
  EXPECT_THROW(validate_spec(s), SpecError);
}

TEST(Synth, GeneratedClipsValidate) {
  CorpusOptions o;
  for (const auto& item : make_corpus(40, o, 4)) {
    EXPECT_FALSE(has_errors(validate_clip(item.clip))) << item.clip.clip_id;
    EXPECT_EQ(item.clip.vip_person_id, item.label.vip_person_id);
  }
}

TEST(Corpus, DeterministicPerSeed) {
  CorpusOptions o;
  const auto a = make_corpus(100, o, 7);
  const auto b = make_corpus(100, o, 7);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].clip.clip_id, b[i].clip.clip_id);
    EXPECT_EQ(a[i].label, b[i].label);
  }
}

TEST(Corpus, SplitCounts) {
  CorpusOptions o;
  std::map<Split, int> n;
  for (const auto& item : make_corpus(100, o, 7)) ++n[item.clip.split];
  EXPECT_EQ(n[Split::train], 60);
  EXPECT_EQ(n[Split::val], 20);
  EXPECT_EQ(n[Split::test], 20);
}

TEST(Corpus, PersonCountModeIsThree) {
  CorpusOptions o;
  std::map<int, int> hist;
  for (const auto& item : make_corpus(200, o, 13)) ++hist[item.clip.person_count()];
  int mode = 0;
  for (const auto& [n, k] : hist)
    if (mode == 0 || k > hist[mode]) mode = n;
  EXPECT_EQ(mode, 3);
  EXPECT_EQ(hist.size(), 4u);
}

TEST(Corpus, RejectsTooFewClipsAndBadRatios) {
  CorpusOptions o;
  EXPECT_THROW(make_corpus(3, o, 1), SpecError);
  o.split_ratios = {0.5, 0.2, 0.2};
  EXPECT_THROW(make_corpus(10, o, 1), SpecError);
}

TEST(Corpus, OracleLabelJsonRoundTrip) {
  CorpusOptions o;
  for (const auto& item : make_corpus(10, o, 2)) EXPECT_EQ(oracle_from_json(to_json(item.label)), item.label);
}

TEST(Corpus, CentralDistractorIsNeverVip) {
  CorpusOptions o;
  o.profile = Profile::speech;
  o.central_distractor = true;
  for (const auto& item : make_corpus(60, o, 17)) {
    const auto ranked = heuristic_baseline(item.clip, "centrality");
    EXPECT_NE(ranked.front(), item.clip.vip_person_id);
  }
}

TEST(Corpus, SeparabilityOnSmallCorpora) {
  CorpusOptions o;
  o.profile = Profile::spatial;
  const auto spatial = make_corpus(120, o, 23);
  int hit = 0;
  for (const auto& item : spatial) hit += heuristic_baseline(item.clip, "centrality").front() == item.clip.vip_person_id;
  EXPECT_EQ(hit, static_cast<int>(spatial.size()));
}
