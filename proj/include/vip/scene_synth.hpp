#pragma once

// Synthetic multi-person clips with scripted importance shifts.
//
// A scenario is a schedule of intervals, each making one person dominant on
// one channel: speech (lip-aperture bursts), gesture (motion-energy bursts) or
// spatial (drift to the frame centre). The oracle VIP is the person with the
// largest channel-weighted dominance duration.

#include "vip/data_model.hpp"

#include <json.hpp>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vip::synth {

enum class Channel { speech, gesture, spatial };
std::string to_string(Channel c);
Channel channel_from_string(const std::string& s);

struct Interval {
  int start = 0;  // inclusive
  int end = 0;    // exclusive
  int person = 0;
  Channel channel = Channel::speech;
};

struct ChannelWeights {
  double speech = 1.0;
  double gesture = 0.8;
  double spatial = 0.5;
  double of(Channel c) const;
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  int num_persons = 3;
  int frames = 48;
  double fps = 12.0;
  int width = 640;
  int height = 360;
  std::vector<Interval> schedule;
  double noise_level = 0.05;
  // Person parked at the frame centre for the whole clip; never the VIP.
  std::optional<int> central_distractor;
  std::string category = "Office";
  ChannelWeights weights;
};

// Throws SpecError unless the schedule tiles [0, T) without overlap and every
// dominant person exists.
void validate_spec(const ScenarioSpec& spec);

struct OracleLabel {
  int vip_person_id = 0;
  std::map<std::string, std::vector<double>> per_cue_truth;  // cue -> per-person dominance frames
  std::vector<std::string> rationale_cues;

  bool operator==(const OracleLabel&) const = default;
};

// Channel-weighted dominance duration per person.
std::vector<double> weighted_dominance(const ScenarioSpec& spec);
OracleLabel oracle(const ScenarioSpec& spec);

struct Scenario {
  Clip clip;
  OracleLabel label;
};

Scenario synthesize(const ScenarioSpec& spec);

enum class Profile { spatial, speech, gesture, mixed };
std::string to_string(Profile p);
Profile profile_from_string(const std::string& s);

struct CorpusOptions {
  Profile profile = Profile::mixed;
  std::array<double, 3> split_ratios = {0.6, 0.2, 0.2};
  bool central_distractor = false;
  int frames = 48;
  double noise_level = 0.05;
  // Minimum weighted-dominance gap between the VIP and the runner-up.
  double min_margin = 6.0;
};

// Relative frequency of N = 2..5 persons; 3 is the mode.
inline constexpr std::array<double, 4> kPersonCountWeights = {0.15, 0.40, 0.27, 0.18};

ScenarioSpec random_spec(const CorpusOptions& options, int num_persons, std::uint64_t seed);

struct CorpusItem {
  Clip clip;
  OracleLabel label;
  ScenarioSpec spec;
};

std::vector<CorpusItem> make_corpus(int count, const CorpusOptions& options, std::uint64_t seed);

nlohmann::json to_json(const OracleLabel& label);
OracleLabel oracle_from_json(const nlohmann::json& j);

}  // namespace vip::synth
