#include "vip/scene_synth.hpp"

#include "vip/cues.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace vip::synth {

std::string to_string(Channel c) {
  switch (c) {
    case Channel::speech:
      return "speech";
    case Channel::gesture:
      return "gesture";
    case Channel::spatial:
      return "spatial";
  }
  return "speech";
}

Channel channel_from_string(const std::string& s) {
  if (s == "speech") return Channel::speech;
  if (s == "gesture") return Channel::gesture;
  if (s == "spatial") return Channel::spatial;
  throw SpecError("unknown channel '" + s + "'");
}

double ChannelWeights::of(Channel c) const {
  switch (c) {
    case Channel::speech:
      return speech;
    case Channel::gesture:
      return gesture;
    case Channel::spatial:
      return spatial;
  }
  return 0.0;
}

std::string to_string(Profile p) {
  switch (p) {
    case Profile::spatial:
      return "spatial";
    case Profile::speech:
      return "speech";
    case Profile::gesture:
      return "gesture";
    case Profile::mixed:
      return "mixed";
  }
  return "mixed";
}

Profile profile_from_string(const std::string& s) {
  if (s == "spatial") return Profile::spatial;
  if (s == "speech") return Profile::speech;
  if (s == "gesture") return Profile::gesture;
  if (s == "mixed") return Profile::mixed;
  throw SpecError("unknown profile '" + s + "'");
}

void validate_spec(const ScenarioSpec& spec) {
  if (spec.num_persons < 2 || spec.num_persons > 8) throw SpecError("num_persons must lie in [2, 8]");
  if (spec.frames < 1) throw SpecError("frames must be >= 1");
  if (spec.noise_level < 0) throw SpecError("noise_level must be >= 0");
  if (spec.width < 16 || spec.height < 16) throw SpecError("frame size too small");
  if (spec.schedule.empty()) throw SpecError("empty dominance schedule");
  std::vector<Interval> sorted = spec.schedule;
  std::sort(sorted.begin(), sorted.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; });
  int cursor = 0;
  for (const auto& iv : sorted) {
    if (iv.start != cursor) throw SpecError("schedule leaves a gap or overlaps at frame " + std::to_string(cursor));
    if (iv.end <= iv.start) throw SpecError("empty schedule interval at frame " + std::to_string(iv.start));
    if (iv.person < 0 || iv.person >= spec.num_persons) throw SpecError("dominant person out of range");
    if (spec.central_distractor && iv.person == *spec.central_distractor && iv.channel == Channel::spatial)
      throw SpecError("the central distractor cannot hold a spatial interval");
    cursor = iv.end;
  }
  if (cursor != spec.frames) throw SpecError("schedule does not cover [0, T)");
  if (spec.central_distractor && (*spec.central_distractor < 0 || *spec.central_distractor >= spec.num_persons))
    throw SpecError("central distractor out of range");
  if (!is_known_category(spec.category)) throw SpecError("unknown category '" + spec.category + "'");
}

std::vector<double> weighted_dominance(const ScenarioSpec& spec) {
  std::vector<double> w(spec.num_persons, 0.0);
  for (const auto& iv : spec.schedule) w[iv.person] += spec.weights.of(iv.channel) * (iv.end - iv.start);
  return w;
}

OracleLabel oracle(const ScenarioSpec& spec) {
  validate_spec(spec);
  const auto w = weighted_dominance(spec);
  OracleLabel o;
  o.vip_person_id = static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());  // first max = lowest id
  std::vector<double> speech(spec.num_persons, 0.0), gesture(spec.num_persons, 0.0), spatial(spec.num_persons, 0.0);
  for (const auto& iv : spec.schedule) {
    const double d = iv.end - iv.start;
    (iv.channel == Channel::speech ? speech : iv.channel == Channel::gesture ? gesture : spatial)[iv.person] += d;
  }
  o.per_cue_truth["lip"] = speech;
  o.per_cue_truth["action"] = gesture;
  o.per_cue_truth["centrality"] = spatial;
  for (auto cue : cues::kCueNames) {
    auto it = o.per_cue_truth.find(std::string(cue));
    if (it != o.per_cue_truth.end() && it->second[o.vip_person_id] > 0) o.rationale_cues.emplace_back(cue);
  }
  return o;
}

namespace {

constexpr std::array<std::string_view, 8> kColors = {"red", "blue", "green", "grey", "black", "white", "yellow", "brown"};
constexpr std::array<std::string_view, 6> kGarments = {"jacket", "shirt", "sweater", "coat", "dress", "hoodie"};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct Pos {
  double x, y;
};

}  // namespace

Scenario synthesize(const ScenarioSpec& spec) {
  Scenario out;
  out.label = oracle(spec);
  const int n = spec.num_persons;
  const int t = spec.frames;
  const double noise = spec.noise_level;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);

  // Per-frame dominance lookup.
  std::vector<Interval> at(t);
  for (const auto& iv : spec.schedule)
    for (int f = iv.start; f < iv.end; ++f) at[f] = iv;

  // Home positions: away from the centre, pairwise separated.
  std::vector<Pos> home(n);
  for (int i = 0; i < n; ++i) {
    if (spec.central_distractor && *spec.central_distractor == i) {
      home[i] = {0.5, 0.5};
      continue;
    }
    for (int attempt = 0;; ++attempt) {
      Pos p{0.1 + 0.8 * u01(rng), 0.3 + 0.4 * u01(rng)};
      const double d = std::hypot(p.x - 0.5, p.y - 0.5);
      bool ok = d >= 0.34 && d <= 0.42;
      for (int j = 0; j < i && ok; ++j)
        if (std::hypot(p.x - home[j].x, p.y - home[j].y) < 0.12) ok = false;
      if (ok || attempt > 500) {
        home[i] = p;
        break;
      }
    }
  }

  Clip& c = out.clip;
  c.clip_id = "spec_" + std::to_string(spec.seed);
  c.category = spec.category;
  c.fps = spec.fps;
  c.num_frames = t;
  c.width = spec.width;
  c.height = spec.height;
  c.vip_person_id = out.label.vip_person_id;
  c.scene_description = "A " + lower(spec.category) + " scene with " + std::to_string(n) + " people.";
  {
    std::string r = "In this " + lower(spec.category) + " scene, the person";
    std::vector<std::string> clauses;
    for (const auto& cue : out.label.rationale_cues) clauses.emplace_back(cues::kCueClauses[cues::cue_index(cue)]);
    if (clauses.empty()) clauses.emplace_back("is the most contextually significant individual");
    for (std::size_t k = 0; k < clauses.size(); ++k) r += (k == 0 ? " " : " and ") + clauses[k];
    c.rationale_text = r + ".";
  }

  const double cap_quiet = 0.05;  // non-speaking aperture cap, fraction of face height
  for (int i = 0; i < n; ++i) {
    PersonTrack p;
    p.person_id = i;
    p.description = "the person in the " + std::string(kColors[rng() % kColors.size()]) + " " +
                    std::string(kGarments[rng() % kGarments.size()]);
    p.boxes.resize(t, 4);
    p.face_boxes = FrameRows(t, 4);
    p.lip_points = FrameRows(t, 4);
    p.clarity = Eigen::VectorXf(t);
    p.motion = Eigen::VectorXf(t);
    p.present = VectorXb::Constant(t, true);

    const double bw = 40.0 + 30.0 * u01(rng);
    const double bh = 2.0 * bw;
    const double speak_amp = 0.30 + 0.15 * u01(rng);
    const double speak_freq = 1.5 + u01(rng);
    const double phase = 2 * std::numbers::pi * u01(rng);
    const double clarity_base = 0.2 + 0.8 * u01(rng);
    Pos pos = home[i];
    Pos offset{0, 0};

    for (int f = 0; f < t; ++f) {
      const Interval& iv = at[f];
      const bool dominant = iv.person == i;
      const bool spatial_lead = dominant && iv.channel == Channel::spatial;

      // position: smooth random walk around home, or a fast drift to the centre
      offset.x = std::clamp(0.9 * offset.x + 0.1 * noise * n01(rng), -0.03, 0.03);
      offset.y = std::clamp(0.9 * offset.y + 0.1 * noise * n01(rng), -0.03, 0.03);
      Pos target = home[i];
      if (spatial_lead) target = {0.5 + 0.02 * n01(rng) * noise / 0.05, 0.5 + 0.02 * n01(rng) * noise / 0.05};
      const double rate = spatial_lead ? 0.9 : 0.5;
      if (spec.central_distractor && *spec.central_distractor == i) {
        pos = {0.5 + offset.x * 0.3, 0.5 + offset.y * 0.3};
      } else {
        pos.x += rate * (target.x - pos.x);
        pos.y += rate * (target.y - pos.y);
      }
      const Pos draw = spatial_lead || (spec.central_distractor && *spec.central_distractor == i)
                           ? pos
                           : Pos{pos.x + offset.x, pos.y + offset.y};
      const double scale = 1.0 + 0.03 * std::sin(0.3 * f + phase);
      const double w = bw * scale, h = bh * scale;
      const double cx = draw.x * spec.width, cy = draw.y * spec.height;
      p.boxes.row(f) << float(cx - w / 2), float(cy - h / 2), float(cx + w / 2), float(cy + h / 2);
      const double fx1 = cx - 0.3 * w, fy1 = cy - h / 2 + 0.02 * h;
      const double fh = 0.28 * h;
      p.face_boxes->row(f) << float(fx1), float(fy1), float(fx1 + 0.6 * w), float(fy1 + fh);

      // lip aperture in face-height units
      double ap;
      if (dominant && iv.channel == Channel::speech) {
        ap = speak_amp * (0.55 + 0.45 * std::abs(std::sin(2 * std::numbers::pi * speak_freq * f / spec.fps + phase)));
      } else {
        ap = std::min(cap_quiet, std::abs(0.01 * n01(rng)) * noise / 0.05);
      }
      const double mx = cx, my = fy1 + 0.8 * fh;
      const double jitter = 0.01 * fh * n01(rng);
      p.lip_points->row(f) << float(mx + jitter), float(my - ap * fh / 2), float(mx), float(my + ap * fh / 2);

      // motion energy and clarity channels
      double m;
      if (dominant && iv.channel == Channel::gesture) {
        m = 0.35 + 0.25 * std::abs(std::sin(2 * std::numbers::pi * 0.7 * f / spec.fps + phase)) + 0.02 * noise * n01(rng);
      } else {
        m = 0.02 + std::min(0.04, 0.02 * std::abs(n01(rng)) * noise / 0.05);
      }
      (*p.motion)(f) = static_cast<float>(std::max(0.0, m));
      (*p.clarity)(f) = static_cast<float>(std::max(0.0, clarity_base + 0.6 * noise * n01(rng)));
    }
    c.persons.push_back(std::move(p));
  }
  return out;
}

ScenarioSpec random_spec(const CorpusOptions& options, int num_persons, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.seed = seed;
  spec.num_persons = num_persons;
  spec.frames = options.frames;
  spec.noise_level = options.noise_level;
  std::mt19937_64 rng(splitmix64(seed ^ 0x5eedULL));
  spec.category = std::string(kCategories[rng() % kCategories.size()]);
  if (options.central_distractor) spec.central_distractor = static_cast<int>(rng() % num_persons);

  const int t = options.frames;
  const int min_len = std::max(1, std::min(6, t / 4));
  auto pick_channel = [&]() {
    switch (options.profile) {
      case Profile::spatial:
        return Channel::spatial;
      case Profile::speech:
        return Channel::speech;
      case Profile::gesture:
        return Channel::gesture;
      case Profile::mixed:
        break;
    }
    return static_cast<Channel>(rng() % 3);
  };

  for (int attempt = 0; attempt < 10000; ++attempt) {
    const int max_k = options.profile == Profile::spatial ? 3 : 4;
    const int min_k = options.profile == Profile::spatial ? 1 : 2;
    int k = min_k + static_cast<int>(rng() % (max_k - min_k + 1));
    k = std::min(k, std::max(1, t / min_len));
    // k - 1 cut points with every piece at least min_len long
    std::vector<int> cuts;
    const int slack = t - k * min_len;
    std::vector<int> extra(k, 0);
    for (int s = 0; s < slack; ++s) extra[rng() % k] += 1;
    int cursor = 0;
    spec.schedule.clear();
    for (int j = 0; j < k; ++j) {
      const int len = min_len + extra[j];
      Interval iv;
      iv.start = cursor;
      iv.end = cursor + len;
      iv.channel = pick_channel();
      do {
        iv.person = static_cast<int>(rng() % num_persons);
      } while (spec.central_distractor && iv.person == *spec.central_distractor);
      spec.schedule.push_back(iv);
      cursor += len;
    }
    auto w = weighted_dominance(spec);
    std::sort(w.begin(), w.end(), std::greater<>());
    if (w[0] - w[1] >= options.min_margin) return spec;
  }
  throw SpecError("could not draw a schedule with the requested dominance margin");
}

std::vector<CorpusItem> make_corpus(int count, const CorpusOptions& options, std::uint64_t seed) {
  const int strata = static_cast<int>(kPersonCountWeights.size());
  if (count < strata) throw SpecError("corpus count must be at least the number of person-count strata");
  const double ratio_sum = options.split_ratios[0] + options.split_ratios[1] + options.split_ratios[2];
  if (std::abs(ratio_sum - 1.0) > 1e-9) throw SpecError("split ratios must sum to 1");
  for (double r : options.split_ratios)
    if (r < 0) throw SpecError("split ratios must be non-negative");

  // Largest-remainder allocation over N = 2..5, at least one clip per stratum.
  std::vector<int> per(strata, 1);
  int left = count - strata;
  std::vector<double> rem(strata);
  int assigned = 0;
  for (int s = 0; s < strata; ++s) {
    const double want = left * kPersonCountWeights[s];
    per[s] += static_cast<int>(std::floor(want));
    assigned += static_cast<int>(std::floor(want));
    rem[s] = want - std::floor(want);
  }
  std::vector<int> order(strata);
  for (int s = 0; s < strata; ++s) order[s] = s;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int r = 0; r < left - assigned; ++r) per[order[r % strata]] += 1;

  std::vector<int> ns;
  for (int s = 0; s < strata; ++s) ns.insert(ns.end(), per[s], s + 2);
  std::mt19937_64 rng(splitmix64(seed));
  std::shuffle(ns.begin(), ns.end(), rng);

  const int n_val = static_cast<int>(std::floor(count * options.split_ratios[1] + 1e-9));
  const int n_test = static_cast<int>(std::floor(count * options.split_ratios[2] + 1e-9));
  const int n_train = count - n_val - n_test;

  std::vector<CorpusItem> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t clip_seed = splitmix64(seed * 1000003ULL + static_cast<std::uint64_t>(i));
    ScenarioSpec spec = random_spec(options, ns[i], clip_seed);
    Scenario sc = synthesize(spec);
    char id[64];
    std::snprintf(id, sizeof id, "syn_%llu_%05d", static_cast<unsigned long long>(seed), i);
    sc.clip.clip_id = id;
    sc.clip.split = i < n_train ? Split::train : i < n_train + n_val ? Split::val : Split::test;
    out.push_back(CorpusItem{std::move(sc.clip), std::move(sc.label), std::move(spec)});
  }
  return out;
}

nlohmann::json to_json(const OracleLabel& label) {
  nlohmann::json j;
  j["vip_person_id"] = label.vip_person_id;
  j["per_cue_truth"] = label.per_cue_truth;
  j["rationale_cues"] = label.rationale_cues;
  return j;
}

OracleLabel oracle_from_json(const nlohmann::json& j) {
  OracleLabel o;
  o.vip_person_id = j.at("vip_person_id").get<int>();
  o.per_cue_truth = j.at("per_cue_truth").get<std::map<std::string, std::vector<double>>>();
  o.rationale_cues = j.at("rationale_cues").get<std::vector<std::string>>();
  return o;
}

}  // namespace vip::synth
