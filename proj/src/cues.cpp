#include "vip/cues.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vip::cues {

int cue_index(std::string_view name) {
  for (std::size_t i = 0; i < kCueNames.size(); ++i)
    if (kCueNames[i] == name) return static_cast<int>(i);
  throw ConfigError("unknown cue '" + std::string(name) + "'");
}

Box box_at(const FrameRows& rows, int frame) {
  return Box{rows(frame, 0), rows(frame, 1), rows(frame, 2), rows(frame, 3)};
}

double centrality(const Box& b, int width, int height) {
  if (b.degenerate()) return 0.0;
  const double px = 0.5 * (b.x1 + b.x2) / width;
  const double py = 0.5 * (b.y1 + b.y2) / height;
  return std::max(0.0, 1.0 - 2.0 * std::hypot(px - 0.5, py - 0.5));
}

double area(const Box& b, int width, int height) {
  if (b.degenerate()) return 0.0;
  return (b.x2 - b.x1) * (b.y2 - b.y1) / (static_cast<double>(width) * height);
}

GrayImage crop_gray(const Clip& clip, int frame, const Box& region) {
  if (!clip.frames) throw ConfigError("clip " + clip.clip_id + " carries no pixels");
  const int x0 = std::clamp(static_cast<int>(std::floor(region.x1)), 0, clip.width);
  const int y0 = std::clamp(static_cast<int>(std::floor(region.y1)), 0, clip.height);
  const int x1 = std::clamp(static_cast<int>(std::ceil(region.x2)), 0, clip.width);
  const int y1 = std::clamp(static_cast<int>(std::ceil(region.y2)), 0, clip.height);
  GrayImage g;
  g.width = std::max(0, x1 - x0);
  g.height = std::max(0, y1 - y0);
  g.px.resize(static_cast<std::size_t>(g.width) * g.height);
  const std::size_t base = static_cast<std::size_t>(frame) * clip.height * clip.width * 3;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const std::uint8_t* p = clip.frames->data() + base + (static_cast<std::size_t>(y0 + y) * clip.width + (x0 + x)) * 3;
      g.at(x, y) = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
    }
  }
  return g;
}

double laplacian_variance(const GrayImage& crop) {
  if (crop.width < 3 || crop.height < 3) return 0.0;
  const int n = (crop.width - 2) * (crop.height - 2);
  double sum = 0, sq = 0;
  for (int y = 1; y < crop.height - 1; ++y) {
    for (int x = 1; x < crop.width - 1; ++x) {
      const double r = crop.at(x - 1, y) + crop.at(x + 1, y) + crop.at(x, y - 1) + crop.at(x, y + 1) - 4.0 * crop.at(x, y);
      sum += r;
      sq += r * r;
    }
  }
  const double mean = sum / n;
  return std::max(0.0, sq / n - mean * mean);
}

Box face_region(const PersonTrack& p, int frame) {
  if (p.face_boxes) {
    Box f = box_at(*p.face_boxes, frame);
    if (!f.degenerate() && std::isfinite(f.x1) && std::isfinite(f.y2)) return f;
  }
  Box b = box_at(p.boxes, frame);
  b.y2 = b.y1 + 0.3 * (b.y2 - b.y1);
  return b;
}

double motion_energy(const Clip& clip, int frame, const Box& region) {
  if (!clip.frames) throw ConfigError("clip " + clip.clip_id + " carries no pixels");
  if (frame <= 0) return 0.0;
  const int x0 = std::clamp(static_cast<int>(std::floor(region.x1)), 0, clip.width);
  const int y0 = std::clamp(static_cast<int>(std::floor(region.y1)), 0, clip.height);
  const int x1 = std::clamp(static_cast<int>(std::ceil(region.x2)), 0, clip.width);
  const int y1 = std::clamp(static_cast<int>(std::ceil(region.y2)), 0, clip.height);
  const int count = (x1 - x0) * (y1 - y0);
  if (count <= 0) return 0.0;
  const std::size_t plane = static_cast<std::size_t>(clip.height) * clip.width * 3;
  const std::uint8_t* cur = clip.frames->data() + plane * frame;
  const std::uint8_t* prev = cur - plane;
  double sad = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const std::size_t o = (static_cast<std::size_t>(y) * clip.width + x) * 3;
      for (int c = 0; c < 3; ++c) sad += std::abs(int(cur[o + c]) - int(prev[o + c]));
    }
  }
  return sad / (3.0 * 255.0 * count);
}

Eigen::VectorXd MotionEnergyProvider::project(const ActionBlock& block) const {
  Eigen::VectorXd f(1);
  f(0) = 0;
  if (!block.motion.empty()) {
    for (double m : block.motion) f(0) += m;
    f(0) /= static_cast<double>(block.motion.size());
  }
  return f;
}

Conv3dProvider::Conv3dProvider(std::uint64_t seed, int channels) : channels_(channels) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  kernels_.resize(channels);
  for (auto& k : kernels_)
    for (auto& w : k) w = n01(rng) / std::sqrt(27.0);
  w_act_.resize(channels, channels);
  for (int i = 0; i < channels; ++i)
    for (int j = 0; j < channels; ++j) w_act_(i, j) = n01(rng) / std::sqrt(double(channels));
}

namespace {

constexpr int kCropSide = 8;

std::vector<double> resample(const GrayImage& g) {
  std::vector<double> out(kCropSide * kCropSide, 0.0);
  if (g.width == 0 || g.height == 0) return out;
  for (int y = 0; y < kCropSide; ++y)
    for (int x = 0; x < kCropSide; ++x)
      out[y * kCropSide + x] = g.at(std::min(g.width - 1, x * g.width / kCropSide), std::min(g.height - 1, y * g.height / kCropSide));
  return out;
}

}  // namespace

Eigen::VectorXd Conv3dProvider::project(const ActionBlock& block) const {
  if (block.crops.empty()) throw ConfigError("conv3d action provider needs pixel crops");
  std::vector<std::vector<double>> vol;
  for (const auto& c : block.crops) vol.push_back(resample(c));
  while (vol.size() < 3) vol.push_back(vol.back());
  const int depth = static_cast<int>(vol.size());
  Eigen::VectorXd feat = Eigen::VectorXd::Zero(channels_);
  const int outputs = (depth - 2) * (kCropSide - 2) * (kCropSide - 2);
  for (int ch = 0; ch < channels_; ++ch) {
    const auto& k = kernels_[ch];
    double acc = 0;
    for (int t = 0; t + 2 < depth; ++t)
      for (int y = 0; y + 2 < kCropSide; ++y)
        for (int x = 0; x + 2 < kCropSide; ++x) {
          double r = 0;
          for (int dt = 0; dt < 3; ++dt)
            for (int dy = 0; dy < 3; ++dy)
              for (int dx = 0; dx < 3; ++dx) r += k[dt * 9 + dy * 3 + dx] * vol[t + dt][(y + dy) * kCropSide + x + dx];
          acc += std::max(0.0, r);
        }
    feat(ch) = acc / outputs;
  }
  return w_act_.transpose() * feat;
}

std::unique_ptr<FeatureProvider> make_feature_provider(const std::string& name, std::uint64_t seed) {
  if (name == "motion_energy") return std::make_unique<MotionEnergyProvider>();
  if (name == "conv3d") return std::make_unique<Conv3dProvider>(seed);
  throw ConfigError("unknown action feature provider '" + name + "'");
}

ActionScore action_intensity(std::span<const ActionBlock> blocks, const FeatureProvider& provider) {
  ActionScore s;
  for (const auto& b : blocks) s.per_block.push_back(provider.project(b).norm());
  if (!s.per_block.empty()) {
    for (double v : s.per_block) s.intensity += v;
    s.intensity /= static_cast<double>(s.per_block.size());
  }
  return s;
}

double mean_over_valid(const Eigen::MatrixXd& series, const MatrixXb& valid, int n) {
  double sum = 0;
  int count = 0;
  for (Eigen::Index t = 0; t < series.cols(); ++t) {
    if (!valid(n, t)) continue;
    sum += series(n, t);
    ++count;
  }
  return count == 0 ? 0.0 : sum / count;
}

CueSeries extract_cues(const Clip& clip, const CueConfig& config, const FeatureProvider& provider) {
  const int n = clip.person_count();
  const int t = clip.num_frames;
  CueSeries s;
  s.persons = n;
  s.frames = t;
  s.person_valid = VectorXb::Constant(n, false);
  s.frame_valid = MatrixXb::Constant(n, t, false);
  s.lip_valid = MatrixXb::Constant(n, t, false);
  s.centrality = Eigen::MatrixXd::Zero(n, t);
  s.area = Eigen::MatrixXd::Zero(n, t);
  s.clarity = Eigen::MatrixXd::Zero(n, t);
  s.action = Eigen::MatrixXd::Zero(n, t);
  s.motion = Eigen::MatrixXd::Zero(n, t);
  s.lip_aperture.assign(n, Eigen::MatrixXd::Zero(t, 2));

  if (provider.needs_pixels() && !clip.frames && !config.flow_surrogate)
    throw ConfigError("action provider '" + provider.name() + "' needs pixels but clip " + clip.clip_id + " has none");

  for (int i = 0; i < n; ++i) {
    const auto& p = clip.persons[i];
    for (int f = 0; f < t; ++f) {
      if (!p.present(f)) continue;
      const Box b = box_at(p.boxes, f);
      if (b.degenerate() || !std::isfinite(b.x1 + b.x2 + b.y1 + b.y2)) continue;
      s.frame_valid(i, f) = true;
      s.centrality(i, f) = centrality(b, clip.width, clip.height);
      s.area(i, f) = area(b, clip.width, clip.height);
    }
    s.person_valid(i) = s.frame_valid.row(i).any();

    // clarity
    if (p.clarity) {
      for (int f = 0; f < t; ++f)
        if (s.frame_valid(i, f)) s.clarity(i, f) = (*p.clarity)(f);
    } else if (clip.frames) {
      for (int f = 0; f < t; ++f)
        if (s.frame_valid(i, f)) s.clarity(i, f) = laplacian_variance(crop_gray(clip, f, face_region(p, f)));
    } else {
      s.has_clarity = false;
    }

    // motion energy
    if (p.motion) {
      for (int f = 0; f < t; ++f)
        if (s.frame_valid(i, f)) s.motion(i, f) = (*p.motion)(f);
    } else if (clip.frames) {
      for (int f = 0; f < t; ++f)
        if (s.frame_valid(i, f)) s.motion(i, f) = motion_energy(clip, f, box_at(p.boxes, f));
    }

    // action: one score per block of delta frames, broadcast to its frames
    if (config.flow_surrogate) {
      s.action.row(i) = s.motion.row(i);
    } else {
      const int delta = std::max(1, config.block_length);
      for (int start = 0; start < t; start += delta) {
        const int stop = std::min(t, start + delta);
        ActionBlock block;
        for (int f = start; f < stop; ++f) {
          if (!s.frame_valid(i, f)) continue;
          block.motion.push_back(s.motion(i, f));
          if (provider.needs_pixels()) block.crops.push_back(crop_gray(clip, f, box_at(p.boxes, f)));
        }
        if (block.motion.empty()) continue;
        const double score = provider.project(block).norm();
        for (int f = start; f < stop; ++f)
          if (s.frame_valid(i, f)) s.action(i, f) = score;
      }
    }

    // lip aperture, normalized by face height
    if (config.flow_surrogate) {
      for (int f = 0; f < t; ++f) {
        if (!s.frame_valid(i, f)) continue;
        s.lip_valid(i, f) = true;
        s.lip_aperture[i](f, 0) = s.lip_aperture[i](f, 1) = s.motion(i, f);
      }
    } else if (p.lip_points) {
      Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(t, 2);
      std::vector<bool> ok(t, false);
      for (int f = 0; f < t; ++f) {
        if (!s.frame_valid(i, f)) continue;
        const auto row = p.lip_points->row(f);
        if (!row.allFinite()) continue;
        const double face_h = std::max(1e-6, face_region(p, f).height());
        raw(f, 0) = std::abs(double(row(0)) - row(2)) / face_h;
        raw(f, 1) = std::abs(double(row(1)) - row(3)) / face_h;
        ok[f] = true;
      }
      for (int f = 0; f < t; ++f) {
        if (config.lip_mode == LipMode::per_frame) {
          if (!ok[f]) continue;
          s.lip_valid(i, f) = true;
          s.lip_aperture[i].row(f) = raw.row(f);
        } else {
          if (f == 0 || !ok[f] || !ok[f - 1]) continue;
          s.lip_valid(i, f) = true;
          s.lip_aperture[i].row(f) = (raw.row(f) - raw.row(f - 1)).cwiseAbs();
        }
      }
    }
  }
  return s;
}

}  // namespace vip::cues
