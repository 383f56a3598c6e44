#pragma once

// Raw social cues: the parameter-free part of the cue encoder. Everything here
// produces per-person, per-frame scalar series; lifting to D dimensions and
// the learned lip/text encoders live in model.hpp.

#include "vip/data_model.hpp"

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vip::cues {

// Fixed cue order; also the clause order of generated rationales.
inline constexpr std::array<std::string_view, 5> kCueNames = {"centrality", "area", "clarity", "lip", "action"};
enum CueIndex : int { kCentrality = 0, kArea = 1, kClarity = 2, kLip = 3, kAction = 4 };
int cue_index(std::string_view name);

// Rationale clause for each cue, in kCueNames order.
inline constexpr std::array<std::string_view, 5> kCueClauses = {
    "holds central prominence", "occupies a dominant share of the frame", "appears in sharp focus",
    "engages in continuous active speech", "performs salient physical actions"};

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  bool degenerate() const { return !(x1 < x2) || !(y1 < y2); }
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
};

Box box_at(const FrameRows& rows, int frame);

// max(0, 1 - 2 |p - (0.5, 0.5)|) for the normalized box centroid p; 0 for a
// degenerate box.
double centrality(const Box& b, int width, int height);
// Normalized box area; 0 for a degenerate box.
double area(const Box& b, int width, int height);

// Grayscale image with intensities in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> px;  // row-major

  double at(int x, int y) const { return px[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return px[static_cast<std::size_t>(y) * width + x]; }
};

// Grayscale crop of frame `frame` over the box clamped to the image.
GrayImage crop_gray(const Clip& clip, int frame, const Box& region);

// Variance of the 3x3 Laplacian (centre -4, 4-neighbours +1) over interior
// pixels; 0 when the crop is smaller than 3x3.
double laplacian_variance(const GrayImage& crop);

// Face region: the face box when given, else the top 30% of the person box.
Box face_region(const PersonTrack& p, int frame);

// Mean absolute RGB difference between frames `frame` and `frame - 1` over
// the region, divided by 255 and by the region's pixel count.
double motion_energy(const Clip& clip, int frame, const Box& region);

// One block of delta frames handed to a spatio-temporal feature provider.
struct ActionBlock {
  std::vector<double> motion;     // per-frame motion energy
  std::vector<GrayImage> crops;   // per-frame person crops (pixel clips only)
};

class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual std::string name() const = 0;
  virtual bool needs_pixels() const = 0;
  // Feature vector for one block, already projected by the provider's W_act.
  virtual Eigen::VectorXd project(const ActionBlock& block) const = 0;
};

// Mean block motion energy as a 1-d feature with unit projection.
class MotionEnergyProvider final : public FeatureProvider {
 public:
  std::string name() const override { return "motion_energy"; }
  bool needs_pixels() const override { return false; }
  Eigen::VectorXd project(const ActionBlock& block) const override;
};

// Seeded random 3x3x3 convolutions over 8x8 grayscale crops, ReLU, global
// average pooling, then a random projection. Needs pixels.
class Conv3dProvider final : public FeatureProvider {
 public:
  explicit Conv3dProvider(std::uint64_t seed, int channels = 8);
  std::string name() const override { return "conv3d"; }
  bool needs_pixels() const override { return true; }
  Eigen::VectorXd project(const ActionBlock& block) const override;

 private:
  int channels_;
  std::vector<std::array<double, 27>> kernels_;
  Eigen::MatrixXd w_act_;
};

std::unique_ptr<FeatureProvider> make_feature_provider(const std::string& name, std::uint64_t seed);

struct ActionScore {
  std::vector<double> per_block;
  double intensity = 0;  // mean over blocks
};

// |provider(block)|_2 per block and their mean.
ActionScore action_intensity(std::span<const ActionBlock> blocks, const FeatureProvider& provider);

enum class LipMode { per_frame, inter_frame };

struct CueConfig {
  std::string action_provider = "motion_energy";
  std::uint64_t provider_seed = 0;
  int block_length = 8;
  LipMode lip_mode = LipMode::per_frame;
  // Replace both temporal cues by raw motion energy (optical-flow surrogate).
  bool flow_surrogate = false;
};

// Per-person, per-frame raw cue scalars. Masked entries are exactly zero.
struct CueSeries {
  int persons = 0;
  int frames = 0;
  VectorXb person_valid;
  MatrixXb frame_valid;  // present and non-degenerate box
  MatrixXb lip_valid;    // frame_valid and finite lip anchors
  Eigen::MatrixXd centrality, area, clarity, action, motion;  // N x T
  std::vector<Eigen::MatrixXd> lip_aperture;                 // per person T x 2
  bool has_clarity = true;
};

CueSeries extract_cues(const Clip& clip, const CueConfig& config, const FeatureProvider& provider);

// Mean of `series` row n over valid frames (0 when there are none).
double mean_over_valid(const Eigen::MatrixXd& series, const MatrixXb& valid, int n);

}  // namespace vip::cues
