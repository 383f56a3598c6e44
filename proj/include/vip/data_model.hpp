#pragma once

#include "vip/types.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vip {

inline constexpr std::array<std::string_view, 11> kCategories = {
    "Office", "Classroom", "Conference", "Restaurant", "Sports",    "Interview",
    "Performance", "Public Space", "Home", "Courtroom", "Laboratory"};

bool is_known_category(std::string_view c);

enum class Split { train, val, test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

// Row-major T x K float block; one row per frame.
using FrameRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PersonTrack {
  int person_id = 0;
  std::string description;
  FrameRows boxes;                          // T x 4: x1, y1, x2, y2 in pixels
  VectorXb present;                         // T
  std::optional<FrameRows> face_boxes;      // T x 4
  std::optional<FrameRows> lip_points;      // T x 4: upper (x, y), lower (x, y)
  std::optional<Eigen::VectorXf> clarity;   // T, precomputed focus score
  std::optional<Eigen::VectorXf> motion;    // T, precomputed motion energy

  friend bool operator==(const PersonTrack& a, const PersonTrack& b);
};

struct Clip {
  std::string clip_id;
  std::string category = "Office";
  double fps = 12.0;
  int num_frames = 0;
  int width = 0;
  int height = 0;
  // T x H x W x 3, row-major, when pixels are shipped.
  std::optional<std::vector<std::uint8_t>> frames;
  std::vector<PersonTrack> persons;
  std::string scene_description;
  int vip_person_id = 0;
  std::string rationale_text;
  Split split = Split::train;

  int person_count() const { return static_cast<int>(persons.size()); }
  // Index into `persons` of the given id, or -1.
  int person_index(int person_id) const;
  friend bool operator==(const Clip& a, const Clip& b);
};

struct ValidityMask {
  VectorXb person_valid;  // N
  MatrixXb frame_valid;   // N x T
};

ValidityMask make_mask(const Clip& clip);

enum class Severity { error, warning };

struct Violation {
  Severity severity = Severity::error;
  std::string field;
  int person = -1;  // person_id, -1 when not person-specific
  int frame = -1;
  std::string message;

  std::string describe() const;
};

std::vector<Violation> validate_clip(const Clip& clip);
bool has_errors(const std::vector<Violation>& v);

struct LoadedClip {
  Clip clip;
  std::vector<Violation> warnings;
};

// Canonical directory format: manifest.json plus one raw array file and
// sidecar per tensor. save_clip refuses clips with error-level violations.
void save_clip(const Clip& clip, const std::filesystem::path& dir);
LoadedClip load_clip(const std::filesystem::path& dir);

// Every canonical clip directory directly under `root`, sorted by name.
std::vector<std::filesystem::path> list_clip_dirs(const std::filesystem::path& root);

// --- dataset adapter (array container + annotation JSON) -------------------

// Names of the entries looked up inside the array container. Defaults match
// the layout documented in README.md; override them for other exports.
struct AdapterKeys {
  std::string boxes = "boxes";            // (T, N, 4) float
  std::string present = "present";        // (T, N) bool/uint8, optional
  std::string face_boxes = "face_boxes";  // (T, N, 4), optional
  std::string lip_points = "lip_points";  // (T, N, 4), optional
  std::string frames = "frames";          // (T, H, W, 3) uint8, optional
  std::string person_ids = "person_ids";  // (N,) integer, optional
};

LoadedClip load_dataset_clip(const std::filesystem::path& npz, const std::filesystem::path& annotation,
                             const AdapterKeys& keys = {});

}  // namespace vip
