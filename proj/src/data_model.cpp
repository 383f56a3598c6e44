#include "vip/data_model.hpp"

#include "vip/array_io.hpp"
#include "vip/npz.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace vip {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_known_category(std::string_view c) {
  return std::find(kCategories.begin(), kCategories.end(), c) != kCategories.end();
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

namespace {

template <class A>
bool same_array(const A& a, const A& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

template <class A>
bool same_optional(const std::optional<A>& a, const std::optional<A>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same_array(*a, *b);
}

}  // namespace

bool operator==(const PersonTrack& a, const PersonTrack& b) {
  return a.person_id == b.person_id && a.description == b.description && same_array(a.boxes, b.boxes) &&
         same_array(a.present, b.present) && same_optional(a.face_boxes, b.face_boxes) &&
         same_optional(a.lip_points, b.lip_points) && same_optional(a.clarity, b.clarity) &&
         same_optional(a.motion, b.motion);
}

bool operator==(const Clip& a, const Clip& b) {
  return a.clip_id == b.clip_id && a.category == b.category && a.fps == b.fps && a.num_frames == b.num_frames &&
         a.width == b.width && a.height == b.height && a.frames == b.frames && a.persons == b.persons &&
         a.scene_description == b.scene_description && a.vip_person_id == b.vip_person_id &&
         a.rationale_text == b.rationale_text && a.split == b.split;
}

int Clip::person_index(int person_id) const {
  for (std::size_t i = 0; i < persons.size(); ++i)
    if (persons[i].person_id == person_id) return static_cast<int>(i);
  return -1;
}

ValidityMask make_mask(const Clip& clip) {
  const int n = clip.person_count();
  const int t = clip.num_frames;
  ValidityMask m{VectorXb::Constant(n, false), MatrixXb::Constant(n, t, false)};
  for (int i = 0; i < n; ++i) {
    const auto& p = clip.persons[i];
    for (int f = 0; f < t && f < p.present.size(); ++f) m.frame_valid(i, f) = p.present(f);
    m.person_valid(i) = m.frame_valid.row(i).any();
  }
  return m;
}

std::string Violation::describe() const {
  std::ostringstream os;
  os << (severity == Severity::error ? "error" : "warning") << ": " << field;
  if (person >= 0) os << " person=" << person;
  if (frame >= 0) os << " frame=" << frame;
  os << ": " << message;
  return os.str();
}

bool has_errors(const std::vector<Violation>& v) {
  return std::any_of(v.begin(), v.end(), [](const Violation& x) { return x.severity == Severity::error; });
}

std::vector<Violation> validate_clip(const Clip& clip) {
  std::vector<Violation> out;
  auto err = [&](std::string field, int person, int frame, std::string msg) {
    out.push_back({Severity::error, std::move(field), person, frame, std::move(msg)});
  };
  const int t = clip.num_frames;

  if (t < 1) err("num_frames", -1, -1, "must be >= 1");
  if (clip.width < 1) err("width", -1, -1, "must be >= 1");
  if (clip.height < 1) err("height", -1, -1, "must be >= 1");
  if (!is_known_category(clip.category)) err("category", -1, -1, "unknown category '" + clip.category + "'");
  if (!(clip.fps > 0)) {
    err("fps", -1, -1, "must be positive");
  } else if (t >= 1) {
    const double duration = t / clip.fps;
    if (duration < 3.0 || duration > 10.0) {
      out.push_back({Severity::warning, "fps", -1, -1, "clip duration " + std::to_string(duration) + " s outside [3, 10]"});
    }
  }
  if (clip.frames) {
    const std::size_t expected = static_cast<std::size_t>(std::max(t, 0)) * std::max(clip.height, 0) *
                                 std::max(clip.width, 0) * 3;
    if (clip.frames->size() != expected) err("frames", -1, -1, "pixel buffer does not hold T*H*W*3 bytes");
  }
  if (clip.persons.empty()) err("persons", -1, -1, "clip has no persons");
  if (clip.person_index(clip.vip_person_id) < 0) {
    err("vip_person_id", clip.vip_person_id, -1, "not among the clip's persons");
  }

  std::set<int> ids;
  for (const auto& p : clip.persons) {
    const int id = p.person_id;
    if (!ids.insert(id).second) err("person_id", id, -1, "duplicate person id");
    if (p.boxes.rows() != t || p.boxes.cols() != 4) {
      err("boxes", id, -1, "expected T x 4 boxes");
      continue;
    }
    if (p.present.size() != t) {
      err("present", id, -1, "expected T entries");
      continue;
    }
    if (p.face_boxes && (p.face_boxes->rows() != t || p.face_boxes->cols() != 4))
      err("face_boxes", id, -1, "expected T x 4 face boxes");
    if (p.lip_points && (p.lip_points->rows() != t || p.lip_points->cols() != 4))
      err("lip_points", id, -1, "expected T x 4 lip anchors");
    if (p.clarity && p.clarity->size() != t) err("clarity", id, -1, "expected T entries");
    if (p.motion && p.motion->size() != t) err("motion", id, -1, "expected T entries");

    for (int f = 0; f < t; ++f) {
      if (!p.present(f)) continue;
      const float x1 = p.boxes(f, 0), y1 = p.boxes(f, 1), x2 = p.boxes(f, 2), y2 = p.boxes(f, 3);
      if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
        err("boxes", id, f, "non-finite coordinate");
        continue;
      }
      if (!(x1 < x2) || !(y1 < y2)) {
        err("boxes", id, f, "degenerate box (requires x1 < x2 and y1 < y2)");
        continue;
      }
      const float cx1 = std::clamp(x1, 0.0f, float(clip.width)), cx2 = std::clamp(x2, 0.0f, float(clip.width));
      const float cy1 = std::clamp(y1, 0.0f, float(clip.height)), cy2 = std::clamp(y2, 0.0f, float(clip.height));
      if (!(cx1 < cx2) || !(cy1 < cy2)) err("boxes", id, f, "box lies outside the frame");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// canonical directory format

namespace {

RawArray rows_array(const FrameRows& m) {
  std::vector<float> v(m.data(), m.data() + m.size());
  return make_f32({m.rows(), m.cols()}, v);
}

RawArray vec_array(const Eigen::VectorXf& m) {
  std::vector<float> v(m.data(), m.data() + m.size());
  return make_f32({m.size()}, v);
}

FrameRows read_rows(const fs::path& dir, const std::string& stem, int t, int cols) {
  const RawArray a = read_array(dir, stem);
  if (a.shape.size() != 2 || a.shape[0] != t || a.shape[1] != cols)
    throw FormatError("array " + stem + " has shape inconsistent with T=" + std::to_string(t));
  const auto v = a.as_f32();
  FrameRows m(t, cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

Eigen::VectorXf read_vec(const fs::path& dir, const std::string& stem, int t) {
  const RawArray a = read_array(dir, stem);
  if (a.shape.size() != 1 || a.shape[0] != t)
    throw FormatError("array " + stem + " has shape inconsistent with T=" + std::to_string(t));
  const auto v = a.as_f32();
  return Eigen::Map<const Eigen::VectorXf>(v.data(), t);
}

}  // namespace

void save_clip(const Clip& clip, const fs::path& dir) {
  const auto violations = validate_clip(clip);
  if (has_errors(violations)) {
    std::string msg = "refusing to write invalid clip " + clip.clip_id + ":";
    for (const auto& v : violations)
      if (v.severity == Severity::error) msg += "\n  " + v.describe();
    throw DataError(msg);
  }
  fs::create_directories(dir);

  json m;
  m["schema"] = "vip.clip/1";
  m["clip_id"] = clip.clip_id;
  m["category"] = clip.category;
  m["fps"] = clip.fps;
  m["num_frames"] = clip.num_frames;
  m["width"] = clip.width;
  m["height"] = clip.height;
  m["scene_description"] = clip.scene_description;
  m["vip_person_id"] = clip.vip_person_id;
  m["rationale_text"] = clip.rationale_text;
  m["split"] = to_string(clip.split);
  if (clip.frames) {
    write_array(dir, "frames", make_u8({clip.num_frames, clip.height, clip.width, 3}, *clip.frames));
    m["frames"] = "frames";
  } else {
    m["frames"] = nullptr;
  }

  json persons = json::array();
  for (const auto& p : clip.persons) {
    const std::string pre = "p" + std::to_string(p.person_id) + "_";
    json arrays;
    write_array(dir, pre + "boxes", rows_array(p.boxes));
    arrays["boxes"] = pre + "boxes";
    std::vector<bool> present(p.present.data(), p.present.data() + p.present.size());
    write_array(dir, pre + "present", make_bool({p.present.size()}, present));
    arrays["present"] = pre + "present";
    if (p.face_boxes) {
      write_array(dir, pre + "face_boxes", rows_array(*p.face_boxes));
      arrays["face_boxes"] = pre + "face_boxes";
    }
    if (p.lip_points) {
      write_array(dir, pre + "lip_points", rows_array(*p.lip_points));
      arrays["lip_points"] = pre + "lip_points";
    }
    if (p.clarity) {
      write_array(dir, pre + "clarity", vec_array(*p.clarity));
      arrays["clarity"] = pre + "clarity";
    }
    if (p.motion) {
      write_array(dir, pre + "motion", vec_array(*p.motion));
      arrays["motion"] = pre + "motion";
    }
    persons.push_back({{"person_id", p.person_id}, {"description", p.description}, {"arrays", arrays}});
  }
  m["persons"] = persons;

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << m.dump(2) << "\n";
}

LoadedClip load_clip(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("missing manifest.json in " + dir.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest in " + dir.string() + ": " + e.what());
  }

  LoadedClip lc;
  Clip& c = lc.clip;
  try {
    c.clip_id = m.at("clip_id").get<std::string>();
    c.category = m.at("category").get<std::string>();
    c.fps = m.at("fps").get<double>();
    c.num_frames = m.at("num_frames").get<int>();
    c.width = m.at("width").get<int>();
    c.height = m.at("height").get<int>();
    c.scene_description = m.value("scene_description", "");
    c.vip_person_id = m.at("vip_person_id").get<int>();
    c.rationale_text = m.value("rationale_text", "");
    c.split = split_from_string(m.value("split", "train"));
  } catch (const json::exception& e) {
    throw FormatError("manifest in " + dir.string() + ": " + e.what());
  }
  const int t = c.num_frames;
  if (m.contains("frames") && m["frames"].is_string()) {
    const RawArray a = read_array(dir, m["frames"].get<std::string>());
    if (a.shape != std::vector<std::int64_t>{t, c.height, c.width, 3})
      throw FormatError("frames array shape inconsistent with manifest");
    c.frames = a.as_u8();
  }
  for (const auto& pj : m.at("persons")) {
    PersonTrack p;
    p.person_id = pj.at("person_id").get<int>();
    p.description = pj.value("description", "");
    const auto& arr = pj.at("arrays");
    p.boxes = read_rows(dir, arr.at("boxes").get<std::string>(), t, 4);
    {
      const RawArray a = read_array(dir, arr.at("present").get<std::string>());
      if (a.shape.size() != 1 || a.shape[0] != t) throw FormatError("present array inconsistent with T");
      const auto b = a.as_bool();
      p.present.resize(t);
      for (int f = 0; f < t; ++f) p.present(f) = b[f];
    }
    if (arr.contains("face_boxes")) p.face_boxes = read_rows(dir, arr["face_boxes"].get<std::string>(), t, 4);
    if (arr.contains("lip_points")) p.lip_points = read_rows(dir, arr["lip_points"].get<std::string>(), t, 4);
    if (arr.contains("clarity")) p.clarity = read_vec(dir, arr["clarity"].get<std::string>(), t);
    if (arr.contains("motion")) p.motion = read_vec(dir, arr["motion"].get<std::string>(), t);
    c.persons.push_back(std::move(p));
  }
  lc.warnings = validate_clip(c);
  return lc;
}

std::vector<fs::path> list_clip_dirs(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::is_directory(root)) throw DataError("not a directory: " + root.string());
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// dataset adapter

LoadedClip load_dataset_clip(const fs::path& npz_path, const fs::path& annotation, const AdapterKeys& keys) {
  const auto arrays = npz::read_npz(npz_path);
  std::ifstream in(annotation);
  if (!in) throw DataError("cannot open annotation " + annotation.string());
  json a;
  try {
    in >> a;
  } catch (const json::exception& e) {
    throw FormatError("malformed annotation: " + std::string(e.what()));
  }

  auto find = [&](const std::string& k) -> const npz::NpyArray* {
    auto it = arrays.find(k);
    return it == arrays.end() ? nullptr : &it->second;
  };
  const npz::NpyArray* boxes = find(keys.boxes);
  if (boxes == nullptr) throw FormatError("array container lacks '" + keys.boxes + "'");
  if (boxes->shape.size() != 3 || boxes->shape[2] != 4) throw FormatError("boxes must have shape (T, N, 4)");
  const int t = static_cast<int>(boxes->shape[0]);
  const int n = static_cast<int>(boxes->shape[1]);

  LoadedClip lc;
  Clip& c = lc.clip;
  try {
    c.clip_id = a.value("clip_id", npz_path.stem().string());
    c.category = a.value("category", "Office");
    c.fps = a.value("fps", 25.0);
    c.num_frames = t;
    c.width = a.at("width").get<int>();
    c.height = a.at("height").get<int>();
    c.scene_description = a.value("scene_description", "");
    c.vip_person_id = a.at("vip_id").get<int>();
    c.rationale_text = a.value("rationale", "");
    c.split = split_from_string(a.value("split", "train"));
  } catch (const json::exception& e) {
    throw FormatError("annotation: " + std::string(e.what()));
  }

  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i;
  if (const auto* pid = find(keys.person_ids)) {
    const auto v = pid->as_double();
    if (static_cast<int>(v.size()) != n) throw FormatError("person_ids length differs from N");
    for (int i = 0; i < n; ++i) ids[i] = static_cast<int>(v[i]);
  }
  std::map<int, std::string> descriptions;
  if (a.contains("persons")) {
    for (const auto& p : a["persons"]) descriptions[p.at("id").get<int>()] = p.value("description", "");
  }

  auto per_person_rows = [&](const npz::NpyArray& arr, const std::string& name) {
    if (arr.shape.size() != 3 || arr.shape[0] != t || arr.shape[1] != n || arr.shape[2] != 4)
      throw FormatError(name + " must have shape (T, N, 4)");
    const auto v = arr.as_double();
    std::vector<FrameRows> out(n, FrameRows(t, 4));
    for (int f = 0; f < t; ++f)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < 4; ++k) out[i](f, k) = static_cast<float>(v[(static_cast<std::size_t>(f) * n + i) * 4 + k]);
    return out;
  };

  const auto box_rows = per_person_rows(*boxes, keys.boxes);
  std::optional<std::vector<FrameRows>> face_rows, lip_rows;
  if (const auto* fb = find(keys.face_boxes)) face_rows = per_person_rows(*fb, keys.face_boxes);
  if (const auto* lp = find(keys.lip_points)) lip_rows = per_person_rows(*lp, keys.lip_points);
  std::vector<double> present;
  if (const auto* pr = find(keys.present)) {
    if (pr->shape != std::vector<std::int64_t>{t, n}) throw FormatError("present must have shape (T, N)");
    present = pr->as_double();
  }

  for (int i = 0; i < n; ++i) {
    PersonTrack p;
    p.person_id = ids[i];
    p.description = descriptions.count(ids[i]) ? descriptions[ids[i]] : "";
    p.boxes = box_rows[i];
    p.present.resize(t);
    for (int f = 0; f < t; ++f) {
      // Without an explicit presence array, NaN boxes mark absent frames.
      p.present(f) = present.empty() ? p.boxes.row(f).allFinite() : present[static_cast<std::size_t>(f) * n + i] != 0;
      if (!p.present(f)) p.boxes.row(f).setZero();
    }
    if (face_rows) p.face_boxes = (*face_rows)[i];
    if (lip_rows) p.lip_points = (*lip_rows)[i];
    c.persons.push_back(std::move(p));
  }

  if (const auto* fr = find(keys.frames)) {
    if (fr->shape != std::vector<std::int64_t>{t, c.height, c.width, 3})
      throw FormatError("frames must have shape (T, H, W, 3)");
    c.frames = fr->as_u8();
  }
  lc.warnings = validate_clip(c);
  return lc;
}

}  // namespace vip
