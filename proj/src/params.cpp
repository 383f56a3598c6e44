#include "vip/params.hpp"

#include "vip/array_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace vip {

void save_params(const ParamStore<float>& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  int i = 0;
  for (const auto& p : store.all()) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "param_%04d", i++);
    // Row-major payload, independent of Eigen's storage order.
    std::vector<float> values;
    values.reserve(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) values.push_back(p.value(r, c));
    write_array(dir, stem, make_f32({p.value.rows(), p.value.cols()}, values));
    index.push_back({{"name", p.name}, {"stem", stem}});
  }
  std::ofstream out(dir / "params.json");
  out << nlohmann::json{{"schema", "vip.params/1"}, {"params", index}}.dump(2) << "\n";
  if (!out) throw DataError("cannot write " + (dir / "params.json").string());
}

ParamStore<float> load_params(const std::filesystem::path& dir) {
  std::ifstream in(dir / "params.json");
  if (!in) throw DataError("missing " + (dir / "params.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad params.json: " + std::string(e.what()));
  }
  ParamStore<float> store;
  for (const auto& e : j.at("params")) {
    const RawArray a = read_array(dir, e.at("stem").get<std::string>());
    if (a.dtype != DType::f32 || a.shape.size() != 2) throw FormatError("parameter arrays must be 2-d f32");
    const auto v = a.as_f32();
    Mat<float> m(a.shape[0], a.shape[1]);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = v[k++];
    store.add(e.at("name").get<std::string>(), std::move(m));
  }
  return store;
}

}  // namespace vip
