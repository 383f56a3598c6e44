#pragma once

#include "vip/autodiff.hpp"
#include "vip/types.hpp"

#include <deque>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>

namespace vip {

template <class S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
};

// Named trainable tensors in insertion order. References stay valid as
// parameters are added.
template <class S>
class ParamStore {
 public:
  Param<S>& add(std::string name, Mat<S> value) {
    if (index_.count(name) != 0) throw std::logic_error("duplicate parameter " + name);
    index_.emplace(name, params_.size());
    Mat<S> grad = Mat<S>::Zero(value.rows(), value.cols());
    params_.push_back(Param<S>{std::move(name), std::move(value), std::move(grad)});
    return params_.back();
  }

  bool contains(std::string_view name) const { return index_.find(name) != index_.end(); }

  Param<S>& at(std::string_view name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter " + std::string(name));
    return params_[it->second];
  }
  const Param<S>& at(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter " + std::string(name));
    return params_[it->second];
  }

  std::deque<Param<S>>& all() { return params_; }
  const std::deque<Param<S>>& all() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  template <class T>
  ParamStore<T> cast() const {
    ParamStore<T> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<T>());
    return out;
  }

 private:
  std::deque<Param<S>> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Binds a store to one tape: each parameter becomes a single leaf per forward
// pass whose gradient drains into Param::grad. With `track == false` the
// parameters enter as constants and no backward state is kept.
template <class S>
class Binder {
 public:
  Binder(ad::Tape<S>& tape, ParamStore<S>& store, bool track = true)
      : tape_(tape), store_(store), track_(track) {}

  ad::Var<S> operator()(std::string_view name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    Param<S>& p = store_.at(name);
    ad::Var<S> v = track_ ? tape_.variable(p.value, &p.grad) : tape_.constant(p.value);
    cache_.emplace(std::string(name), v);
    return v;
  }

  ad::Tape<S>& tape() { return tape_; }
  ParamStore<S>& store() { return store_; }
  bool tracking() const { return track_; }

 private:
  ad::Tape<S>& tape_;
  ParamStore<S>& store_;
  bool track_;
  std::map<std::string, ad::Var<S>, std::less<>> cache_;
};

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for an in x out weight.
template <class S>
Mat<S> scaled_uniform(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Mat<S> m(in, out);
  for (Eigen::Index j = 0; j < out; ++j)
    for (Eigen::Index i = 0; i < in; ++i) m(i, j) = static_cast<S>(u(rng));
  return m;
}

// Checkpoint parameter IO in the canonical raw-array format (see array_io.hpp).
// Parameters are stored as f32, so a float store round-trips bit-exactly.
void save_params(const ParamStore<float>& store, const std::filesystem::path& dir);
ParamStore<float> load_params(const std::filesystem::path& dir);

}  // namespace vip
