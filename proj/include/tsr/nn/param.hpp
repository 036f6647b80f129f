#pragma once

#include "tsr/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace tsr::nn {

// A named learnable (or statistics) tensor with its gradient and Adam moments.
template <typename S>
struct Param {
  std::string name;
  std::vector<std::uint32_t> shape;
  Vector<S> value;
  Vector<S> grad;
  Vector<S> m;
  Vector<S> v;
  // Running statistics are stored as params but are not learnable.
  bool learnable = true;
  // Frozen params still receive no gradient from backward.
  bool trainable = true;

  std::size_t size() const { return static_cast<std::size_t>(value.size()); }

  bool requires_grad() const { return learnable && trainable; }
};

template <typename S>
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) noexcept = default;
  ParamSet& operator=(ParamSet&&) noexcept = default;

  Param<S>& add(const std::string& name, std::vector<std::uint32_t> shape, bool learnable = true) {
    if (index_.count(name)) throw ArgumentError("duplicate parameter name: " + name);
    auto p = std::make_unique<Param<S>>();
    p->name = name;
    p->shape = std::move(shape);
    const auto n = std::accumulate(p->shape.begin(), p->shape.end(), std::size_t{1},
                                   [](std::size_t a, std::uint32_t b) { return a * b; });
    p->value = Vector<S>::Zero(static_cast<Eigen::Index>(n));
    p->grad = Vector<S>::Zero(static_cast<Eigen::Index>(n));
    p->m = Vector<S>::Zero(static_cast<Eigen::Index>(n));
    p->v = Vector<S>::Zero(static_cast<Eigen::Index>(n));
    p->learnable = learnable;
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Param<S>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Param<S>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  Param<S>& at(const std::string& name) {
    auto* p = find(name);
    if (!p) throw ArgumentError("unknown parameter: " + name);
    return *p;
  }
  const Param<S>& at(const std::string& name) const {
    const auto* p = find(name);
    if (!p) throw ArgumentError("unknown parameter: " + name);
    return *p;
  }

  std::size_t size() const { return params_.size(); }
  Param<S>& operator[](std::size_t i) { return *params_[i]; }
  const Param<S>& operator[](std::size_t i) const { return *params_[i]; }

  template <typename F>
  void for_each(F&& f) {
    for (auto& p : params_) f(*p);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& p : params_) f(*p);
  }

  std::size_t count_learnable() const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (p->learnable) n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  void set_trainable(bool on) {
    for (auto& p : params_) p->trainable = on;
  }

  // Value copy by name; used for freeze checks and best-checkpoint tracking.
  std::map<std::string, Vector<S>> snapshot() const {
    std::map<std::string, Vector<S>> out;
    for (const auto& p : params_) out[p->name] = p->value;
    return out;
  }

  void restore(const std::map<std::string, Vector<S>>& snap) {
    for (const auto& [name, value] : snap) {
      auto& p = at(name);
      if (p.value.size() != value.size()) throw DimensionError("restore: size mismatch for " + name);
      p.value = value;
    }
  }

 private:
  std::vector<std::unique_ptr<Param<S>>> params_;
  std::map<std::string, std::size_t> index_;
};

// He-style uniform fan-in init, bound sqrt(6 / fan_in).
template <typename S>
void init_uniform_fan_in(Param<S>& p, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value[i] = static_cast<S>(dist(rng));
}

template <typename To, typename From>
void copy_values(const ParamSet<From>& src, ParamSet<To>& dst) {
  src.for_each([&](const Param<From>& p) {
    auto& q = dst.at(p.name);
    if (q.value.size() != p.value.size()) throw DimensionError("copy_values: size mismatch for " + p.name);
    q.value = p.value.template cast<To>();
  });
}

}  // namespace tsr::nn
