#pragma once

#include "fsgen/autodiff.hpp"

#include <cmath>
#include <deque>
#include <random>
#include <string>
#include <unordered_map>

namespace fsgen {

/// Named parameter registry. Creation order is fixed by the model builder and
/// doubles as the checkpoint tensor order; std::deque keeps Param addresses
/// stable for the tape's gradient binding.
template <class S>
class ParamStore {
 public:
  Param<S>& create(const std::string& name, Index rows, Index cols) {
    if (index_.count(name)) throw Error("duplicate parameter name: " + name);
    Param<S> p;
    p.name = name;
    p.value = Matrix<S>::Zero(rows, cols);
    index_.emplace(name, params_.size());
    params_.push_back(std::move(p));
    return params_.back();
  }

  Param<S>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  const Param<S>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  Param<S>& at(const std::string& name) {
    Param<S>* p = find(name);
    if (!p) throw Error("unknown parameter: " + name);
    return *p;
  }
  const Param<S>& at(const std::string& name) const {
    const Param<S>* p = find(name);
    if (!p) throw Error("unknown parameter: " + name);
    return *p;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t count() const { return params_.size(); }

  Index scalar_count() const {
    Index n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_)
      if (p.grad.size() != 0) p.grad.setZero();
  }

 private:
  std::deque<Param<S>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <class S>
void fill_normal(Matrix<S>& m, S stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, static_cast<double>(stddev));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<S>(g(rng));
}

/// Uniform Glorot initialization over (fan_in + fan_out).
template <class S>
void fill_xavier(Matrix<S>& m, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<S>(u(rng));
}

/// Adam with bias correction. step() consumes and clears accumulated grads;
/// parameters whose grad was never touched are left alone.
template <class S>
struct Adam {
  S lr = S(1e-4);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
  long long t = 0;

  void step(ParamStore<S>& store) {
    ++t;
    const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta1), t));
    const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta2), t));
    for (auto& p : store) {
      if (p.grad.size() == 0) continue;
      if (p.m.size() == 0) {
        p.m = Matrix<S>::Zero(p.value.rows(), p.value.cols());
        p.v = Matrix<S>::Zero(p.value.rows(), p.value.cols());
      }
      p.m = beta1 * p.m + (S(1) - beta1) * p.grad;
      p.v.array() = beta2 * p.v.array() + (S(1) - beta2) * p.grad.array().square();
      p.value.array() -=
          lr * (p.m.array() / bc1) / ((p.v.array() / bc2).sqrt() + eps);
      p.grad.setZero();
    }
  }
};

/// Fixed sin/cos position table, interleaved channels.
template <class S>
Matrix<S> sinusoidal_positions(Index len, Index dim) {
  Matrix<S> pe(len, dim);
  for (Index pos = 0; pos < len; ++pos) {
    for (Index i = 0; i < dim; i += 2) {
      double angle = static_cast<double>(pos) /
                     std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
      pe(pos, i) = static_cast<S>(std::sin(angle));
      if (i + 1 < dim) pe(pos, i + 1) = static_cast<S>(std::cos(angle));
    }
  }
  return pe;
}

}  // namespace fsgen
