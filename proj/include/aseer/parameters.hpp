#pragma once

#include "aseer/autodiff.hpp"

#include <cmath>
#include <deque>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace aseer {

using ad::Matrix;
using ad::Parameter;

using Rng = std::mt19937_64;

// Owns named parameters at stable addresses.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;

  Parameter& add(const std::string& name, Matrix value) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter: " + name);
    params_.push_back(Parameter{name, std::move(value), {}, false});
    params_.back().zero_grad();
    index_.emplace(name, params_.size() - 1);
    return params_.back();
  }

  // Glorot-uniform matrix of shape (fan_in x fan_out).
  Parameter& add_glorot(const std::string& name, Eigen::Index fan_in, Eigen::Index fan_out,
                        Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return add(name, std::move(m));
  }

  Parameter& add_zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    return add(name, Matrix::Zero(rows, cols));
  }

  Parameter& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return params_[it->second];
  }
  const Parameter& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return params_[it->second];
  }
  bool contains(const std::string& name) const { return index_.contains(name); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  double grad_norm() const {
    double s = 0.0;
    for (const auto& p : params_)
      if (!p.frozen) s += p.grad.squaredNorm();
    return std::sqrt(s);
  }

  // Rescales all gradients so their joint L2 norm is at most max_norm.
  double clip_grad_norm(double max_norm) {
    const double norm = grad_norm();
    if (norm > max_norm && norm > 0.0) {
      const double f = max_norm / norm;
      for (auto& p : params_) p.grad *= f;
    }
    return norm;
  }

  std::vector<Matrix> snapshot() const {
    std::vector<Matrix> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
  }

  void restore(const std::vector<Matrix>& values) {
    if (values.size() != params_.size()) throw std::invalid_argument("snapshot size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) params_[i].value = values[i];
  }

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParameterSet& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::size_t i = 0;
    for (auto& p : params) {
      if (!p.frozen) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
        p.value.array() -=
            lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
      }
      ++i;
    }
  }

  double learning_rate() const { return lr_; }
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace aseer
