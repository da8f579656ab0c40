#pragma once

// Learnable trigonometric encoding of time intervals.
//
// phi(dt) = [dt, sin(w_0 dt), cos(w_0 dt), ..., sin(w_{m-1} dt), cos(w_{m-1} dt)]
// with m = d_phi / 2. Every sensor owns a personalized frequency set and a
// mixing scalar lambda; a generic frequency set is shared. The encoding used
// by the model is
//   (1 - exp(-lambda^2)) * phi_personal(dt) + exp(-lambda^2) * phi_generic(dt).

#include "aseer/autodiff.hpp"
#include "aseer/parameters.hpp"

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aseer {

using ad::Tape;
using ad::Var;

struct TimeEncodingConfig {
  int d_phi = 16;
  // Element 0 is dt * linear_scale; the trigonometric terms always see raw dt.
  double linear_scale = 1.0;
  // Ablation: drop the personalized encoding and use the generic one alone.
  bool generic_only = false;
};

namespace detail {

inline Eigen::RowVectorXd trig_row(double dt, const Matrix& omega, double linear_scale) {
  const Eigen::Index m = omega.cols();
  Eigen::RowVectorXd row(2 * m + 1);
  row(0) = dt * linear_scale;
  for (Eigen::Index k = 0; k < m; ++k) {
    row(2 * k + 1) = std::sin(omega(0, k) * dt);
    row(2 * k + 2) = std::cos(omega(0, k) * dt);
  }
  return row;
}

}  // namespace detail

// dt (k x 1) and omega (1 x m) -> k x (2m + 1) feature rows; differentiable in both.
inline Var trig_features(const Var& dt, const Var& omega, double linear_scale) {
  if (dt.cols() != 1 || omega.rows() != 1) throw std::invalid_argument("trig_features: bad shape");
  const Eigen::Index k = dt.rows();
  const Eigen::Index m = omega.cols();
  Matrix out(k, 2 * m + 1);
  for (Eigen::Index r = 0; r < k; ++r)
    out.row(r) = detail::trig_row(dt.value()(r, 0), omega.value(), linear_scale);
  return dt.tape()->record(std::move(out), {dt, omega}, [dt, omega, linear_scale](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    const Matrix& w = omega.value();
    const Matrix& x = dt.value();
    const bool want_dt = t.needs_grad(dt), want_w = t.needs_grad(omega);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      double d_dt = g(r, 0) * linear_scale;
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double s = y(r, 2 * j + 1), c = y(r, 2 * j + 2);
        const double chain = g(r, 2 * j + 1) * c - g(r, 2 * j + 2) * s;
        d_dt += chain * w(0, j);
        if (want_w) t.grad(omega.id())(0, j) += chain * x(r, 0);
      }
      if (want_dt) t.grad(dt.id())(r, 0) += d_dt;
    }
  });
}

class TimeEncoding {
 public:
  TimeEncoding(ParameterSet& ps, std::size_t sensors, TimeEncodingConfig cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.d_phi <= 0 || cfg.d_phi % 2 != 0)
      throw std::invalid_argument("d_phi must be a positive even number");
    const int m = cfg.d_phi / 2;
    Matrix ladder(1, m);
    for (int k = 0; k < m; ++k)
      ladder(0, k) = 1.0 / std::pow(10000.0, 2.0 * k / cfg.d_phi) / 60.0;
    generic_ = &ps.add("time.generic.omega", ladder);
    std::normal_distribution<double> near_zero(0.0, 0.01);
    for (std::size_t i = 0; i < sensors; ++i) {
      const auto id = std::to_string(i);
      omega_.push_back(&ps.add("time.omega." + id, ladder));
      lambda_.push_back(&ps.add("time.lambda." + id, Matrix::Constant(1, 1, near_zero(rng))));
      if (cfg.generic_only) omega_.back()->frozen = lambda_.back()->frozen = true;
    }
  }

  int width() const { return cfg_.d_phi + 1; }
  std::size_t sensors() const { return omega_.size(); }
  const TimeEncodingConfig& config() const { return cfg_; }

  Parameter& omega(std::size_t sensor) { return *omega_.at(check(sensor)); }
  Parameter& lambda(std::size_t sensor) { return *lambda_.at(check(sensor)); }
  Parameter& generic_omega() { return *generic_; }

  Var personalized(Tape& t, std::size_t sensor, const Var& dt) const {
    return trig_features(dt, t.param(*omega_[check(sensor)]), cfg_.linear_scale);
  }

  Var generic(Tape& t, const Var& dt) const {
    return trig_features(dt, t.param(*generic_), cfg_.linear_scale);
  }

  // Rows of phi^i for each interval in dt (k x 1).
  Var mixed(Tape& t, std::size_t sensor, const Var& dt) const {
    check(sensor);
    Var g = generic(t, dt);
    if (cfg_.generic_only) return g;
    Var p = personalized(t, sensor, dt);
    Var lam = t.param(*lambda_[sensor]);
    Var w = ad::exp(-ad::square(lam));
    return ad::scale_by(p, 1.0 - w) + ad::scale_by(g, w);
  }

  Var mixed(Tape& t, std::size_t sensor, std::span<const double> dts) const {
    Matrix col(static_cast<Eigen::Index>(dts.size()), 1);
    for (std::size_t r = 0; r < dts.size(); ++r) col(static_cast<Eigen::Index>(r), 0) = dts[r];
    return mixed(t, sensor, t.constant(std::move(col)));
  }

  Eigen::RowVectorXd encode_personalized(std::size_t sensor, double dt) const {
    return detail::trig_row(dt, omega_[check(sensor)]->value, cfg_.linear_scale);
  }

  Eigen::RowVectorXd encode_generic(double dt) const {
    return detail::trig_row(dt, generic_->value, cfg_.linear_scale);
  }

  Eigen::RowVectorXd encode_mixed(std::size_t sensor, double dt) const {
    const Eigen::RowVectorXd g = encode_generic(dt);
    if (cfg_.generic_only) return g;
    const Eigen::RowVectorXd p = encode_personalized(sensor, dt);
    const auto [wp, wg] = mixing_weights(sensor);
    return wp * p + wg * g;
  }

  // (weight on personalized, weight on generic)
  std::pair<double, double> mixing_weights(std::size_t sensor) const {
    if (cfg_.generic_only) return {0.0, 1.0};
    const double lam = lambda_[check(sensor)]->value(0, 0);
    const double w = std::exp(-lam * lam);
    return {1.0 - w, w};
  }

 private:
  std::size_t check(std::size_t sensor) const {
    if (sensor >= omega_.size())
      throw std::out_of_range("time encoding: unknown sensor " + std::to_string(sensor));
    return sensor;
  }

  TimeEncodingConfig cfg_;
  Parameter* generic_ = nullptr;
  std::vector<Parameter*> omega_;
  std::vector<Parameter*> lambda_;
};

}  // namespace aseer
