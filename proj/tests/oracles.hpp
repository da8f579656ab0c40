#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They work on plain Eigen values and loops, never on the tape.

#include "aseer/aseer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

using aseer::Matrix;
using aseer::Seconds;

// Time encoding straight from the parameter values.
inline Eigen::RowVectorXd phi(const aseer::ParameterSet& ps, std::size_t sensor, double dt, double scale,
                              bool generic_only) {
  auto trig = [&](const Matrix& w) {
    Eigen::RowVectorXd r(1 + 2 * w.cols());
    r(0) = dt * scale;
    for (Eigen::Index k = 0; k < w.cols(); ++k) {
      r(1 + 2 * k) = std::sin(w(0, k) * dt);
      r(2 + 2 * k) = std::cos(w(0, k) * dt);
    }
    return r;
  };
  const Eigen::RowVectorXd g = trig(ps.at("time.generic.omega").value);
  if (generic_only) return g;
  const Eigen::RowVectorXd p = trig(ps.at("time.omega." + std::to_string(sensor)).value);
  const double lam = ps.at("time.lambda." + std::to_string(sensor)).value(0, 0);
  const double w = std::exp(-lam * lam);
  return (1.0 - w) * p + w * g;
}

inline Eigen::RowVectorXd dense(const aseer::ParameterSet& ps, const std::string& name, const Eigen::RowVectorXd& x) {
  const Matrix& W = ps.at(name + ".weight").value;
  const Matrix& b = ps.at(name + ".bias").value;
  Eigen::RowVectorXd y(W.cols());
  for (Eigen::Index o = 0; o < W.cols(); ++o) {
    double s = b(0, o);
    for (Eigen::Index i = 0; i < W.rows(); ++i) s += x(i) * W(i, o);
    y(o) = s;
  }
  return y;
}

inline Eigen::RowVectorXd relu(Eigen::RowVectorXd x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = std::max(0.0, x(i));
  return x;
}

inline Eigen::RowVectorXd tanh(Eigen::RowVectorXd x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = std::tanh(x(i));
  return x;
}

// Graph convolution written against the full projection W_a acting on
// [x_n | x_m | phi | x_e].
struct Message {
  Seconds time;
  std::size_t source, index;
  Eigen::RowVector2d value;
  aseer::EdgeFeature edge;
};

inline Eigen::RowVectorXd convolve(const aseer::ParameterSet& ps, std::size_t sensor, const Eigen::RowVector2d& query,
                                   Seconds now, const std::vector<Message>& msgs, int width, double scale,
                                   bool generic_only) {
  if (msgs.empty()) return Eigen::RowVectorXd::Zero(width);
  const Matrix& wq = ps.at("agdn.attn.query").value;
  const Matrix& wm = ps.at("agdn.attn.message").value;
  Matrix wa(wq.rows() + wm.rows(), wq.cols());
  wa << wq, wm;
  const Matrix& v = ps.at("agdn.attn.score").value;
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> beta;
  for (const auto& m : msgs) {
    const Eigen::RowVectorXd ph = phi(ps, sensor, static_cast<double>(now - m.time), scale, generic_only);
    Eigen::RowVectorXd row(2 + ph.size() + 2);
    row << m.value, ph, m.edge.distance_km, m.edge.reachable ? 1.0 : 0.0;
    Eigen::RowVectorXd full(2 + row.size());
    full << query, row;
    double b = 0.0;
    for (Eigen::Index k = 0; k < wa.cols(); ++k) {
      double s = 0.0;
      for (Eigen::Index r = 0; r < wa.rows(); ++r) s += full(r) * wa(r, k);
      b += v(k, 0) * std::tanh(s);
    }
    rows.push_back(row);
    beta.push_back(b);
  }
  const double mx = *std::max_element(beta.begin(), beta.end());
  double z = 0.0;
  for (double b : beta) z += std::exp(b - mx);
  Eigen::RowVectorXd agg = Eigen::RowVectorXd::Zero(rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) agg += std::exp(beta[r] - mx) / z * rows[r];
  Eigen::RowVectorXd h = relu(dense(ps, "agdn.mlp.0", agg));
  h = relu(dense(ps, "agdn.mlp.1", h));
  return dense(ps, "agdn.mlp.2", h);
}

struct AgdnResult {
  std::vector<Matrix> spatial;  // T x width per sensor
  std::vector<Eigen::RowVectorXd> tail;
};

// For every measurement, rebuilds the buffer by scanning the whole timeline:
// a convolution of sensor i at t_n receives every message from an in-edge
// emitted in (t_{n-1}, t_n]; the tail receives those emitted after t_T.
inline AgdnResult agdn_rescan(const aseer::ParameterSet& ps, const aseer::DiffusionGraph& g,
                              const std::vector<aseer::SensorTimeline>& tl, int width, double scale,
                              bool generic_only = false) {
  AgdnResult out;
  const std::size_t n = tl.size();
  out.spatial.resize(n);
  out.tail.resize(n);
  auto collect = [&](std::size_t i, Seconds after, Seconds upto) {
    std::vector<Message> msgs;
    for (const auto& e : g.edges) {
      if (e.dst != i) continue;
      for (std::size_t k = 0; k < tl[e.src].size(); ++k) {
        const Seconds t = tl[e.src].times[k];
        if (t > after && t <= upto) msgs.push_back({t, e.src, k, tl[e.src].values[k], e.feature});
      }
    }
    std::sort(msgs.begin(), msgs.end(), [](const Message& a, const Message& b) {
      return std::tie(a.time, a.source, a.index) < std::tie(b.time, b.source, b.index);
    });
    return msgs;
  };
  constexpr Seconds lo = std::numeric_limits<Seconds>::min();
  constexpr Seconds hi = std::numeric_limits<Seconds>::max();
  for (std::size_t i = 0; i < n; ++i) {
    if (tl[i].empty()) continue;
    out.spatial[i].resize(static_cast<Eigen::Index>(tl[i].size()), width);
    for (std::size_t k = 0; k < tl[i].size(); ++k) {
      const Seconds prev = k == 0 ? lo : tl[i].times[k - 1];
      out.spatial[i].row(static_cast<Eigen::Index>(k)) =
          convolve(ps, i, tl[i].values[k], tl[i].times[k], collect(i, prev, tl[i].times[k]), width, scale, generic_only);
    }
    out.tail[i] = convolve(ps, i, Eigen::RowVector2d::Zero(), tl[i].times.back(), collect(i, tl[i].times.back(), hi),
                           width, scale, generic_only);
  }
  return out;
}

// Meta-filter convolution as two explicit loops over time and channels.
inline Eigen::RowVectorXd ttcn_double_loop(const aseer::ParameterSet& ps, const Matrix& z, int heads) {
  const Eigen::Index T = z.rows(), c_in = z.cols();
  std::vector<Eigen::RowVectorXd> scores;
  for (Eigen::Index n = 0; n < T; ++n) {
    Eigen::RowVectorXd a = tanh(dense(ps, "ttcn.trunk.0", z.row(n)));
    a = tanh(dense(ps, "ttcn.trunk.1", a));
    scores.push_back(dense(ps, "ttcn.heads", a));
  }
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(heads);
  for (int d = 0; d < heads; ++d) {
    for (Eigen::Index c = 0; c < c_in; ++c) {
      const Eigen::Index col = d * c_in + c;
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index n = 0; n < T; ++n) mx = std::max(mx, scores[static_cast<std::size_t>(n)](col));
      double denom = 0.0;
      for (Eigen::Index n = 0; n < T; ++n) denom += std::exp(scores[static_cast<std::size_t>(n)](col) - mx);
      for (Eigen::Index n = 0; n < T; ++n)
        h(d) += std::exp(scores[static_cast<std::size_t>(n)](col) - mx) / denom * z(n, c);
    }
  }
  return h;
}

// F-AAE terms by visiting every second.
inline aseer::DensityError density_per_second(const std::vector<aseer::TruthSpan>& truth,
                                              const std::vector<aseer::DensitySpan>& pred, Seconds first,
                                              Seconds last) {
  aseer::DensityError out;
  for (Seconds t = first; t <= last; ++t) {
    const aseer::TruthSpan* g = nullptr;
    for (const auto& s : truth)
      if (s.begin <= t && t <= s.begin + s.length - 1) {
        g = &s;
        break;
      }
    if (g == nullptr || !g->observed) continue;
    double rho_hat = 0.0;
    for (const auto& p : pred) {
      const auto x = static_cast<double>(t);
      if (p.begin <= x && x < p.begin + p.length) {
        rho_hat = p.density;
        break;
      }
    }
    out.abs_sum += std::abs(rho_hat - g->density);
    ++out.seconds;
  }
  return out;
}

// Random small inputs --------------------------------------------------------

struct RandomGraphCase {
  aseer::DiffusionGraph graph;
  std::vector<aseer::SensorTimeline> timelines;
};

// Up to `max_sensors` sensors with up to `max_len` measurements; times are
// drawn from a narrow range so that ties across sensors are common.
inline RandomGraphCase random_graph_case(std::mt19937_64& rng, std::size_t max_sensors, std::size_t max_len,
                                         bool allow_empty = true) {
  std::uniform_int_distribution<std::size_t> n_dist(2, max_sensors);
  const std::size_t n = n_dist(rng);
  RandomGraphCase c;
  c.graph.epsilon_km = 1.0;
  c.graph.outgoing.resize(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) c.graph.nodes.push_back({"s" + std::to_string(i), 0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || unit(rng) < 0.4) continue;
      c.graph.outgoing[i].push_back(c.graph.edges.size());
      c.graph.edges.push_back({i, j, {unit(rng), unit(rng) < 0.5}});
    }
  std::uniform_int_distribution<std::size_t> len_dist(allow_empty ? 0 : 1, max_len);
  std::uniform_int_distribution<Seconds> gap(1, 12);
  for (std::size_t i = 0; i < n; ++i) {
    aseer::SensorTimeline tl;
    Seconds t = gap(rng) - 1;
    const std::size_t len = len_dist(rng);
    for (std::size_t k = 0; k < len; ++k) {
      tl.times.push_back(t);
      tl.values.emplace_back(normal(rng), normal(rng));
      t += gap(rng);
    }
    c.timelines.push_back(tl);
  }
  return c;
}

// Randomizes every parameter (scaled normal) so oracles see generic values.
inline void randomize(aseer::ParameterSet& ps, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& p : ps)
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = normal(rng);
}

// Gradient check ---------------------------------------------------------------

// Largest |analytic - numeric| / max(|analytic| + |numeric|, floor) over every
// element of `params`, for the scalar built by `f`.
inline double max_grad_error(std::vector<aseer::Parameter*> params, const std::function<aseer::Var(aseer::Tape&)>& f,
                             double h = 1e-5, double floor = 1e-6) {
  for (auto* p : params) p->zero_grad();
  {
    aseer::Tape t;
    aseer::Var y = f(t);
    t.backward(y);
  }
  double worst = 0.0;
  for (auto* p : params) {
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      double& x = p->value.data()[k];
      const double saved = x;
      x = saved + h;
      double up;
      {
        aseer::Tape t;
        up = f(t).scalar();
      }
      x = saved - h;
      double down;
      {
        aseer::Tape t;
        down = f(t).scalar();
      }
      x = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p->grad.data()[k];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor));
    }
  }
  return worst;
}

// Fixed random projection turning any output into a scalar.
inline aseer::Var project(aseer::Tape& t, const aseer::Var& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix w(y.rows(), y.cols());
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = normal(rng);
  return aseer::ad::sum(aseer::ad::hadamard(y, t.constant(w)));
}

}  // namespace oracle
