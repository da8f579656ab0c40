#pragma once

// Masked training losses over the target slots of one forecast instance:
//   L_p     mean |p^ - p|
//   L_delta mean |delta^ - delta|
//   L_f     mean |u^ * p - f|   (true cycle length)
// each averaged over masked slots of all sensors; total = L_p + L_delta + L_f.
// A term with no masked slot is 0.

#include "aseer/autodiff.hpp"
#include "aseer/data_model.hpp"
#include "aseer/sapn.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aseer {

// Plain sums, for pooling over many instances.
struct LossSums {
  double p = 0.0, delta = 0.0, flow = 0.0;
  std::size_t count = 0;

  LossSums& operator+=(const LossSums& o) {
    p += o.p, delta += o.delta, flow += o.flow, count += o.count;
    return *this;
  }
  double mean_p() const { return count ? p / static_cast<double>(count) : 0.0; }
  double mean_delta() const { return count ? delta / static_cast<double>(count) : 0.0; }
  double mean_flow() const { return count ? flow / static_cast<double>(count) : 0.0; }
  double total() const { return mean_p() + mean_delta() + mean_flow(); }
};

struct LossBreakdown {
  Var l_p, l_delta, l_f, total;
  LossSums sums;

  double value() const { return total.scalar(); }
};

inline LossBreakdown masked_losses(Tape& t, const ForecastInstance& inst,
                                   const std::vector<std::optional<DecodedSequence>>& decoded) {
  if (decoded.size() != inst.sensors.size()) throw std::invalid_argument("one decode per sensor expected");
  std::vector<Var> p_err, d_err, f_err;
  LossSums sums;
  for (std::size_t i = 0; i < decoded.size(); ++i) {
    const SensorWindow& w = inst.sensors[i];
    if (!w.available()) continue;  // no history: nothing to forecast from
    std::vector<std::size_t> picks;
    for (std::size_t l = 0; l < w.targets.size(); ++l)
      if (w.targets[l].mask) picks.push_back(w.first_target_ordinal() + l);
    if (picks.empty()) continue;
    if (!decoded[i]) throw std::logic_error("sensor " + std::to_string(i) + " has targets but no decode");
    const DecodedSequence& seq = *decoded[i];
    if (picks.back() >= seq.size())
      throw std::logic_error("decode for sensor " + std::to_string(i) + " is too short");

    const auto m = static_cast<Eigen::Index>(picks.size());
    Matrix select = Matrix::Zero(static_cast<Eigen::Index>(seq.size()), m);
    Matrix p_true(1, m), d_true(1, m), f_true(1, m);
    Eigen::Index c = 0;
    for (std::size_t l = 0; l < w.targets.size(); ++l) {
      const TargetSlot& g = w.targets[l];
      if (!g.mask) continue;
      select(static_cast<Eigen::Index>(w.first_target_ordinal() + l), c) = 1.0;
      p_true(0, c) = static_cast<double>(g.truth.length);
      d_true(0, c) = static_cast<double>(g.elapsed);
      f_true(0, c) = g.truth.flow;
      ++c;
    }
    Var sel = t.constant(std::move(select));
    Var p_hat = ad::matmul(seq.lengths, sel);
    Var d_hat = ad::matmul(seq.elapsed, sel);
    Var u_hat = ad::matmul(seq.unit_flows, sel);
    Var p_t = t.constant(p_true);
    p_err.push_back(ad::sum(ad::abs(p_hat - p_t)));
    d_err.push_back(ad::sum(ad::abs(d_hat - t.constant(std::move(d_true)))));
    f_err.push_back(ad::sum(ad::abs(ad::hadamard(u_hat, p_t) - t.constant(std::move(f_true)))));
    sums.p += p_err.back().scalar();
    sums.delta += d_err.back().scalar();
    sums.flow += f_err.back().scalar();
    sums.count += picks.size();
  }

  LossBreakdown out;
  out.sums = sums;
  if (sums.count == 0) {
    out.l_p = out.l_delta = out.l_f = out.total = t.constant(0.0);
    return out;
  }
  const double inv = 1.0 / static_cast<double>(sums.count);
  auto mean = [&](const std::vector<Var>& parts) { return ad::sum(ad::hcat(parts)) * inv; };
  out.l_p = mean(p_err);
  out.l_delta = mean(d_err);
  out.l_f = mean(f_err);
  out.total = out.l_p + out.l_delta + out.l_f;
  return out;
}

}  // namespace aseer
