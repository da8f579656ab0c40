#pragma once

// Evaluation metrics. Slots are aligned by ordinal position after the last
// observed measurement; only masked ground-truth slots inside the horizon
// are scored.
//
//   C-MAE  = sum(|b^ - b| + |p^ - p|) / 2K
//   C-RMSE = sqrt(sum((b^ - b)^2 + (p^ - p)^2) / 2K)
//   C-MAPE = 100 * sum(|b^ - b| / delta + |p^ - p| / p) / 2K
//   F-MAE, F-RMSE over u^ * p (the true cycle length)
//   F-AAE  = sum_t |rho^_t - rho_t| eta_t / (sum_t eta_t / 60)
//
// rho is flow / length on every second of a cycle's span; eta marks seconds
// inside observed ground-truth cycles. Seconds not covered by a predicted
// span count with rho^ = 0.

#include "aseer/data_model.hpp"
#include "aseer/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aseer {

struct TruthSpan {
  Seconds begin = 0;
  Seconds length = 1;
  double density = 0.0;
  bool observed = true;
};

// Real-valued predicted span covering the integer seconds t with
// begin <= t < begin + length.
struct DensitySpan {
  double begin = 0.0;
  double length = 0.0;
  double density = 0.0;
};

struct DensityError {
  double abs_sum = 0.0;
  std::size_t seconds = 0;
};

// Accumulated |rho^ - rho| over the observed seconds in [first, last].
// Truth spans must be sorted and disjoint; predicted spans sorted by begin,
// an earlier span winning where two overlap.
inline DensityError density_error(std::span<const TruthSpan> truth, std::span<const DensitySpan> pred,
                                  Seconds first, Seconds last) {
  struct Covered {
    Seconds lo, hi;
    double density;
  };
  std::vector<Covered> cover;
  Seconds reached = std::numeric_limits<Seconds>::min();
  for (const auto& s : pred) {
    Seconds lo = static_cast<Seconds>(std::ceil(s.begin));
    const Seconds hi = static_cast<Seconds>(std::ceil(s.begin + s.length)) - 1;
    if (reached != std::numeric_limits<Seconds>::min()) lo = std::max(lo, reached + 1);
    if (lo > hi) continue;
    cover.push_back({lo, hi, s.density});
    reached = hi;
  }

  DensityError out;
  std::size_t c = 0;
  for (const auto& g : truth) {
    if (!g.observed) continue;
    const Seconds a = std::max(first, g.begin);
    const Seconds b = std::min(last, g.begin + g.length - 1);
    if (a > b) continue;
    const auto n = static_cast<std::size_t>(b - a + 1);
    out.seconds += n;
    while (c < cover.size() && cover[c].hi < a) ++c;
    std::size_t matched = 0;
    for (std::size_t k = c; k < cover.size() && cover[k].lo <= b; ++k) {
      const Seconds lo = std::max(a, cover[k].lo), hi = std::min(b, cover[k].hi);
      if (lo > hi) continue;
      const auto m = static_cast<std::size_t>(hi - lo + 1);
      matched += m;
      out.abs_sum += std::abs(cover[k].density - g.density) * static_cast<double>(m);
    }
    out.abs_sum += std::abs(g.density) * static_cast<double>(n - matched);
  }
  return out;
}

struct MetricReport {
  std::optional<double> c_mae, c_rmse, c_mape, f_mae, f_rmse, f_aae;
  std::size_t masked_slots = 0;
  std::size_t masked_seconds = 0;

  static const std::vector<std::string>& names() {
    static const std::vector<std::string> n{"C-MAE", "C-RMSE", "C-MAPE", "F-MAE", "F-RMSE", "F-AAE"};
    return n;
  }
  std::vector<std::optional<double>> values() const { return {c_mae, c_rmse, c_mape, f_mae, f_rmse, f_aae}; }
};

// Pooled sums over any number of windows and sensors.
class MetricAccumulator {
 public:
  void add_slot(double begin_err, double length_err, double elapsed_truth, double length_truth,
                double flow_err) {
    c_abs_ += std::abs(begin_err) + std::abs(length_err);
    c_sq_ += begin_err * begin_err + length_err * length_err;
    c_pct_ += std::abs(begin_err) / elapsed_truth + std::abs(length_err) / length_truth;
    f_abs_ += std::abs(flow_err);
    f_sq_ += flow_err * flow_err;
    ++slots_;
  }

  void add_density(const DensityError& e) {
    aae_sum_ += e.abs_sum;
    aae_seconds_ += e.seconds;
  }

  void add(const ForecastInstance& inst, const SensorWindow& w, const SensorForecast& f) {
    if (!w.available() || !f.available) return;
    const std::size_t offset = w.first_target_ordinal();
    for (std::size_t l = 0; l < w.targets.size(); ++l) {
      const TargetSlot& g = w.targets[l];
      if (!g.mask) continue;
      const std::size_t k = offset + l;
      if (k >= f.slots.size())
        throw std::logic_error("forecast for sensor " + std::to_string(w.sensor) + " is too short");
      const ForecastSlot& s = f.slots[k];
      const double p = static_cast<double>(g.truth.length);
      add_slot(s.begin - static_cast<double>(g.truth.begin), s.length - p,
               static_cast<double>(g.elapsed), p, s.unit_flow * p - g.truth.flow);
    }
    add_density(window_density_error(inst, w, f));
  }

  void add(const ForecastInstance& inst, const Forecast& f) {
    for (const auto& sf : f) add(inst, inst.sensors.at(sf.sensor), sf);
  }

  static DensityError window_density_error(const ForecastInstance& inst, const SensorWindow& w,
                                           const SensorForecast& f) {
    std::vector<TruthSpan> truth;
    for (const auto* part : {&w.lead_in, &w.targets})
      for (const auto& g : *part)
        truth.push_back({g.truth.begin, g.truth.length, g.truth.flow / static_cast<double>(g.truth.length),
                         g.mask});
    std::vector<DensitySpan> pred;
    for (const auto& s : f.slots)
      pred.push_back({s.begin, s.length, s.length > 0 ? s.flow / s.length : 0.0});
    return density_error(truth, pred, inst.anchor + 1, inst.anchor + inst.horizon);
  }

  MetricReport report() const {
    MetricReport r;
    r.masked_slots = slots_;
    r.masked_seconds = aae_seconds_;
    if (slots_ > 0) {
      const double k2 = 2.0 * static_cast<double>(slots_);
      const auto k = static_cast<double>(slots_);
      r.c_mae = c_abs_ / k2;
      r.c_rmse = std::sqrt(c_sq_ / k2);
      r.c_mape = 100.0 * c_pct_ / k2;
      r.f_mae = f_abs_ / k;
      r.f_rmse = std::sqrt(f_sq_ / k);
    }
    if (aae_seconds_ > 0) r.f_aae = aae_sum_ / (static_cast<double>(aae_seconds_) / 60.0);
    return r;
  }

 private:
  double c_abs_ = 0, c_sq_ = 0, c_pct_ = 0, f_abs_ = 0, f_sq_ = 0, aae_sum_ = 0;
  std::size_t slots_ = 0, aae_seconds_ = 0;
};

}  // namespace aseer
