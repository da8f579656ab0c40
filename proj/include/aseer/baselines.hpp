#pragma once

// Parameter-free reference forecasters.

#include "aseer/data_model.hpp"
#include "aseer/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace aseer {

namespace detail {

template <class CycleOf>
Forecast repeat_forecast(const ForecastInstance& inst, CycleOf&& cycle_of) {
  Forecast out;
  for (const auto& w : inst.sensors) {
    if (!w.available()) continue;
    const auto [length, flow] = cycle_of(w);
    SensorForecast f;
    f.sensor = w.sensor;
    f.available = true;
    f.last_end = w.last_end();
    f.slots = repeat_cycle(length, flow, inference_limits(inst, w));
    for (auto& s : f.slots) s.begin = static_cast<double>(f.last_end) + s.elapsed;
    f.predictor_calls = f.slots.size();
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace detail

// Repeats the last observed measurement.
class LastForecaster : public Forecaster {
 public:
  std::string name() const override { return "last"; }
  Forecast forecast(const ForecastInstance& inst) override {
    return detail::repeat_forecast(inst, [](const SensorWindow& w) {
      return std::pair{static_cast<double>(w.history.back().length), w.history.back().flow};
    });
  }
};

// Repeats the mean over the history window; the length is rounded to whole
// seconds, at least 1.
class HistoricalAverageForecaster : public Forecaster {
 public:
  std::string name() const override { return "ha"; }
  Forecast forecast(const ForecastInstance& inst) override {
    return detail::repeat_forecast(inst, [](const SensorWindow& w) {
      double p = 0.0, f = 0.0;
      for (const auto& m : w.history) p += static_cast<double>(m.length), f += m.flow;
      const auto n = static_cast<double>(w.history.size());
      return std::pair{std::max(1.0, std::round(p / n)), f / n};
    });
  }
};

// Replays the ground truth; scores zero on every metric.
class OracleForecaster : public Forecaster {
 public:
  std::string name() const override { return "oracle"; }
  Forecast forecast(const ForecastInstance& inst) override {
    Forecast out;
    for (const auto& w : inst.sensors) {
      if (!w.available()) continue;
      SensorForecast f;
      f.sensor = w.sensor;
      f.available = true;
      f.last_end = w.last_end();
      for (const auto* part : {&w.lead_in, &w.targets})
        for (const auto& g : *part) {
          const auto p = static_cast<double>(g.truth.length);
          f.slots.push_back(ForecastSlot{static_cast<double>(g.truth.begin), p, g.truth.flow, g.truth.flow / p,
                                         static_cast<double>(g.elapsed)});
        }
      out.push_back(std::move(f));
    }
    return out;
  }
};

}  // namespace aseer
