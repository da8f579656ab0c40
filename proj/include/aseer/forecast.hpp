#pragma once

// Predicted slot sequences shared by the learned models and the baselines.

#include "aseer/data_model.hpp"
#include "aseer/sapn.hpp"

#include <string>
#include <vector>

namespace aseer {

struct ForecastSlot {
  double begin = 0.0;  // t_T + elapsed
  double length = 0.0;
  double flow = 0.0;
  double unit_flow = 0.0;
  double elapsed = 0.0;
};

struct SensorForecast {
  std::size_t sensor = 0;
  bool available = false;  // false when the sensor had no history
  Seconds last_end = 0;
  std::vector<ForecastSlot> slots;
  std::size_t predictor_calls = 0;
  bool truncated = false;
};

using Forecast = std::vector<SensorForecast>;

class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::string name() const = 0;
  virtual Forecast forecast(const ForecastInstance& inst) = 0;
};

// Decode until the next slot would begin after anchor + horizon and every
// ground-truth slot up to the horizon has a prediction.
inline RolloutLimits inference_limits(const ForecastInstance& inst, const SensorWindow& w) {
  const double cover = static_cast<double>(inst.anchor + inst.horizon - w.last_end());
  return RolloutLimits{cover, w.slots_needed()};
}

inline SensorForecast to_forecast(const SensorWindow& w, const DecodedSequence& seq) {
  SensorForecast f;
  f.sensor = w.sensor;
  f.available = true;
  f.last_end = w.last_end();
  f.predictor_calls = seq.predictor_calls;
  f.truncated = seq.truncated;
  const auto& p = seq.lengths.value();
  const auto& u = seq.unit_flows.value();
  const auto& d = seq.elapsed.value();
  for (Eigen::Index k = 0; k < p.cols(); ++k) {
    ForecastSlot s;
    s.elapsed = d(0, k);
    s.begin = static_cast<double>(f.last_end) + s.elapsed;
    s.length = p(0, k);
    s.unit_flow = u(0, k);
    s.flow = s.unit_flow * s.length;
    f.slots.push_back(s);
  }
  return f;
}

// Repeats one (length, flow) pair as consecutive cycles from t_T + 1 under
// the same stopping rule as the decoder.
inline std::vector<ForecastSlot> repeat_cycle(double length, double flow, const RolloutLimits& lim) {
  std::vector<ForecastSlot> out;
  double elapsed = 1.0;
  do {
    out.push_back(ForecastSlot{0.0, length, flow, flow / length, elapsed});
    elapsed += length;
  } while ((lim.cover && elapsed <= *lim.cover) || out.size() < lim.min_slots);
  return out;
}

}  // namespace aseer
