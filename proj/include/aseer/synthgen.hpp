#pragma once

// Synthetic adaptive-signal road network.
//
// Intersections sit on a rows x cols grid. Each runs its own adaptive
// controller, so cycle lengths differ between intersections and drift with
// demand; every lane (sensor) at an intersection shares that intersection's
// cycles. Lane flow follows a piecewise-linear diurnal rate, a per-lane
// factor, spillover from the grid-adjacent upstream lane, and noise.

#include "aseer/data_model.hpp"
#include "aseer/parameters.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <queue>
#include <random>
#include <string>
#include <vector>

namespace aseer::synth {

struct RatePoint {
  double hour = 0.0;
  double rate = 0.0;  // vehicles per second per lane
};

struct ScenarioConfig {
  int grid_rows = 1;
  int grid_cols = 5;
  int lanes_per_intersection = 4;
  Seconds p_min = 40;
  Seconds p_max = 200;
  Seconds base_cycle = 40;
  double controller_gain = 8.0;  // seconds of cycle per vehicle/minute of smoothed lane flow
  std::vector<RatePoint> diurnal_profile = {{0, 0.03},  {5, 0.03},  {8, 0.25}, {10, 0.15},
                                            {13, 0.18}, {17, 0.28}, {20, 0.12}, {24, 0.03}};
  double coupling = 0.3;
  double missing_ratio = 0.3;
  Seconds missing_mean_span = 3600;
  double length_noise_sd = 5.0;
  double flow_noise_frac = 0.1;
  double spacing_km = 0.6;
  double origin_lat = 27.83;
  double origin_lon = 113.15;
  std::uint64_t seed = 1;
  int days = 7;

  int intersections() const { return grid_rows * grid_cols; }
  int sensors() const { return intersections() * lanes_per_intersection; }
};

inline void validate(const ScenarioConfig& c) {
  auto fail = [](const std::string& m) { throw DataError("invalid scenario: " + m); };
  if (c.grid_rows < 1 || c.grid_cols < 1) fail("grid must have at least one intersection");
  if (c.lanes_per_intersection < 1) fail("lanes_per_intersection must be >= 1");
  if (!(1 <= c.p_min && c.p_min <= c.base_cycle && c.base_cycle <= c.p_max))
    fail("need 1 <= p_min <= base_cycle <= p_max");
  if (!(c.missing_ratio >= 0.0 && c.missing_ratio < 1.0)) fail("missing_ratio must be in [0, 1)");
  if (!(c.coupling >= 0.0 && c.coupling <= 1.0)) fail("coupling must be in [0, 1]");
  if (c.missing_mean_span < 1) fail("missing_mean_span must be >= 1");
  if (c.length_noise_sd < 0 || c.flow_noise_frac < 0) fail("noise levels must be >= 0");
  if (c.days < 1) fail("days must be >= 1");
  if (c.diurnal_profile.size() < 2) fail("diurnal profile needs at least two points");
  for (std::size_t i = 0; i < c.diurnal_profile.size(); ++i) {
    if (c.diurnal_profile[i].rate < 0) fail("diurnal rates must be >= 0");
    if (i > 0 && c.diurnal_profile[i].hour <= c.diurnal_profile[i - 1].hour)
      fail("diurnal hours must increase");
  }
  if (c.diurnal_profile.front().hour > 0 || c.diurnal_profile.back().hour < 24)
    fail("diurnal profile must cover hours 0 to 24");
}

// Piecewise-linear rate at a time of day.
inline double diurnal_rate(const std::vector<RatePoint>& profile, double seconds) {
  const double hour = std::fmod(seconds / 3600.0, 24.0);
  for (std::size_t i = 1; i < profile.size(); ++i) {
    if (hour <= profile[i].hour) {
      const auto& a = profile[i - 1];
      const auto& b = profile[i];
      const double w = (hour - a.hour) / (b.hour - a.hour);
      return a.rate + w * (b.rate - a.rate);
    }
  }
  return profile.back().rate;
}

inline std::string lane_id(int row, int col, int lane) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "S_r%02d_c%02d_l%02d", row, col, lane);
  return buf;
}

struct SimulationOutput {
  Dataset dataset;  // complete ground truth, every cycle observed
  std::vector<SensorLocation> locations;
  ReachabilitySet reachability;
};

namespace detail {

inline Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return Rng(seq);
}

struct LaneState {
  double lane_factor = 1.0;
  int upstream = -1;  // global lane index
  // the two most recent cycles: enough to find one that ended before any later begin
  Measurement current{-1, 1, 0.0, true};
  Measurement previous{-1, 1, 0.0, true};
};

}  // namespace detail

// Lane direction d = lane % 4: 0 eastbound (enters from the west), 1
// southbound, 2 westbound, 3 northbound. The upstream lane is the same lane
// slot at the grid neighbour the traffic comes from.
inline SimulationOutput simulate(const ScenarioConfig& cfg) {
  validate(cfg);
  const int n_int = cfg.intersections();
  const int lanes = cfg.lanes_per_intersection;
  const Seconds horizon_end = static_cast<Seconds>(cfg.days) * 86400;
  const double alpha = 1.0 - std::pow(0.5, 1.0 / 3.0);  // half-life of three cycles

  SimulationOutput out;
  std::vector<detail::LaneState> lane_state(static_cast<std::size_t>(n_int * lanes));
  std::vector<std::vector<Measurement>> cycles(lane_state.size());
  const double km_per_deg = 111.195;
  const double cos_lat = std::cos(cfg.origin_lat * std::numbers::pi / 180.0);
  const std::array<std::pair<int, int>, 4> from = {{{0, -1}, {-1, 0}, {0, 1}, {1, 0}}};

  Rng layout = detail::stream(cfg.seed, 0xFFFF);
  std::uniform_real_distribution<double> factor_dist(0.7, 1.3);
  for (int r = 0; r < cfg.grid_rows; ++r) {
    for (int c = 0; c < cfg.grid_cols; ++c) {
      for (int l = 0; l < lanes; ++l) {
        const int g = (r * cfg.grid_cols + c) * lanes + l;
        auto& st = lane_state[static_cast<std::size_t>(g)];
        st.lane_factor = factor_dist(layout);
        const auto [dr, dc] = from[static_cast<std::size_t>(l % 4)];
        const int ur = r + dr, uc = c + dc;
        if (ur >= 0 && ur < cfg.grid_rows && uc >= 0 && uc < cfg.grid_cols) {
          st.upstream = (ur * cfg.grid_cols + uc) * lanes + l;
          out.reachability.insert({lane_id(ur, uc, l), lane_id(r, c, l)});
        }
        // sensor sits 50 m upstream of the stop line, lanes 3 m apart
        const double back = 0.05, side = 0.003 * (l / 4);
        const double north = -dr * back + (dc != 0 ? side : 0.0);
        const double east = -dc * back + (dr != 0 ? side : 0.0);
        out.locations.push_back(SensorLocation{
            lane_id(r, c, l), cfg.origin_lat + (-r * cfg.spacing_km + north) / km_per_deg,
            cfg.origin_lon + (c * cfg.spacing_km + east) / (km_per_deg * cos_lat)});
      }
    }
  }

  struct Controller {
    Rng rng;
    Seconds next_begin = 0;
    double smoothed_rate = 0.0;  // vehicles per minute per lane
    std::normal_distribution<double> normal{0.0, 1.0};
  };
  std::vector<Controller> ctl;
  ctl.reserve(static_cast<std::size_t>(n_int));
  const double start_rate = diurnal_rate(cfg.diurnal_profile, 0.0) * 60.0;
  for (int i = 0; i < n_int; ++i) {
    Controller k{detail::stream(cfg.seed, static_cast<std::uint64_t>(i) + 1), 0, start_rate, {}};
    k.next_begin = std::uniform_int_distribution<Seconds>(0, cfg.base_cycle - 1)(k.rng);
    ctl.push_back(std::move(k));
  }

  using Event = std::pair<Seconds, int>;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
  for (int i = 0; i < n_int; ++i) queue.emplace(ctl[static_cast<std::size_t>(i)].next_begin, i);

  while (!queue.empty()) {
    const auto [begin, i] = queue.top();
    queue.pop();
    auto& k = ctl[static_cast<std::size_t>(i)];
    const double noise = cfg.length_noise_sd > 0 ? cfg.length_noise_sd * k.normal(k.rng) : 0.0;
    const double raw = static_cast<double>(cfg.base_cycle) + cfg.controller_gain * k.smoothed_rate + noise;
    const Seconds length = std::clamp<Seconds>(std::llround(raw), cfg.p_min, cfg.p_max);
    if (begin + length - 1 >= horizon_end) continue;

    const double mid = static_cast<double>(begin) + 0.5 * static_cast<double>(length);
    const double base = diurnal_rate(cfg.diurnal_profile, mid);
    double rate_sum = 0.0;
    std::vector<double> flows(static_cast<std::size_t>(lanes));
    for (int l = 0; l < lanes; ++l) {
      const auto& st = lane_state[static_cast<std::size_t>(i * lanes + l)];
      double rate = base * st.lane_factor;
      if (st.upstream >= 0 && cfg.coupling > 0) {
        const auto& up = lane_state[static_cast<std::size_t>(st.upstream)];
        const Measurement& src = up.current.end() < begin ? up.current : up.previous;
        if (src.begin >= 0) rate += cfg.coupling * src.flow / static_cast<double>(src.length);
      }
      double f = static_cast<double>(length) * rate;
      if (cfg.flow_noise_frac > 0) f *= 1.0 + cfg.flow_noise_frac * k.normal(k.rng);
      flows[static_cast<std::size_t>(l)] = std::max(0.0, f);
    }
    for (int l = 0; l < lanes; ++l) {
      auto& st = lane_state[static_cast<std::size_t>(i * lanes + l)];
      const Measurement m{begin, length, flows[static_cast<std::size_t>(l)], true};
      st.previous = st.current;
      st.current = m;
      cycles[static_cast<std::size_t>(i * lanes + l)].push_back(m);
      rate_sum += m.flow / static_cast<double>(length) * 60.0;
    }
    k.smoothed_rate += alpha * (rate_sum / lanes - k.smoothed_rate);
    k.next_begin = begin + length;
    queue.emplace(k.next_begin, i);
  }

  for (std::size_t g = 0; g < cycles.size(); ++g)
    out.dataset.series.push_back(SensorSeries{out.locations[g].sensor_id, std::move(cycles[g])});
  out.dataset.sort();
  std::sort(out.locations.begin(), out.locations.end(),
            [](const SensorLocation& a, const SensorLocation& b) { return a.sensor_id < b.sensor_id; });
  return out;
}

// Missing data ------------------------------------------------------------

struct MissingResult {
  SensorSeries series;
  double realized_ratio = 0.0;
  int attempts = 0;
  bool within_band = true;
  std::string warning;
};

inline double unobserved_fraction(const SensorSeries& s) {
  double total = 0, missing = 0;
  for (const auto& m : s.measurements) {
    total += static_cast<double>(m.length);
    if (!m.observed) missing += static_cast<double>(m.length);
  }
  return total > 0 ? missing / total : 0.0;
}

// Flags contiguous runs of cycles as unobserved. Failures arrive as a Poisson
// process; failure and healthy durations are exponential with means
// mean_span and mean_span * (1 - ratio) / ratio, so the expected unobserved
// share of time is `ratio`. A cycle is unobserved when its midpoint falls in
// a failure. Draws are retried until the realized share is within 0.05 of
// the target; every 10 misses halve the span length. After 100 attempts the
// closest draw is kept and a warning is set.
inline MissingResult inject_missing(const SensorSeries& series, double ratio, Seconds mean_span,
                                    std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw DataError("missing ratio must be in [0, 1)");
  MissingResult best;
  best.series = series;
  for (auto& m : best.series.measurements) m.observed = true;
  if (ratio == 0.0 || series.measurements.empty()) return best;

  constexpr double band = 0.05;
  constexpr int max_attempts = 100;
  double span = static_cast<double>(std::max<Seconds>(1, mean_span));
  double best_err = 2.0;
  const double t0 = static_cast<double>(series.measurements.front().begin);
  const double t1 = static_cast<double>(series.measurements.back().end()) + 1.0;

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    if (attempt > 0 && attempt % 10 == 0) span = std::max(1.0, span / 2);
    Rng rng = detail::stream(seed, 0xA11CE, static_cast<std::uint64_t>(attempt));
    std::exponential_distribution<double> fail_len(1.0 / span);
    std::exponential_distribution<double> ok_len(ratio / ((1.0 - ratio) * span));
    bool failing = std::bernoulli_distribution(ratio)(rng);
    double t = t0;
    std::vector<std::pair<double, double>> outages;
    while (t < t1) {
      const double d = failing ? fail_len(rng) : ok_len(rng);
      if (failing) outages.emplace_back(t, t + d);
      t += d;
      failing = !failing;
    }
    SensorSeries trial = series;
    std::size_t o = 0;
    for (auto& m : trial.measurements) {
      const double mid = static_cast<double>(m.begin) + 0.5 * static_cast<double>(m.length);
      while (o < outages.size() && outages[o].second <= mid) ++o;
      m.observed = !(o < outages.size() && outages[o].first <= mid);
    }
    const double realized = unobserved_fraction(trial);
    const double err = std::abs(realized - ratio);
    if (err < best_err) {
      best_err = err;
      best.series = std::move(trial);
      best.realized_ratio = realized;
    }
    best.attempts = attempt + 1;
    if (err <= band) return best;
  }
  best.within_band = false;
  best.warning = "missing ratio " + std::to_string(best.realized_ratio) + " for sensor " +
                 series.sensor_id + " misses target " + std::to_string(ratio) + " after " +
                 std::to_string(max_attempts) + " attempts";
  return best;
}

struct GeneratedData {
  Dataset dataset;
  std::vector<SensorLocation> locations;
  ReachabilitySet reachability;
  std::vector<std::string> warnings;
};

// Simulation followed by per-sensor missing-data injection.
inline GeneratedData generate(const ScenarioConfig& cfg) {
  SimulationOutput sim = simulate(cfg);
  GeneratedData out{{}, std::move(sim.locations), std::move(sim.reachability), {}};
  for (std::size_t i = 0; i < sim.dataset.series.size(); ++i) {
    auto r = inject_missing(sim.dataset.series[i], cfg.missing_ratio, cfg.missing_mean_span,
                            cfg.seed * 1000003ULL + i);
    if (!r.within_band) out.warnings.push_back(r.warning);
    out.dataset.series.push_back(std::move(r.series));
  }
  return out;
}

// JSON ------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const RatePoint& p) { j = {p.hour, p.rate}; }
inline void from_json(const nlohmann::json& j, RatePoint& p) {
  p.hour = j.at(0).get<double>();
  p.rate = j.at(1).get<double>();
}

inline void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = nlohmann::json{{"grid_rows", c.grid_rows},
                     {"grid_cols", c.grid_cols},
                     {"lanes_per_intersection", c.lanes_per_intersection},
                     {"p_min", c.p_min},
                     {"p_max", c.p_max},
                     {"base_cycle", c.base_cycle},
                     {"controller_gain", c.controller_gain},
                     {"diurnal_profile", c.diurnal_profile},
                     {"coupling", c.coupling},
                     {"missing_ratio", c.missing_ratio},
                     {"missing_mean_span", c.missing_mean_span},
                     {"length_noise_sd", c.length_noise_sd},
                     {"flow_noise_frac", c.flow_noise_frac},
                     {"spacing_km", c.spacing_km},
                     {"origin_lat", c.origin_lat},
                     {"origin_lon", c.origin_lon},
                     {"seed", c.seed},
                     {"days", c.days}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  const nlohmann::json defaults = ScenarioConfig{};
  for (const auto& [key, _] : j.items())
    if (!defaults.contains(key)) throw DataError("unknown scenario field: " + key);
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("grid_rows", c.grid_rows);
  get("grid_cols", c.grid_cols);
  get("lanes_per_intersection", c.lanes_per_intersection);
  get("p_min", c.p_min);
  get("p_max", c.p_max);
  get("base_cycle", c.base_cycle);
  get("controller_gain", c.controller_gain);
  get("diurnal_profile", c.diurnal_profile);
  get("coupling", c.coupling);
  get("missing_ratio", c.missing_ratio);
  get("missing_mean_span", c.missing_mean_span);
  get("length_noise_sd", c.length_noise_sd);
  get("flow_noise_frac", c.flow_noise_frac);
  get("spacing_km", c.spacing_km);
  get("origin_lat", c.origin_lat);
  get("origin_lon", c.origin_lon);
  get("seed", c.seed);
  get("days", c.days);
}

}  // namespace aseer::synth
