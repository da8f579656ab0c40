#pragma once

// Core domain types: per-cycle measurements, sensor series, the diffusion
// graph, and forecast windows with per-slot masks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aseer {

using Seconds = std::int64_t;

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One signal cycle of one lane: it begins at `begin`, lasts `length` seconds
// and carries `flow` vehicles. `observed` is false for ground-truth cycles the
// sensor failed to report.
struct Measurement {
  Seconds begin = 0;
  Seconds length = 1;
  double flow = 0.0;
  bool observed = true;

  Seconds end() const { return begin + length - 1; }
  bool operator==(const Measurement&) const = default;
};

struct SensorSeries {
  std::string sensor_id;
  std::vector<Measurement> measurements;  // ordered by begin

  bool operator==(const SensorSeries&) const = default;
};

// Sorted by sensor id; index into `series` is the sensor index used everywhere.
struct Dataset {
  std::vector<SensorSeries> series;

  bool operator==(const Dataset&) const = default;

  std::size_t size() const { return series.size(); }

  void sort() {
    std::sort(series.begin(), series.end(),
              [](const SensorSeries& a, const SensorSeries& b) { return a.sensor_id < b.sensor_id; });
  }

  std::optional<std::size_t> index_of(const std::string& id) const {
    auto it = std::lower_bound(
        series.begin(), series.end(), id,
        [](const SensorSeries& s, const std::string& key) { return s.sensor_id < key; });
    if (it == series.end() || it->sensor_id != id) return std::nullopt;
    return static_cast<std::size_t>(it - series.begin());
  }
};

// Returns one line per violated rule; empty when the series is well formed.
inline std::vector<std::string> validate_series(const SensorSeries& series) {
  std::vector<std::string> out;
  const auto& ms = series.measurements;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const auto idx = std::to_string(i);
    if (ms[i].length < 1) out.push_back("length < 1 at index " + idx);
    if (!(ms[i].flow >= 0.0)) out.push_back("negative flow at index " + idx);
    if (i > 0 && ms[i].begin <= ms[i - 1].end()) {
      out.push_back("overlap at index " + idx + ": begin " + std::to_string(ms[i].begin) +
                    " <= prev end " + std::to_string(ms[i - 1].end()));
    }
  }
  return out;
}

// Diffusion graph ------------------------------------------------------------

struct SensorLocation {
  std::string sensor_id;
  double lat = 0.0;
  double lon = 0.0;
};

struct EdgeFeature {
  double distance_km = 0.0;
  bool reachable = false;
};

// Directed edge src -> dst: a measurement of src is diffused into dst's buffer.
struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  EdgeFeature feature;
};

struct DiffusionGraph {
  std::vector<SensorLocation> nodes;
  std::vector<Edge> edges;
  double epsilon_km = 1.0;
  std::vector<std::vector<std::size_t>> outgoing;  // edge indices by src

  std::size_t size() const { return nodes.size(); }

  std::optional<std::size_t> index_of(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].sensor_id == id) return i;
    return std::nullopt;
  }

  const Edge* find_edge(std::size_t src, std::size_t dst) const {
    for (std::size_t e : outgoing[src])
      if (edges[e].dst == dst) return &edges[e];
    return nullptr;
  }
};

// Great-circle distance in kilometres.
inline double spherical_distance_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double earth_radius_km = 6371.0088;
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * rad;
  const double dlon = (lon2 - lon1) * rad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * earth_radius_km * std::asin(std::min(1.0, std::sqrt(a)));
}

using ReachabilitySet = std::set<std::pair<std::string, std::string>>;

// Nodes keep the given order. An edge i -> j exists iff i != j and the
// spherical distance is below epsilon_km; `reachable` comes from the directed
// lane-reachability pairs.
inline DiffusionGraph build_graph(std::vector<SensorLocation> sensors,
                                  const ReachabilitySet& reachability, double epsilon_km) {
  if (!(epsilon_km > 0.0)) throw DataError("graph threshold must be positive");
  std::set<std::string> seen;
  for (const auto& s : sensors) {
    if (!seen.insert(s.sensor_id).second) throw DataError("duplicate sensor id: " + s.sensor_id);
    if (!(std::abs(s.lat) <= 90.0) || !(std::abs(s.lon) <= 180.0))
      throw DataError("invalid coordinates for sensor " + s.sensor_id);
  }
  DiffusionGraph g;
  g.nodes = std::move(sensors);
  g.epsilon_km = epsilon_km;
  g.outgoing.resize(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    for (std::size_t j = 0; j < g.nodes.size(); ++j) {
      if (i == j) continue;
      const double d = spherical_distance_km(g.nodes[i].lat, g.nodes[i].lon, g.nodes[j].lat,
                                             g.nodes[j].lon);
      if (d >= epsilon_km) continue;
      const bool reach = reachability.contains({g.nodes[i].sensor_id, g.nodes[j].sensor_id});
      g.outgoing[i].push_back(g.edges.size());
      g.edges.push_back(Edge{i, j, EdgeFeature{d, reach}});
    }
  }
  return g;
}

// Windows ------------------------------------------------------------------

// Closed range of seconds.
struct TimeRange {
  Seconds first = 0;
  Seconds last = -1;

  Seconds duration() const { return last - first + 1; }
};

inline TimeRange time_range(const Dataset& ds) {
  TimeRange r{0, -1};
  bool any = false;
  for (const auto& s : ds.series) {
    if (s.measurements.empty()) continue;
    const Seconds b = s.measurements.front().begin;
    const Seconds e = s.measurements.back().end();
    r.first = any ? std::min(r.first, b) : b;
    r.last = any ? std::max(r.last, e) : e;
    any = true;
  }
  return r;
}

// A ground-truth cycle after the sensor's last observed history measurement.
// `elapsed` is begin minus that measurement's end.
struct TargetSlot {
  Measurement truth;
  bool mask = false;
  Seconds elapsed = 0;
};

struct SensorWindow {
  std::size_t sensor = 0;
  std::vector<Measurement> history;  // observed, end inside the history window
  // Ground-truth cycles beginning after the last history end but at or before
  // the anchor. They fix the ordinal offset of the targets and are never
  // scored by the cycle or flow losses.
  std::vector<TargetSlot> lead_in;
  std::vector<TargetSlot> targets;  // cycles beginning in (anchor, anchor + horizon]

  bool available() const { return !history.empty(); }
  Seconds last_end() const { return history.back().end(); }
  std::size_t first_target_ordinal() const { return lead_in.size(); }
  std::size_t slots_needed() const { return lead_in.size() + targets.size(); }
};

struct ForecastInstance {
  Seconds anchor = 0;
  Seconds history_len = 3600;
  Seconds horizon = 3600;
  std::vector<SensorWindow> sensors;  // one per dataset sensor, by index

  std::size_t available_count() const {
    return static_cast<std::size_t>(std::count_if(
        sensors.begin(), sensors.end(), [](const SensorWindow& s) { return s.available(); }));
  }
};

struct WindowParams {
  Seconds history_len = 3600;
  Seconds horizon = 3600;
  Seconds stride = 1800;
};

struct WindowSet {
  std::vector<ForecastInstance> instances;
  std::vector<std::string> warnings;
};

inline SensorWindow extract_sensor_window(const SensorSeries& series, std::size_t sensor,
                                          Seconds anchor, const WindowParams& p) {
  SensorWindow w;
  w.sensor = sensor;
  const auto& ms = series.measurements;
  const Seconds hist_first = anchor - p.history_len + 1;
  // first cycle whose end reaches into the history window
  auto it = std::lower_bound(ms.begin(), ms.end(), hist_first,
                             [](const Measurement& m, Seconds t) { return m.end() < t; });
  for (; it != ms.end() && it->end() <= anchor; ++it)
    if (it->observed) w.history.push_back(*it);
  const Seconds last_end = w.history.empty() ? anchor : w.history.back().end();
  auto after = std::upper_bound(ms.begin(), ms.end(), last_end,
                                [](Seconds t, const Measurement& m) { return t < m.begin; });
  for (; after != ms.end() && after->begin <= anchor + p.horizon; ++after) {
    TargetSlot slot{*after, after->observed, after->begin - last_end};
    if (after->begin <= anchor)
      w.lead_in.push_back(slot);
    else
      w.targets.push_back(slot);
  }
  if (w.history.empty()) {
    for (auto& s : w.targets) s.elapsed = 0;
    w.lead_in.clear();
  }
  return w;
}

inline ForecastInstance make_instance(const Dataset& ds, Seconds anchor, const WindowParams& p) {
  ForecastInstance inst;
  inst.anchor = anchor;
  inst.history_len = p.history_len;
  inst.horizon = p.horizon;
  inst.sensors.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    inst.sensors.push_back(extract_sensor_window(ds.series[i], i, anchor, p));
  return inst;
}

// Anchors start at range.first + history_len - 1 and advance by stride while
// the horizon ends strictly before range.last.
inline WindowSet make_windows(const Dataset& ds, const WindowParams& p,
                              std::optional<TimeRange> range = std::nullopt) {
  if (p.history_len <= 0 || p.horizon <= 0 || p.stride <= 0)
    throw std::invalid_argument("window lengths and stride must be positive");
  const TimeRange r = range.value_or(time_range(ds));
  WindowSet out;
  if (r.duration() < p.history_len + p.horizon) {
    out.warnings.push_back("time range of " + std::to_string(std::max<Seconds>(0, r.duration())) +
                           " s is shorter than history + horizon; no windows");
    return out;
  }
  for (Seconds anchor = r.first + p.history_len - 1; anchor + p.horizon < r.last;
       anchor += p.stride)
    out.instances.push_back(make_instance(ds, anchor, p));
  if (out.instances.empty()) out.warnings.push_back("no window fits the time range");
  return out;
}

struct DataSplit {
  TimeRange train, validation, test;
};

// Chronological 60/20/20 split of the covered time range.
inline DataSplit split_by_time(const TimeRange& r, double train_frac = 0.6, double val_frac = 0.2) {
  const Seconds n = r.duration();
  const auto n_train = static_cast<Seconds>(std::floor(static_cast<double>(n) * train_frac));
  const auto n_val = static_cast<Seconds>(std::floor(static_cast<double>(n) * val_frac));
  DataSplit s;
  s.train = {r.first, r.first + n_train - 1};
  s.validation = {s.train.last + 1, s.train.last + n_val};
  s.test = {s.validation.last + 1, r.last};
  return s;
}

// Normalization ------------------------------------------------------------

// z-score statistics for cycle length p, flow f and unit-time flow u = f / p.
struct NormStats {
  double p_mean = 0.0, p_std = 1.0;
  double f_mean = 0.0, f_std = 1.0;
  double u_mean = 0.0, u_std = 1.0;

  double norm_p(double p) const { return (p - p_mean) / p_std; }
  double norm_f(double f) const { return (f - f_mean) / f_std; }
  bool operator==(const NormStats&) const = default;
};

// Statistics of observed measurements whose spans lie inside `range`.
inline NormStats compute_norm_stats(const Dataset& ds, const TimeRange& range) {
  double n = 0, sp = 0, sp2 = 0, sf = 0, sf2 = 0, su = 0, su2 = 0;
  for (const auto& s : ds.series) {
    for (const auto& m : s.measurements) {
      if (!m.observed || m.begin < range.first || m.end() > range.last) continue;
      const auto p = static_cast<double>(m.length);
      const double u = m.flow / p;
      n += 1;
      sp += p, sp2 += p * p;
      sf += m.flow, sf2 += m.flow * m.flow;
      su += u, su2 += u * u;
    }
  }
  if (n < 2) throw DataError("not enough observed measurements for normalization statistics");
  auto stdev = [n](double s, double s2) {
    const double var = std::max(0.0, s2 / n - (s / n) * (s / n));
    return var > 1e-12 ? std::sqrt(var) : 1.0;
  };
  NormStats st;
  st.p_mean = sp / n, st.p_std = stdev(sp, sp2);
  st.f_mean = sf / n, st.f_std = stdev(sf, sf2);
  st.u_mean = su / n, st.u_std = stdev(su, su2);
  return st;
}

}  // namespace aseer
