#pragma once

// Experiment plumbing shared by the command-line tool and the acceptance
// suite: configuration, data preparation, evaluation and latency timing.

#include "aseer/baselines.hpp"
#include "aseer/checkpoint.hpp"
#include "aseer/io.hpp"
#include "aseer/metrics.hpp"
#include "aseer/model.hpp"
#include "aseer/synthgen.hpp"
#include "aseer/training.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace aseer {

struct ExperimentConfig {
  synth::ScenarioConfig scenario;
  std::string data_dir = "data";
  double epsilon_km = 1.0;
  ModelConfig model;
  TrainConfig training;
  WindowParams windows;
  std::string out_dir = "run";
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw std::invalid_argument("unknown " + where + " option '" + k + "'");
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"scenario", "data_dir", "graph", "model", "training"}, "config");
  ExperimentConfig c;
  try {
    if (j.contains("scenario")) j.at("scenario").get_to(c.scenario);
    c.data_dir = j.value("data_dir", c.data_dir);
    if (j.contains("graph")) {
      detail::reject_unknown(j.at("graph"), {"epsilon_km"}, "graph");
      c.epsilon_km = j.at("graph").value("epsilon_km", c.epsilon_km);
    }
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("training")) {
      const auto& t = j.at("training");
      detail::reject_unknown(t, {"lr", "patience", "max_epochs", "clip", "history", "horizon", "stride", "seed",
                                 "out_dir"},
                             "training");
      c.training.learning_rate = t.value("lr", c.training.learning_rate);
      c.training.patience = t.value("patience", c.training.patience);
      c.training.max_epochs = t.value("max_epochs", c.training.max_epochs);
      c.training.clip_norm = t.value("clip", c.training.clip_norm);
      c.training.seed = t.value("seed", c.training.seed);
      c.windows.history_len = t.value("history", c.windows.history_len);
      c.windows.horizon = t.value("horizon", c.windows.horizon);
      c.windows.stride = t.value("stride", c.windows.stride);
      c.out_dir = t.value("out_dir", c.out_dir);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  if (!(c.epsilon_km > 0.0)) throw std::invalid_argument("graph.epsilon_km must be positive");
  if (!(c.training.learning_rate > 0.0)) throw std::invalid_argument("training.lr must be positive");
  if (c.training.patience < 1 || c.training.max_epochs < 1)
    throw std::invalid_argument("training.patience and training.max_epochs must be >= 1");
  return c;
}

struct PreparedData {
  DiffusionGraph graph;
  DataSplit split;
  NormStats norm;
  WindowSet train, validation, test;
};

inline PreparedData prepare(const io::DataBundle& b, double epsilon_km, const WindowParams& wp) {
  PreparedData d;
  d.graph = build_graph(b.nodes, b.reachability, epsilon_km);
  d.split = split_by_time(time_range(b.dataset));
  d.norm = compute_norm_stats(b.dataset, d.split.train);
  d.train = make_windows(b.dataset, wp, d.split.train);
  d.validation = make_windows(b.dataset, wp, d.split.validation);
  d.test = make_windows(b.dataset, wp, d.split.test);
  return d;
}

struct Evaluation {
  MetricReport metrics;
  double mean_ms = 0.0;  // wall clock per forecast instance
  std::size_t predictor_calls = 0;
  std::size_t truncated = 0;
};

inline Evaluation evaluate(Forecaster& f, const std::vector<ForecastInstance>& windows) {
  MetricAccumulator acc;
  Evaluation ev;
  double total_ms = 0.0;
  for (const auto& inst : windows) {
    const auto t0 = std::chrono::steady_clock::now();
    Forecast fc = f.forecast(inst);
    total_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& s : fc) {
      ev.predictor_calls += s.predictor_calls;
      ev.truncated += s.truncated ? 1 : 0;
    }
    acc.add(inst, fc);
  }
  ev.metrics = acc.report();
  ev.mean_ms = windows.empty() ? 0.0 : total_ms / static_cast<double>(windows.size());
  return ev;
}

struct LatencyRow {
  int xi = 1;
  double hours = 1.0;
  double ms = 0.0;
  std::size_t calls = 0;   // predictor invocations per forecast
  std::size_t slots = 0;   // emitted slots per forecast
};

struct LatencyConfig {
  int width = 64;
  int d_phi = 16;
  double time_scale = 1.0 / 3600.0;
  NormStats norm;
  int repeats = 5;
  std::uint64_t seed = 11;
};

// Decodes a fixed number of slots, hours * 3600 / mean cycle length, from a
// random representation at each step size and times one forecast.
inline std::vector<LatencyRow> measure_latency(const LatencyConfig& cfg, const std::vector<int>& xis,
                                               const std::vector<double>& hours) {
  std::vector<LatencyRow> rows;
  for (int xi : xis) {
    Rng rng(cfg.seed);
    ParameterSet ps;
    TimeEncoding te(ps, 1, TimeEncodingConfig{cfg.d_phi, cfg.time_scale, false}, rng);
    Sapn sapn(ps, cfg.width, te.width(), xi, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix h(1, cfg.width);
    for (Eigen::Index k = 0; k < h.cols(); ++k) h(0, k) = normal(rng);
    for (double hr : hours) {
      const auto slots = static_cast<std::size_t>(std::ceil(hr * 3600.0 / std::max(1.0, cfg.norm.p_mean)));
      LatencyRow row{xi, hr, 0.0, 0, 0};
      double total = 0.0;
      for (int r = 0; r < std::max(1, cfg.repeats); ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        Tape t(false);
        DecodedSequence seq = sapn.rollout(t, te, 0, t.constant(h), cfg.norm, RolloutLimits{std::nullopt, slots}, true);
        total += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        row.calls = seq.predictor_calls;
        row.slots = seq.size();
      }
      row.ms = total / std::max(1, cfg.repeats);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace aseer
