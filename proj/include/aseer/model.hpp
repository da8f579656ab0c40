#pragma once

// Trainable sequence models: the full asynchronous model and a recurrent
// encoder-decoder baseline. Both decode per sensor into DecodedSequence so
// they share losses, training and evaluation.

#include "aseer/agdn.hpp"
#include "aseer/data_model.hpp"
#include "aseer/forecast.hpp"
#include "aseer/nn.hpp"
#include "aseer/parameters.hpp"
#include "aseer/sapn.hpp"
#include "aseer/time_encoding.hpp"
#include "aseer/ttcn.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace aseer {

struct ModelConfig {
  std::string kind = "aseer";  // aseer | recurrent
  int width = 64;
  int d_phi = 16;
  int xi = 12;
  bool no_agdn = false;
  bool no_pte = false;
  double time_scale = 1.0 / 3600.0;  // linear time-encoding element, per second
  std::uint64_t seed = 1;
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"kind", c.kind},     {"width", c.width},   {"d_phi", c.d_phi},
          {"xi", c.xi},         {"no_agdn", c.no_agdn}, {"no_pte", c.no_pte},
          {"time_scale", c.time_scale}, {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"kind", "width", "d_phi", "xi", "no_agdn",
                                           "no_pte", "time_scale", "seed"};
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw std::invalid_argument("unknown model option '" + k + "'");
  ModelConfig c;
  c.kind = j.value("kind", c.kind);
  c.width = j.value("width", c.width);
  c.d_phi = j.value("d_phi", c.d_phi);
  c.xi = j.value("xi", c.xi);
  c.no_agdn = j.value("no_agdn", c.no_agdn);
  c.no_pte = j.value("no_pte", c.no_pte);
  c.time_scale = j.value("time_scale", c.time_scale);
  c.seed = j.value("seed", c.seed);
  if (c.kind != "aseer" && c.kind != "recurrent") throw std::invalid_argument("unknown model kind '" + c.kind + "'");
  if (c.width < 1) throw std::invalid_argument("model width must be positive");
  if (c.xi < 1) throw std::invalid_argument("step size xi must be at least 1");
  if (c.d_phi < 2 || c.d_phi % 2 != 0) throw std::invalid_argument("d_phi must be a positive even number");
  if (!(c.time_scale > 0.0)) throw std::invalid_argument("time_scale must be positive");
  return c;
}

class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  // One entry per sensor; nullopt for sensors without history. In training
  // mode outputs are raw and decoding stops once every target slot has a
  // prediction; otherwise outputs are clamped and the horizon is covered.
  virtual std::vector<std::optional<DecodedSequence>> decode(Tape& t, const ForecastInstance& inst,
                                                              bool training) const = 0;

  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  const ModelConfig& config() const { return config_; }
  const NormStats& norm() const { return norm_; }
  const DiffusionGraph& graph() const { return graph_; }

 protected:
  SequenceModel(ModelConfig cfg, DiffusionGraph graph, NormStats norm)
      : config_(std::move(cfg)), graph_(std::move(graph)), norm_(norm) {}

  static RolloutLimits limits_for(const ForecastInstance& inst, const SensorWindow& w, bool training) {
    if (training) return RolloutLimits{std::nullopt, w.slots_needed()};
    return inference_limits(inst, w);
  }

  static bool wants_decode(const SensorWindow& w, bool training) {
    if (!w.available()) return false;
    if (!training) return true;
    for (const auto& s : w.targets)
      if (s.mask) return true;
    return false;
  }

  ParameterSet params_;
  ModelConfig config_;
  DiffusionGraph graph_;
  NormStats norm_;
};

class AseerModel : public SequenceModel {
 public:
  AseerModel(ModelConfig cfg, DiffusionGraph graph, NormStats norm)
      : SequenceModel(std::move(cfg), std::move(graph), norm) {
    Rng rng(config_.seed);
    const int D = config_.width;
    TimeEncodingConfig tc{config_.d_phi, config_.time_scale, config_.no_pte};
    time_ = std::make_unique<TimeEncoding>(params_, graph_.size(), tc, rng);
    const int tw = time_->width();
    agdn_ = std::make_unique<Agdn>(params_, tw, D, rng);
    ttcn_ = std::make_unique<Ttcn>(params_, Agdn::value_width + D + tw, D, D, rng);
    sapn_ = std::make_unique<Sapn>(params_, D, tw, config_.xi, rng);
  }

  const TimeEncoding& time_encoding() const { return *time_; }
  TimeEncoding& time_encoding() { return *time_; }
  const Agdn& agdn() const { return *agdn_; }
  const Ttcn& ttcn() const { return *ttcn_; }
  const Sapn& sapn() const { return *sapn_; }
  const ReplayStats& last_replay() const { return last_replay_; }

  // Spatiotemporal representation h_T per sensor (invalid Var without history).
  std::vector<Var> represent(Tape& t, const ForecastInstance& inst) const {
    const std::size_t n = inst.sensors.size();
    if (n != graph_.size()) throw std::invalid_argument("instance and graph sensor counts differ");
    const auto timelines = make_timelines(inst, norm_);
    AgdnOutput spatial;
    if (!config_.no_agdn) {
      spatial = agdn_->process_timeline(t, *time_, graph_, timelines);
      last_replay_ = spatial.stats;
    }
    std::vector<Var> out(n);
    const int D = config_.width;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& tl = timelines[i];
      if (tl.empty()) continue;
      const auto T = static_cast<Eigen::Index>(tl.size());
      Matrix x(T, Agdn::value_width);
      std::vector<double> since(tl.size());
      for (Eigen::Index r = 0; r < T; ++r) {
        x.row(r) = tl.values[static_cast<std::size_t>(r)];
        since[static_cast<std::size_t>(r)] = static_cast<double>(tl.times.back() - tl.times[static_cast<std::size_t>(r)]);
      }
      Var h_tilde = config_.no_agdn ? t.constant(Matrix::Zero(T, D)) : spatial.spatial[i];
      Var h_bar = config_.no_agdn ? t.constant(Matrix::Zero(1, D)) : spatial.tail[i];
      Var z = ad::hcat({t.constant(std::move(x)), h_tilde, time_->mixed(t, i, since)});
      out[i] = fuse((*ttcn_)(t, z), h_bar);
    }
    return out;
  }

  std::vector<std::optional<DecodedSequence>> decode(Tape& t, const ForecastInstance& inst,
                                                      bool training) const override {
    std::vector<std::optional<DecodedSequence>> out(inst.sensors.size());
    bool any = false;
    for (const auto& w : inst.sensors) any = any || wants_decode(w, training);
    if (!any) return out;
    const auto reps = represent(t, inst);
    for (std::size_t i = 0; i < inst.sensors.size(); ++i) {
      const SensorWindow& w = inst.sensors[i];
      if (!wants_decode(w, training)) continue;
      out[i] = sapn_->rollout(t, *time_, i, reps[i], norm_, limits_for(inst, w, training), !training);
    }
    return out;
  }

 private:
  std::unique_ptr<TimeEncoding> time_;
  std::unique_ptr<Agdn> agdn_;
  std::unique_ptr<Ttcn> ttcn_;
  std::unique_ptr<Sapn> sapn_;
  mutable ReplayStats last_replay_;
};

// GRU encoder over z-scored (p, f, dt) and an autoregressive GRU decoder
// emitting one (p, u) pair per step.
class RecurrentModel : public SequenceModel {
 public:
  RecurrentModel(ModelConfig cfg, DiffusionGraph graph, NormStats norm)
      : SequenceModel(std::move(cfg), std::move(graph), norm) {
    Rng rng(config_.seed);
    encoder_ = nn::GruCell(params_, "gru.encoder", 3, config_.width, rng);
    decoder_ = nn::GruCell(params_, "gru.decoder", 3, config_.width, rng);
    output_ = nn::Dense(params_, "gru.output", config_.width, 2, rng);
  }

  std::vector<std::optional<DecodedSequence>> decode(Tape& t, const ForecastInstance& inst,
                                                      bool training) const override {
    std::vector<std::optional<DecodedSequence>> out(inst.sensors.size());
    for (std::size_t i = 0; i < inst.sensors.size(); ++i) {
      const SensorWindow& w = inst.sensors[i];
      if (!wants_decode(w, training)) continue;
      out[i] = decode_sensor(t, w, limits_for(inst, w, training), !training);
    }
    return out;
  }

 private:
  DecodedSequence decode_sensor(Tape& t, const SensorWindow& w, const RolloutLimits& lim, bool clamp) const {
    const auto& hist = w.history;
    Var h = t.constant(Matrix::Zero(1, config_.width));
    for (std::size_t n = 0; n < hist.size(); ++n) {
      const Seconds dt = n == 0 ? hist[n].length : hist[n].end() - hist[n - 1].end();
      Matrix x(1, 3);
      x << norm_.norm_p(static_cast<double>(hist[n].length)), norm_.norm_f(hist[n].flow),
          norm_.norm_p(static_cast<double>(dt));
      h = encoder_(t, t.constant(std::move(x)), h);
    }
    const auto& last = hist.back();
    const double last_u = last.flow / static_cast<double>(last.length);
    Matrix first(1, 2);
    first << norm_.norm_p(static_cast<double>(last.length)), (last_u - norm_.u_mean) / norm_.u_std;
    Var prev = t.constant(std::move(first));
    Var elapsed = t.constant(1.0);

    const std::size_t cap = max_decode_steps(lim, 1);
    std::vector<Var> lengths, flows, elapsed_all;
    DecodedSequence seq;
    auto covered = [&] {
      return (!lim.cover || elapsed.scalar() > *lim.cover) && lengths.size() >= lim.min_slots;
    };
    do {
      h = decoder_(t, ad::hcat({prev, elapsed * horizon_scale}), h);
      Var o = output_(t, h);
      ++seq.predictor_calls;
      Var p = ad::element(o, 0, 0) * norm_.p_std + norm_.p_mean;
      Var u = ad::element(o, 0, 1) * norm_.u_std + norm_.u_mean;
      if (clamp) {
        p = ad::clamp_min(p, 1.0);
        u = ad::clamp_min(u, 0.0);
      }
      lengths.push_back(p);
      flows.push_back(u);
      elapsed_all.push_back(elapsed);
      elapsed = elapsed + p;
      prev = o;
    } while (!covered() && lengths.size() < cap);
    seq.truncated = !covered();
    seq.lengths = ad::hcat(lengths);
    seq.unit_flows = ad::hcat(flows);
    seq.elapsed = ad::hcat(elapsed_all);
    return seq;
  }

  static constexpr double horizon_scale = 1.0 / 3600.0;
  nn::GruCell encoder_, decoder_;
  nn::Dense output_;
};

inline std::unique_ptr<SequenceModel> make_model(const ModelConfig& cfg, DiffusionGraph graph, NormStats norm) {
  if (cfg.kind == "recurrent") return std::make_unique<RecurrentModel>(cfg, std::move(graph), norm);
  return std::make_unique<AseerModel>(cfg, std::move(graph), norm);
}

class ModelForecaster : public Forecaster {
 public:
  explicit ModelForecaster(const SequenceModel& m) : model_(m) {}
  std::string name() const override { return model_.config().kind; }

  Forecast forecast(const ForecastInstance& inst) override {
    Tape t(false);
    const auto decoded = model_.decode(t, inst, false);
    Forecast out;
    for (std::size_t i = 0; i < decoded.size(); ++i)
      if (decoded[i]) out.push_back(to_forecast(inst.sensors[i], *decoded[i]));
    return out;
  }

 private:
  const SequenceModel& model_;
};

}  // namespace aseer
