#pragma once

// Semi-autoregressive decoding.
//
// Step m: the state evolution unit advances the hidden state with the time
// encoding of sigma (seconds since the previous step, 1 at m = 0); the
// predictor maps [h | h_T | phi(delta)] to xi (cycle length, unit-time flow)
// pairs; delta advances by the sum of the predicted lengths. delta is the
// elapsed time from the last observed measurement to the next predicted
// cycle begin, starting at 1.

#include "aseer/autodiff.hpp"
#include "aseer/data_model.hpp"
#include "aseer/nn.hpp"
#include "aseer/parameters.hpp"
#include "aseer/time_encoding.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace aseer {

struct DecoderState {
  Var hidden;         // 1 x D
  Var initial;        // 1 x D, the spatiotemporal representation h_T
  Var elapsed;        // 1 x 1, delta
  Var since_update;   // 1 x 1, sigma
  std::size_t step = 0;
};

struct StepPrediction {
  Var lengths;     // 1 x xi, p-hat
  Var unit_flows;  // 1 x xi, u-hat
  Var flows;       // 1 x xi, u-hat * p-hat
  Var elapsed;     // 1 x xi, delta of every slot
};

// Concatenated decoder output of one sensor; slot k begins at t_T + elapsed[k].
struct DecodedSequence {
  Var lengths;
  Var unit_flows;
  Var elapsed;
  std::size_t predictor_calls = 0;
  bool truncated = false;

  std::size_t size() const { return lengths.valid() ? static_cast<std::size_t>(lengths.cols()) : 0; }
};

struct RolloutLimits {
  // Decode until delta exceeds this many seconds; nullopt disables the check.
  std::optional<double> cover;
  std::size_t min_slots = 0;
};

inline constexpr double min_cycle_seconds = 20.0;

inline std::size_t max_decode_steps(const RolloutLimits& lim, int xi) {
  const auto x = static_cast<double>(xi);
  const double cover = lim.cover ? std::max(0.0, *lim.cover) : 0.0;
  const auto by_cover = static_cast<std::size_t>(std::ceil(cover / min_cycle_seconds / x)) + 2;
  const auto by_slots = static_cast<std::size_t>(std::ceil(static_cast<double>(lim.min_slots) / x));
  return std::max({by_cover, by_slots, std::size_t{1}});
}

class Sapn {
 public:
  Sapn(ParameterSet& ps, int width, int time_width, int xi, Rng& rng) : width_(width), xi_(xi) {
    if (xi < 1) throw std::invalid_argument("step size must be at least 1");
    seu_ = nn::GruCell(ps, "sapn.seu", time_width, width, rng);
    predictor_ = nn::Mlp(ps, "sapn.predictor", {2 * width + time_width, width, width, 2 * xi},
                         nn::Activation::relu, rng);
  }

  int xi() const { return xi_; }
  int width() const { return width_; }

  DecoderState initial_state(Tape& t, const Var& h_T) const {
    return DecoderState{h_T, h_T, t.constant(1.0), t.constant(1.0), 0};
  }

  Var evolve_state(Tape& t, const TimeEncoding& te, std::size_t sensor, const DecoderState& s) const {
    return seu_(t, te.mixed(t, sensor, s.since_update), s.hidden);
  }

  // Uses s.hidden as the already evolved state. Outputs are z-scores mapped
  // back through the cycle-length and unit-flow statistics.
  StepPrediction predict_step(Tape& t, const TimeEncoding& te, std::size_t sensor,
                              const DecoderState& s, const NormStats& norm, bool clamp) const {
    Var in = ad::hcat({s.hidden, s.initial, te.mixed(t, sensor, s.elapsed)});
    Var raw = predictor_(t, in);
    Matrix pick_p = Matrix::Zero(2 * xi_, xi_), pick_u = Matrix::Zero(2 * xi_, xi_);
    for (int k = 0; k < xi_; ++k) {
      pick_p(2 * k, k) = norm.p_std;
      pick_u(2 * k + 1, k) = norm.u_std;
    }
    StepPrediction out;
    out.lengths = ad::matmul(raw, t.constant(std::move(pick_p))) + norm.p_mean;
    out.unit_flows = ad::matmul(raw, t.constant(std::move(pick_u))) + norm.u_mean;
    if (clamp) {
      out.lengths = ad::clamp_min(out.lengths, 1.0);
      out.unit_flows = ad::clamp_min(out.unit_flows, 0.0);
    }
    out.flows = ad::hadamard(out.unit_flows, out.lengths);
    // delta_k = delta + sum_{j<k} p_j
    Matrix before = Matrix::Zero(xi_, xi_);
    for (int j = 0; j < xi_; ++j)
      for (int k = j + 1; k < xi_; ++k) before(j, k) = 1.0;
    out.elapsed = ad::matmul(s.elapsed, t.constant(Matrix::Ones(1, xi_))) +
                  ad::matmul(out.lengths, t.constant(std::move(before)));
    return out;
  }

  static Var update_elapsed(const DecoderState& s, const StepPrediction& p) {
    return s.elapsed + ad::sum(p.lengths);
  }

  DecodedSequence rollout(Tape& t, const TimeEncoding& te, std::size_t sensor, const Var& h_T,
                          const NormStats& norm, const RolloutLimits& lim, bool clamp) const {
    const std::size_t cap = max_decode_steps(lim, xi_);
    DecoderState s = initial_state(t, h_T);
    std::vector<Var> lengths, flows, elapsed;
    DecodedSequence out;
    auto covered = [&] {
      const bool time_ok = !lim.cover || s.elapsed.scalar() > *lim.cover;
      return time_ok && lengths.size() * static_cast<std::size_t>(xi_) >= lim.min_slots;
    };
    do {
      s.hidden = evolve_state(t, te, sensor, s);
      StepPrediction p = predict_step(t, te, sensor, s, norm, clamp);
      ++out.predictor_calls;
      lengths.push_back(p.lengths);
      flows.push_back(p.unit_flows);
      elapsed.push_back(p.elapsed);
      s.since_update = ad::sum(p.lengths);
      s.elapsed = update_elapsed(s, p);
      ++s.step;
    } while (!covered() && s.step < cap);
    out.truncated = !covered();
    out.lengths = ad::hcat(lengths);
    out.unit_flows = ad::hcat(flows);
    out.elapsed = ad::hcat(elapsed);
    return out;
  }

 private:
  int width_;
  int xi_;
  nn::GruCell seu_;
  nn::Mlp predictor_;
};

}  // namespace aseer
