#pragma once

// Training loop: one forecast window (all sensors) per optimizer step,
// windows reshuffled every epoch, early stopping on the pooled validation
// loss with the best parameters restored at the end.

#include "aseer/data_model.hpp"
#include "aseer/losses.hpp"
#include "aseer/model.hpp"
#include "aseer/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace aseer {

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int patience = 10;
  int max_epochs = 100;
  double clip_norm = 5.0;
  std::uint64_t seed = 7;  // window shuffling
};

struct EpochRecord {
  int epoch = 0;
  double l_p = 0.0, l_delta = 0.0, l_f = 0.0;
  double val_total = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
};

// Pooled masked losses over windows, no gradients.
inline LossSums evaluate_losses(const SequenceModel& model, const std::vector<ForecastInstance>& windows) {
  LossSums sums;
  for (const auto& inst : windows) {
    Tape t(false);
    sums += masked_losses(t, inst, model.decode(t, inst, true)).sums;
  }
  return sums;
}

// One optimizer step on one window; returns the pooled sums of the window.
inline LossSums train_step(SequenceModel& model, Adam& opt, const ForecastInstance& inst, double clip_norm) {
  Tape t;
  LossBreakdown loss = masked_losses(t, inst, model.decode(t, inst, true));
  if (!std::isfinite(loss.value()))
    throw DivergenceError("non-finite training loss at anchor " + std::to_string(inst.anchor));
  if (loss.sums.count == 0) return loss.sums;
  model.parameters().zero_grad();
  t.backward(loss.total);
  const double norm = model.parameters().clip_grad_norm(clip_norm);
  if (!std::isfinite(norm))
    throw DivergenceError("non-finite gradient at anchor " + std::to_string(inst.anchor));
  opt.step(model.parameters());
  return loss.sums;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

inline TrainResult train(SequenceModel& model, const std::vector<ForecastInstance>& train_windows,
                         const std::vector<ForecastInstance>& val_windows, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  if (train_windows.empty()) throw DataError("no training windows");
  if (val_windows.empty()) throw DataError("no validation windows");
  Adam opt(cfg.learning_rate);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  std::vector<Matrix> best = model.parameters().snapshot();
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossSums epoch_sums;
    for (std::size_t k : order) epoch_sums += train_step(model, opt, train_windows[k], cfg.clip_norm);
    const double val = evaluate_losses(model, val_windows).total();
    if (!std::isfinite(val)) throw DivergenceError("non-finite validation loss in epoch " + std::to_string(epoch));
    EpochRecord rec{epoch, epoch_sums.mean_p(), epoch_sums.mean_delta(), epoch_sums.mean_flow(), val};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (val < result.best_val) {
      result.best_val = val;
      result.best_epoch = epoch;
      best = model.parameters().snapshot();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  model.parameters().restore(best);
  return result;
}

inline void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "epoch,L_p,L_delta,L_f,val_total\n";
  for (const auto& r : history)
    out << r.epoch << ',' << r.l_p << ',' << r.l_delta << ',' << r.l_f << ',' << r.val_total << '\n';
}

}  // namespace aseer
