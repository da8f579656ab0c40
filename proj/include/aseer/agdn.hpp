#pragma once

// Asynchronous graph diffusion.
//
// Measurements are replayed in order of their end timestamps. Each
// measurement is diffused as a message into the buffers of its out-neighbours;
// each measurement of sensor i then triggers a convolution over i's buffer,
// after which the buffer is cleared. After a sensor's last measurement, one
// more convolution with a value-less virtual measurement consumes whatever
// arrived later. At a shared timestamp all stores run before any
// convolution, each phase in ascending sensor index.

#include "aseer/autodiff.hpp"
#include "aseer/data_model.hpp"
#include "aseer/nn.hpp"
#include "aseer/parameters.hpp"
#include "aseer/time_encoding.hpp"

#include <algorithm>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace aseer {

// Observed history of one sensor inside a window, in model units.
struct SensorTimeline {
  std::vector<Seconds> times;              // end timestamps, increasing
  std::vector<Eigen::RowVector2d> values;  // z-scored (p, f)

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
};

inline std::vector<SensorTimeline> make_timelines(const ForecastInstance& inst, const NormStats& norm) {
  std::vector<SensorTimeline> out(inst.sensors.size());
  for (std::size_t i = 0; i < inst.sensors.size(); ++i) {
    for (const auto& m : inst.sensors[i].history) {
      out[i].times.push_back(m.end());
      out[i].values.emplace_back(norm.norm_p(static_cast<double>(m.length)), norm.norm_f(m.flow));
    }
  }
  return out;
}

struct TrafficMessage {
  std::size_t source = 0;
  std::size_t index = 0;  // position in the source's timeline
  Eigen::RowVector2d value = Eigen::RowVector2d::Zero();
  Seconds emit_time = 0;
  EdgeFeature edge;
};

// Messages kept ordered by (emit_time, source).
class MessageBuffer {
 public:
  void store(TrafficMessage m) {
    auto key = [](const TrafficMessage& x) { return std::tie(x.emit_time, x.source, x.index); };
    auto it = std::upper_bound(messages_.begin(), messages_.end(), m,
                               [&key](const TrafficMessage& a, const TrafficMessage& b) {
                                 return key(a) < key(b);
                               });
    messages_.insert(it, std::move(m));
  }
  void clear() { messages_.clear(); }
  bool empty() const { return messages_.empty(); }
  std::size_t size() const { return messages_.size(); }
  std::span<const TrafficMessage> messages() const { return messages_; }

 private:
  std::vector<TrafficMessage> messages_;
};

struct ReplayStats {
  std::size_t stored = 0;
  std::size_t consumed = 0;
  std::size_t dropped = 0;  // left at sensors with no history, which never convolve
  std::size_t convolutions = 0;
  std::size_t empty_convolutions = 0;
};

struct AgdnOutput {
  std::vector<Var> spatial;  // per sensor: (T x width) rows h~_n, invalid when T = 0
  std::vector<Var> tail;     // per sensor: (1 x width) h-bar, invalid when T = 0
  ReplayStats stats;
};

class Agdn {
 public:
  static constexpr int value_width = 2;
  static constexpr int edge_width = 2;

  Agdn(ParameterSet& ps, int time_width, int width, Rng& rng)
      : time_width_(time_width), width_(width) {
    const int msg = message_width();
    // the attention projection acts on [x_n | x_m | phi | x_e]; it is stored
    // split into the query rows and the message rows
    attn_query_ = &ps.add_glorot("agdn.attn.query", value_width, width, rng);
    attn_message_ = &ps.add_glorot("agdn.attn.message", msg, width, rng);
    attn_score_ = &ps.add_glorot("agdn.attn.score", width, 1, rng);
    mlp_ = nn::Mlp(ps, "agdn.mlp", {msg, width, width, width}, nn::Activation::relu, rng);
  }

  int width() const { return width_; }
  int message_width() const { return value_width + time_width_ + edge_width; }

  // k x (2 + time_width + 2) rows [x_m | phi^i(now - t_m) | x_e].
  Var message_rows(Tape& t, const TimeEncoding& te, std::size_t sensor, Seconds now,
                   std::span<const TrafficMessage> buffer) const {
    const auto k = static_cast<Eigen::Index>(buffer.size());
    Matrix values(k, value_width), edges(k, edge_width);
    std::vector<double> dts(buffer.size());
    for (Eigen::Index r = 0; r < k; ++r) {
      const auto& m = buffer[static_cast<std::size_t>(r)];
      values.row(r) = m.value;
      edges(r, 0) = m.edge.distance_km;
      edges(r, 1) = m.edge.reachable ? 1.0 : 0.0;
      dts[static_cast<std::size_t>(r)] = static_cast<double>(now - m.emit_time);
    }
    Var phi = te.mixed(t, sensor, dts);
    return ad::hcat({t.constant(std::move(values)), phi, t.constant(std::move(edges))});
  }

  // beta = tanh([x_n | message] W_a) v, one score per message row.
  Var attention_scores(Tape& t, const Var& query, const Var& messages) const {
    Var q = ad::matmul(query, t.param(*attn_query_));
    Var hidden = ad::tanh(ad::linear(messages, t.param(*attn_message_), q));
    return ad::matmul(hidden, t.param(*attn_score_));
  }

  Var attention_weights(Tape& t, const Var& query, const Var& messages) const {
    return ad::softmax_cols(attention_scores(t, query, messages));
  }

  // MLP(sum_k alpha_k * message_k).
  Var aggregate(Tape& t, const Var& alpha, const Var& messages) const {
    if (alpha.rows() != messages.rows() || alpha.cols() != 1)
      throw std::invalid_argument("aggregate: weights do not match buffer");
    return mlp_(t, ad::matmul(ad::transpose(alpha), messages));
  }

  // One asynchronous graph convolution; an empty buffer gives a zero vector.
  Var convolve(Tape& t, const TimeEncoding& te, std::size_t sensor, const Var& query, Seconds now,
               std::span<const TrafficMessage> buffer) const {
    if (buffer.empty()) return t.constant(Matrix::Zero(1, width_));
    Var rows = message_rows(t, te, sensor, now, buffer);
    return aggregate(t, attention_weights(t, query, rows), rows);
  }

  AgdnOutput process_timeline(Tape& t, const TimeEncoding& te, const DiffusionGraph& graph,
                              const std::vector<SensorTimeline>& timelines) const {
    const std::size_t n = timelines.size();
    if (graph.size() != n) throw std::invalid_argument("graph does not cover all sensors");

    struct Event {
      Seconds time;
      std::size_t sensor;
      std::size_t index;
    };
    std::vector<Event> events;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < timelines[i].size(); ++k)
        events.push_back({timelines[i].times[k], i, k});
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      return std::tie(a.time, a.sensor, a.index) < std::tie(b.time, b.sensor, b.index);
    });

    AgdnOutput out;
    out.spatial.resize(n);
    out.tail.resize(n);
    std::vector<MessageBuffer> buffers(n);
    std::vector<std::vector<Var>> rows(n);

    for (std::size_t lo = 0; lo < events.size();) {
      std::size_t hi = lo;
      while (hi < events.size() && events[hi].time == events[lo].time) ++hi;
      for (std::size_t e = lo; e < hi; ++e) {
        const Event& ev = events[e];
        for (std::size_t edge_id : graph.outgoing[ev.sensor]) {
          const Edge& edge = graph.edges[edge_id];
          buffers[edge.dst].store(TrafficMessage{ev.sensor, ev.index,
                                                 timelines[ev.sensor].values[ev.index], ev.time,
                                                 edge.feature});
          ++out.stats.stored;
        }
      }
      for (std::size_t e = lo; e < hi; ++e) {
        const Event& ev = events[e];
        Var query = t.constant(Matrix(timelines[ev.sensor].values[ev.index]));
        rows[ev.sensor].push_back(consume(t, te, ev.sensor, query, ev.time, buffers[ev.sensor], out.stats));
      }
      lo = hi;
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (timelines[i].empty()) {
        out.stats.dropped += buffers[i].size();
        buffers[i].clear();
        continue;
      }
      out.spatial[i] = ad::vcat(rows[i]);
      Var virtual_query = t.constant(Matrix::Zero(1, value_width));
      out.tail[i] = consume(t, te, i, virtual_query, timelines[i].times.back(), buffers[i], out.stats);
    }
    return out;
  }

 private:
  Var consume(Tape& t, const TimeEncoding& te, std::size_t sensor, const Var& query, Seconds now,
              MessageBuffer& buffer, ReplayStats& stats) const {
    ++stats.convolutions;
    if (buffer.empty()) ++stats.empty_convolutions;
    stats.consumed += buffer.size();
    Var h = convolve(t, te, sensor, query, now, buffer.messages());
    buffer.clear();
    return h;
  }

  int time_width_;
  int width_;
  Parameter* attn_query_ = nullptr;
  Parameter* attn_message_ = nullptr;
  Parameter* attn_score_ = nullptr;
  nn::Mlp mlp_;
};

}  // namespace aseer
