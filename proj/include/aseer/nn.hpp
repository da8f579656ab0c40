#pragma once

#include "aseer/autodiff.hpp"
#include "aseer/parameters.hpp"

#include <string>
#include <vector>

namespace aseer::nn {

using ad::Tape;
using ad::Var;

enum class Activation { relu, tanh };

inline Var activate(Activation a, const Var& x) {
  return a == Activation::relu ? ad::relu(x) : ad::tanh(x);
}

struct Dense {
  Parameter* weight = nullptr;  // in x out
  Parameter* bias = nullptr;    // 1 x out

  Dense() = default;
  Dense(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng)
      : weight(&ps.add_glorot(name + ".weight", in, out, rng)),
        bias(&ps.add_zeros(name + ".bias", 1, out)) {}

  Var operator()(Tape& t, const Var& x) const {
    return ad::linear(x, t.param(*weight), t.param(*bias));
  }

  Eigen::Index in() const { return weight->value.rows(); }
  Eigen::Index out() const { return weight->value.cols(); }
};

// Feed-forward stack; the activation sits between layers, the last layer is linear.
struct Mlp {
  std::vector<Dense> layers;
  Activation activation = Activation::relu;

  Mlp() = default;
  Mlp(ParameterSet& ps, const std::string& name, const std::vector<Eigen::Index>& widths,
      Activation act, Rng& rng)
      : activation(act) {
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
      layers.emplace_back(ps, name + "." + std::to_string(i), widths[i], widths[i + 1], rng);
  }

  Var operator()(Tape& t, Var x) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](t, x);
      if (i + 1 < layers.size()) x = activate(activation, x);
    }
    return x;
  }
};

// Gated recurrent unit, reset gate applied after the hidden projection:
//   r = sig(x Wr + h Ur + br), z = sig(x Wz + h Uz + bz)
//   n = tanh(x Wn + bn + r * (h Un + bun)), h' = (1 - z) * n + z * h
struct GruCell {
  Dense input_reset, input_update, input_candidate;
  Dense hidden_reset, hidden_update, hidden_candidate;

  GruCell() = default;
  GruCell(ParameterSet& ps, const std::string& name, Eigen::Index input, Eigen::Index hidden,
          Rng& rng)
      : input_reset(ps, name + ".x_r", input, hidden, rng),
        input_update(ps, name + ".x_z", input, hidden, rng),
        input_candidate(ps, name + ".x_n", input, hidden, rng),
        hidden_reset(ps, name + ".h_r", hidden, hidden, rng),
        hidden_update(ps, name + ".h_z", hidden, hidden, rng),
        hidden_candidate(ps, name + ".h_n", hidden, hidden, rng) {}

  Var operator()(Tape& t, const Var& x, const Var& h) const {
    Var r = ad::sigmoid(input_reset(t, x) + hidden_reset(t, h));
    Var z = ad::sigmoid(input_update(t, x) + hidden_update(t, h));
    Var n = ad::tanh(input_candidate(t, x) + ad::hadamard(r, hidden_candidate(t, h)));
    return ad::hadamard(1.0 - z, n) + ad::hadamard(z, h);
  }
};

}  // namespace aseer::nn
