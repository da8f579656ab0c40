#pragma once

// Transformable time-aware convolution.
//
// Each sequence element z_n (T x D_in) is mapped by a meta-filter network to
// one row of every filter: a shared tanh trunk followed by D linear heads of
// width D_in. The heads are stored side by side as one H x (D * D_in) layer,
// head d owning columns [d * D_in, (d + 1) * D_in). Filter scores are
// normalized over time per (head, channel), and
//   h[d] = sum_n sum_c f[n, d, c] * z[n, c].

#include "aseer/autodiff.hpp"
#include "aseer/nn.hpp"
#include "aseer/parameters.hpp"

#include <stdexcept>

namespace aseer {

// h[d] = sum over rows and the d-th block of D_in columns of filters * z.
inline Var filter_inner_product(const Var& filters, const Var& z, Eigen::Index heads) {
  const Eigen::Index T = z.rows(), d_in = z.cols();
  if (filters.rows() != T || filters.cols() != heads * d_in)
    throw std::invalid_argument("filter length does not match sequence");
  Matrix out(1, heads);
  for (Eigen::Index d = 0; d < heads; ++d)
    out(0, d) = filters.value().middleCols(d * d_in, d_in).cwiseProduct(z.value()).sum();
  return z.tape()->record(std::move(out), {filters, z}, [filters, z, heads, d_in](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(filters)) {
      Matrix& gf = t.grad(filters.id());
      for (Eigen::Index d = 0; d < heads; ++d) gf.middleCols(d * d_in, d_in) += g(0, d) * z.value();
    }
    if (t.needs_grad(z)) {
      Matrix& gz = t.grad(z.id());
      for (Eigen::Index d = 0; d < heads; ++d)
        gz += g(0, d) * filters.value().middleCols(d * d_in, d_in);
    }
  });
}

class Ttcn {
 public:
  Ttcn(ParameterSet& ps, int input_width, int hidden, int heads, Rng& rng)
      : input_width_(input_width), heads_(heads) {
    trunk_ = nn::Mlp(ps, "ttcn.trunk", {input_width, hidden, hidden}, nn::Activation::tanh, rng);
    head_ = nn::Dense(ps, "ttcn.heads", hidden, static_cast<Eigen::Index>(heads) * input_width, rng);
  }

  int input_width() const { return input_width_; }
  int heads() const { return heads_; }

  // Unnormalized filter scores, T x (D * D_in).
  Var filter_scores(Tape& t, const Var& z) const {
    if (z.cols() != input_width_) throw std::invalid_argument("ttcn: input width mismatch");
    return head_(t, ad::tanh(trunk_(t, z)));
  }

  // Filters normalized over time; every column sums to one.
  Var derive_filters(Tape& t, const Var& z) const {
    if (z.rows() < 1) throw std::invalid_argument("ttcn: empty sequence");
    return ad::softmax_cols(filter_scores(t, z));
  }

  Var convolve(const Var& z, const Var& filters) const {
    return filter_inner_product(filters, z, heads_);
  }

  Var operator()(Tape& t, const Var& z) const { return convolve(z, derive_filters(t, z)); }

 private:
  int input_width_;
  int heads_;
  nn::Mlp trunk_;
  nn::Dense head_;
};

// Spatiotemporal representation: temporal plus tail spatial part.
inline Var fuse(const Var& temporal, const Var& tail) {
  if (temporal.rows() != tail.rows() || temporal.cols() != tail.cols())
    throw std::invalid_argument("fuse: width mismatch");
  return temporal + tail;
}

}  // namespace aseer
