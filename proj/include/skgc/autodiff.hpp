#pragma once

// Minimal reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every operation of one forward pass. Values live on the tape;
// Var is a cheap handle (tape pointer + node index). Parameters are long-lived
// and owned elsewhere; the tape writes their gradients straight into
// Parameter::grad during backward().

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "skgc/distributions.hpp"

namespace skgc::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Accounting category for tape buffers.
enum class BufferKind { other, latent, representation };

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const { return value()(0, 0); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  /// With record_grad = false, parameters enter as constants and no backward
  /// closures are kept (inference).
  explicit Tape(bool record_grad = true) : record_grad_(record_grad) {}

  Var constant(Matrix value);
  Var parameter(Parameter& p);

  /// Records an op result. `inputs` decide whether the node needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);

  /// Runs reverse accumulation from a 1x1 root.
  void backward(const Var& root);

  const Matrix& value(int id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient accumulator of a node (allocated on first use).
  Matrix& grad(int id);
  /// Gradient of a node after backward(); zero matrix if nothing flowed into it.
  Matrix grad_of(const Var& v) const;

  void tag(const Var& v, BufferKind kind) { nodes_[v.id()].kind = kind; }
  std::size_t bytes(BufferKind kind) const;
  std::size_t total_bytes() const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    BufferKind kind = BufferKind::other;
    bool requires_grad = false;
    bool has_grad = false;
  };
  std::vector<Node> nodes_;
  bool record_grad_ = true;
};

// ---- elementwise / linear algebra ------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// a (n x m) plus a 1 x m row broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var softplus(const Var& a);
Var relu(const Var& a);
/// log(p) - log(1 - p)
Var logit(const Var& a);
/// Pass-through gradient only where lo < a < hi.
Var clamp(const Var& a, double lo, double hi);
Var sum(const Var& a);
Var slice_cols(const Var& a, Index start, Index count);
/// Row-wise cumulative product along columns.
Var cumprod_cols(const Var& a);

// ---- gathers ---------------------------------------------------------------

/// Row i of the result is table.row(ids[i]).
Var gather_rows(const Var& table, const std::vector<int>& ids);
/// Row i of the result is the mean of table rows ids[i] (each list non-empty).
Var mean_pool(const Var& table, const std::vector<std::vector<int>>& ids);

// ---- similarity ------------------------------------------------------------

/// cos(a_i, b_i) per row, n x 1. Throws on a zero-norm row.
Var cosine_rows(const Var& a, const Var& b);
/// cos(a_i, b_j), n x m.
Var cosine_matrix(const Var& a, const Var& b);

/// Supervised contrastive loss summed over rows of `scores`:
///   -(1/|P_i|) sum_{p in P_i} [s_ip - logsumexp({s_ip} U {s_in : n in N_i})].
/// positive(i, j) marks P_i; negative(i, j) marks N_i. Each row needs >= 1 positive.
Var supervised_contrastive(const Var& scores, const Eigen::Array<bool, -1, -1>& positive,
                           const Eigen::Array<bool, -1, -1>& negative);

// ---- distribution-specific fused ops -----------------------------------------

/// Elementwise KL[Beta(a, b) || Beta(prior_a, prior_b)].
Var kl_beta(const Var& a, const Var& b, double prior_a, double prior_b);
/// Elementwise reparameterized Beta-family draws with uniform noise `u`.
Var beta_sample(const Var& a, const Var& b, const Matrix& u, BetaSampler sampler);
/// Elementwise KL[N(mu, sigma^2) || N(0, prior_sigma^2)].
Var kl_gaussian(const Var& mu, const Var& sigma, double prior_sigma);
/// Logistic log-density of y with log odds `log_ratio` and temperature lambda.
Var concrete_log_density(const Var& y, const Var& log_ratio, double lambda);

}  // namespace skgc::ad
