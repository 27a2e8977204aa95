#include "skgc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "skgc/special_functions.hpp"

namespace skgc::ad {

const Matrix& Var::value() const {
  if (!tape_) throw std::logic_error("Var: empty handle");
  return tape_->value(id_);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(Parameter& p) {
  if (record_grad_ && (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())) p.zero_grad();
  Node n;
  n.param = &p;
  n.requires_grad = record_grad_;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape() != this) throw std::logic_error("Tape: mixing vars from different tapes");
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  n.has_grad = true;
  if (n.param) return n.param->grad;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix Tape::grad_of(const Var& v) const {
  const Node& n = nodes_[v.id()];
  if (n.param) return n.param->grad;
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(const Var& root) {
  if (root.tape() != this) throw std::logic_error("Tape::backward: foreign root");
  if (root.rows() != 1 || root.cols() != 1) throw std::logic_error("Tape::backward: root must be 1x1");
  if (!nodes_[root.id()].requires_grad) return;
  grad(root.id())(0, 0) += 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward || n.param) continue;
    // The backward closure may append to other nodes' grads but never to nodes_.
    n.backward(*this, n.grad);
  }
}

std::size_t Tape::bytes(BufferKind kind) const {
  std::size_t total = 0;
  for (const Node& n : nodes_) {
    if (n.kind == kind && !n.param) total += static_cast<std::size_t>(n.value.size()) * sizeof(double);
  }
  return total;
}

std::size_t Tape::total_bytes() const {
  std::size_t total = 0;
  for (const Node& n : nodes_) {
    total += static_cast<std::size_t>(n.value.size() + n.grad.size()) * sizeof(double);
  }
  return total;
}

namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw std::logic_error("autodiff: empty Var");
  return *a.tape();
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()) + ")");
  }
}

void accumulate(Tape& t, const Var& v, const Matrix& g) {
  if (t.requires_grad(v.id())) t.grad(v.id()) += g;
}

// Elementwise unary op: value f(x), derivative computed from (x, f(x)).
template <class F, class DF>
Var unary(const Var& a, F f, DF df) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr(f);
  const int ia = a.id();
  const int io = static_cast<int>(t.size());
  return t.record(std::move(out), {a}, [ia, io, df](Tape& tp, const Matrix& g) {
    const Matrix& x = tp.value(ia);
    const Matrix& y = tp.value(io);
    Matrix d = x.binaryExpr(y, df);
    tp.grad(ia).array() += g.array() * d.array();
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Tape& t = tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(ia)) tp.grad(ia).noalias() += g * tp.value(ib).transpose();
    if (tp.requires_grad(ib)) tp.grad(ib).noalias() += tp.value(ia).transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tape& t = tape_of(a);
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    accumulate(tp, a, g);
    accumulate(tp, b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tape& t = tape_of(a);
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    accumulate(tp, a, g);
    accumulate(tp, b, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tape& t = tape_of(a);
  Matrix out = a.value().cwiseProduct(b.value());
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a.id())) tp.grad(a.id()) += g.cwiseProduct(tp.value(b.id()));
    if (tp.requires_grad(b.id())) tp.grad(b.id()) += g.cwiseProduct(tp.value(a.id()));
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Tape& t = tape_of(a);
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape& tp, const Matrix& g) {
    accumulate(tp, a, g);
    if (tp.requires_grad(row.id())) tp.grad(row.id()) += g.colwise().sum();
  });
}

Var scale(const Var& a, double s) {
  Tape& t = tape_of(a);
  return t.record(a.value() * s, {a}, [a, s](Tape& tp, const Matrix& g) { accumulate(tp, a, g * s); });
}

Var add_scalar(const Var& a, double s) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array() + s;
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g) { accumulate(tp, a, g); });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return skgc::sigmoid(x); }, [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softplus(const Var& a) {
  return unary(
      a, [](double x) { return skgc::softplus(x); },
      [](double x, double) { return skgc::sigmoid(x); });
}

Var relu(const Var& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var logit(const Var& a) {
  return unary(
      a, [](double p) { return std::log(p) - std::log1p(-p); },
      [](double p, double) { return 1.0 / (p * (1.0 - p)); });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g) { tp.grad(a.id()).array() += g(0, 0); });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  Tape& t = tape_of(a);
  Matrix out = a.value().middleCols(start, count);
  return t.record(std::move(out), {a}, [a, start, count](Tape& tp, const Matrix& g) {
    tp.grad(a.id()).middleCols(start, count) += g;
  });
}

Var cumprod_cols(const Var& a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double acc = 1.0;
    for (Index k = 0; k < x.cols(); ++k) {
      acc *= x(i, k);
      out(i, k) = acc;
    }
  }
  const int io = static_cast<int>(t.size());
  return t.record(std::move(out), {a}, [a, io](Tape& tp, const Matrix& g) {
    // d out_k / d x_j = prod_{l<=k, l!=j} x_l for j <= k. Computed with prefix/suffix
    // products so zeros in x do not need division.
    const Matrix& xv = tp.value(a.id());
    const Matrix& yv = tp.value(io);
    Matrix& ga = tp.grad(a.id());
    const Index n = xv.cols();
    for (Index i = 0; i < xv.rows(); ++i) {
      // grad_j = sum_{k>=j} g_k * prefix_{j-1} * prod_{l=j+1..k} x_l
      double suffix = 0.0;  // sum_{k>j} g_k * prod_{l=j+1..k} x_l, built from the back
      for (Index j = n - 1; j >= 0; --j) {
        const double prefix = j > 0 ? yv(i, j - 1) : 1.0;
        ga(i, j) += prefix * (g(i, j) + suffix);
        suffix = xv(i, j) * (g(i, j) + suffix);
      }
    }
  });
}

Var gather_rows(const Var& table, const std::vector<int>& ids) {
  Tape& t = tape_of(table);
  const Matrix& tv = table.value();
  Matrix out(static_cast<Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows()) throw std::out_of_range("gather_rows: row id out of range");
    out.row(static_cast<Index>(i)) = tv.row(ids[i]);
  }
  return t.record(std::move(out), {table}, [table, ids](Tape& tp, const Matrix& g) {
    Matrix& gt = tp.grad(table.id());
    for (std::size_t i = 0; i < ids.size(); ++i) gt.row(ids[i]) += g.row(static_cast<Index>(i));
  });
}

Var mean_pool(const Var& table, const std::vector<std::vector<int>>& ids) {
  Tape& t = tape_of(table);
  const Matrix& tv = table.value();
  Matrix out = Matrix::Zero(static_cast<Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i].empty()) throw std::invalid_argument("mean_pool: empty id list");
    for (int id : ids[i]) {
      if (id < 0 || id >= tv.rows()) throw std::out_of_range("mean_pool: row id out of range");
      out.row(static_cast<Index>(i)) += tv.row(id);
    }
    out.row(static_cast<Index>(i)) /= static_cast<double>(ids[i].size());
  }
  return t.record(std::move(out), {table}, [table, ids](Tape& tp, const Matrix& g) {
    Matrix& gt = tp.grad(table.id());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double w = 1.0 / static_cast<double>(ids[i].size());
      for (int id : ids[i]) gt.row(id) += w * g.row(static_cast<Index>(i));
    }
  });
}

namespace {

Eigen::VectorXd row_norms(const Matrix& m, const char* op) {
  Eigen::VectorXd n = m.rowwise().norm();
  for (Index i = 0; i < n.size(); ++i) {
    if (!(n(i) > 0.0)) throw std::domain_error(std::string(op) + ": degenerate representation (zero norm)");
  }
  return n;
}

}  // namespace

Var cosine_rows(const Var& a, const Var& b) {
  require_same_shape(a, b, "cosine_rows");
  Tape& t = tape_of(a);
  const Eigen::VectorXd na = row_norms(a.value(), "cosine_rows");
  const Eigen::VectorXd nb = row_norms(b.value(), "cosine_rows");
  Eigen::VectorXd dots = a.value().cwiseProduct(b.value()).rowwise().sum();
  Matrix out = (dots.array() / (na.array() * nb.array())).matrix();
  const int io = static_cast<int>(t.size());
  return t.record(std::move(out), {a, b}, [a, b, na, nb, io](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(a.id());
    const Matrix& bv = tp.value(b.id());
    const Matrix& c = tp.value(io);
    // d cos / d a = b / (|a||b|) - cos * a / |a|^2
    if (tp.requires_grad(a.id())) {
      Matrix& ga = tp.grad(a.id());
      for (Index i = 0; i < av.rows(); ++i) {
        ga.row(i) += g(i, 0) * (bv.row(i) / (na(i) * nb(i)) - c(i, 0) * av.row(i) / (na(i) * na(i)));
      }
    }
    if (tp.requires_grad(b.id())) {
      Matrix& gb = tp.grad(b.id());
      for (Index i = 0; i < bv.rows(); ++i) {
        gb.row(i) += g(i, 0) * (av.row(i) / (na(i) * nb(i)) - c(i, 0) * bv.row(i) / (nb(i) * nb(i)));
      }
    }
  });
}

Var cosine_matrix(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("cosine_matrix: dimension mismatch");
  Tape& t = tape_of(a);
  const Eigen::VectorXd na = row_norms(a.value(), "cosine_matrix");
  const Eigen::VectorXd nb = row_norms(b.value(), "cosine_matrix");
  Matrix an = a.value().array().colwise() / na.array();
  Matrix bn = b.value().array().colwise() / nb.array();
  Matrix out = an * bn.transpose();
  const int io = static_cast<int>(t.size());
  return t.record(std::move(out), {a, b}, [a, b, an, bn, na, nb, io](Tape& tp, const Matrix& g) {
    const Matrix& c = tp.value(io);
    // With a_hat = a/|a|: d cos_ij / d a_i = (b_hat_j - cos_ij a_hat_i) / |a_i|
    if (tp.requires_grad(a.id())) {
      Matrix ga = g * bn;
      ga -= (g.cwiseProduct(c).rowwise().sum()).asDiagonal() * an;
      ga = na.cwiseInverse().asDiagonal() * ga;
      tp.grad(a.id()) += ga;
    }
    if (tp.requires_grad(b.id())) {
      Matrix gb = g.transpose() * an;
      gb -= (g.cwiseProduct(c).colwise().sum().transpose()).asDiagonal() * bn;
      gb = nb.cwiseInverse().asDiagonal() * gb;
      tp.grad(b.id()) += gb;
    }
  });
}

Var supervised_contrastive(const Var& scores, const Eigen::Array<bool, -1, -1>& positive,
                           const Eigen::Array<bool, -1, -1>& negative) {
  const Matrix& s = scores.value();
  if (positive.rows() != s.rows() || positive.cols() != s.cols() || negative.rows() != s.rows() ||
      negative.cols() != s.cols()) {
    throw std::invalid_argument("supervised_contrastive: mask shape mismatch");
  }
  Tape& t = tape_of(scores);
  Matrix grad_s = Matrix::Zero(s.rows(), s.cols());
  double loss = 0.0;
  for (Index i = 0; i < s.rows(); ++i) {
    const Index n_pos = positive.row(i).count();
    if (n_pos == 0) throw std::invalid_argument("supervised_contrastive: query with zero positives");
    double neg_max = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < s.cols(); ++j)
      if (negative(i, j) && !positive(i, j)) neg_max = std::max(neg_max, s(i, j));
    const double inv_pos = 1.0 / static_cast<double>(n_pos);
    for (Index p = 0; p < s.cols(); ++p) {
      if (!positive(i, p)) continue;
      const double m = std::max(neg_max, s(i, p));
      double denom = std::exp(s(i, p) - m);
      for (Index j = 0; j < s.cols(); ++j)
        if (negative(i, j) && !positive(i, j)) denom += std::exp(s(i, j) - m);
      const double lse = m + std::log(denom);
      loss += inv_pos * (lse - s(i, p));
      // d/ds_p: softmax_p - 1; d/ds_n: softmax_n
      grad_s(i, p) += inv_pos * (std::exp(s(i, p) - lse) - 1.0);
      for (Index j = 0; j < s.cols(); ++j)
        if (negative(i, j) && !positive(i, j)) grad_s(i, j) += inv_pos * std::exp(s(i, j) - lse);
    }
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  return t.record(std::move(out), {scores}, [scores, grad_s](Tape& tp, const Matrix& g) {
    tp.grad(scores.id()) += g(0, 0) * grad_s;
  });
}

Var kl_beta(const Var& a, const Var& b, double prior_a, double prior_b) {
  require_same_shape(a, b, "kl_beta");
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols()), da(av.rows(), av.cols()), db(av.rows(), av.cols());
  const BetaParams prior{prior_a, prior_b};
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index k = 0; k < av.cols(); ++k) {
      const BetaParams q{av(i, k), bv(i, k)};
      out(i, k) = skgc::kl_beta(q, prior);
      const BetaKlGradient gr = kl_beta_gradient(q, prior);
      da(i, k) = gr.d_a;
      db(i, k) = gr.d_b;
    }
  }
  return t.record(std::move(out), {a, b}, [a, b, da, db](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a.id())) tp.grad(a.id()) += g.cwiseProduct(da);
    if (tp.requires_grad(b.id())) tp.grad(b.id()) += g.cwiseProduct(db);
  });
}

Var beta_sample(const Var& a, const Var& b, const Matrix& u, BetaSampler sampler) {
  require_same_shape(a, b, "beta_sample");
  if (u.rows() != a.rows() || u.cols() != a.cols()) throw std::invalid_argument("beta_sample: noise shape mismatch");
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols()), da(av.rows(), av.cols()), db(av.rows(), av.cols());
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index k = 0; k < av.cols(); ++k) {
      const PathwiseSample s = sample_beta_reparam({av(i, k), bv(i, k)}, u(i, k), sampler);
      out(i, k) = s.value;
      da(i, k) = s.d_first;
      db(i, k) = s.d_second;
    }
  }
  return t.record(std::move(out), {a, b}, [a, b, da, db](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a.id())) tp.grad(a.id()) += g.cwiseProduct(da);
    if (tp.requires_grad(b.id())) tp.grad(b.id()) += g.cwiseProduct(db);
  });
}

Var kl_gaussian(const Var& mu, const Var& sigma, double prior_sigma) {
  require_same_shape(mu, sigma, "kl_gaussian");
  Tape& t = tape_of(mu);
  const Matrix& m = mu.value();
  const Matrix& s = sigma.value();
  const double var_p = prior_sigma * prior_sigma;
  Matrix out = ((prior_sigma / s.array()).log() + (s.array().square() + m.array().square()) / (2.0 * var_p) - 0.5)
                   .matrix();
  return t.record(std::move(out), {mu, sigma}, [mu, sigma, var_p](Tape& tp, const Matrix& g) {
    const Matrix& mv = tp.value(mu.id());
    const Matrix& sv = tp.value(sigma.id());
    if (tp.requires_grad(mu.id())) tp.grad(mu.id()).array() += g.array() * mv.array() / var_p;
    if (tp.requires_grad(sigma.id()))
      tp.grad(sigma.id()).array() += g.array() * (sv.array() / var_p - sv.array().inverse());
  });
}

Var concrete_log_density(const Var& y, const Var& log_ratio, double lambda) {
  // log(lambda) + t - 2 softplus(t), t = -lambda*y + log_ratio
  Var t = add(scale(y, -lambda), log_ratio);
  return add_scalar(sub(t, scale(softplus(t), 2.0)), std::log(lambda));
}

}  // namespace skgc::ad
