#include "skgc/decoder.hpp"

#include <stdexcept>

#include "skgc/distributions.hpp"

namespace skgc {

namespace {
std::vector<int> decoder_dims(int K, int hidden, int D) {
  if (hidden > 0) return {K, hidden, D};
  return {K, D};
}
}  // namespace

DecoderNet::DecoderNet(ParameterStore& store, const std::string& prefix, int K, int hidden, int D, Activation act,
                       const NoiseStream& noise)
    : mlp_(store, prefix, decoder_dims(K, hidden, D), act, noise) {}

ad::Var DecoderNet::forward(ad::Tape& tape, const ad::Var& f) const {
  if (f.cols() != K()) {
    throw std::invalid_argument("decode: feature has length " + std::to_string(f.cols()) + ", expected " +
                                std::to_string(K()));
  }
  return mlp_.forward(tape, f);
}

Eigen::VectorXd decode(const DecoderNet& net, const Eigen::VectorXd& f) {
  ad::Tape tape(false);
  ad::Var g = net.forward(tape, tape.constant(f.transpose()));
  return g.value().row(0).transpose();
}

void SimilarityConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("SimilarityConfig: tau must be positive");
  if (!(gamma >= 0.0)) throw std::invalid_argument("SimilarityConfig: gamma must be >= 0");
}

double score(const Eigen::VectorXd& g_q, const Eigen::VectorXd& g_a, const SimilarityConfig& cfg, bool is_positive) {
  cfg.validate();
  if (g_q.size() != g_a.size()) throw std::invalid_argument("score: dimension mismatch");
  const double nq = g_q.norm(), na = g_a.norm();
  if (nq == 0.0 || na == 0.0) throw std::domain_error("degenerate representation");
  const double cos = g_q.dot(g_a) / (nq * na);
  return (cos - (is_positive ? cfg.gamma : 0.0)) / cfg.tau;
}

double link_probability(const Eigen::VectorXd& g_q, const Eigen::VectorXd& g_a) {
  if (g_q.size() != g_a.size()) throw std::invalid_argument("link_probability: dimension mismatch");
  return sigmoid(g_q.dot(g_a));
}

ad::Var score_matrix(const ad::Var& g_q, const ad::Var& g_a, const Eigen::Array<bool, -1, -1>& positive,
                     const SimilarityConfig& cfg) {
  cfg.validate();
  ad::Var cos = ad::cosine_matrix(g_q, g_a);
  if (positive.rows() != cos.rows() || positive.cols() != cos.cols()) {
    throw std::invalid_argument("score_matrix: mask shape mismatch");
  }
  ad::Var shifted = cos;
  if (cfg.gamma != 0.0) {
    shifted = ad::sub(cos, cos.tape()->constant(positive.cast<double>().matrix() * cfg.gamma));
  }
  return ad::scale(shifted, 1.0 / cfg.tau);
}

}  // namespace skgc
