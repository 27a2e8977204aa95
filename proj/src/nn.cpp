#include "skgc/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace skgc {

ad::Parameter& ParameterStore::add(const std::string& name, Eigen::MatrixXd value) {
  if (index_.count(name)) throw std::invalid_argument("ParameterStore: duplicate parameter " + name);
  index_[name] = params_.size();
  params_.push_back(std::make_unique<ad::Parameter>(name, std::move(value)));
  return *params_.back();
}

ad::Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const ad::Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

ad::Parameter& ParameterStore::get(const std::string& name) {
  ad::Parameter* p = find(name);
  if (!p) throw std::out_of_range("ParameterStore: no parameter " + name);
  return *p;
}

const ad::Parameter& ParameterStore::get(const std::string& name) const {
  const ad::Parameter* p = find(name);
  if (!p) throw std::out_of_range("ParameterStore: no parameter " + name);
  return *p;
}

std::vector<ad::Parameter*> ParameterStore::all() {
  std::vector<ad::Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const ad::Parameter*> ParameterStore::all() const {
  std::vector<const ad::Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Eigen::MatrixXd uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, const NoiseStream& noise,
                             std::uint64_t stream) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double u = noise.uniform(NoisePurpose::init, stream, static_cast<std::uint64_t>(i),
                                     static_cast<std::uint64_t>(j));
      m(i, j) = bound * (2.0 * u - 1.0);
    }
  }
  return m;
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string activation_name(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

Mlp::Mlp(ParameterStore& store, const std::string& prefix, std::vector<int> dims, Activation act,
         const NoiseStream& noise)
    : dims_(std::move(dims)), act_(act) {
  if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output dims");
  for (int d : dims_) {
    if (d < 1) throw std::invalid_argument("Mlp: dimensions must be positive");
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const std::string wname = prefix + ".w" + std::to_string(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    weights_.push_back(&store.add(wname, uniform_init(dims_[l], dims_[l + 1], bound, noise, name_hash(wname))));
    biases_.push_back(&store.add(prefix + ".b" + std::to_string(l), Eigen::MatrixXd::Zero(1, dims_[l + 1])));
  }
}

ad::Var Mlp::forward(ad::Tape& tape, const ad::Var& x) const {
  if (x.cols() != dims_.front()) throw std::invalid_argument("Mlp: input width mismatch");
  ad::Var h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = ad::add_row(ad::matmul(h, tape.parameter(*weights_[l])), tape.parameter(*biases_[l]));
    if (l + 1 < weights_.size()) h = act_ == Activation::tanh ? ad::tanh(h) : ad::relu(h);
  }
  return h;
}

void Adam::step(ParameterStore& store) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (ad::Parameter* p : store.all()) {
    auto& [m, v] = moments_[p->name];
    if (m.size() == 0) {
      m = Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols());
      v = Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols());
    }
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p->grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p->grad.cwiseAbs2();
    p->value.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
  }
}

double clip_gradients(ParameterStore& store, double max_norm) {
  double sq = 0.0;
  for (ad::Parameter* p : store.all()) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (ad::Parameter* p : store.all()) p->grad *= s;
  }
  return norm;
}

}  // namespace skgc
