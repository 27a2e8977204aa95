#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "skgc/autodiff.hpp"
#include "skgc/noise.hpp"

namespace skgc {

/// Owns named parameters with stable addresses, in registration order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  ad::Parameter& add(const std::string& name, Eigen::MatrixXd value);
  ad::Parameter& get(const std::string& name);
  const ad::Parameter& get(const std::string& name) const;
  ad::Parameter* find(const std::string& name);
  const ad::Parameter* find(const std::string& name) const;

  std::vector<ad::Parameter*> all();
  std::vector<const ad::Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<ad::Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Uniform(-bound, bound) entries from the init substream `stream`.
Eigen::MatrixXd uniform_init(Eigen::Index rows, Eigen::Index cols, double bound,
                             const NoiseStream& noise, std::uint64_t stream);

/// Stable 64-bit FNV-1a hash, used to key init substreams by parameter name.
std::uint64_t name_hash(const std::string& name);

enum class Activation { tanh, relu };
Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

/// Fully connected stack dims[0] -> dims[1] -> ... ; every layer but the last
/// is followed by the activation.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& prefix, std::vector<int> dims, Activation act,
      const NoiseStream& noise);

  ad::Var forward(ad::Tape& tape, const ad::Var& x) const;
  int in_dim() const { return dims_.front(); }
  int out_dim() const { return dims_.back(); }
  const std::vector<int>& dims() const { return dims_; }
  ad::Parameter& weight(std::size_t layer) const { return *weights_.at(layer); }
  ad::Parameter& bias(std::size_t layer) const { return *biases_.at(layer); }

 private:
  std::vector<int> dims_;
  Activation act_ = Activation::tanh;
  std::vector<ad::Parameter*> weights_;
  std::vector<ad::Parameter*> biases_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are keyed by parameter name.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(ParameterStore& store);
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::unordered_map<std::string, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> moments_;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm; returns the pre-clip norm.
double clip_gradients(ParameterStore& store, double max_norm);

}  // namespace skgc
