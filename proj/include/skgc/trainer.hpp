#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skgc/checkpoint.hpp"
#include "skgc/config.hpp"
#include "skgc/evaluator.hpp"
#include "skgc/kgstore.hpp"
#include "skgc/model.hpp"
#include "skgc/nn.hpp"
#include "skgc/objective.hpp"

namespace skgc {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::string data_path;
  bool descriptions = true;
  bool strict = false;

  ModelConfig model;
  ObjectiveConfig objective;

  double learning_rate = 1e-3;
  int epochs = 25;
  int batch_size = 256;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Max global gradient norm; unset disables clipping.
  std::optional<double> grad_clip;
  /// Validate every n epochs (0 disables validation).
  int eval_every = 1;
  /// Validation triples per evaluation (0 = whole split).
  std::size_t valid_limit = 0;
  int threads = 0;

  void validate() const;
  Config to_config() const;
  /// Missing keys take defaults; unknown keys are rejected.
  static TrainConfig from_config(const Config& c);
};

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string doc;
};
/// Every recognised key with its default, in documentation order.
const std::vector<ConfigKey>& config_schema();

/// Zeroes gradients, runs the batch forward and backward passes and checks
/// that the loss and every gradient block are finite.
ElboBreakdown gradients(Model& model, const Batch& batch, const ObjectiveConfig& cfg, const NoiseStream& noise,
                        std::uint64_t step);

/// Throws NonFiniteError naming the first parameter block with a NaN/Inf gradient.
void check_finite_gradients(const ParameterStore& store);

struct EpochRecord {
  int epoch = 0;
  std::size_t steps = 0;
  /// Means over the epoch's steps.
  ElboBreakdown train;
  /// Completion loss per query on the validation split, eval-mode latents.
  double valid_comp = 0.0;
  bool validated = false;
  Metrics valid;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_valid_mrr = -1.0;
  std::size_t total_steps = 0;
};

struct TrainOptions {
  /// When set: checkpoints/{best,last}.ckpt, logs/metrics.jsonl and config.resolved.cfg are written here.
  std::filesystem::path run_dir;
  /// Restore the best-validation parameters into the model when training ends.
  bool restore_best = true;
  std::function<void(const EpochRecord&)> on_epoch;
};

std::unique_ptr<Model> make_model(const KnowledgeGraph& kg, const TrainConfig& cfg);

TrainResult train(const KnowledgeGraph& kg, const TrainConfig& cfg, Model& model, const TrainOptions& options = {});

/// Identical pipeline with the latent head replaced.
TrainResult ablation_train(const KnowledgeGraph& kg, TrainConfig cfg, HeadKind head, std::unique_ptr<Model>& model,
                           const TrainOptions& options = {});

/// Mean completion loss per distinct query over a split, eval-mode latents, batches of batch_size pairs.
double validation_completion_loss(const Model& model, const KnowledgeGraph& kg, Split split,
                                  const ObjectiveConfig& cfg, int batch_size, std::size_t limit = 0);

std::string checkpoint_info(const TrainConfig& cfg, int epoch, double valid_mrr);
void save_model(const std::filesystem::path& path, const Model& model, const TrainConfig& cfg, int epoch,
                double valid_mrr);

struct LoadedModel {
  TrainConfig config;
  std::unique_ptr<KnowledgeGraph> kg;
  std::unique_ptr<Model> model;
};
/// Reads a checkpoint, loads the dataset named by its config (or `data_override`) and restores the parameters.
LoadedModel load_model(const std::filesystem::path& checkpoint, const std::string& data_override = "");

}  // namespace skgc
