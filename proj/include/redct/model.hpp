#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "redct/common.hpp"
#include "redct/featurizer.hpp"
#include "redct/types.hpp"

namespace redct::trainer {

/// Softmax regression over hashed features, the reference edge backend.
struct LinearModel {
  std::string task_id;
  std::string schema_hash;
  std::vector<std::string> class_names;
  FeaturizerConfig featurizer;
  /// Row-major, num_classes() x dim().
  std::vector<double> weights;
  std::vector<double> bias;

  static LinearModel zeros(const TaskSchema& schema, const FeaturizerConfig& featurizer);

  std::size_t num_classes() const { return bias.size(); }
  std::size_t dim() const { return featurizer.dim; }
  double weight(std::size_t k, std::size_t j) const { return weights[k * dim() + j]; }

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 0.1;
  double l2 = 1e-5;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  int repetitions = 5;

  void validate() const;
};

struct TrainingExample {
  SparseVector features;
  std::vector<double> target;
};

std::vector<double> softmax(std::span<const double> logits);

/// -sum_k target_k * log softmax(logits)_k, computed through log-sum-exp.
double soft_ce_loss(std::span<const double> logits, std::span<const double> target);

std::vector<double> logits(const LinearModel& model, const SparseVector& x);

struct Gradient {
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Mean soft cross-entropy over the batch plus (l2 / 2) * ||W||^2.
double objective(const LinearModel& model, std::span<const TrainingExample> batch, double l2);

/// Analytic gradient of objective(): X^T (softmax - target) / B + l2 * W.
Gradient gradient(const LinearModel& model, std::span<const TrainingExample> batch, double l2);

/// Raised when the loss turns non-finite during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

struct TrainResult {
  LinearModel model;
  /// Full-data objective after each epoch.
  std::vector<double> epoch_objective;
};

/// Mini-batch gradient descent from zero weights with a fixed learning
/// rate; batch order is reshuffled each epoch from `cfg.seed`.
TrainResult train(std::span<const TrainingExample> examples, const TrainConfig& cfg,
                  const TaskSchema& schema, const FeaturizerConfig& featurizer);

struct Prediction {
  ClassIndex label = 0;
  std::vector<double> probs;
};

Prediction predict(const LinearModel& model, const SparseVector& features);
/// Checks the schema binding, then featurizes and predicts.
Prediction predict(const LinearModel& model, const Document& doc, const TaskSchema& schema);

/// Throws ConfigError naming both schema ids when the model belongs to
/// another task schema.
void check_schema(const LinearModel& model, const TaskSchema& schema);

// Model artifact: see docs/model_format.md for the byte layout.
inline constexpr std::uint32_t kModelFormatVersion = 1;

class ModelFormatError : public DataError {
 public:
  using DataError::DataError;
};

std::string serialize_model(const LinearModel& model);
LinearModel deserialize_model(std::string_view bytes);
void export_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel import_model(const std::filesystem::path& path,
                         const std::optional<TaskSchema>& expected = std::nullopt);

}  // namespace redct::trainer
