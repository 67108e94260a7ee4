#include "redct/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "redct/common.hpp"
#include "redct/confidence.hpp"

namespace redct::trainer {

LinearModel LinearModel::zeros(const TaskSchema& schema, const FeaturizerConfig& featurizer) {
  featurizer.validate();
  LinearModel m;
  m.task_id = schema.task_id();
  m.schema_hash = schema.schema_hash();
  m.class_names = schema.class_names();
  m.featurizer = featurizer;
  m.weights.assign(schema.num_classes() * featurizer.dim, 0.0);
  m.bias.assign(schema.num_classes(), 0.0);
  return m;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("training: epochs must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("training: learning_rate must be positive");
  if (!(l2 > 0.0)) throw ConfigError("training: l2 must be positive");
  if (batch_size < 1) throw ConfigError("training: batch_size must be positive");
  if (repetitions < 1) throw ConfigError("training: repetitions must be >= 1");
}

std::vector<double> softmax(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    p[k] = std::exp(z[k] - mx);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

double soft_ce_loss(std::span<const double> z, std::span<const double> target) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  double loss = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (target[k] != 0.0) loss -= target[k] * (z[k] - lse);
  }
  return loss;
}

std::vector<double> logits(const LinearModel& model, const SparseVector& x) {
  const std::size_t d = model.dim();
  std::vector<double> z = model.bias;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double* row = model.weights.data() + k * d;
    double s = 0.0;
    for (std::size_t n = 0; n < x.nnz(); ++n) s += row[x.index[n]] * x.value[n];
    z[k] += s;
  }
  return z;
}

double objective(const LinearModel& model, std::span<const TrainingExample> batch, double l2) {
  double loss = 0.0;
  for (const auto& ex : batch) loss += soft_ce_loss(logits(model, ex.features), ex.target);
  loss /= static_cast<double>(batch.size());
  double ss = 0.0;
  for (double w : model.weights) ss += w * w;
  return loss + 0.5 * l2 * ss;
}

Gradient gradient(const LinearModel& model, std::span<const TrainingExample> batch, double l2) {
  if (batch.empty()) throw DataError("gradient of an empty batch");
  const std::size_t k = model.num_classes();
  const std::size_t d = model.dim();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Gradient g;
  g.weights.resize(model.weights.size());
  for (std::size_t i = 0; i < g.weights.size(); ++i) g.weights[i] = l2 * model.weights[i];
  g.bias.assign(k, 0.0);
  for (const auto& ex : batch) {
    const auto p = softmax(logits(model, ex.features));
    for (std::size_t c = 0; c < k; ++c) {
      const double r = (p[c] - ex.target[c]) * inv_b;
      g.bias[c] += r;
      double* row = g.weights.data() + c * d;
      for (std::size_t n = 0; n < ex.features.nnz(); ++n) row[ex.features.index[n]] += r * ex.features.value[n];
    }
  }
  return g;
}

TrainResult train(std::span<const TrainingExample> examples, const TrainConfig& cfg,
                  const TaskSchema& schema, const FeaturizerConfig& featurizer) {
  cfg.validate();
  if (examples.empty()) throw DataError("training needs at least one example");
  const std::size_t k = schema.num_classes();
  const std::size_t d = featurizer.dim;
  for (const auto& ex : examples) {
    if (ex.target.size() != k) throw DataError("training example target has wrong class count");
    if (!ex.features.empty() && ex.features.index.back() >= d) {
      throw DataError("training example feature index exceeds featurizer dim");
    }
  }

  TrainResult result{LinearModel::zeros(schema, featurizer), {}};
  auto& model = result.model;
  // W is kept as scale * V so weight decay costs O(1) per step instead of O(K * D).
  std::vector<double> v(model.weights.size(), 0.0);
  double scale = 1.0;
  const double decay = 1.0 - cfg.learning_rate * cfg.l2;

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);
  std::vector<double> residual;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double step = cfg.learning_rate / static_cast<double>(end - start);
      residual.assign((end - start) * k, 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = examples[order[b]];
        std::vector<double> z = model.bias;
        for (std::size_t c = 0; c < k; ++c) {
          const double* row = v.data() + c * d;
          double s = 0.0;
          for (std::size_t n = 0; n < ex.features.nnz(); ++n) s += row[ex.features.index[n]] * ex.features.value[n];
          z[c] += scale * s;
        }
        const auto p = softmax(z);
        for (std::size_t c = 0; c < k; ++c) residual[(b - start) * k + c] = p[c] - ex.target[c];
      }
      scale *= decay;
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = examples[order[b]];
        for (std::size_t c = 0; c < k; ++c) {
          const double r = residual[(b - start) * k + c];
          model.bias[c] -= step * r;
          double* row = v.data() + c * d;
          const double coef = step * r / scale;
          for (std::size_t n = 0; n < ex.features.nnz(); ++n) row[ex.features.index[n]] -= coef * ex.features.value[n];
        }
      }
      if (scale < 1e-6) {
        for (double& x : v) x *= scale;
        scale = 1.0;
      }
    }
    for (std::size_t i = 0; i < v.size(); ++i) model.weights[i] = scale * v[i];
    const double obj = objective(model, examples, cfg.l2);
    if (!std::isfinite(obj)) {
      throw TrainingError("training diverged: objective is " + std::to_string(obj) +
                          " after epoch " + std::to_string(epoch + 1) +
                          " (learning_rate=" + std::to_string(cfg.learning_rate) + ")");
    }
    result.epoch_objective.push_back(obj);
  }
  return result;
}

void check_schema(const LinearModel& model, const TaskSchema& schema) {
  if (model.schema_hash != schema.schema_hash()) {
    throw ConfigError("model was trained for task '" + model.task_id + "' (schema " +
                      model.schema_hash + "), but task '" + schema.task_id() + "' has schema " +
                      schema.schema_hash());
  }
}

Prediction predict(const LinearModel& model, const SparseVector& features) {
  Prediction p;
  p.probs = softmax(logits(model, features));
  p.label = labeler::argmax(p.probs);
  return p;
}

Prediction predict(const LinearModel& model, const Document& doc, const TaskSchema& schema) {
  check_schema(model, schema);
  return predict(model, featurize(doc, model.featurizer));
}

}  // namespace redct::trainer
