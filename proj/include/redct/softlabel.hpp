#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "redct/types.hpp"

namespace redct::softlabel {

/// Logistic sigmoid 1 / (1 + e^-x).
double expit(double x);

/// What the sigmoid is applied to when weighting an LLM label.
///   probability      expit(p*), p* the predicted token's probability (default)
///   log_probability  expit(log p*); always <= 0.5, so for K = 2 the
///                    predicted class loses the argmax. Kept only for
///                    sensitivity analysis.
enum class WeightArgument { probability, log_probability };

std::string to_string(WeightArgument a);
WeightArgument weight_argument_from_string(const std::string& s);

/// Weight on the predicted class. With the default argument it is expit of
/// the predicted token's probability (clamped to [0, 1]), hence always
/// within [0.5, expit(1)].
double llm_label_weight(const LlmAnnotation& ann, WeightArgument arg = WeightArgument::probability);

/// Predicted class gets the weight, the remainder is split evenly over the
/// other classes. For K = 2 at weight exactly 0.5 the predicted class is
/// nudged up by 1e-9 so it stays the argmax.
SoftLabel soft_label_from_annotation(const LlmAnnotation& ann, std::size_t num_classes,
                                     WeightArgument arg = WeightArgument::probability);

/// One-hot on the predicted class (the no-intervention "base" target).
SoftLabel hard_label_from_annotation(const LlmAnnotation& ann, std::size_t num_classes);

SoftLabel soft_label_from_expert(ClassIndex class_index, std::size_t num_classes);

struct FusedExample {
  std::string doc_id;
  SoftLabel target;
  LabelSource source;
  /// Annotation confidence; 1.0 for expert labels.
  double confidence;

  friend bool operator==(const FusedExample&, const FusedExample&) = default;
};

enum class LlmTargets { hard, soft };

/// One example per document in dataset order; an expert label wins over the
/// LLM annotation. Throws DataError for documents with neither.
std::vector<FusedExample> fuse(const Dataset& ds, LlmTargets llm_targets = LlmTargets::soft,
                               WeightArgument arg = WeightArgument::probability);

// JSONL interchange: {"doc_id":..,"probs":[..],"source":"llm"|"expert","confidence":..}
std::string serialize_fused(const std::vector<FusedExample>& examples);
std::vector<FusedExample> parse_fused(const std::string& content);

}  // namespace redct::softlabel
