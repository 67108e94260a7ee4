#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace redct {

using ClassIndex = std::size_t;

enum class PromptStyle { zero_shot, zero_shot_cot };

std::string to_string(PromptStyle s);
PromptStyle prompt_style_from_string(const std::string& s);

/// Matching key of a label token: the first word of the answer string,
/// lowercased, after leading whitespace and punctuation are stripped.
/// "  'Misinformation'" -> "misinformation".
std::string label_match_key(std::string_view answer);

class TaskSchema {
 public:
  TaskSchema() = default;
  /// Validates every invariant; throws ConfigError.
  TaskSchema(std::string task_id, std::vector<std::string> class_names,
             std::vector<std::string> label_tokens, PromptStyle style,
             bool requires_target);

  static TaskSchema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const std::string& task_id() const { return task_id_; }
  std::size_t num_classes() const { return class_names_.size(); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::string& class_name(ClassIndex c) const { return class_names_.at(c); }
  /// Canonical answer string per class, aligned with class_names().
  const std::vector<std::string>& label_tokens() const { return label_tokens_; }
  const std::vector<std::string>& match_keys() const { return match_keys_; }
  PromptStyle prompt_style() const { return prompt_style_; }
  bool requires_target() const { return requires_target_; }

  std::optional<ClassIndex> class_index(std::string_view name) const;
  ClassIndex class_index_or_throw(std::string_view name) const;

  /// Stable identifier binding artifacts (models, datasets) to this schema.
  /// Covers task id, class names and label tokens; not the prompt style.
  std::string schema_hash() const;

  TaskSchema with_prompt_style(PromptStyle s) const;

  friend bool operator==(const TaskSchema&, const TaskSchema&) = default;

 private:
  std::string task_id_;
  std::vector<std::string> class_names_;
  std::vector<std::string> label_tokens_;
  std::vector<std::string> match_keys_;
  PromptStyle prompt_style_ = PromptStyle::zero_shot;
  bool requires_target_ = false;
};

struct Document {
  std::string doc_id;
  std::string text;
  std::optional<std::string> target;
  std::optional<ClassIndex> gold_label;

  friend bool operator==(const Document&, const Document&) = default;
};

enum class LabelSource { llm, expert };

std::string to_string(LabelSource s);

/// Probability vector over the task classes.
class SoftLabel {
 public:
  /// Throws DataError unless probs is a distribution (sum 1 within 1e-9,
  /// entries >= 0) and, for expert labels, one-hot.
  SoftLabel(std::vector<double> probs, LabelSource source);

  const std::vector<double>& probs() const { return probs_; }
  LabelSource source() const { return source_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }

  friend bool operator==(const SoftLabel&, const SoftLabel&) = default;

 private:
  std::vector<double> probs_;
  LabelSource source_;
};

struct LabelTokenLogProbs {
  std::vector<double> per_class_logprob;

  friend bool operator==(const LabelTokenLogProbs&, const LabelTokenLogProbs&) = default;
};

struct LlmAnnotation {
  std::string doc_id;
  ClassIndex predicted_class = 0;
  LabelTokenLogProbs logprobs;
  double confidence = 0.0;
  PromptStyle prompt_style = PromptStyle::zero_shot;
  std::string raw_response;
  std::optional<std::string> rationale;
  /// Set for the uniform fallback emitted when no answer could be parsed
  /// or the backend kept failing.
  bool abstained = false;

  friend bool operator==(const LlmAnnotation&, const LlmAnnotation&) = default;
};

/// Immutable-by-convention container; transformations return new values.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(TaskSchema schema) : schema_(std::move(schema)) {}

  const TaskSchema& schema() const { return schema_; }
  const std::vector<Document>& documents() const { return documents_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }

  /// Appends a document after validating it against the schema and the
  /// doc_id uniqueness invariant.
  void add_document(Document doc);

  const Document* find(const std::string& doc_id) const;
  std::optional<std::size_t> index_of(const std::string& doc_id) const;

  const std::unordered_map<std::string, LlmAnnotation>& annotations() const {
    return annotations_;
  }
  const LlmAnnotation* annotation(const std::string& doc_id) const;
  bool fully_annotated() const;
  void set_annotation(LlmAnnotation ann);

  const std::map<std::string, ClassIndex>& expert_labels() const { return expert_labels_; }
  void set_expert_label(const std::string& doc_id, ClassIndex label);

  /// Items routed to experts that have not been labeled yet.
  const std::set<std::string>& expert_pending() const { return expert_pending_; }
  void set_pending(const std::string& doc_id, bool pending);

  /// Subset in original order, carrying the annotations and expert labels
  /// of the retained documents.
  Dataset subset(const std::vector<std::size_t>& indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  void require_known(const std::string& doc_id) const;

  TaskSchema schema_;
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, LlmAnnotation> annotations_;
  std::map<std::string, ClassIndex> expert_labels_;
  std::set<std::string> expert_pending_;
};

}  // namespace redct
