#include "redct/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "redct/common.hpp"

namespace redct {

std::string to_string(PromptStyle s) {
  return s == PromptStyle::zero_shot ? "zero_shot" : "zero_shot_cot";
}

PromptStyle prompt_style_from_string(const std::string& s) {
  if (s == "zero_shot") return PromptStyle::zero_shot;
  if (s == "zero_shot_cot") return PromptStyle::zero_shot_cot;
  throw ConfigError("unknown prompt_style '" + s + "' (expected zero_shot or zero_shot_cot)");
}

std::string to_string(LabelSource s) { return s == LabelSource::llm ? "llm" : "expert"; }

std::string label_match_key(std::string_view answer) {
  std::size_t i = 0;
  while (i < answer.size()) {
    const auto c = static_cast<unsigned char>(answer[i]);
    if (std::isspace(c) || std::ispunct(c)) {
      ++i;
    } else {
      break;
    }
  }
  std::string key;
  for (; i < answer.size(); ++i) {
    const auto c = static_cast<unsigned char>(answer[i]);
    if (std::isspace(c) || std::ispunct(c)) break;
    key.push_back(static_cast<char>(std::tolower(c)));
  }
  return key;
}

TaskSchema::TaskSchema(std::string task_id, std::vector<std::string> class_names,
                       std::vector<std::string> label_tokens, PromptStyle style,
                       bool requires_target)
    : task_id_(std::move(task_id)),
      class_names_(std::move(class_names)),
      label_tokens_(std::move(label_tokens)),
      prompt_style_(style),
      requires_target_(requires_target) {
  if (task_id_.empty()) throw ConfigError("task schema: task_id is empty");
  if (class_names_.size() < 2) {
    throw ConfigError("task schema '" + task_id_ + "': at least 2 classes required");
  }
  if (label_tokens_.size() != class_names_.size()) {
    throw ConfigError("task schema '" + task_id_ + "': every class needs exactly one label token");
  }
  for (std::size_t i = 0; i < class_names_.size(); ++i) {
    for (std::size_t j = i + 1; j < class_names_.size(); ++j) {
      if (class_names_[i] == class_names_[j]) {
        throw ConfigError("task schema '" + task_id_ + "': duplicate class name '" +
                          class_names_[i] + "'");
      }
      if (label_tokens_[i] == label_tokens_[j]) {
        throw ConfigError("task schema '" + task_id_ + "': duplicate label token '" +
                          label_tokens_[i] + "'");
      }
    }
  }
  for (const auto& tok : label_tokens_) {
    auto key = label_match_key(tok);
    if (key.empty()) {
      throw ConfigError("task schema '" + task_id_ + "': label token '" + tok +
                        "' has no matchable word");
    }
    if (std::find(match_keys_.begin(), match_keys_.end(), key) != match_keys_.end()) {
      throw ConfigError("task schema '" + task_id_ + "': label tokens share first token '" +
                        key + "'");
    }
    match_keys_.push_back(std::move(key));
  }
}

TaskSchema TaskSchema::from_json(const nlohmann::json& j) {
  try {
    auto task_id = j.at("task_id").get<std::string>();
    auto names = j.at("class_names").get<std::vector<std::string>>();
    std::vector<std::string> tokens;
    const auto& lt = j.at("label_tokens");
    if (!lt.is_object()) throw ConfigError("task schema: label_tokens must map class name to token");
    for (const auto& name : names) {
      if (!lt.contains(name)) {
        throw ConfigError("task schema '" + task_id + "': no label token for class '" + name + "'");
      }
      tokens.push_back(lt.at(name).get<std::string>());
    }
    if (lt.size() != names.size()) {
      throw ConfigError("task schema '" + task_id + "': label_tokens names unknown classes");
    }
    const auto style = prompt_style_from_string(j.value("prompt_style", std::string("zero_shot")));
    const bool requires_target = j.value("requires_target", task_id == "stance");
    return TaskSchema(std::move(task_id), std::move(names), std::move(tokens), style,
                      requires_target);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("task schema: ") + e.what());
  }
}

nlohmann::json TaskSchema::to_json() const {
  nlohmann::json lt = nlohmann::json::object();
  for (std::size_t i = 0; i < class_names_.size(); ++i) lt[class_names_[i]] = label_tokens_[i];
  return {{"task_id", task_id_},
          {"class_names", class_names_},
          {"label_tokens", lt},
          {"prompt_style", to_string(prompt_style_)},
          {"requires_target", requires_target_}};
}

std::optional<ClassIndex> TaskSchema::class_index(std::string_view name) const {
  for (std::size_t i = 0; i < class_names_.size(); ++i) {
    if (class_names_[i] == name) return i;
  }
  return std::nullopt;
}

ClassIndex TaskSchema::class_index_or_throw(std::string_view name) const {
  if (auto c = class_index(name)) return *c;
  throw DataError("unknown class '" + std::string(name) + "' for task '" + task_id_ + "'");
}

std::string TaskSchema::schema_hash() const {
  std::string canon = task_id_;
  canon.push_back('\x1f');
  for (std::size_t i = 0; i < class_names_.size(); ++i) {
    canon += class_names_[i];
    canon.push_back('\x1e');
    canon += label_tokens_[i];
    canon.push_back('\x1f');
  }
  return to_hex(fnv1a64(canon));
}

TaskSchema TaskSchema::with_prompt_style(PromptStyle s) const {
  TaskSchema copy = *this;
  copy.prompt_style_ = s;
  return copy;
}

SoftLabel::SoftLabel(std::vector<double> probs, LabelSource source)
    : probs_(std::move(probs)), source_(source) {
  if (probs_.size() < 2) throw DataError("soft label needs at least 2 classes");
  double sum = 0.0;
  std::size_t ones = 0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DataError("soft label entries must be finite and >= 0");
    sum += p;
    if (p == 1.0) ++ones;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("soft label does not sum to 1");
  if (source_ == LabelSource::expert && ones != 1) {
    throw DataError("expert soft label must be one-hot");
  }
}

void Dataset::add_document(Document doc) {
  if (doc.doc_id.empty()) throw DataError("document with empty doc_id");
  if (doc.text.empty()) throw DataError("document '" + doc.doc_id + "' has empty text");
  if (index_.count(doc.doc_id)) throw DataError("duplicate doc_id '" + doc.doc_id + "'");
  if (doc.gold_label && *doc.gold_label >= schema_.num_classes()) {
    throw DataError("document '" + doc.doc_id + "': gold_label out of range");
  }
  if (schema_.requires_target() && (!doc.target || doc.target->empty())) {
    throw DataError("document '" + doc.doc_id + "': task '" + schema_.task_id() +
                    "' requires a target");
  }
  index_.emplace(doc.doc_id, documents_.size());
  documents_.push_back(std::move(doc));
}

const Document* Dataset::find(const std::string& doc_id) const {
  auto it = index_.find(doc_id);
  return it == index_.end() ? nullptr : &documents_[it->second];
}

std::optional<std::size_t> Dataset::index_of(const std::string& doc_id) const {
  auto it = index_.find(doc_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Dataset::require_known(const std::string& doc_id) const {
  if (!index_.count(doc_id)) throw DataError("unknown doc_id '" + doc_id + "'");
}

const LlmAnnotation* Dataset::annotation(const std::string& doc_id) const {
  auto it = annotations_.find(doc_id);
  return it == annotations_.end() ? nullptr : &it->second;
}

bool Dataset::fully_annotated() const {
  return std::all_of(documents_.begin(), documents_.end(),
                     [&](const Document& d) { return annotations_.count(d.doc_id) > 0; });
}

void Dataset::set_annotation(LlmAnnotation ann) {
  require_known(ann.doc_id);
  if (ann.logprobs.per_class_logprob.size() != schema_.num_classes() ||
      ann.predicted_class >= schema_.num_classes()) {
    throw DataError("annotation for '" + ann.doc_id + "' does not match the class count");
  }
  auto id = ann.doc_id;
  annotations_.insert_or_assign(std::move(id), std::move(ann));
}

void Dataset::set_expert_label(const std::string& doc_id, ClassIndex label) {
  require_known(doc_id);
  if (label >= schema_.num_classes()) {
    throw DataError("expert label for '" + doc_id + "' out of range");
  }
  expert_labels_[doc_id] = label;
  expert_pending_.erase(doc_id);
}

void Dataset::set_pending(const std::string& doc_id, bool pending) {
  require_known(doc_id);
  if (pending) {
    expert_pending_.insert(doc_id);
  } else {
    expert_pending_.erase(doc_id);
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  auto sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  Dataset out(schema_);
  for (std::size_t i : sorted) {
    const auto& doc = documents_.at(i);
    out.index_.emplace(doc.doc_id, out.documents_.size());
    out.documents_.push_back(doc);
    if (auto it = annotations_.find(doc.doc_id); it != annotations_.end()) {
      out.annotations_.emplace(it->first, it->second);
    }
    if (auto it = expert_labels_.find(doc.doc_id); it != expert_labels_.end()) {
      out.expert_labels_.emplace(it->first, it->second);
    }
    if (expert_pending_.count(doc.doc_id)) out.expert_pending_.insert(doc.doc_id);
  }
  return out;
}

}  // namespace redct
