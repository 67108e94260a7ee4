#include "redct/softlabel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "redct/common.hpp"

namespace redct::softlabel {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string to_string(WeightArgument a) {
  return a == WeightArgument::probability ? "probability" : "log_probability";
}

WeightArgument weight_argument_from_string(const std::string& s) {
  if (s == "probability") return WeightArgument::probability;
  if (s == "log_probability" || s == "logprob") return WeightArgument::log_probability;
  throw ConfigError("unknown weight argument '" + s + "' (expected probability or log_probability)");
}

double llm_label_weight(const LlmAnnotation& ann, WeightArgument arg) {
  const double lp = std::min(ann.logprobs.per_class_logprob.at(ann.predicted_class), 0.0);
  if (arg == WeightArgument::log_probability) return expit(lp);
  return expit(std::clamp(std::exp(lp), 0.0, 1.0));
}

SoftLabel soft_label_from_annotation(const LlmAnnotation& ann, std::size_t num_classes, WeightArgument arg) {
  if (num_classes < 2 || ann.predicted_class >= num_classes) {
    throw DataError("soft label: predicted class out of range");
  }
  double w = llm_label_weight(ann, arg);
  if (num_classes == 2 && w == 0.5) w += 1e-9;
  const double rest = (1.0 - w) / static_cast<double>(num_classes - 1);
  std::vector<double> probs(num_classes, rest);
  probs[ann.predicted_class] = w;
  return SoftLabel(std::move(probs), LabelSource::llm);
}

SoftLabel hard_label_from_annotation(const LlmAnnotation& ann, std::size_t num_classes) {
  if (ann.predicted_class >= num_classes) throw DataError("hard label: predicted class out of range");
  std::vector<double> probs(num_classes, 0.0);
  probs[ann.predicted_class] = 1.0;
  return SoftLabel(std::move(probs), LabelSource::llm);
}

SoftLabel soft_label_from_expert(ClassIndex class_index, std::size_t num_classes) {
  if (class_index >= num_classes) {
    throw DataError("expert class index " + std::to_string(class_index) + " out of range for " +
                    std::to_string(num_classes) + " classes");
  }
  std::vector<double> probs(num_classes, 0.0);
  probs[class_index] = 1.0;
  return SoftLabel(std::move(probs), LabelSource::expert);
}

std::vector<FusedExample> fuse(const Dataset& ds, LlmTargets llm_targets, WeightArgument arg) {
  const std::size_t k = ds.schema().num_classes();
  std::vector<FusedExample> out;
  out.reserve(ds.size());
  for (const auto& doc : ds.documents()) {
    if (auto it = ds.expert_labels().find(doc.doc_id); it != ds.expert_labels().end()) {
      out.push_back({doc.doc_id, soft_label_from_expert(it->second, k), LabelSource::expert, 1.0});
    } else if (const auto* ann = ds.annotation(doc.doc_id)) {
      auto target = llm_targets == LlmTargets::soft ? soft_label_from_annotation(*ann, k, arg)
                                                    : hard_label_from_annotation(*ann, k);
      out.push_back({doc.doc_id, std::move(target), LabelSource::llm, ann->confidence});
    } else {
      throw DataError("document '" + doc.doc_id + "' has neither an LLM nor an expert label");
    }
  }
  return out;
}

std::string serialize_fused(const std::vector<FusedExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    nlohmann::ordered_json j;
    j["doc_id"] = ex.doc_id;
    j["probs"] = ex.target.probs();
    j["source"] = to_string(ex.source);
    j["confidence"] = ex.confidence;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<FusedExample> parse_fused(const std::string& content) {
  std::vector<FusedExample> out;
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto src = j.at("source").get<std::string>();
      if (src != "llm" && src != "expert") throw DataError("unknown source '" + src + "'");
      const auto source = src == "llm" ? LabelSource::llm : LabelSource::expert;
      out.push_back({j.at("doc_id").get<std::string>(),
                     SoftLabel(j.at("probs").get<std::vector<double>>(), source), source,
                     j.at("confidence").get<double>()});
    } catch (const std::exception& e) {
      throw DataError("fused examples line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace redct::softlabel
