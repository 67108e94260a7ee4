#include "redct/dataset_io.hpp"

#include <sstream>

#include "redct/common.hpp"

namespace redct {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kDatasetFormatVersion = 1;

std::string line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

ordered_json annotation_to_json(const LlmAnnotation& ann, const TaskSchema& schema) {
  ordered_json j;
  j["predicted"] = schema.class_name(ann.predicted_class);
  j["logprobs"] = ann.logprobs.per_class_logprob;
  j["confidence"] = ann.confidence;
  j["prompt_style"] = to_string(ann.prompt_style);
  j["raw_response"] = ann.raw_response;
  if (ann.rationale) j["rationale"] = *ann.rationale;
  if (ann.abstained) j["abstained"] = true;
  return j;
}

LlmAnnotation annotation_from_json(const json& j, const std::string& doc_id,
                                   const TaskSchema& schema) {
  LlmAnnotation ann;
  ann.doc_id = doc_id;
  ann.predicted_class = schema.class_index_or_throw(j.at("predicted").get<std::string>());
  ann.logprobs.per_class_logprob = j.at("logprobs").get<std::vector<double>>();
  if (ann.logprobs.per_class_logprob.size() != schema.num_classes()) {
    throw DataError("annotation logprobs length does not match class count");
  }
  ann.confidence = j.at("confidence").get<double>();
  ann.prompt_style = prompt_style_from_string(j.value("prompt_style", std::string("zero_shot")));
  ann.raw_response = j.value("raw_response", std::string());
  if (j.contains("rationale")) ann.rationale = j.at("rationale").get<std::string>();
  ann.abstained = j.value("abstained", false);
  return ann;
}

Dataset parse_dataset(const std::string& content, const TaskSchema& schema) {
  Dataset ds(schema);
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(line_error(lineno, std::string("malformed JSON: ") + e.what()));
    }
    if (!j.is_object()) throw DataError(line_error(lineno, "record is not a JSON object"));
    if (j.contains("redct_dataset")) {
      if (lineno != 1 && ds.size() > 0) {
        throw DataError(line_error(lineno, "dataset header must be the first record"));
      }
      if (j.at("redct_dataset") != kDatasetFormatVersion) {
        throw DataError(line_error(lineno, "unsupported dataset format version"));
      }
      if (j.contains("schema")) {
        const auto file_schema = TaskSchema::from_json(j.at("schema"));
        if (file_schema.schema_hash() != schema.schema_hash()) {
          throw ConfigError("dataset was written for task '" + file_schema.task_id() +
                            "' (schema " + file_schema.schema_hash() + "), expected '" +
                            schema.task_id() + "' (schema " + schema.schema_hash() + ")");
        }
      }
      continue;
    }
    try {
      Document doc;
      doc.doc_id = j.at("doc_id").get<std::string>();
      doc.text = j.at("text").get<std::string>();
      if (j.contains("target") && !j.at("target").is_null()) {
        doc.target = j.at("target").get<std::string>();
      }
      if (j.contains("gold_label") && !j.at("gold_label").is_null()) {
        const auto name = j.at("gold_label").get<std::string>();
        auto c = schema.class_index(name);
        if (!c) throw DataError("gold_label '" + name + "' out of range for task '" + schema.task_id() + "'");
        doc.gold_label = *c;
      }
      const auto id = doc.doc_id;
      ds.add_document(std::move(doc));
      if (j.contains("annotation")) ds.set_annotation(annotation_from_json(j.at("annotation"), id, schema));
      if (j.contains("expert_label")) {
        ds.set_expert_label(id, schema.class_index_or_throw(j.at("expert_label").get<std::string>()));
      }
      if (j.value("expert_pending", false)) ds.set_pending(id, true);
    } catch (const json::exception& e) {
      throw DataError(line_error(lineno, e.what()));
    } catch (const DataError& e) {
      throw DataError(line_error(lineno, e.what()));
    }
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const TaskSchema& schema) {
  if (!std::filesystem::exists(path)) throw IoError("dataset file not found: " + path.string());
  try {
    return parse_dataset(read_file(path), schema);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_dataset(const Dataset& ds) {
  const auto& schema = ds.schema();
  std::string out;
  ordered_json header;
  header["redct_dataset"] = kDatasetFormatVersion;
  header["schema"] = schema.to_json();
  out += header.dump();
  out.push_back('\n');
  for (const auto& doc : ds.documents()) {
    ordered_json j;
    j["doc_id"] = doc.doc_id;
    j["text"] = doc.text;
    if (doc.target) j["target"] = *doc.target;
    if (doc.gold_label) j["gold_label"] = schema.class_name(*doc.gold_label);
    if (const auto* ann = ds.annotation(doc.doc_id)) j["annotation"] = annotation_to_json(*ann, schema);
    if (auto it = ds.expert_labels().find(doc.doc_id); it != ds.expert_labels().end()) {
      j["expert_label"] = schema.class_name(it->second);
    }
    if (ds.expert_pending().count(doc.doc_id)) j["expert_pending"] = true;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_dataset(ds));
}

}  // namespace redct
