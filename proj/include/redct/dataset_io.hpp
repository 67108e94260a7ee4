#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "redct/types.hpp"

namespace redct {

// On-disk dataset format (JSONL, UTF-8, one record per line):
//
//   {"redct_dataset":1,"schema":{...}}                      optional header
//   {"doc_id":"d1","text":"...","target":"...","gold_label":"For",
//    "annotation":{...},"expert_label":"Against","expert_pending":true}
//
// Only doc_id and text are required on document lines. Class labels are
// written as class names; indices exist only in memory. A plain corpus
// without header or annotations is a valid input.

/// Reads a dataset; throws DataError with the 1-based line number for
/// malformed input and ConfigError when a header names another schema.
Dataset load_dataset(const std::filesystem::path& path, const TaskSchema& schema);

/// Parses dataset text directly (same rules as load_dataset).
Dataset parse_dataset(const std::string& content, const TaskSchema& schema);

/// Writes header plus documents in insertion order; output is
/// byte-identical for equal datasets.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
std::string serialize_dataset(const Dataset& ds);

nlohmann::ordered_json annotation_to_json(const LlmAnnotation& ann, const TaskSchema& schema);
LlmAnnotation annotation_from_json(const nlohmann::json& j, const std::string& doc_id,
                                   const TaskSchema& schema);

}  // namespace redct
