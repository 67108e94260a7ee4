#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "redct/types.hpp"

namespace redct::trainer {

enum class TfWeighting { binary, tf, tf_sublinear };

struct FeaturizerConfig {
  /// Only "hashed_bow" exists today; kept so artifacts stay self-describing.
  std::string scheme = "hashed_bow";
  std::uint32_t dim = 1u << 18;
  int ngram_min = 1;
  int ngram_max = 2;
  bool lowercase = true;
  TfWeighting tf_weighting = TfWeighting::tf_sublinear;
  /// Adds the stance target's tokens as separately hashed "t:" features.
  bool include_target_prefix = false;
  bool l2_normalize = true;

  /// Throws ConfigError (dim must be a power of two >= 1024).
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static FeaturizerConfig from_json(const nlohmann::json& j);

  friend bool operator==(const FeaturizerConfig&, const FeaturizerConfig&) = default;
};

/// Sorted, duplicate-free sparse vector.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }
  bool empty() const { return index.empty(); }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

/// Splits on ASCII characters that are not letters or digits; bytes >= 0x80
/// stay inside tokens so UTF-8 text is never broken apart. Lowercasing, when
/// enabled, is ASCII only.
std::vector<std::string> tokenize(std::string_view text, bool lowercase);

/// The n-gram strings hashed for a document, before hashing. Word n-grams
/// are joined by a single space; target tokens are prefixed with "t:".
std::vector<std::string> feature_strings(const Document& doc, const FeaturizerConfig& cfg);

/// Bucket of a feature string: FNV-1a 64 of its UTF-8 bytes mod dim.
std::uint32_t feature_bucket(std::string_view feature, std::uint32_t dim);

SparseVector featurize(const Document& doc, const FeaturizerConfig& cfg);

}  // namespace redct::trainer
