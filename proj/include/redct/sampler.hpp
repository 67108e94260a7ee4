#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "redct/types.hpp"

namespace redct::sampler {

enum class Strategy { random, confidence_informed };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// Which documents go to the experts, and why.
struct SamplingManifest {
  Strategy strategy = Strategy::random;
  double fraction = 0.0;
  /// Selected ids in dataset order.
  std::vector<std::string> selected_doc_ids;
  /// Keyed by LLM-predicted class.
  std::map<ClassIndex, std::size_t> per_class_counts;
  std::optional<std::uint64_t> seed;

  nlohmann::ordered_json to_json(const TaskSchema& schema) const;
  static SamplingManifest from_json(const nlohmann::json& j, const TaskSchema& schema);

  friend bool operator==(const SamplingManifest&, const SamplingManifest&) = default;
};

/// ceil(p * N) documents uniformly without replacement.
SamplingManifest sample_random(const Dataset& ds, double p, std::uint64_t seed);

/// Per LLM-predicted class c with n_c items, the ceil(p * n_c) items of
/// lowest confidence. Confidence ties resolve to the earlier document.
SamplingManifest sample_confidence_informed(const Dataset& ds, double p);

/// Records expert labels for manifest items; selected items without a
/// label stay pending. Throws DataError for unselected ids or bad classes.
Dataset apply_expert_labels(const Dataset& ds, const SamplingManifest& manifest,
                            const std::map<std::string, ClassIndex>& labels);

}  // namespace redct::sampler
