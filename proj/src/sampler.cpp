#include "redct/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "redct/common.hpp"

namespace redct::sampler {

std::string to_string(Strategy s) {
  return s == Strategy::random ? "random" : "confidence_informed";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "random") return Strategy::random;
  if (s == "confidence_informed") return Strategy::confidence_informed;
  throw ConfigError("unknown sampling strategy '" + s + "' (expected random or confidence_informed)");
}

namespace {

void check_inputs(const Dataset& ds, double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ConfigError("sampling fraction must lie in (0, 1], got " + std::to_string(p));
  }
  if (!ds.fully_annotated()) throw DataError("sampling requires an LLM-annotated dataset");
}

}  // namespace

nlohmann::ordered_json SamplingManifest::to_json(const TaskSchema& schema) const {
  nlohmann::ordered_json j;
  j["strategy"] = sampler::to_string(strategy);
  j["p"] = fraction;
  j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json();
  j["selected_doc_ids"] = selected_doc_ids;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [c, n] : per_class_counts) counts[schema.class_name(c)] = n;
  j["per_class_counts"] = counts;
  return j;
}

SamplingManifest SamplingManifest::from_json(const nlohmann::json& j, const TaskSchema& schema) {
  try {
    SamplingManifest m;
    m.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    m.fraction = j.at("p").get<double>();
    if (j.contains("seed") && !j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
    m.selected_doc_ids = j.at("selected_doc_ids").get<std::vector<std::string>>();
    for (const auto& [name, n] : j.at("per_class_counts").items()) {
      m.per_class_counts[schema.class_index_or_throw(name)] = n.get<std::size_t>();
    }
    std::size_t total = 0;
    for (const auto& [c, n] : m.per_class_counts) total += n;
    if (total != m.selected_doc_ids.size()) {
      throw DataError("sampling manifest: per-class counts do not sum to the selection size");
    }
    if (std::set<std::string>(m.selected_doc_ids.begin(), m.selected_doc_ids.end()).size() !=
        m.selected_doc_ids.size()) {
      throw DataError("sampling manifest: duplicate doc ids");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("sampling manifest: ") + e.what());
  }
}

SamplingManifest sample_random(const Dataset& ds, double p, std::uint64_t seed) {
  check_inputs(ds, p);
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  order.resize(std::min(n, ceil_fraction(p, n)));
  std::sort(order.begin(), order.end());

  SamplingManifest m;
  m.strategy = Strategy::random;
  m.fraction = p;
  m.seed = seed;
  for (auto i : order) {
    const auto& id = ds.documents()[i].doc_id;
    m.selected_doc_ids.push_back(id);
    ++m.per_class_counts[ds.annotation(id)->predicted_class];
  }
  return m;
}

SamplingManifest sample_confidence_informed(const Dataset& ds, double p) {
  check_inputs(ds, p);
  const std::size_t k = ds.schema().num_classes();
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[ds.annotation(ds.documents()[i].doc_id)->predicted_class].push_back(i);
  }

  SamplingManifest m;
  m.strategy = Strategy::confidence_informed;
  m.fraction = p;
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < k; ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    const auto take = std::min(members.size(), ceil_fraction(p, members.size()));
    // members is in dataset order, so a stable sort keeps earlier items first on ties.
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return ds.annotation(ds.documents()[a].doc_id)->confidence <
             ds.annotation(ds.documents()[b].doc_id)->confidence;
    });
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    m.per_class_counts[c] = take;
  }
  std::sort(chosen.begin(), chosen.end());
  for (auto i : chosen) m.selected_doc_ids.push_back(ds.documents()[i].doc_id);
  return m;
}

Dataset apply_expert_labels(const Dataset& ds, const SamplingManifest& manifest,
                            const std::map<std::string, ClassIndex>& labels) {
  const std::set<std::string> selected(manifest.selected_doc_ids.begin(),
                                       manifest.selected_doc_ids.end());
  for (const auto& [id, label] : labels) {
    if (!selected.count(id)) throw DataError("expert label for unselected document '" + id + "'");
    if (label >= ds.schema().num_classes()) {
      throw DataError("expert label for '" + id + "' is not a valid class index");
    }
  }
  Dataset out = ds;
  for (const auto& id : manifest.selected_doc_ids) {
    if (!out.expert_labels().count(id)) out.set_pending(id, true);
  }
  for (const auto& [id, label] : labels) out.set_expert_label(id, label);
  return out;
}

}  // namespace redct::sampler
