#include "redct/featurizer.hpp"

#include <algorithm>
#include <cmath>

#include "redct/common.hpp"

namespace redct::trainer {

namespace {

std::string to_string(TfWeighting w) {
  switch (w) {
    case TfWeighting::binary: return "binary";
    case TfWeighting::tf: return "tf";
    case TfWeighting::tf_sublinear: return "tf_sublinear";
  }
  return "tf_sublinear";
}

TfWeighting tf_from_string(const std::string& s) {
  if (s == "binary") return TfWeighting::binary;
  if (s == "tf") return TfWeighting::tf;
  if (s == "tf_sublinear") return TfWeighting::tf_sublinear;
  throw ConfigError("unknown tf_weighting '" + s + "'");
}

bool is_separator(unsigned char c) {
  if (c >= 0x80) return false;
  return !((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'));
}

}  // namespace

void FeaturizerConfig::validate() const {
  if (scheme != "hashed_bow") throw ConfigError("unknown featurizer scheme '" + scheme + "'");
  if (dim < 1024 || (dim & (dim - 1)) != 0) {
    throw ConfigError("featurizer dim must be a power of two >= 1024");
  }
  if (ngram_min < 1 || ngram_max < ngram_min) throw ConfigError("featurizer: invalid ngram_range");
}

nlohmann::ordered_json FeaturizerConfig::to_json() const {
  nlohmann::ordered_json j;
  j["scheme"] = scheme;
  j["dim"] = dim;
  j["ngram_range"] = {ngram_min, ngram_max};
  j["lowercase"] = lowercase;
  j["tf_weighting"] = to_string(tf_weighting);
  j["include_target_prefix"] = include_target_prefix;
  j["l2_normalize"] = l2_normalize;
  return j;
}

FeaturizerConfig FeaturizerConfig::from_json(const nlohmann::json& j) {
  FeaturizerConfig c;
  try {
    c.scheme = j.value("scheme", c.scheme);
    c.dim = j.value("dim", c.dim);
    if (j.contains("ngram_range")) {
      const auto r = j.at("ngram_range").get<std::vector<int>>();
      if (r.size() != 2) throw ConfigError("featurizer: ngram_range needs two entries");
      c.ngram_min = r[0];
      c.ngram_max = r[1];
    }
    c.lowercase = j.value("lowercase", c.lowercase);
    if (j.contains("tf_weighting")) c.tf_weighting = tf_from_string(j.at("tf_weighting").get<std::string>());
    c.include_target_prefix = j.value("include_target_prefix", c.include_target_prefix);
    c.l2_normalize = j.value("l2_normalize", c.l2_normalize);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("featurizer config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_separator(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur.push_back(lowercase && c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> feature_strings(const Document& doc, const FeaturizerConfig& cfg) {
  const auto tokens = tokenize(doc.text, cfg.lowercase);
  std::vector<std::string> out;
  for (int n = cfg.ngram_min; n <= cfg.ngram_max; ++n) {
    const auto len = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + len <= tokens.size(); ++i) {
      std::string gram = tokens[i];
      for (std::size_t j = 1; j < len; ++j) {
        gram.push_back(' ');
        gram += tokens[i + j];
      }
      out.push_back(std::move(gram));
    }
  }
  if (cfg.include_target_prefix && doc.target) {
    for (const auto& t : tokenize(*doc.target, cfg.lowercase)) out.push_back("t:" + t);
  }
  return out;
}

std::uint32_t feature_bucket(std::string_view feature, std::uint32_t dim) {
  return static_cast<std::uint32_t>(fnv1a64(feature) & (dim - 1));
}

SparseVector featurize(const Document& doc, const FeaturizerConfig& cfg) {
  std::vector<std::uint32_t> buckets;
  for (const auto& f : feature_strings(doc, cfg)) buckets.push_back(feature_bucket(f, cfg.dim));
  std::sort(buckets.begin(), buckets.end());

  SparseVector v;
  for (std::size_t i = 0; i < buckets.size();) {
    std::size_t j = i;
    while (j < buckets.size() && buckets[j] == buckets[i]) ++j;
    const double count = static_cast<double>(j - i);
    double w = count;
    if (cfg.tf_weighting == TfWeighting::binary) w = 1.0;
    if (cfg.tf_weighting == TfWeighting::tf_sublinear) w = 1.0 + std::log(count);
    v.index.push_back(buckets[i]);
    v.value.push_back(w);
    i = j;
  }
  if (cfg.l2_normalize && !v.empty()) {
    double ss = 0.0;
    for (double x : v.value) ss += x * x;
    const double norm = std::sqrt(ss);
    for (double& x : v.value) x /= norm;
  }
  return v;
}

}  // namespace redct::trainer
