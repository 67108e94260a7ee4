#include "redct/synthetic.hpp"

#include <array>
#include <cstdio>

#include "redct/common.hpp"

namespace redct::eval {

namespace {

constexpr std::array<const char*, 8> kNames = {"alpha", "beta",  "gamma", "delta",
                                               "epsilon", "zeta", "eta",   "theta"};

std::string capitalized(std::string s) {
  s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

TaskSchema synthetic_schema(std::size_t num_classes) {
  if (num_classes < 2 || num_classes > kNames.size()) {
    throw ConfigError("synthetic task supports 2 to 8 classes");
  }
  std::vector<std::string> names;
  std::vector<std::string> tokens;
  for (std::size_t c = 0; c < num_classes; ++c) {
    names.emplace_back(kNames[c]);
    tokens.push_back(capitalized(kNames[c]));
  }
  return TaskSchema("synthetic", names, tokens, PromptStyle::zero_shot, false);
}

Dataset make_synthetic_task(const SyntheticTaskConfig& cfg) {
  if (!(cfg.signal >= 0.0 && cfg.signal <= 1.0)) throw ConfigError("synthetic: signal must lie in [0, 1]");
  if (cfg.min_len < 1 || cfg.max_len < cfg.min_len) throw ConfigError("synthetic: bad length range");
  Dataset ds(synthetic_schema(cfg.num_classes));
  Rng rng(cfg.seed);

  std::vector<ClassIndex> labels(cfg.num_docs);
  for (std::size_t i = 0; i < cfg.num_docs; ++i) labels[i] = i % cfg.num_classes;
  rng.shuffle(labels);

  char id[32];
  for (std::size_t i = 0; i < cfg.num_docs; ++i) {
    const auto label = labels[i];
    const auto len = cfg.min_len + static_cast<std::size_t>(rng.below(cfg.max_len - cfg.min_len + 1));
    std::string text;
    for (std::size_t t = 0; t < len; ++t) {
      if (!text.empty()) text.push_back(' ');
      if (rng.uniform() < cfg.signal) {
        text += kNames[label];
        text += std::to_string(rng.below(cfg.class_vocab));
      } else {
        text += "w" + std::to_string(rng.below(cfg.shared_vocab));
      }
    }
    std::snprintf(id, sizeof(id), "s%05zu", i);
    ds.add_document(Document{id, std::move(text), std::nullopt, label});
  }
  return ds;
}

}  // namespace redct::eval
