#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "redct/backend.hpp"
#include "redct/experiment.hpp"
#include "redct/featurizer.hpp"
#include "redct/labeler.hpp"
#include "redct/model.hpp"
#include "redct/sampler.hpp"
#include "redct/types.hpp"

namespace redct::pipeline {

struct BackendSettings {
  enum class Kind { simulator, http };
  Kind kind = Kind::simulator;
  labeler::SimulatorConfig simulator;
  /// Route simulator answers through prompt rendering, parsing and the
  /// response cache instead of sampling annotations directly.
  bool simulator_via_prompts = false;
  labeler::HttpBackendConfig http;
};

struct LabelingSettings {
  int parallelism = 1;
  int retries = 3;
  int backoff_ms = 500;
  std::filesystem::path cache_dir;  // defaults to <run_root>/cache
};

struct SamplingSettings {
  sampler::Strategy strategy = sampler::Strategy::confidence_informed;
  double p = 0.10;
  std::uint64_t seed = 0;
};

struct TrainingSettings {
  trainer::TrainConfig train;
  trainer::FeaturizerConfig featurizer;
  /// Soft LLM targets (SL) instead of one-hot LLM labels.
  bool soft_labels = true;
};

struct EvalSettings {
  std::vector<eval::Setting> settings{eval::Setting::base, eval::Setting::SL, eval::Setting::RS,
                                      eval::Setting::CI, eval::Setting::CI_SL};
  std::vector<std::uint64_t> seeds;  // defaults to 0 .. repetitions-1
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  std::size_t baseline_trials = 200;
  std::size_t histogram_bins = 20;
  std::vector<double> sweep_p = eval::default_sweep_fractions();
  /// Concurrent (setting, seed) cells in matrix and sweep runs.
  int parallelism = 1;
};

struct AnnotationSettings {
  int lease_seconds = 600;
  bool reveal_llm_label = false;
  std::filesystem::path ui_dir;
};

struct PipelineConfig {
  std::filesystem::path source;  // the config file itself
  std::filesystem::path run_root;
  TaskSchema schema;
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> template_path;
  BackendSettings backend;
  LabelingSettings labeling;
  SamplingSettings sampling;
  TrainingSettings training;
  EvalSettings eval;
  AnnotationSettings annotation;
  /// Parsed file, used for stage fingerprints.
  nlohmann::json raw;

  std::vector<std::uint64_t> training_seeds() const;
  eval::MatrixConfig matrix_config() const;
};

/// Parses and validates a JSON config file. Relative paths resolve against
/// the file's directory. Throws ConfigError.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);

}  // namespace redct::pipeline
