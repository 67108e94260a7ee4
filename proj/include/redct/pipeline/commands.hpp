#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "redct/experiment.hpp"
#include "redct/pipeline/config.hpp"
#include "redct/pipeline/run_store.hpp"
#include "redct/sampler.hpp"

namespace redct::pipeline {

// Run directory layout (relative to <run_root>/<run_id>):
//   manifest.json            stage status, fingerprints, outputs
//   annotated.jsonl          corpus with LLM annotations
//   split.json               train/test doc ids
//   sampling_manifest.json
//   annotation_journal.jsonl
//   expert_labels.json
//   fused.jsonl              training targets for the train split
//   models/model_seed_<s>.bin
//   eval_report.json, confidence_histogram.csv, matrix.json
//   sweep.json, sweep.csv

/// What a stage command did.
struct StageOutcome {
  bool skipped = false;  // already up to date, nothing written
  std::string summary;
};

struct LabelOptions {
  std::optional<int> parallelism;
};
StageOutcome cmd_label(const PipelineConfig& cfg, const std::string& run_id, const LabelOptions& opts = {});

struct SampleOptions {
  std::optional<sampler::Strategy> strategy;
  std::optional<double> p;
  std::optional<std::uint64_t> seed;
};
StageOutcome cmd_sample(const PipelineConfig& cfg, const std::string& run_id, const SampleOptions& opts = {});

struct AnnotateOptions {
  enum class Mode { serve, from_gold, import_file };
  Mode mode = Mode::serve;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> labels_file;
  std::optional<bool> reveal_llm_label;
  /// Called with the bound port once the service listens.
  std::function<void(int)> on_listening;
};
StageOutcome cmd_annotate(const PipelineConfig& cfg, const std::string& run_id, const AnnotateOptions& opts);

struct TrainOptions {
  std::vector<std::uint64_t> seeds;  // empty: config seeds
};
/// Fuses expert and LLM labels, then trains one model per seed.
StageOutcome cmd_train(const PipelineConfig& cfg, const std::string& run_id, const TrainOptions& opts = {});

struct EvalOptions {
  /// Also run the full oracle-expert settings matrix.
  bool matrix = false;
};
StageOutcome cmd_eval(const PipelineConfig& cfg, const std::string& run_id, const EvalOptions& opts = {});

struct ExportOptions {
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;  // default: first trained seed
};
StageOutcome cmd_export(const PipelineConfig& cfg, const std::string& run_id, const ExportOptions& opts);

struct InferOptions {
  std::filesystem::path model;
  std::filesystem::path input;
  std::filesystem::path output;
  /// When set, the model must belong to this schema.
  std::optional<TaskSchema> schema;
};
/// Edge inference: reads only local files, never opens a socket.
StageOutcome cmd_infer(const InferOptions& opts);

struct SweepOptions {
  std::vector<double> p_values;  // empty: config sweep_p
  std::vector<eval::Setting> settings;  // empty: config settings
  /// Soft-label weight reading; default expit(probability).
  std::optional<softlabel::WeightArgument> weight_argument;
};
StageOutcome cmd_sweep(const PipelineConfig& cfg, const std::string& run_id, const SweepOptions& opts = {});

}  // namespace redct::pipeline
