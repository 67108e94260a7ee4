#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "redct/featurizer.hpp"
#include "redct/metrics.hpp"
#include "redct/model.hpp"
#include "redct/softlabel.hpp"
#include "redct/types.hpp"

namespace redct::eval {

/// Intervention variants of the edge classifier.
///   base   hard LLM labels
///   SL     soft LLM labels
///   RS     random expert sample, hard LLM labels elsewhere
///   CI     confidence-informed expert sample, hard LLM labels elsewhere
///   CI_SL  confidence-informed expert sample, soft LLM labels elsewhere
enum class Setting { base, SL, RS, CI, CI_SL };

std::string to_string(Setting s);
Setting setting_from_string(const std::string& s);
/// "Base", "SL", "RS 10%", "CI 10%", "CI SL 10%".
std::string display_name(Setting s, double p);
bool uses_experts(Setting s);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

/// Deterministic split: ceil(test_fraction * N) documents (chosen by a
/// seeded shuffle) form the test set; both parts keep dataset order.
TrainTestSplit split_train_test(const Dataset& ds, double test_fraction, std::uint64_t seed);

struct MatrixConfig {
  std::vector<Setting> settings{Setting::base, Setting::SL, Setting::RS, Setting::CI, Setting::CI_SL};
  double p = 0.10;
  /// One repetition per seed: seeds the random sample and the trainer.
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  trainer::TrainConfig train;
  trainer::FeaturizerConfig featurizer;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  std::size_t baseline_trials = 200;
  int parallelism = 1;
  /// Soft-label weight reading used by SL and CI_SL.
  softlabel::WeightArgument weight_argument = softlabel::WeightArgument::probability;

  void validate() const;
};

struct SettingResult {
  Setting setting;
  std::vector<double> f1_per_seed;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t expert_labels = 0;
};

struct MatrixResult {
  std::string task_id;
  double p = 0.0;
  std::vector<std::uint64_t> seeds;
  /// Weighted F1 of the LLM's own labels on the test split.
  double llm_f1 = 0.0;
  double random_f1 = 0.0;
  std::size_t num_train = 0;
  std::size_t num_test = 0;
  /// Expert labels were taken from gold labels.
  bool oracle_expert = true;
  softlabel::WeightArgument weight_argument = softlabel::WeightArgument::probability;
  std::vector<SettingResult> settings;

  const SettingResult& at(Setting s) const;
  nlohmann::ordered_json to_json() const;
  /// Rows are settings, columns are metrics.
  std::string to_text() const;
};

/// Runs every (setting, seed) cell: sample, expert-label from gold, fuse,
/// train, evaluate on the held-out split. Requires an annotated dataset in
/// which every document has a gold label.
MatrixResult run_matrix(const Dataset& annotated, const MatrixConfig& cfg);

/// Pre-split variant; `train` must be annotated, `test` needs gold labels
/// and annotations (for the LLM reference score).
MatrixResult run_matrix(const Dataset& train, const Dataset& test, const MatrixConfig& cfg);

struct SweepResult {
  std::vector<double> p_values;
  std::vector<MatrixResult> points;
  double llm_f1 = 0.0;
  softlabel::WeightArgument weight_argument = softlabel::WeightArgument::probability;

  nlohmann::ordered_json to_json() const;
  /// p,setting,mean_f1,sd_f1,llm_f1
  std::string to_csv() const;
  std::string to_text() const;
};

/// Repeats the matrix across expert fractions (F1 as a function of p).
SweepResult run_sweep(const Dataset& annotated, const std::vector<double>& p_values,
                      MatrixConfig cfg);

/// Default fractions for the expert-label sweep.
std::vector<double> default_sweep_fractions();

}  // namespace redct::eval
