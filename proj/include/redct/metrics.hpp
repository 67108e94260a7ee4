#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "redct/types.hpp"

namespace redct::eval {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  std::vector<ClassMetrics> per_class;
  /// Support-weighted mean of per-class F1 (0/0 counts as 0).
  double weighted_f1 = 0.0;
  /// confusion[gold][pred]
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t num_evaluated = 0;
  std::size_t repetitions = 1;
  double mean_weighted_f1 = 0.0;
  double sd_weighted_f1 = 0.0;

  nlohmann::ordered_json to_json(const std::vector<std::string>& class_names) const;
};

EvalReport weighted_f1(std::span<const ClassIndex> gold, std::span<const ClassIndex> pred,
                       std::size_t num_classes);

/// Folds single-run reports into one whose mean/sd describe the spread of
/// weighted F1; per-class fields and the confusion matrix are summed over runs.
EvalReport aggregate(std::span<const EvalReport> runs);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1); 0 for one value
};

MeanSd mean_sd(std::span<const double> values);

struct BaselineResult {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t trials = 0;
};

/// Mean weighted F1 of predictions drawn uniformly over the classes.
BaselineResult random_baseline(std::span<const ClassIndex> gold, std::size_t num_classes,
                               std::uint64_t seed, std::size_t trials);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t m = 0;
};

/// Two-sample Kolmogorov-Smirnov test. D is exact (merge scan over the
/// sorted samples); the p-value uses the asymptotic Kolmogorov distribution
/// with effective size nm/(n+m) and the (sqrt(ne) + 0.12 + 0.11/sqrt(ne))
/// small-sample correction.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// 2 * sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lambda^2), clamped to [0, 1].
double kolmogorov_survival(double lambda);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t correct = 0;
  std::size_t incorrect = 0;
};

struct SeparationReport {
  std::vector<double> correct_confidences;
  std::vector<double> incorrect_confidences;
  std::optional<KsResult> ks;
  /// Set when the KS test was skipped.
  std::string notice;
  std::vector<HistogramBin> histogram;

  nlohmann::ordered_json to_json() const;
  /// bin_lo,bin_hi,correct,incorrect (overlaid series, not stacked)
  std::string histogram_csv() const;
};

/// Splits LLM confidences by whether the annotation matches the gold label
/// and compares the two distributions. Considers annotated documents that
/// carry a gold label; throws DataError when none do.
SeparationReport confidence_separation_report(const Dataset& ds, std::size_t bins = 20);

}  // namespace redct::eval
