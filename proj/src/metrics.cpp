#include "redct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "redct/common.hpp"

namespace redct::eval {

EvalReport weighted_f1(std::span<const ClassIndex> gold, std::span<const ClassIndex> pred,
                       std::size_t num_classes) {
  if (gold.size() != pred.size()) {
    throw DataError("weighted_f1: gold has " + std::to_string(gold.size()) + " labels, pred has " +
                    std::to_string(pred.size()));
  }
  if (gold.empty()) throw DataError("weighted_f1: nothing to evaluate");
  EvalReport r;
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= num_classes || pred[i] >= num_classes) {
      throw DataError("weighted_f1: class index out of range");
    }
    ++r.confusion[gold[i]][pred[i]];
  }
  r.num_evaluated = gold.size();
  r.per_class.resize(num_classes);
  const double n = static_cast<double>(gold.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t tp = r.confusion[c][c];
    std::size_t gold_c = 0;
    std::size_t pred_c = 0;
    for (std::size_t o = 0; o < num_classes; ++o) {
      gold_c += r.confusion[c][o];
      pred_c += r.confusion[o][c];
    }
    auto& m = r.per_class[c];
    m.support = gold_c;
    m.precision = pred_c == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred_c);
    m.recall = gold_c == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(gold_c);
    m.f1 = (m.precision + m.recall) == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    r.weighted_f1 += static_cast<double>(m.support) / n * m.f1;
  }
  r.mean_weighted_f1 = r.weighted_f1;
  return r;
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

EvalReport aggregate(std::span<const EvalReport> runs) {
  if (runs.empty()) throw DataError("aggregate: no runs");
  EvalReport out = runs.front();
  std::vector<double> f1s{runs.front().weighted_f1};
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const auto& r = runs[i];
    for (std::size_t g = 0; g < out.confusion.size(); ++g) {
      for (std::size_t p = 0; p < out.confusion.size(); ++p) out.confusion[g][p] += r.confusion[g][p];
    }
    out.num_evaluated += r.num_evaluated;
    f1s.push_back(r.weighted_f1);
  }
  const auto ms = mean_sd(f1s);
  out.repetitions = runs.size();
  out.mean_weighted_f1 = ms.mean;
  out.sd_weighted_f1 = ms.sd;
  out.weighted_f1 = ms.mean;
  return out;
}

nlohmann::ordered_json EvalReport::to_json(const std::vector<std::string>& class_names) const {
  nlohmann::ordered_json j;
  j["metric_convention"] = "weighted F1 = sum_c support_c / N * F1_c, with 0/0 = 0";
  j["weighted_f1"] = weighted_f1;
  j["repetitions"] = repetitions;
  j["mean_weighted_f1"] = mean_weighted_f1;
  j["sd_weighted_f1"] = sd_weighted_f1;
  j["num_evaluated"] = num_evaluated;
  nlohmann::ordered_json pc = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    pc[class_names.at(c)] = {{"precision", per_class[c].precision},
                             {"recall", per_class[c].recall},
                             {"f1", per_class[c].f1},
                             {"support", per_class[c].support}};
  }
  j["per_class"] = pc;
  j["confusion"] = confusion;
  return j;
}

BaselineResult random_baseline(std::span<const ClassIndex> gold, std::size_t num_classes,
                               std::uint64_t seed, std::size_t trials) {
  if (trials < 1) throw ConfigError("random_baseline: trials must be >= 1");
  Rng rng(seed);
  std::vector<ClassIndex> pred(gold.size());
  std::vector<double> scores;
  scores.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& p : pred) p = static_cast<ClassIndex>(rng.below(num_classes));
    scores.push_back(weighted_f1(gold, pred, num_classes).weighted_f1);
  }
  const auto ms = mean_sd(scores);
  return {ms.mean, ms.sd / std::sqrt(static_cast<double>(trials)), trials};
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-10) return std::clamp(2.0 * sum, 0.0, 1.0);
    sign = -sign;
  }
  // The alternating series has not converged: lambda is tiny and p is 1.
  return 1.0;
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DataError("ks_two_sample: both samples must be nonempty");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult r;
  r.statistic = d;
  r.n = x.size();
  r.m = y.size();
  const double ne = n * m / (n + m);
  const double root = std::sqrt(ne);
  r.p_value = kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
  return r;
}

nlohmann::ordered_json SeparationReport::to_json() const {
  nlohmann::ordered_json j;
  j["n_correct"] = correct_confidences.size();
  j["n_incorrect"] = incorrect_confidences.size();
  if (ks) {
    j["ks"] = {{"statistic", ks->statistic}, {"p_value", ks->p_value}, {"n", ks->n}, {"m", ks->m},
               {"reject_at_0.01", ks->p_value < 0.01}};
  } else {
    j["ks"] = nullptr;
    j["notice"] = notice;
  }
  auto mean = [](const std::vector<double>& v) {
    return mean_sd(v).mean;
  };
  j["mean_confidence_correct"] = mean(correct_confidences);
  j["mean_confidence_incorrect"] = mean(incorrect_confidences);
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& bin : histogram) {
    hist.push_back({{"lo", bin.lo}, {"hi", bin.hi}, {"correct", bin.correct}, {"incorrect", bin.incorrect}});
  }
  j["histogram"] = hist;
  return j;
}

std::string SeparationReport::histogram_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "bin_lo,bin_hi,correct,incorrect\n";
  for (const auto& b : histogram) out << b.lo << ',' << b.hi << ',' << b.correct << ',' << b.incorrect << '\n';
  return out.str();
}

SeparationReport confidence_separation_report(const Dataset& ds, std::size_t bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  SeparationReport r;
  for (const auto& doc : ds.documents()) {
    const auto* ann = ds.annotation(doc.doc_id);
    if (!ann || !doc.gold_label) continue;
    (ann->predicted_class == *doc.gold_label ? r.correct_confidences : r.incorrect_confidences)
        .push_back(ann->confidence);
  }
  if (r.correct_confidences.empty() && r.incorrect_confidences.empty()) {
    throw DataError("confidence separation needs annotated documents with gold labels");
  }
  if (r.correct_confidences.empty() || r.incorrect_confidences.empty()) {
    r.notice = r.correct_confidences.empty() ? "KS test skipped: no correctly labeled items"
                                             : "KS test skipped: no incorrectly labeled items";
  } else {
    r.ks = ks_two_sample(r.correct_confidences, r.incorrect_confidences);
  }

  double hi = 0.0;
  for (double v : r.correct_confidences) hi = std::max(hi, v);
  for (double v : r.incorrect_confidences) hi = std::max(hi, v);
  if (hi <= 0.0) hi = 1.0;
  const double width = hi / static_cast<double>(bins);
  r.histogram.resize(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    r.histogram[i].lo = width * static_cast<double>(i);
    r.histogram[i].hi = i + 1 == bins ? hi : width * static_cast<double>(i + 1);
  }
  auto bin_of = [&](double v) {
    return std::min(bins - 1, static_cast<std::size_t>(v / width));
  };
  for (double v : r.correct_confidences) ++r.histogram[bin_of(v)].correct;
  for (double v : r.incorrect_confidences) ++r.histogram[bin_of(v)].incorrect;
  return r;
}

}  // namespace redct::eval
