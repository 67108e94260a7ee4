#pragma once

// Brute-force reference implementations shared by unit and acceptance tests.
// Each one recomputes its quantity the slow, obvious way.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <vector>

#include "redct/types.hpp"

namespace redct::test {

/// Weighted F1 with per-class counts taken by scanning the label lists
/// (no confusion matrix), in the same floating-point order as the library
/// so the two agree bit for bit.
inline double weighted_f1_oracle(const std::vector<ClassIndex>& gold, const std::vector<ClassIndex>& pred,
                                 std::size_t k) {
  const double n = static_cast<double>(gold.size());
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = 0, in_gold = 0, in_pred = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      in_gold += gold[i] == c;
      in_pred += pred[i] == c;
      tp += gold[i] == c && pred[i] == c;
    }
    const double p = in_pred ? static_cast<double>(tp) / static_cast<double>(in_pred) : 0.0;
    const double r = in_gold ? static_cast<double>(tp) / static_cast<double>(in_gold) : 0.0;
    const double f1 = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    total += static_cast<double>(in_gold) / n * f1;
  }
  return total;
}

/// The same quantity as an exact rational evaluated in long double:
/// (1/N) sum_c support_c * 2 tp_c / (support_c + predicted_c).
inline long double weighted_f1_rational(const std::vector<ClassIndex>& gold, const std::vector<ClassIndex>& pred,
                                        std::size_t k) {
  long double total = 0;
  for (std::size_t c = 0; c < k; ++c) {
    long long tp = 0, g = 0, p = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      g += gold[i] == c;
      p += pred[i] == c;
      tp += gold[i] == c && pred[i] == c;
    }
    if (g + p > 0) total += static_cast<long double>(g) * 2 * tp / (g + p);
  }
  return total / static_cast<long double>(gold.size());
}

/// KS statistic as an exact fraction num / (n * m): the ECDF gap is
/// evaluated at every point of the pooled sample by counting.
struct KsFraction {
  long long num = 0;
  long long den = 1;
};

inline KsFraction ks_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const long long n = static_cast<long long>(a.size());
  const long long m = static_cast<long long>(b.size());
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  long long best = 0;
  for (double x : pooled) {
    long long ca = 0, cb = 0;
    for (double v : a) ca += v <= x;
    for (double v : b) cb += v <= x;
    best = std::max(best, std::llabs(ca * m - cb * n));
  }
  return {best, n * m};
}

}  // namespace redct::test
