#include "redct/confidence.hpp"

#include <cmath>

#include "redct/common.hpp"

namespace redct::labeler {

double confidence_score(std::span<const double> logprobs) {
  if (logprobs.size() < 2) throw DataError("confidence score needs at least 2 label tokens");
  for (double v : logprobs) {
    if (!std::isfinite(v)) throw DataError("confidence score: non-finite log-probability");
  }
  const std::size_t top = argmax(logprobs);
  bool have_second = false;
  double second = 0.0;
  for (std::size_t i = 0; i < logprobs.size(); ++i) {
    if (i == top) continue;
    if (!have_second || logprobs[i] > second) {
      second = logprobs[i];
      have_second = true;
    }
  }
  return std::abs(logprobs[top] - second);
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace redct::labeler
