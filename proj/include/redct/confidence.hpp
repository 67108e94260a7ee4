#pragma once

#include <cstddef>
#include <span>

namespace redct::labeler {

/// Gap between the largest and second-largest label-token log-probability.
/// Zero exactly when the top two entries tie. Throws DataError for fewer
/// than two entries or non-finite values.
double confidence_score(std::span<const double> logprobs);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace redct::labeler
