#pragma once

#include <cstdint>

#include "redct/types.hpp"

namespace redct::eval {

/// Bag-of-words corpus where each class owns a small vocabulary and every
/// document mixes class words with shared filler words. The classes are
/// linearly separable in expectation, with per-document noise controlled by
/// `signal` (probability that a token comes from the class vocabulary).
struct SyntheticTaskConfig {
  std::size_t num_docs = 3000;
  std::size_t num_classes = 3;
  std::size_t class_vocab = 40;
  std::size_t shared_vocab = 400;
  std::size_t min_len = 8;
  std::size_t max_len = 16;
  double signal = 0.2;
  std::uint64_t seed = 7;
};

/// Schema "synthetic" with classes alpha, beta, gamma, ... and label
/// tokens Alpha, Beta, Gamma, ...
TaskSchema synthetic_schema(std::size_t num_classes);

/// Balanced gold labels (round-robin then shuffled); doc ids "s00000", ...
Dataset make_synthetic_task(const SyntheticTaskConfig& cfg);

}  // namespace redct::eval
