#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace redct {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, schema or command-line usage (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// 64-bit FNV-1a. Used for schema hashes, cache keys, checksums and
// feature hashing; defined on bytes so results are platform independent.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = kFnvOffset) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string to_hex(std::uint64_t v);

/// Deterministic, platform-independent random source.
///
/// std::mt19937_64 is fully specified by the standard, but the std
/// distributions are not; everything that must be reproducible across
/// platforms draws through the helpers below.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  /// Marsaglia-Tsang gamma sampler, shape > 0, unit scale.
  double gamma(double shape);
  double beta(double a, double b);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

/// Mixes a seed with a string so per-item streams are order independent.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

/// ceil(p * n) with products that land within 1e-9 of an integer snapped
/// down first, so 0.07 * 100 counts as 7 rather than 8.
std::size_t ceil_fraction(double p, std::size_t n);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::uint64_t file_fingerprint(const std::filesystem::path& path);

}  // namespace redct
