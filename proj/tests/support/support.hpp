#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "redct/common.hpp"
#include "redct/types.hpp"

namespace redct::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("redct_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline TaskSchema stance_schema(PromptStyle style = PromptStyle::zero_shot) {
  return TaskSchema("stance", {"for", "against", "neutral"}, {"For", "Against", "Neutral"}, style, true);
}

inline TaskSchema humor_schema() {
  return TaskSchema("humor", {"humorous", "not_humorous"}, {"True", "False"}, PromptStyle::zero_shot, false);
}

/// K-class schema without a target requirement.
inline TaskSchema plain_schema(std::size_t k) {
  std::vector<std::string> names, tokens;
  for (std::size_t i = 0; i < k; ++i) {
    names.push_back("c" + std::to_string(i));
    tokens.push_back("Label" + std::to_string(i));
  }
  return TaskSchema("plain" + std::to_string(k), names, tokens, PromptStyle::zero_shot, false);
}

/// Annotation with the given predicted class and confidence; log-probs are
/// built so that the two agree.
inline LlmAnnotation make_annotation(const std::string& id, ClassIndex cls, double confidence, std::size_t k) {
  LlmAnnotation a;
  a.doc_id = id;
  a.predicted_class = cls;
  a.confidence = confidence;
  std::vector<double> lp(k, -1.0 - confidence);
  lp[cls] = -1.0;
  a.logprobs.per_class_logprob = lp;
  a.raw_response = "x";
  return a;
}

}  // namespace redct::test
