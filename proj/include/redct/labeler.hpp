#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "redct/backend.hpp"
#include "redct/prompt.hpp"
#include "redct/types.hpp"

namespace redct::labeler {

/// Raised when the backend keeps failing at the transport level.
class LabelingError : public Error {
 public:
  LabelingError(const std::string& what, int attempts) : Error(what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

/// Reads per-class log-probabilities from the first answer token of a
/// response. Alternatives are matched to classes by first-word key
/// (case-insensitive, leading whitespace and punctuation stripped; a
/// generated sub-word matches a class when it is a prefix of exactly one
/// class key). Classes absent from the top-k list get the smallest observed
/// log-prob minus ln(100). Returns nullopt when the response text does not
/// name a class or no class token is resolvable.
std::optional<std::vector<double>> extract_label_logprobs(const ChatResponse& response,
                                                          const TaskSchema& schema);

/// Uniform fallback: every class at -ln K, confidence 0.
LlmAnnotation abstention(const std::string& doc_id, const TaskSchema& schema,
                         std::string raw_response);

struct LabelOptions {
  /// Retries after the first attempt, for transport errors and
  /// unparseable answers alike.
  int retries = 3;
  std::chrono::milliseconds backoff{500};
  ResponseCache* cache = nullptr;
  /// Overrides the schema's built-in template when set.
  std::optional<PromptTemplate> prompt_template;
};

LlmAnnotation label_document(const Document& doc, const TaskSchema& schema,
                             LabelingBackend& backend, const LabelOptions& opts = {});

struct LabelFailure {
  std::string doc_id;
  std::string message;
  int attempts = 0;
};

struct LabelCorpusResult {
  Dataset dataset;
  /// Documents that ended as abstentions because of backend errors.
  std::vector<LabelFailure> failures;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
};

/// Annotates every document; output is independent of `parallelism` for
/// deterministic backends.
LabelCorpusResult label_corpus(const Dataset& ds, LabelingBackend& backend, int parallelism,
                               const LabelOptions& opts = {});

struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;
};

struct SimulatorConfig {
  std::vector<double> accuracy_per_class;
  BetaParams correct{8.0, 2.0};
  BetaParams wrong{2.0, 2.0};
  std::uint64_t seed = 0;

  /// Throws ConfigError for K mismatch or out-of-range parameters.
  void validate(std::size_t num_classes) const;
};

/// Draws one simulated label: returns (class, per-class log-probs).
///
/// The label is the gold class with probability accuracy[gold], otherwise
/// uniform over the other classes. A Beta draw q (correct or wrong
/// parameters) sets the top-token probability to 1/K + (1 - 1/K) q, so the
/// simulated class is always the argmax; the remainder is split evenly.
std::pair<ClassIndex, std::vector<double>> simulate_one(Rng& rng, ClassIndex gold,
                                                        const SimulatorConfig& cfg,
                                                        std::size_t num_classes);

/// Sequential simulation with one generator in dataset order. Requires a
/// gold label on every document.
Dataset simulate_labels(const Dataset& ds, const SimulatorConfig& cfg);

/// Backend view of the simulator for exercising the full prompt/parse path.
/// Each document draws from its own stream (seed mixed with doc_id) so
/// results do not depend on request order.
class SimulatorBackend final : public LabelingBackend {
 public:
  SimulatorBackend(TaskSchema schema, SimulatorConfig cfg);
  std::string id() const override;
  ChatResponse complete(const LabelRequest& request) override;

 private:
  TaskSchema schema_;
  SimulatorConfig cfg_;
};

}  // namespace redct::labeler
