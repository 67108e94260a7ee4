#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "redct/common.hpp"
#include "redct/types.hpp"

namespace redct::labeler {

struct ChatMessage {
  std::string role;  // "user" | "assistant" | "system"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct TokenAlternative {
  std::string token;
  double logprob = 0.0;

  friend bool operator==(const TokenAlternative&, const TokenAlternative&) = default;
};

/// One generated token with its top-k alternatives.
struct GeneratedToken {
  std::string token;
  double logprob = 0.0;
  std::vector<TokenAlternative> top;

  friend bool operator==(const GeneratedToken&, const GeneratedToken&) = default;
};

struct ChatResponse {
  std::string text;
  std::vector<GeneratedToken> tokens;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;

  friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

nlohmann::json to_json(const ChatResponse& r);
ChatResponse chat_response_from_json(const nlohmann::json& j);

struct LabelRequest {
  /// Only the simulator looks at the document (for its gold label).
  const Document* doc = nullptr;
  std::vector<ChatMessage> messages;
  /// False for the explanation turn of chain-of-thought prompting.
  bool want_logprobs = true;
};

/// Raised for failures worth retrying (connection errors, 429, 5xx).
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Anything that can answer a labeling prompt. Implementations must be
/// safe to call from several threads at once.
class LabelingBackend {
 public:
  virtual ~LabelingBackend() = default;
  /// Stable identifier; part of every cache key.
  virtual std::string id() const = 0;
  virtual ChatResponse complete(const LabelRequest& request) = 0;
};

struct HttpBackendConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  int top_logprobs = 5;
  int max_tokens = 256;
  std::chrono::seconds timeout{60};
};

/// Chat-completions client (temperature 0, top-k log-probs requested).
class HttpBackend final : public LabelingBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);
  std::string id() const override;
  ChatResponse complete(const LabelRequest& request) override;

  /// Request body sent for `request`; exposed for tests.
  nlohmann::json request_body(const LabelRequest& request) const;
  /// Parses a chat-completions response body; throws DataError.
  static ChatResponse parse_response(const std::string& body);

 private:
  HttpBackendConfig cfg_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

/// On-disk response cache: one JSON file per (backend id, prompt) hash.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(const std::string& backend_id, const std::vector<ChatMessage>& messages);

  std::optional<ChatResponse> get(const std::string& key) const;
  void put(const std::string& key, const std::string& backend_id,
           const std::vector<ChatMessage>& messages, const ChatResponse& response,
           const std::optional<std::vector<double>>& extracted_logprobs);

  const std::filesystem::path& dir() const { return dir_; }
  std::uint64_t hits() const;
  std::uint64_t misses() const;

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::mutex& lock_for(const std::string& key) const;

  std::filesystem::path dir_;
  mutable std::vector<std::mutex> stripes_;
  mutable std::mutex stats_mu_;
  mutable std::uint64_t hits_ = 0;
  mutable std::uint64_t misses_ = 0;
};

}  // namespace redct::labeler
