#include "redct/backend.hpp"

#include <spdlog/spdlog.h>

namespace redct::labeler {

using nlohmann::json;

json to_json(const ChatResponse& r) {
  json tokens = json::array();
  for (const auto& t : r.tokens) {
    json top = json::array();
    for (const auto& a : t.top) top.push_back({{"token", a.token}, {"logprob", a.logprob}});
    tokens.push_back({{"token", t.token}, {"logprob", t.logprob}, {"top_logprobs", top}});
  }
  return {{"text", r.text},
          {"tokens", tokens},
          {"prompt_tokens", r.prompt_tokens},
          {"completion_tokens", r.completion_tokens}};
}

ChatResponse chat_response_from_json(const json& j) {
  ChatResponse r;
  r.text = j.at("text").get<std::string>();
  for (const auto& t : j.at("tokens")) {
    GeneratedToken g{t.at("token").get<std::string>(), t.at("logprob").get<double>(), {}};
    for (const auto& a : t.at("top_logprobs")) {
      g.top.push_back({a.at("token").get<std::string>(), a.at("logprob").get<double>()});
    }
    r.tokens.push_back(std::move(g));
  }
  r.prompt_tokens = j.value("prompt_tokens", std::uint64_t{0});
  r.completion_tokens = j.value("completion_tokens", std::uint64_t{0});
  return r;
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)), stripes_(64) {
  std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key(const std::string& backend_id,
                               const std::vector<ChatMessage>& messages) {
  std::uint64_t h = fnv1a64(backend_id);
  for (const auto& m : messages) {
    h = fnv1a64("\x1f", h);
    h = fnv1a64(m.role, h);
    h = fnv1a64("\x1e", h);
    h = fnv1a64(m.content, h);
  }
  return to_hex(h);
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / (key + ".json");
}

std::mutex& ResponseCache::lock_for(const std::string& key) const {
  return stripes_[fnv1a64(key) % stripes_.size()];
}

std::optional<ChatResponse> ResponseCache::get(const std::string& key) const {
  const auto path = path_for(key);
  std::optional<ChatResponse> out;
  {
    std::lock_guard lock(lock_for(key));
    if (std::filesystem::exists(path)) {
      try {
        out = chat_response_from_json(json::parse(read_file(path)).at("response"));
      } catch (const std::exception& e) {
        spdlog::warn("ignoring unreadable cache entry {}: {}", path.string(), e.what());
      }
    }
  }
  std::lock_guard lock(stats_mu_);
  ++(out ? hits_ : misses_);
  return out;
}

void ResponseCache::put(const std::string& key, const std::string& backend_id,
                        const std::vector<ChatMessage>& messages, const ChatResponse& response,
                        const std::optional<std::vector<double>>& extracted_logprobs) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json entry = {{"key", key},
                {"backend", backend_id},
                {"messages", msgs},
                {"response", to_json(response)},
                {"extracted_logprobs", extracted_logprobs ? json(*extracted_logprobs) : json()}};
  std::lock_guard lock(lock_for(key));
  write_file_atomic(path_for(key), entry.dump(1) + "\n");
}

std::uint64_t ResponseCache::hits() const {
  std::lock_guard lock(stats_mu_);
  return hits_;
}

std::uint64_t ResponseCache::misses() const {
  std::lock_guard lock(stats_mu_);
  return misses_;
}

}  // namespace redct::labeler
