#include <httplib.h>

#include <cstdlib>

#include "redct/backend.hpp"

namespace redct::labeler {

using nlohmann::json;

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.base_url.empty()) throw ConfigError("http backend: base_url is required");
  if (cfg_.model.empty()) throw ConfigError("http backend: model is required");
  if (cfg_.top_logprobs < 1 || cfg_.top_logprobs > 20) {
    throw ConfigError("http backend: top_logprobs must be in [1, 20]");
  }
  // Split "https://host:port/v1" into the client origin and a path prefix.
  const auto scheme_end = cfg_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("http backend: base_url needs a scheme: " + cfg_.base_url);
  }
  const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = cfg_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : cfg_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpBackend::id() const { return "http:" + cfg_.base_url + ":" + cfg_.model; }

json HttpBackend::request_body(const LabelRequest& request) const {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json body = {{"model", cfg_.model},
               {"messages", messages},
               {"temperature", 0},
               {"max_tokens", cfg_.max_tokens}};
  if (request.want_logprobs) {
    body["logprobs"] = true;
    body["top_logprobs"] = cfg_.top_logprobs;
  }
  return body;
}

ChatResponse HttpBackend::parse_response(const std::string& body) {
  try {
    const auto j = json::parse(body);
    const auto& choice = j.at("choices").at(0);
    ChatResponse r;
    const auto& content = choice.at("message").at("content");
    r.text = content.is_null() ? std::string() : content.get<std::string>();
    if (choice.contains("logprobs") && choice.at("logprobs").is_object() &&
        choice.at("logprobs").contains("content") && choice.at("logprobs").at("content").is_array()) {
      for (const auto& t : choice.at("logprobs").at("content")) {
        GeneratedToken g{t.at("token").get<std::string>(), t.at("logprob").get<double>(), {}};
        if (t.contains("top_logprobs")) {
          for (const auto& a : t.at("top_logprobs")) {
            g.top.push_back({a.at("token").get<std::string>(), a.at("logprob").get<double>()});
          }
        }
        r.tokens.push_back(std::move(g));
      }
    }
    if (j.contains("usage") && j.at("usage").is_object()) {
      r.prompt_tokens = j.at("usage").value("prompt_tokens", std::uint64_t{0});
      r.completion_tokens = j.at("usage").value("completion_tokens", std::uint64_t{0});
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("unexpected chat-completions response: ") + e.what());
  }
}

ChatResponse HttpBackend::complete(const LabelRequest& request) {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(cfg_.timeout.count());
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const auto res = client.Post(path_prefix_ + "/chat/completions", headers,
                               request_body(request).dump(), "application/json");
  if (!res) {
    throw TransportError("request to " + cfg_.base_url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("backend returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error("backend returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  return parse_response(res->body);
}

}  // namespace redct::labeler
