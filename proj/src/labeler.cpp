#include "redct/labeler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <spdlog/spdlog.h>

#include "redct/confidence.hpp"

namespace redct::labeler {

namespace {

std::optional<ClassIndex> match_class(const std::string& key, const TaskSchema& schema) {
  if (key.empty()) return std::nullopt;
  const auto& keys = schema.match_keys();
  for (std::size_t c = 0; c < keys.size(); ++c) {
    if (keys[c] == key) return c;
  }
  std::optional<ClassIndex> found;
  for (std::size_t c = 0; c < keys.size(); ++c) {
    if (keys[c].compare(0, key.size(), key) == 0) {
      if (found) return std::nullopt;  // ambiguous sub-word
      found = c;
    }
  }
  return found;
}

LlmAnnotation make_annotation(const std::string& doc_id, const TaskSchema& schema,
                              std::vector<double> logprobs, std::string raw) {
  LlmAnnotation ann;
  ann.doc_id = doc_id;
  ann.predicted_class = argmax(logprobs);
  ann.confidence = confidence_score(logprobs);
  ann.logprobs.per_class_logprob = std::move(logprobs);
  ann.prompt_style = schema.prompt_style();
  ann.raw_response = std::move(raw);
  return ann;
}

}  // namespace

std::optional<std::vector<double>> extract_label_logprobs(const ChatResponse& response,
                                                          const TaskSchema& schema) {
  if (!match_class(label_match_key(response.text), schema)) return std::nullopt;

  const GeneratedToken* answer = nullptr;
  for (const auto& tok : response.tokens) {
    if (!label_match_key(tok.token).empty()) {
      answer = &tok;
      break;
    }
  }
  if (answer == nullptr) return std::nullopt;

  std::vector<TokenAlternative> alts = answer->top;
  if (alts.empty()) alts.push_back({answer->token, answer->logprob});

  const std::size_t k = schema.num_classes();
  constexpr double kUnset = -std::numeric_limits<double>::infinity();
  std::vector<double> lp(k, kUnset);
  double min_observed = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& alt : alts) {
    if (!std::isfinite(alt.logprob)) continue;
    min_observed = std::min(min_observed, alt.logprob);
    if (auto c = match_class(label_match_key(alt.token), schema)) {
      lp[*c] = std::max(lp[*c], alt.logprob);
      any = true;
    }
  }
  if (!any) return std::nullopt;
  const double floor = min_observed - std::log(100.0);
  for (auto& v : lp) {
    if (v == kUnset) v = floor;
  }
  return lp;
}

LlmAnnotation abstention(const std::string& doc_id, const TaskSchema& schema,
                         std::string raw_response) {
  const std::size_t k = schema.num_classes();
  LlmAnnotation ann;
  ann.doc_id = doc_id;
  ann.logprobs.per_class_logprob.assign(k, -std::log(static_cast<double>(k)));
  ann.predicted_class = 0;
  ann.confidence = 0.0;
  ann.prompt_style = schema.prompt_style();
  ann.raw_response = std::move(raw_response);
  ann.abstained = true;
  return ann;
}

LlmAnnotation label_document(const Document& doc, const TaskSchema& schema,
                             LabelingBackend& backend, const LabelOptions& opts) {
  const auto tmpl = opts.prompt_template ? *opts.prompt_template : template_for(schema);
  const auto prompt = render_prompt(doc, tmpl);
  const int max_attempts = std::max(1, opts.retries + 1);
  int attempts = 0;

  // Exponential backoff, only between a failed attempt and its retry.
  int failures = 0;
  bool retrying = false;
  auto wait = [&] {
    if (retrying && opts.backoff.count() > 0) {
      std::this_thread::sleep_for(opts.backoff * (1LL << std::min(failures - 1, 10)));
    }
    retrying = false;
  };

  // One request with transport-level retries. Returns the response and
  // whether it came from the cache.
  auto call = [&](const LabelRequest& req, bool use_cache) -> std::pair<ChatResponse, bool> {
    const auto key = ResponseCache::key(backend.id(), req.messages);
    if (use_cache && opts.cache) {
      if (auto hit = opts.cache->get(key)) return {*hit, true};
    }
    for (;;) {
      wait();
      ++attempts;
      try {
        return {backend.complete(req), false};
      } catch (const TransportError& e) {
        spdlog::warn("backend {} failed for {} (attempt {}/{}): {}", backend.id(), doc.doc_id,
                     attempts, max_attempts, e.what());
        ++failures;
        retrying = true;
        if (attempts >= max_attempts) {
          throw LabelingError("backend failed for '" + doc.doc_id + "' after " +
                                  std::to_string(attempts) + " attempts: " + e.what(),
                              attempts);
        }
      }
    }
  };

  std::string last_raw;
  for (int round = 0; attempts < max_attempts; ++round) {
    const bool use_cache = round == 0;
    LabelRequest req{&doc, {}, true};
    std::optional<std::string> rationale;
    if (prompt.turns.size() == 2) {
      LabelRequest explain{&doc, {{"user", prompt.turns[0]}}, false};
      auto [first, cached] = call(explain, use_cache);
      if (!cached && opts.cache) {
        opts.cache->put(ResponseCache::key(backend.id(), explain.messages), backend.id(),
                        explain.messages, first, std::nullopt);
      }
      rationale = first.text;
      req.messages = {{"user", prompt.turns[0]}, {"assistant", first.text}, {"user", prompt.turns[1]}};
    } else {
      req.messages = {{"user", prompt.turns[0]}};
    }
    auto [response, cached] = call(req, use_cache);
    auto lp = extract_label_logprobs(response, schema);
    if (!cached && opts.cache) {
      opts.cache->put(ResponseCache::key(backend.id(), req.messages), backend.id(), req.messages,
                      response, lp);
    }
    last_raw = response.text;
    if (lp) {
      auto ann = make_annotation(doc.doc_id, schema, std::move(*lp), response.text);
      ann.rationale = std::move(rationale);
      return ann;
    }
    spdlog::debug("unparseable answer for {}: '{}'", doc.doc_id, response.text);
    if (cached) continue;  // a cached bad answer does not count as an attempt
    ++failures;
    retrying = true;
  }
  return abstention(doc.doc_id, schema, last_raw);
}

LabelCorpusResult label_corpus(const Dataset& ds, LabelingBackend& backend, int parallelism,
                               const LabelOptions& opts) {
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  const auto& docs = ds.documents();
  const std::size_t n = docs.size();
  std::vector<std::optional<LlmAnnotation>> results(n);
  std::vector<std::optional<LabelFailure>> failures(n);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  const std::size_t report_every = std::max<std::size_t>(1, n / 10);

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const auto& doc = docs[i];
      try {
        results[i] = label_document(doc, ds.schema(), backend, opts);
      } catch (const LabelingError& e) {
        failures[i] = LabelFailure{doc.doc_id, e.what(), e.attempts()};
        results[i] = abstention(doc.doc_id, ds.schema(), "");
      } catch (const Error& e) {
        failures[i] = LabelFailure{doc.doc_id, e.what(), 0};
        results[i] = abstention(doc.doc_id, ds.schema(), "");
      }
      const auto d = done.fetch_add(1) + 1;
      if (d % report_every == 0 || d == n) spdlog::info("labeled {}/{} documents", d, n);
    }
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(parallelism), n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  }

  LabelCorpusResult out{ds, {}, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    out.dataset.set_annotation(std::move(*results[i]));
    if (failures[i]) out.failures.push_back(std::move(*failures[i]));
  }
  if (!out.failures.empty()) {
    std::string ids;
    for (const auto& f : out.failures) ids += (ids.empty() ? "" : ", ") + f.doc_id;
    spdlog::error("{} documents failed and were recorded as abstentions: {}", out.failures.size(),
                  ids);
  }
  if (opts.cache) {
    spdlog::info("response cache: {} hits, {} misses", opts.cache->hits(), opts.cache->misses());
  }
  return out;
}

void SimulatorConfig::validate(std::size_t num_classes) const {
  if (accuracy_per_class.size() != num_classes) {
    throw ConfigError("simulator: accuracy_per_class needs one entry per class (" +
                      std::to_string(num_classes) + ")");
  }
  for (double a : accuracy_per_class) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("simulator: accuracies must lie in [0, 1]");
  }
  for (const auto& p : {correct, wrong}) {
    if (!(p.alpha > 0.0 && p.beta > 0.0)) {
      throw ConfigError("simulator: Beta parameters must be positive");
    }
  }
}

std::pair<ClassIndex, std::vector<double>> simulate_one(Rng& rng, ClassIndex gold,
                                                        const SimulatorConfig& cfg,
                                                        std::size_t num_classes) {
  const double k = static_cast<double>(num_classes);
  const bool correct = rng.uniform() < cfg.accuracy_per_class[gold];
  ClassIndex label = gold;
  if (!correct) {
    label = static_cast<ClassIndex>(rng.below(num_classes - 1));
    if (label >= gold) ++label;
  }
  const auto& params = correct ? cfg.correct : cfg.wrong;
  const double q = rng.beta(params.alpha, params.beta);
  const double top = std::clamp(1.0 / k + (1.0 - 1.0 / k) * q, 1.0 / k + 1e-9, 1.0 - 1e-12);
  const double rest = (1.0 - top) / (k - 1.0);
  std::vector<double> lp(num_classes, std::log(rest));
  lp[label] = std::log(top);
  return {label, std::move(lp)};
}

Dataset simulate_labels(const Dataset& ds, const SimulatorConfig& cfg) {
  const auto& schema = ds.schema();
  cfg.validate(schema.num_classes());
  Rng rng(cfg.seed);
  Dataset out = ds;
  for (const auto& doc : ds.documents()) {
    if (!doc.gold_label) {
      throw DataError("simulator needs a gold_label on document '" + doc.doc_id + "'");
    }
    auto [label, lp] = simulate_one(rng, *doc.gold_label, cfg, schema.num_classes());
    out.set_annotation(make_annotation(doc.doc_id, schema, std::move(lp),
                                       schema.label_tokens()[label]));
  }
  return out;
}

SimulatorBackend::SimulatorBackend(TaskSchema schema, SimulatorConfig cfg)
    : schema_(std::move(schema)), cfg_(std::move(cfg)) {
  cfg_.validate(schema_.num_classes());
}

std::string SimulatorBackend::id() const {
  nlohmann::json j = {{"acc", cfg_.accuracy_per_class},
                      {"correct", {cfg_.correct.alpha, cfg_.correct.beta}},
                      {"wrong", {cfg_.wrong.alpha, cfg_.wrong.beta}},
                      {"seed", cfg_.seed}};
  return "simulator-" + to_hex(fnv1a64(j.dump()));
}

ChatResponse SimulatorBackend::complete(const LabelRequest& request) {
  if (request.doc == nullptr || !request.doc->gold_label) {
    throw DataError("simulator backend needs documents with gold labels");
  }
  const auto& doc = *request.doc;
  ChatResponse r;
  if (!request.want_logprobs) {
    r.text = "The statement's wording indicates its position toward the target.";
    return r;
  }
  Rng rng(derive_seed(cfg_.seed, doc.doc_id));
  auto [label, lp] = simulate_one(rng, *doc.gold_label, cfg_, schema_.num_classes());
  r.text = schema_.label_tokens()[label];
  GeneratedToken tok{r.text, lp[label], {}};
  std::vector<std::size_t> order(lp.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return lp[a] > lp[b]; });
  for (auto c : order) tok.top.push_back({schema_.label_tokens()[c], lp[c]});
  r.tokens.push_back(std::move(tok));
  return r;
}

}  // namespace redct::labeler
