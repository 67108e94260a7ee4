#include "redct/pipeline/run_store.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

namespace redct::pipeline {

using nlohmann::json;

std::string to_string(Stage s) {
  switch (s) {
    case Stage::label: return "label";
    case Stage::sample: return "sample";
    case Stage::annotate: return "annotate";
    case Stage::fuse: return "fuse";
    case Stage::train: return "train";
    case Stage::eval: return "eval";
    case Stage::export_model: return "export";
  }
  return "";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> kStages{Stage::label, Stage::sample, Stage::annotate, Stage::fuse,
                                          Stage::train, Stage::eval,   Stage::export_model};
  return kStages;
}

std::vector<Stage> predecessors(Stage s) {
  const auto& all = all_stages();
  const auto it = std::find(all.begin(), all.end(), s);
  // export only needs trained models, not an evaluation
  if (s == Stage::export_model) return {Stage::train};
  if (it == all.begin()) return {};
  return {*(it - 1)};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::optional<Stage> stage_from_string(const std::string& s) {
  for (auto st : all_stages()) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

}  // namespace

RunStore::RunStore(std::filesystem::path run_root, std::string run_id)
    : dir_(run_root / run_id), run_id_(std::move(run_id)) {
  if (run_id_.empty() || run_id_.find('/') != std::string::npos || run_id_ == "." || run_id_ == "..") {
    throw ConfigError("invalid run id '" + run_id_ + "'");
  }
  load();
}

bool RunStore::exists() const { return std::filesystem::exists(dir_ / "manifest.json"); }

void RunStore::load() {
  const auto path = dir_ / "manifest.json";
  if (!std::filesystem::exists(path)) return;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError("run manifest " + path.string() + " is unreadable: " + e.what());
  }
  info_ = j.value("info", json::object());
  const auto stages = j.value("stages", json::object());
  for (const auto& [name, rec] : stages.items()) {
    auto st = stage_from_string(name);
    if (!st) continue;
    StageRecord r;
    r.status = rec.value("status", "");
    r.fingerprint = rec.value("fingerprint", "");
    r.started_at = rec.value("started_at", "");
    r.finished_at = rec.value("finished_at", "");
    r.outputs = rec.value("outputs", std::map<std::string, std::string>{});
    r.details = rec.value("details", json());
    stages_[*st] = std::move(r);
  }
}

void RunStore::save() const {
  nlohmann::ordered_json j;
  j["run_id"] = run_id_;
  j["dag"] = "label -> sample -> annotate -> fuse -> train -> eval; train -> export";
  j["info"] = info_;
  nlohmann::ordered_json stages = nlohmann::ordered_json::object();
  for (auto st : all_stages()) {
    auto it = stages_.find(st);
    if (it == stages_.end()) continue;
    const auto& r = it->second;
    nlohmann::ordered_json rec;
    rec["status"] = r.status;
    rec["fingerprint"] = r.fingerprint;
    rec["started_at"] = r.started_at;
    rec["finished_at"] = r.finished_at;
    rec["outputs"] = r.outputs;
    if (!r.details.is_null()) rec["details"] = r.details;
    stages[to_string(st)] = rec;
  }
  j["stages"] = stages;
  write_file_atomic(dir_ / "manifest.json", j.dump(2) + "\n");
}

std::optional<StageRecord> RunStore::stage(Stage s) const {
  auto it = stages_.find(s);
  if (it == stages_.end()) return std::nullopt;
  return it->second;
}

bool RunStore::complete(Stage s) const {
  auto it = stages_.find(s);
  return it != stages_.end() && it->second.status == "complete";
}

bool RunStore::up_to_date(Stage s, const std::string& fingerprint) const {
  auto it = stages_.find(s);
  if (it == stages_.end() || it->second.status != "complete" || it->second.fingerprint != fingerprint) {
    return false;
  }
  return std::all_of(it->second.outputs.begin(), it->second.outputs.end(),
                     [&](const auto& kv) { return std::filesystem::exists(dir_ / kv.second); });
}

void RunStore::require_predecessors(Stage s) const {
  std::vector<Stage> missing;
  // Walk the whole upstream chain so the message names every gap.
  std::vector<Stage> frontier = predecessors(s);
  while (!frontier.empty()) {
    const auto p = frontier.back();
    frontier.pop_back();
    if (!complete(p) && std::find(missing.begin(), missing.end(), p) == missing.end()) missing.push_back(p);
    for (auto q : predecessors(p)) frontier.push_back(q);
  }
  if (missing.empty()) return;
  std::sort(missing.begin(), missing.end());
  std::string names;
  for (auto m : missing) names += (names.empty() ? "" : ", ") + to_string(m);
  throw StageOrderError("run '" + run_id_ + "': cannot run " + to_string(s) +
                            " before these stages complete: " + names,
                        missing);
}

void RunStore::require_complete(std::initializer_list<Stage> stages, const std::string& for_what) const {
  std::vector<Stage> missing;
  for (auto s : stages) {
    if (!complete(s)) missing.push_back(s);
  }
  if (missing.empty()) return;
  std::string names;
  for (auto m : missing) names += (names.empty() ? "" : ", ") + to_string(m);
  throw StageOrderError("run '" + run_id_ + "': " + for_what + " needs completed stages: " + names, missing);
}

void RunStore::invalidate_after(Stage s) {
  // Anything that (transitively) consumed s is now stale.
  for (auto st : all_stages()) {
    if (st == s) continue;
    std::vector<Stage> frontier = predecessors(st);
    bool downstream = false;
    while (!frontier.empty() && !downstream) {
      const auto p = frontier.back();
      frontier.pop_back();
      if (p == s) downstream = true;
      for (auto q : predecessors(p)) frontier.push_back(q);
    }
    if (downstream) stages_.erase(st);
  }
}

void RunStore::begin(Stage s, const std::string& fingerprint) {
  invalidate_after(s);
  StageRecord r;
  r.status = "running";
  r.fingerprint = fingerprint;
  r.started_at = utc_timestamp();
  stages_[s] = std::move(r);
  save();
}

void RunStore::finish(Stage s, std::map<std::string, std::string> outputs, json details) {
  auto& r = stages_.at(s);
  r.status = "complete";
  r.finished_at = utc_timestamp();
  r.outputs = std::move(outputs);
  r.details = std::move(details);
  save();
}

void RunStore::fail(Stage s, const std::string& message) {
  auto& r = stages_[s];
  r.status = "failed";
  r.finished_at = utc_timestamp();
  r.details = {{"error", message}};
  save();
}

}  // namespace redct::pipeline
