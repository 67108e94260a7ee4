#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "redct/common.hpp"

namespace redct::pipeline {

/// Hub workflow stages in dependency order.
enum class Stage { label, sample, annotate, fuse, train, eval, export_model };

std::string to_string(Stage s);
const std::vector<Stage>& all_stages();
/// Direct prerequisites; the chain is linear.
std::vector<Stage> predecessors(Stage s);

/// Raised when a command runs before the stages it consumes.
class StageOrderError : public Error {
 public:
  StageOrderError(const std::string& what, std::vector<Stage> missing)
      : Error(what), missing_(std::move(missing)) {}
  const std::vector<Stage>& missing() const { return missing_; }

 private:
  std::vector<Stage> missing_;
};

struct StageRecord {
  std::string status;  // "running" | "complete" | "failed"
  std::string fingerprint;
  std::string started_at;
  std::string finished_at;
  std::map<std::string, std::string> outputs;  // name -> path relative to the run dir
  nlohmann::json details;
};

/// Per-run directory plus its manifest.json.
///
/// Every mutation of the manifest is written atomically; a stage rerun with
/// an unchanged fingerprint is detected before anything is touched, and a
/// rerun with a new fingerprint clears every downstream stage.
class RunStore {
 public:
  RunStore(std::filesystem::path run_root, std::string run_id);

  const std::string& run_id() const { return run_id_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& relative) const { return dir_ / relative; }
  bool exists() const;

  /// Run-level fields (task id, backend id, p, settings, seeds, ...).
  nlohmann::json& info() { return info_; }
  const nlohmann::json& info() const { return info_; }

  std::optional<StageRecord> stage(Stage s) const;
  bool complete(Stage s) const;
  /// True when `s` is complete with this fingerprint and all outputs exist.
  bool up_to_date(Stage s, const std::string& fingerprint) const;

  /// Throws StageOrderError naming every incomplete prerequisite of `s`.
  void require_predecessors(Stage s) const;
  void require_complete(std::initializer_list<Stage> stages, const std::string& for_what) const;

  void begin(Stage s, const std::string& fingerprint);
  void finish(Stage s, std::map<std::string, std::string> outputs, nlohmann::json details = {});
  void fail(Stage s, const std::string& message);

  void save() const;

 private:
  void load();
  void invalidate_after(Stage s);

  std::filesystem::path dir_;
  std::string run_id_;
  nlohmann::json info_ = nlohmann::json::object();
  std::map<Stage, StageRecord> stages_;
};

std::string utc_timestamp();

}  // namespace redct::pipeline
