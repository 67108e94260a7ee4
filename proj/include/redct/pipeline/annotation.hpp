#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "redct/sampler.hpp"
#include "redct/types.hpp"

namespace redct::pipeline {

enum class TaskState { pending, assigned, completed };

std::string to_string(TaskState s);

struct AnnotationTask {
  std::string doc_id;
  std::string text;
  std::optional<std::string> target;
  TaskState state = TaskState::pending;
  std::optional<std::string> assigned_to;
  std::chrono::system_clock::time_point lease_expiry{};
  std::optional<ClassIndex> submitted_label;
  std::optional<std::string> submitted_by;
  // Shown only when the service opts in.
  std::optional<ClassIndex> llm_label;
  std::optional<double> llm_confidence;
};

struct AnnotationProgress {
  std::size_t completed = 0;
  std::size_t total = 0;
  /// Completed labels per submitted class.
  std::vector<std::size_t> per_class;
};

enum class SubmitStatus { accepted, conflict, not_found, invalid };

struct SubmitOutcome {
  SubmitStatus status;
  std::string message;
};

/// Lease-based work queue over the documents of a sampling manifest.
///
/// Accepted labels are appended to a JSONL journal and fsync'ed before the
/// submission is acknowledged; constructing a queue over an existing
/// journal replays it, ignoring a torn final line.
class AnnotationQueue {
 public:
  using Clock = std::function<std::chrono::system_clock::time_point()>;

  struct Options {
    std::chrono::seconds lease{600};
    bool reveal_llm_label = false;
    Clock clock;  // defaults to system_clock::now
  };

  /// `ds` must contain every manifest document (the run's train split).
  AnnotationQueue(const Dataset& ds, const sampler::SamplingManifest& manifest,
                  std::filesystem::path journal_path, Options opts);

  /// The caller's active task, else the first pending one (expired leases
  /// count as pending). nullopt once nothing is left to hand out.
  std::optional<nlohmann::ordered_json> next(const std::string& annotator);

  SubmitOutcome submit(const std::string& doc_id, const std::string& annotator,
                       const std::string& class_name);

  AnnotationProgress progress() const;
  bool all_completed() const;
  std::map<std::string, ClassIndex> labels() const;
  nlohmann::ordered_json schema_json() const;
  nlohmann::ordered_json progress_json() const;

  /// Snapshot of one task, for tests and diagnostics.
  std::optional<AnnotationTask> task(const std::string& doc_id) const;

  /// Labels replayed from the journal at construction.
  std::size_t replayed() const { return replayed_; }

 private:
  void replay();
  void append_journal(const AnnotationTask& t);
  void expire_leases(std::chrono::system_clock::time_point now);
  nlohmann::ordered_json task_json(const AnnotationTask& t) const;

  TaskSchema schema_;
  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t> index_;
  std::filesystem::path journal_path_;
  Options opts_;
  std::size_t replayed_ = 0;
  mutable std::shared_mutex mu_;
};

/// {"doc_id": "class_name", ...}
nlohmann::ordered_json expert_labels_json(const std::map<std::string, ClassIndex>& labels,
                                          const TaskSchema& schema);
std::map<std::string, ClassIndex> parse_expert_labels(const nlohmann::json& j, const TaskSchema& schema);

/// HTTP front end of an AnnotationQueue.
///
///   GET  /api/tasks/next?annotator=<id>   task JSON, or 204 when none
///   POST /api/tasks/<doc_id>/label        {"annotator","class_name"} -> 200 | 409
///   GET  /api/progress                    {"completed","total","per_class"}
///   GET  /api/schema                      class names and task description
///   GET  /                                static UI bundle, when configured
class AnnotationServer {
 public:
  AnnotationServer(AnnotationQueue& queue, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  /// Throws IoError when the port is taken.
  int bind(const std::string& host, int port);
  /// Serves until stop(); with stop_when_complete, returns after the last
  /// task is labeled.
  void run(bool stop_when_complete);
  void stop();
  /// Invoked once, after the submission that completes the queue.
  void on_complete(std::function<void()> cb) { on_complete_ = std::move(cb); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  AnnotationQueue& queue_;
  std::function<void()> on_complete_;
  std::atomic<bool> completion_announced_{false};
};

}  // namespace redct::pipeline
