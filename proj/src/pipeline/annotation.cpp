#include "redct/pipeline/annotation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <ctime>
#include <mutex>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "redct/common.hpp"

namespace redct::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;
using TimePoint = std::chrono::system_clock::time_point;

std::string to_string(TaskState s) {
  switch (s) {
    case TaskState::pending: return "pending";
    case TaskState::assigned: return "assigned";
    case TaskState::completed: return "completed";
  }
  return "";
}

namespace {

std::string iso_time(TimePoint t) {
  const auto secs = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

AnnotationQueue::AnnotationQueue(const Dataset& ds, const sampler::SamplingManifest& manifest,
                                 std::filesystem::path journal_path, Options opts)
    : schema_(ds.schema()), journal_path_(std::move(journal_path)), opts_(std::move(opts)) {
  if (!opts_.clock) opts_.clock = [] { return std::chrono::system_clock::now(); };
  if (opts_.lease.count() <= 0) throw ConfigError("annotation lease must be positive");
  for (const auto& id : manifest.selected_doc_ids) {
    const auto* doc = ds.find(id);
    if (!doc) throw DataError("sampling manifest names unknown document '" + id + "'");
    AnnotationTask t;
    t.doc_id = doc->doc_id;
    t.text = doc->text;
    t.target = doc->target;
    if (const auto* ann = ds.annotation(id)) {
      t.llm_label = ann->predicted_class;
      t.llm_confidence = ann->confidence;
    }
    index_[id] = tasks_.size();
    tasks_.push_back(std::move(t));
  }
  replay();
}

void AnnotationQueue::replay() {
  if (!std::filesystem::exists(journal_path_)) return;
  const auto content = read_file(journal_path_);
  std::size_t pos = 0;
  std::size_t lineno = 0;
  std::size_t good_end = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    ++lineno;
    if (nl == std::string::npos) {
      // Torn tail from a crash mid-append: the label was never acknowledged.
      spdlog::warn("journal {}: ignoring incomplete final line {}", journal_path_.string(), lineno);
      break;
    }
    const auto line = content.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) {
      good_end = pos;
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("journal " + journal_path_.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
    const auto doc_id = j.at("doc_id").get<std::string>();
    const auto it = index_.find(doc_id);
    if (it == index_.end()) {
      throw DataError("journal " + journal_path_.string() + " line " + std::to_string(lineno) +
                      ": document '" + doc_id + "' is not in the sampling manifest");
    }
    auto& t = tasks_[it->second];
    t.state = TaskState::completed;
    t.submitted_label = schema_.class_index_or_throw(j.at("class_name").get<std::string>());
    t.submitted_by = j.value("annotator", std::string());
    t.assigned_to.reset();
    ++replayed_;
    good_end = pos;
  }
  if (good_end < content.size()) std::filesystem::resize_file(journal_path_, good_end);
}

void AnnotationQueue::append_journal(const AnnotationTask& t) {
  ordered_json j;
  j["doc_id"] = t.doc_id;
  j["class_name"] = schema_.class_name(*t.submitted_label);
  j["annotator"] = t.submitted_by.value_or("");
  j["at"] = iso_time(opts_.clock());
  const auto line = j.dump() + "\n";

  if (journal_path_.has_parent_path()) std::filesystem::create_directories(journal_path_.parent_path());
  const int fd = ::open(journal_path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open journal " + journal_path_.string() + ": " + std::strerror(errno));
  std::size_t off = 0;
  while (off < line.size()) {
    const auto n = ::write(fd, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      const auto err = errno;
      ::close(fd);
      throw IoError("cannot write journal " + journal_path_.string() + ": " + std::strerror(err));
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    const auto err = errno;
    ::close(fd);
    throw IoError("cannot sync journal " + journal_path_.string() + ": " + std::strerror(err));
  }
  ::close(fd);
}

void AnnotationQueue::expire_leases(TimePoint now) {
  for (auto& t : tasks_) {
    if (t.state == TaskState::assigned && now >= t.lease_expiry) {
      t.state = TaskState::pending;
      t.assigned_to.reset();
    }
  }
}

ordered_json AnnotationQueue::task_json(const AnnotationTask& t) const {
  ordered_json j;
  j["doc_id"] = t.doc_id;
  j["text"] = t.text;
  if (t.target) j["target"] = *t.target;
  j["class_names"] = schema_.class_names();
  j["state"] = to_string(t.state);
  if (t.assigned_to) j["assigned_to"] = *t.assigned_to;
  if (t.state == TaskState::assigned) j["lease_expiry"] = iso_time(t.lease_expiry);
  if (opts_.reveal_llm_label && t.llm_label) {
    j["llm_suggestion"] = {{"class_name", schema_.class_name(*t.llm_label)},
                           {"confidence", t.llm_confidence.value_or(0.0)}};
  }
  return j;
}

std::optional<ordered_json> AnnotationQueue::next(const std::string& annotator) {
  if (annotator.empty()) throw DataError("annotator id is required");
  std::unique_lock lock(mu_);
  const auto now = opts_.clock();
  expire_leases(now);
  for (const auto& t : tasks_) {
    if (t.state == TaskState::assigned && t.assigned_to == annotator) return task_json(t);
  }
  for (auto& t : tasks_) {
    if (t.state != TaskState::pending) continue;
    t.state = TaskState::assigned;
    t.assigned_to = annotator;
    t.lease_expiry = now + opts_.lease;
    return task_json(t);
  }
  return std::nullopt;
}

SubmitOutcome AnnotationQueue::submit(const std::string& doc_id, const std::string& annotator,
                                      const std::string& class_name) {
  if (annotator.empty()) return {SubmitStatus::invalid, "annotator id is required"};
  const auto label = schema_.class_index(class_name);
  if (!label) return {SubmitStatus::invalid, "unknown class '" + class_name + "'"};

  std::unique_lock lock(mu_);
  const auto it = index_.find(doc_id);
  if (it == index_.end()) return {SubmitStatus::not_found, "no task for document '" + doc_id + "'"};
  auto& t = tasks_[it->second];
  const auto now = opts_.clock();
  switch (t.state) {
    case TaskState::completed:
      return {SubmitStatus::conflict, "task '" + doc_id + "' is already labeled"};
    case TaskState::pending:
      return {SubmitStatus::conflict, "task '" + doc_id + "' is not leased to '" + annotator + "'"};
    case TaskState::assigned:
      break;
  }
  if (now >= t.lease_expiry) {
    t.state = TaskState::pending;
    t.assigned_to.reset();
    return {SubmitStatus::conflict, "lease on '" + doc_id + "' expired; the task was returned to the queue"};
  }
  if (t.assigned_to != annotator) {
    return {SubmitStatus::conflict, "task '" + doc_id + "' is leased to another annotator"};
  }
  AnnotationTask done = t;
  done.state = TaskState::completed;
  done.submitted_label = *label;
  done.submitted_by = annotator;
  done.assigned_to.reset();
  append_journal(done);  // durable before acknowledged
  t = std::move(done);
  return {SubmitStatus::accepted, "ok"};
}

AnnotationProgress AnnotationQueue::progress() const {
  std::shared_lock lock(mu_);
  AnnotationProgress p;
  p.total = tasks_.size();
  p.per_class.assign(schema_.num_classes(), 0);
  for (const auto& t : tasks_) {
    if (t.state != TaskState::completed) continue;
    ++p.completed;
    ++p.per_class[*t.submitted_label];
  }
  return p;
}

bool AnnotationQueue::all_completed() const {
  const auto p = progress();
  return p.completed == p.total;
}

std::map<std::string, ClassIndex> AnnotationQueue::labels() const {
  std::shared_lock lock(mu_);
  std::map<std::string, ClassIndex> out;
  for (const auto& t : tasks_) {
    if (t.state == TaskState::completed) out[t.doc_id] = *t.submitted_label;
  }
  return out;
}

std::optional<AnnotationTask> AnnotationQueue::task(const std::string& doc_id) const {
  std::shared_lock lock(mu_);
  const auto it = index_.find(doc_id);
  if (it == index_.end()) return std::nullopt;
  return tasks_[it->second];
}

ordered_json AnnotationQueue::schema_json() const {
  ordered_json j;
  j["task_id"] = schema_.task_id();
  j["class_names"] = schema_.class_names();
  j["requires_target"] = schema_.requires_target();
  j["description"] = "Label each " + schema_.task_id() + " example with one of: " + [&] {
    std::string s;
    for (const auto& c : schema_.class_names()) s += (s.empty() ? "" : ", ") + c;
    return s;
  }();
  j["reveal_llm_label"] = opts_.reveal_llm_label;
  return j;
}

ordered_json AnnotationQueue::progress_json() const {
  const auto p = progress();
  ordered_json j;
  j["completed"] = p.completed;
  j["total"] = p.total;
  ordered_json per = ordered_json::object();
  for (std::size_t k = 0; k < p.per_class.size(); ++k) per[schema_.class_name(k)] = p.per_class[k];
  j["per_class"] = per;
  j["done"] = p.completed == p.total;
  return j;
}

ordered_json expert_labels_json(const std::map<std::string, ClassIndex>& labels, const TaskSchema& schema) {
  ordered_json j = ordered_json::object();
  for (const auto& [id, c] : labels) j[id] = schema.class_name(c);
  return j;
}

std::map<std::string, ClassIndex> parse_expert_labels(const json& j, const TaskSchema& schema) {
  if (!j.is_object()) throw DataError("expert labels must be a JSON object {doc_id: class_name}");
  std::map<std::string, ClassIndex> out;
  for (const auto& [id, v] : j.items()) {
    if (!v.is_string()) throw DataError("expert label for '" + id + "' must be a class name");
    out[id] = schema.class_index_or_throw(v.get<std::string>());
  }
  return out;
}

// ---------------------------------------------------------------------------

struct AnnotationServer::Impl {
  httplib::Server server;
  bool stop_when_complete = false;
};

AnnotationServer::AnnotationServer(AnnotationQueue& queue, std::optional<std::filesystem::path> ui_dir)
    : impl_(std::make_unique<Impl>()), queue_(queue) {
  auto& srv = impl_->server;
  // httplib defaults to SO_REUSEPORT, which would let a second service
  // share the port and split the queue; plain SO_REUSEADDR fails instead.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  const auto send_json = [](httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };

  srv.Get("/api/tasks/next", [this, send_json](const httplib::Request& req, httplib::Response& res) {
    const auto annotator = req.get_param_value("annotator");
    if (annotator.empty()) return send_json(res, 400, {{"error", "missing annotator parameter"}});
    auto task = queue_.next(annotator);
    if (!task) {
      res.status = 204;
      return;
    }
    send_json(res, 200, *task);
  });

  srv.Post(R"(/api/tasks/([^/]+)/label)", [this, send_json](const httplib::Request& req, httplib::Response& res) {
    const auto doc_id = httplib::detail::decode_url(req.matches[1].str(), false);
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return send_json(res, 400, {{"error", "body must be JSON {annotator, class_name}"}});
    }
    if (!body.is_object() || !body.contains("annotator") || !body.contains("class_name") ||
        !body["annotator"].is_string() || !body["class_name"].is_string()) {
      return send_json(res, 400, {{"error", "body must be JSON {annotator, class_name}"}});
    }
    SubmitOutcome out;
    try {
      out = queue_.submit(doc_id, body["annotator"].get<std::string>(), body["class_name"].get<std::string>());
    } catch (const std::exception& e) {
      spdlog::error("label submission for {} failed: {}", doc_id, e.what());
      return send_json(res, 500, {{"error", e.what()}});
    }
    switch (out.status) {
      case SubmitStatus::accepted: send_json(res, 200, queue_.progress_json()); break;
      case SubmitStatus::conflict: send_json(res, 409, {{"error", out.message}}); break;
      case SubmitStatus::not_found: send_json(res, 404, {{"error", out.message}}); break;
      case SubmitStatus::invalid: send_json(res, 400, {{"error", out.message}}); break;
    }
    if (out.status == SubmitStatus::accepted && queue_.all_completed() &&
        !completion_announced_.exchange(true)) {
      spdlog::info("all {} annotation tasks completed", queue_.progress().total);
      if (on_complete_) on_complete_();
      if (impl_->stop_when_complete) impl_->server.stop();
    }
  });

  srv.Get("/api/progress", [this, send_json](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, queue_.progress_json());
  });
  srv.Get("/api/schema", [this, send_json](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, queue_.schema_json());
  });

  if (ui_dir) {
    if (!std::filesystem::is_directory(*ui_dir)) {
      throw ConfigError("UI directory " + ui_dir->string() + " does not exist");
    }
    srv.set_mount_point("/", ui_dir->string());
  }
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int bound = srv.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind annotation service on " + host);
    return bound;
  }
  if (!srv.bind_to_port(host, port)) {
    throw IoError("cannot bind annotation service to " + host + ":" + std::to_string(port) +
                  " (port in use?)");
  }
  return port;
}

void AnnotationServer::run(bool stop_when_complete) {
  impl_->stop_when_complete = stop_when_complete;
  if (stop_when_complete && queue_.all_completed()) {
    completion_announced_ = true;
    if (on_complete_) on_complete_();
    return;
  }
  impl_->server.listen_after_bind();
}

void AnnotationServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace redct::pipeline
