#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "redct/dataset_io.hpp"
#include "redct/model.hpp"
#include "redct/pipeline/annotation.hpp"
#include "redct/pipeline/commands.hpp"
#include "redct/pipeline/config.hpp"
#include "redct/pipeline/run_store.hpp"
#include "redct/synthetic.hpp"
#include "support.hpp"

using namespace redct;
using namespace redct::pipeline;
using json = nlohmann::json;
using test::TempDir;

namespace {

json base_config() {
  return json::parse(R"({
    "task": {"task_id": "synthetic", "class_names": ["alpha", "beta", "gamma"],
             "label_tokens": {"alpha": "Alpha", "beta": "Beta", "gamma": "Gamma"},
             "prompt_style": "zero_shot", "requires_target": false},
    "corpus": "corpus.jsonl",
    "run_root": "runs",
    "backend": {"kind": "simulator", "accuracy_per_class": [0.7, 0.7, 0.7],
                "correct": [8.0, 2.0], "wrong": [2.0, 2.0], "seed": 0},
    "sampling": {"strategy": "confidence_informed", "p": 0.1, "seed": 0},
    "training": {"epochs": 5, "learning_rate": 0.1, "l2": 1e-5, "batch_size": 64,
                 "soft_labels": true, "featurizer": {"dim": 4096}},
    "eval": {"seeds": [0, 1], "test_fraction": 0.2, "split_seed": 0, "baseline_trials": 20}
  })");
}

/// Writes corpus.jsonl and config.json into `dir` and loads the config.
PipelineConfig setup(const TempDir& dir, std::size_t docs = 300, json cfg = base_config()) {
  eval::SyntheticTaskConfig tc;
  tc.num_docs = docs;
  save_dataset(eval::make_synthetic_task(tc), dir / "corpus.jsonl");
  write_file_atomic(dir / "config.json", cfg.dump(2));
  return load_config(dir / "config.json");
}

/// Every regular file under `root` with its contents.
std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

/// A queue over the first `n` documents of a plain 3-class dataset.
struct QueueFixture {
  TempDir dir;
  Dataset ds{test::plain_schema(3)};
  sampler::SamplingManifest manifest;

  explicit QueueFixture(std::size_t n = 6) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = "q" + std::to_string(i);
      ds.add_document({id, "text " + std::to_string(i), std::nullopt, std::nullopt});
      ds.set_annotation(test::make_annotation(id, i % 3, 0.1 * static_cast<double>(i), 3));
      manifest.selected_doc_ids.push_back(id);
    }
    manifest.strategy = sampler::Strategy::confidence_informed;
    manifest.fraction = 1.0;
  }
  std::filesystem::path journal() const { return dir / "journal.jsonl"; }
  AnnotationQueue queue(AnnotationQueue::Options opts = {}) const { return {ds, manifest, journal(), opts}; }
};

int run_cli(const std::string& args, const std::string& env = "") {
  const auto cmd = env + (env.empty() ? "" : " ") + std::string(REDCT_CLI) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  TempDir dir;
  const auto cfg = setup(dir, 30);
  CHECK(cfg.corpus == dir / "corpus.jsonl");
  CHECK(cfg.run_root == dir / "runs");
  CHECK(cfg.schema.num_classes() == 3);
  CHECK(cfg.training_seeds() == std::vector<std::uint64_t>{0, 1});
  CHECK(cfg.sampling.p == 0.1);
  CHECK_FALSE(cfg.annotation.reveal_llm_label);

  auto with = [&](const std::function<void(json&)>& edit) {
    auto j = base_config();
    edit(j);
    return parse_config(j, dir.path());
  };
  CHECK_THROWS_WITH_AS(with([](json& j) { j["backend"] = {{"kind", "http"}, {"api_key", "sk-123"}}; }),
                       doctest::Contains("api_key_env"), ConfigError);
  CHECK_THROWS_AS(with([](json& j) { j["sampling"]["p"] = 0.0; }), ConfigError);
  CHECK_THROWS_AS(with([](json& j) { j["backend"]["kind"] = "carrier-pigeon"; }), ConfigError);
  CHECK_THROWS_AS(with([](json& j) { j["eval"]["test_fraction"] = 1.0; }), ConfigError);
  CHECK_THROWS_AS(with([](json& j) { j.erase("task"); }), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "nope.json"), ConfigError);
  write_file_atomic(dir / "broken.json", "{");
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
}

TEST_CASE("run store stage DAG") {
  TempDir dir;
  RunStore store(dir.path(), "r1");
  CHECK_FALSE(store.exists());
  CHECK_THROWS_AS(RunStore(dir.path(), "../escape"), ConfigError);

  try {
    store.require_predecessors(Stage::eval);
    FAIL("expected StageOrderError");
  } catch (const StageOrderError& e) {
    CHECK(e.missing() == std::vector<Stage>{Stage::label, Stage::sample, Stage::annotate, Stage::fuse, Stage::train});
    const std::string msg = e.what();
    for (const char* s : {"label", "sample", "annotate", "fuse", "train"}) CHECK(msg.find(s) != std::string::npos);
  }
  CHECK(predecessors(Stage::export_model) == std::vector<Stage>{Stage::train});
  CHECK(to_string(Stage::export_model) == "export");

  for (auto s : {Stage::label, Stage::sample, Stage::annotate}) {
    store.begin(s, "fp-" + to_string(s));
    write_file_atomic(store.path(to_string(s) + ".out"), "x");
    store.finish(s, {{"out", to_string(s) + ".out"}});
  }
  CHECK_NOTHROW(store.require_predecessors(Stage::fuse));
  CHECK(store.up_to_date(Stage::sample, "fp-sample"));
  CHECK_FALSE(store.up_to_date(Stage::sample, "other"));

  // reloading gives the same manifest
  RunStore again(dir.path(), "r1");
  CHECK(again.complete(Stage::annotate));
  CHECK(again.stage(Stage::label)->outputs.at("out") == "label.out");

  // a deleted output makes the stage stale
  std::filesystem::remove(again.path("annotate.out"));
  CHECK_FALSE(again.up_to_date(Stage::annotate, "fp-annotate"));

  // restarting a stage clears everything downstream
  again.begin(Stage::sample, "fp-new");
  CHECK_FALSE(again.complete(Stage::sample));
  CHECK_FALSE(again.stage(Stage::annotate).has_value());
  CHECK(again.complete(Stage::label));
  again.fail(Stage::sample, "boom");
  CHECK(RunStore(dir.path(), "r1").stage(Stage::sample)->status == "failed");
}

TEST_CASE("annotation queue hands out disjoint tasks to concurrent annotators") {
  QueueFixture f(40);
  auto q = f.queue();
  std::mutex mu;
  std::vector<std::string> seen;
  std::vector<std::thread> workers;
  for (int w = 0; w < 8; ++w) {
    workers.emplace_back([&, w] {
      const auto who = "ann" + std::to_string(w);
      while (auto t = q.next(who)) {
        const auto id = (*t)["doc_id"].get<std::string>();
        {
          std::lock_guard lock(mu);
          seen.push_back(id);
        }
        REQUIRE(q.submit(id, who, "c1").status == SubmitStatus::accepted);
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK(seen.size() == 40);
  CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == 40);
  CHECK(q.all_completed());
  CHECK(q.progress().per_class == std::vector<std::size_t>{0, 40, 0});
}

TEST_CASE("annotation queue leases") {
  QueueFixture f(3);
  auto now = std::chrono::system_clock::time_point{} + std::chrono::hours(1000);
  AnnotationQueue::Options opts;
  opts.lease = std::chrono::seconds(60);
  opts.clock = [&] { return now; };
  auto q = f.queue(opts);

  const auto a = q.next("alice");
  REQUIRE(a);
  const auto id = (*a)["doc_id"].get<std::string>();
  CHECK(id == "q0");
  CHECK((*q.next("alice"))["doc_id"] == id);  // active lease comes back
  CHECK((*q.next("bob"))["doc_id"] == "q1");

  SUBCASE("lease held by another annotator") {
    CHECK(q.submit(id, "bob", "c0").status == SubmitStatus::conflict);
  }
  SUBCASE("expired lease: 409, then the task goes to someone else") {
    now += std::chrono::seconds(61);
    CHECK(q.submit(id, "alice", "c0").status == SubmitStatus::conflict);
    CHECK(q.task(id)->state == TaskState::pending);
    CHECK((*q.next("carol"))["doc_id"] == id);
    CHECK(q.submit(id, "carol", "c2").status == SubmitStatus::accepted);
  }
  SUBCASE("duplicate submission") {
    CHECK(q.submit(id, "alice", "c0").status == SubmitStatus::accepted);
    CHECK(q.submit(id, "alice", "c0").status == SubmitStatus::conflict);
    CHECK(q.labels().at(id) == 0);
  }
  SUBCASE("unassigned, unknown and invalid submissions") {
    CHECK(q.submit("q2", "alice", "c0").status == SubmitStatus::conflict);
    CHECK(q.submit("nope", "alice", "c0").status == SubmitStatus::not_found);
    CHECK(q.submit(id, "alice", "c9").status == SubmitStatus::invalid);
  }
}

TEST_CASE("annotation journal replay") {
  QueueFixture f(5);
  {
    auto q = f.queue();
    for (int i = 0; i < 3; ++i) {
      const auto id = (*q.next("a"))["doc_id"].get<std::string>();
      REQUIRE(q.submit(id, "a", "c2").status == SubmitStatus::accepted);
    }
  }
  const auto intact = read_file(f.journal());
  CHECK(std::count(intact.begin(), intact.end(), '\n') == 3);

  SUBCASE("clean restart") {
    auto q = f.queue();
    CHECK(q.replayed() == 3);
    CHECK(q.progress().completed == 3);
    CHECK((*q.next("b"))["doc_id"] == "q3");
  }
  SUBCASE("torn final line from a crash mid-append") {
    {
      std::ofstream out(f.journal(), std::ios::app);
      out << R"({"doc_id":"q3","class_na)";
    }
    auto q = f.queue();
    CHECK(q.replayed() == 3);
    CHECK(q.task("q3")->state == TaskState::pending);
    CHECK(read_file(f.journal()) == intact);  // the torn tail is cut off
    const auto id = (*q.next("b"))["doc_id"].get<std::string>();
    CHECK(q.submit(id, "b", "c0").status == SubmitStatus::accepted);
    CHECK(f.queue().replayed() == 4);
  }
  SUBCASE("journal naming a document outside the manifest") {
    std::ofstream(f.journal(), std::ios::app) << R"({"doc_id":"zzz","class_name":"c0","annotator":"x"})" << '\n';
    CHECK_THROWS_WITH_AS(f.queue(), doctest::Contains("zzz"), DataError);
  }
}

TEST_CASE("expert label file round trip") {
  const auto schema = test::plain_schema(3);
  const std::map<std::string, ClassIndex> labels{{"a", 0}, {"b", 2}};
  CHECK(parse_expert_labels(json::parse(expert_labels_json(labels, schema).dump()), schema) == labels);
  CHECK_THROWS_AS(parse_expert_labels(json::parse(R"({"a":"c7"})"), schema), Error);
  CHECK_THROWS_AS(parse_expert_labels(json::parse("[1]"), schema), DataError);
}

TEST_CASE("annotation HTTP API") {
  QueueFixture f(4);
  AnnotationQueue::Options opts;
  opts.reveal_llm_label = false;
  auto q = f.queue(opts);
  AnnotationServer server(q);
  const int port = server.bind("127.0.0.1", 0);
  std::atomic<bool> completed{false};
  server.on_complete([&] { completed = true; });
  std::thread th([&] { server.run(true); });

  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(5);
  for (int i = 0; i < 100 && !cli.Get("/api/progress"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));

  auto schema = cli.Get("/api/schema");
  REQUIRE(schema);
  CHECK(schema->status == 200);
  CHECK(json::parse(schema->body)["class_names"] == json::array({"c0", "c1", "c2"}));

  CHECK(cli.Get("/api/tasks/next")->status == 400);

  auto post = [&](const std::string& id, const std::string& who, const std::string& cls) {
    return cli.Post("/api/tasks/" + id + "/label", json{{"annotator", who}, {"class_name", cls}}.dump(),
                    "application/json");
  };

  std::set<std::string> done;
  for (int i = 0; i < 4; ++i) {
    auto res = cli.Get("/api/tasks/next?annotator=ann");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const auto task = json::parse(res->body);
    CHECK_FALSE(task.contains("llm_suggestion"));  // hidden by default
    CHECK(task["class_names"].size() == 3);
    const auto id = task["doc_id"].get<std::string>();
    if (i == 0) {
      CHECK(post(id, "other", "c0")->status == 409);
      CHECK(post(id, "ann", "bogus")->status == 400);
      CHECK(post("missing", "ann", "c0")->status == 404);
      CHECK(cli.Post("/api/tasks/" + id + "/label", "not json", "application/json")->status == 400);
    }
    auto ok = post(id, "ann", "c1");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    CHECK(json::parse(ok->body)["completed"] == i + 1);
    if (i == 0) CHECK(post(id, "ann", "c1")->status == 409);
    done.insert(id);
  }
  th.join();  // stops by itself after the last label
  CHECK(completed);
  CHECK(done.size() == 4);
  CHECK(q.progress_json()["done"] == true);
  CHECK(q.progress_json()["per_class"]["c1"] == 4);
}

TEST_CASE("annotation HTTP API: 204 when empty, reveal flag, port in use") {
  QueueFixture f(1);
  AnnotationQueue::Options opts;
  opts.reveal_llm_label = true;
  auto q = f.queue(opts);
  AnnotationServer server(q);
  const int port = server.bind("127.0.0.1", 0);
  std::thread th([&] { server.run(false); });
  httplib::Client cli("127.0.0.1", port);
  for (int i = 0; i < 100 && !cli.Get("/api/progress"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));

  auto res = cli.Get("/api/tasks/next?annotator=a");
  REQUIRE(res);
  const auto task = json::parse(res->body);
  REQUIRE(task.contains("llm_suggestion"));
  CHECK(task["llm_suggestion"]["class_name"] == "c0");
  CHECK(cli.Get("/api/tasks/next?annotator=b")->status == 204);

  QueueFixture g(1);
  auto q2 = g.queue();
  AnnotationServer clash(q2);
  CHECK_THROWS_AS(clash.bind("127.0.0.1", port), IoError);

  server.stop();
  th.join();
}

TEST_CASE("stage commands: full run, idempotent reruns, DAG enforcement") {
  TempDir dir;
  const auto cfg = setup(dir, 300);
  const std::string run = "run1";

  CHECK_THROWS_AS(cmd_train(cfg, run), StageOrderError);

  CHECK_FALSE(cmd_label(cfg, run).skipped);
  try {
    cmd_eval(cfg, run);
    FAIL("expected StageOrderError");
  } catch (const StageOrderError& e) {
    CHECK(e.missing() == std::vector<Stage>{Stage::sample, Stage::annotate, Stage::fuse, Stage::train});
  }
  CHECK_FALSE(cmd_sample(cfg, run).skipped);
  AnnotateOptions ao;
  ao.mode = AnnotateOptions::Mode::from_gold;
  CHECK_FALSE(cmd_annotate(cfg, run, ao).skipped);
  CHECK_FALSE(cmd_train(cfg, run).skipped);
  CHECK_FALSE(cmd_eval(cfg, run).skipped);
  CHECK_FALSE(cmd_export(cfg, run, {dir / "edge.bin", std::nullopt}).skipped);

  const auto run_dir = cfg.run_root / run;
  for (const char* f : {"manifest.json", "annotated.jsonl", "split.json", "sampling_manifest.json",
                        "expert_labels.json", "fused.jsonl", "models/model_seed_0.bin", "models/model_seed_1.bin",
                        "eval_report.json", "confidence_histogram.csv"}) {
    CHECK_MESSAGE(std::filesystem::exists(run_dir / f), f);
  }
  const auto report = json::parse(read_file(run_dir / "eval_report.json"));
  CHECK(report["llm_weighted_f1"].get<double>() > 0.5);

  // every stage again: nothing runs, nothing changes
  const auto before = snapshot(run_dir);
  CHECK(cmd_label(cfg, run).skipped);
  CHECK(cmd_sample(cfg, run).skipped);
  CHECK(cmd_annotate(cfg, run, ao).skipped);
  CHECK(cmd_train(cfg, run).skipped);
  CHECK(cmd_eval(cfg, run).skipped);
  CHECK(snapshot(run_dir) == before);

  // a new expert fraction invalidates everything after sampling
  SampleOptions so;
  so.p = 0.2;
  CHECK_FALSE(cmd_sample(cfg, run, so).skipped);
  RunStore store(cfg.run_root, run);
  CHECK(store.complete(Stage::label));
  CHECK_FALSE(store.stage(Stage::annotate).has_value());
  CHECK_FALSE(store.stage(Stage::train).has_value());
  CHECK_THROWS_AS(cmd_train(cfg, run), StageOrderError);

  // the exported model serves edge inference
  write_file_atomic(dir / "in.jsonl", R"({"doc_id":"x1","text":"anything here"})" "\n");
  InferOptions io{dir / "edge.bin", dir / "in.jsonl", dir / "out.jsonl", cfg.schema};
  cmd_infer(io);
  const auto pred = json::parse(read_file(dir / "out.jsonl"));
  CHECK(pred["doc_id"] == "x1");
  CHECK(pred["probs"].size() == 3);
  io.schema = test::plain_schema(3);
  CHECK_THROWS_AS(cmd_infer(io), ConfigError);
}

TEST_CASE("annotate through the HTTP service completes the stage") {
  TempDir dir;
  const auto cfg = setup(dir, 200);
  const std::string run = "served";
  cmd_label(cfg, run);
  cmd_sample(cfg, run);

  std::atomic<int> port{0};
  AnnotateOptions ao;
  ao.mode = AnnotateOptions::Mode::serve;
  ao.port = 0;
  ao.on_listening = [&](int p) { port = p; };
  std::thread labeler([&] {
    while (port == 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    httplib::Client cli("127.0.0.1", port);
    for (int i = 0; i < 100 && !cli.Get("/api/progress"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    while (auto res = cli.Get("/api/tasks/next?annotator=sme")) {
      if (res->status != 200) break;
      const auto id = json::parse(res->body)["doc_id"].get<std::string>();
      cli.Post("/api/tasks/" + id + "/label", json{{"annotator", "sme"}, {"class_name", "beta"}}.dump(),
               "application/json");
    }
  });
  const auto out = cmd_annotate(cfg, run, ao);
  labeler.join();
  CHECK_FALSE(out.skipped);
  const auto labels = json::parse(read_file(cfg.run_root / run / "expert_labels.json"));
  const auto manifest = json::parse(read_file(cfg.run_root / run / "sampling_manifest.json"));
  CHECK(labels.size() == manifest["selected_doc_ids"].size());
  for (const auto& [id, cls] : labels.items()) CHECK(cls == "beta");
  CHECK_FALSE(cmd_train(cfg, run).skipped);
}

TEST_CASE("command line: exit codes and network-free inference") {
  TempDir dir;
  setup(dir, 200);
  const auto cfg = (dir / "config.json").string();
  const auto base = "--config " + cfg + " --run cli";

  CHECK(run_cli("") == 2);
  CHECK(run_cli("eval " + base) == 2);
  CHECK(run_cli("label --config " + (dir / "missing.json").string() + " --run cli") == 2);
  auto bad = base_config();
  bad["corpus"] = "absent.jsonl";
  write_file_atomic(dir / "bad.json", bad.dump());
  CHECK(run_cli("label --config " + (dir / "bad.json").string() + " --run cli") == 2);

  CHECK(run_cli("label " + base) == 0);
  CHECK(run_cli("sample " + base) == 0);
  CHECK(run_cli("annotate --from-gold " + base) == 0);
  CHECK(run_cli("train " + base) == 0);
  CHECK(run_cli("export --out " + (dir / "m.bin").string() + " " + base) == 0);
  CHECK(run_cli("sweep --p 0.1 --settings CI_SL --weight-arg bogus " + base) == 2);
  CHECK(run_cli("sweep --p 0.1 --settings CI_SL --weight-arg log_probability " + base) == 0);
  CHECK(nlohmann::json::parse(read_file(dir / "runs" / "cli" / "sweep.json"))["weight_argument"] == "log_probability");

  write_file_atomic(dir / "docs.jsonl", R"({"doc_id":"e1","text":"edge text"})" "\n"
                                        R"({"doc_id":"e2","text":"more edge text"})" "\n");
  const std::string nonet = std::string("LD_PRELOAD=") + REDCT_NONET;
  // the shim really does block sockets: the annotation service cannot start
  const auto blocked = "--config " + cfg + " --run blocked";
  CHECK(run_cli("label " + blocked, nonet) == 0);
  CHECK(run_cli("sample " + blocked, nonet) == 0);
  CHECK(run_cli("annotate --port 0 " + blocked, nonet) == 1);
  CHECK(run_cli("infer --model " + (dir / "m.bin").string() + " --input " + (dir / "docs.jsonl").string() +
                    " --output " + (dir / "preds.jsonl").string() + " --config " + cfg,
                nonet) == 0);
  const auto preds = read_file(dir / "preds.jsonl");
  CHECK(std::count(preds.begin(), preds.end(), '\n') == 2);
}
