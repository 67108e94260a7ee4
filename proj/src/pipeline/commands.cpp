#include "redct/pipeline/commands.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "redct/common.hpp"
#include "redct/dataset_io.hpp"
#include "redct/labeler.hpp"
#include "redct/metrics.hpp"
#include "redct/model.hpp"
#include "redct/pipeline/annotation.hpp"
#include "redct/prompt.hpp"
#include "redct/softlabel.hpp"

namespace redct::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kAnnotated = "annotated.jsonl";
constexpr const char* kSplit = "split.json";
constexpr const char* kSampling = "sampling_manifest.json";
constexpr const char* kJournal = "annotation_journal.jsonl";
constexpr const char* kExpertLabels = "expert_labels.json";
constexpr const char* kFused = "fused.jsonl";
constexpr const char* kEvalReport = "eval_report.json";
constexpr const char* kHistogram = "confidence_histogram.csv";
constexpr const char* kMatrix = "matrix.json";

// json (not ordered_json) sorts keys, so dumps are canonical.
std::string fingerprint(const json& j) { return to_hex(fnv1a64(j.dump())); }

std::string model_file(std::uint64_t seed) { return "models/model_seed_" + std::to_string(seed) + ".bin"; }

std::string stage_fingerprint(const RunStore& store, Stage s) {
  auto rec = store.stage(s);
  return rec ? rec->fingerprint : std::string();
}

/// begin/finish bracket that marks the stage failed on any exception.
template <typename Fn>
StageOutcome run_stage(RunStore& store, Stage s, const std::string& fp, Fn&& body) {
  if (store.up_to_date(s, fp)) {
    return {true, to_string(s) + ": up to date (run '" + store.run_id() + "')"};
  }
  store.begin(s, fp);
  try {
    return body();
  } catch (const std::exception& e) {
    store.fail(s, e.what());
    throw;
  }
}

RunStore open_existing(const PipelineConfig& cfg, const std::string& run_id, Stage s) {
  RunStore store(cfg.run_root, run_id);
  if (!store.exists()) {
    std::vector<Stage> missing;
    for (auto st : all_stages()) {
      if (st == s) break;
      if (s == Stage::export_model && (st == Stage::eval)) continue;
      missing.push_back(st);
    }
    std::string names;
    for (auto m : missing) names += (names.empty() ? "" : ", ") + to_string(m);
    throw StageOrderError("run '" + run_id + "' does not exist under " + cfg.run_root.string() +
                              "; run these stages first: " + names,
                          missing);
  }
  store.require_predecessors(s);
  return store;
}

Dataset load_annotated(const RunStore& store, const TaskSchema& schema) {
  return load_dataset(store.path(kAnnotated), schema);
}

eval::TrainTestSplit load_split(const RunStore& store, const Dataset& annotated) {
  const auto j = json::parse(read_file(store.path(kSplit)));
  const auto indices = [&](const char* key) {
    std::vector<std::size_t> out;
    for (const auto& id : j.at(key)) {
      auto idx = annotated.index_of(id.get<std::string>());
      if (!idx) throw DataError(std::string(kSplit) + " names unknown document '" + id.get<std::string>() + "'");
      out.push_back(*idx);
    }
    return out;
  };
  return {annotated.subset(indices("train")), annotated.subset(indices("test"))};
}

std::unique_ptr<labeler::LabelingBackend> make_backend(const PipelineConfig& cfg) {
  if (cfg.backend.kind == BackendSettings::Kind::http) {
    return std::make_unique<labeler::HttpBackend>(cfg.backend.http);
  }
  return std::make_unique<labeler::SimulatorBackend>(cfg.schema, cfg.backend.simulator);
}

std::string run_setting_label(sampler::Strategy strategy, bool soft, double p) {
  const auto setting = strategy == sampler::Strategy::confidence_informed
                           ? (soft ? eval::Setting::CI_SL : eval::Setting::CI)
                           : eval::Setting::RS;
  auto name = eval::display_name(setting, p);
  if (strategy == sampler::Strategy::random && soft) name += " (soft LLM labels)";
  return name;
}

std::vector<ClassIndex> gold_or_throw(const Dataset& ds, const std::string& what) {
  std::vector<ClassIndex> gold;
  gold.reserve(ds.size());
  std::size_t missing = 0;
  for (const auto& d : ds.documents()) {
    if (d.gold_label) {
      gold.push_back(*d.gold_label);
    } else {
      ++missing;
    }
  }
  if (missing > 0) {
    throw DataError(fmt::format("{}: {} of {} documents have no gold label", what, missing, ds.size()));
  }
  return gold;
}

}  // namespace

StageOutcome cmd_label(const PipelineConfig& cfg, const std::string& run_id, const LabelOptions& opts) {
  if (!std::filesystem::exists(cfg.corpus)) {
    throw ConfigError("corpus file not found: " + cfg.corpus.string());
  }
  std::optional<labeler::PromptTemplate> tmpl;
  std::string template_text;
  if (cfg.template_path) {
    if (!std::filesystem::exists(*cfg.template_path)) {
      throw ConfigError("template file not found: " + cfg.template_path->string());
    }
    tmpl = labeler::load_template(*cfg.template_path);
    template_text = labeler::format_template(*tmpl);
  } else if (cfg.backend.kind == BackendSettings::Kind::http || cfg.backend.simulator_via_prompts) {
    template_text = labeler::format_template(labeler::template_for(cfg.schema));
  }
  const bool direct_simulation =
      cfg.backend.kind == BackendSettings::Kind::simulator && !cfg.backend.simulator_via_prompts;
  // Constructed before anything is written so config errors surface first.
  auto backend = direct_simulation ? nullptr : make_backend(cfg);

  RunStore store(cfg.run_root, run_id);
  json fp_in;
  fp_in["schema"] = cfg.schema.to_json();
  fp_in["prompt_style"] = to_string(cfg.schema.prompt_style());
  fp_in["corpus"] = to_hex(file_fingerprint(cfg.corpus));
  fp_in["backend"] = cfg.raw.at("backend");
  fp_in["template"] = template_text;
  fp_in["split"] = {cfg.eval.test_fraction, cfg.eval.split_seed};
  const auto fp = fingerprint(fp_in);

  return run_stage(store, Stage::label, fp, [&]() -> StageOutcome {
    const auto corpus = load_dataset(cfg.corpus, cfg.schema);
    if (corpus.empty()) throw DataError("corpus " + cfg.corpus.string() + " has no documents");

    Dataset annotated;
    json details;
    std::string backend_id;
    if (direct_simulation) {
      annotated = labeler::simulate_labels(corpus, cfg.backend.simulator);
      backend_id = labeler::SimulatorBackend(cfg.schema, cfg.backend.simulator).id();
    } else {
      labeler::ResponseCache cache(cfg.labeling.cache_dir);
      labeler::LabelOptions lo;
      lo.retries = cfg.labeling.retries;
      lo.backoff = std::chrono::milliseconds(cfg.labeling.backoff_ms);
      lo.cache = &cache;
      lo.prompt_template = tmpl;
      auto result = labeler::label_corpus(corpus, *backend, opts.parallelism.value_or(cfg.labeling.parallelism), lo);
      annotated = std::move(result.dataset);
      backend_id = backend->id();
      details["cache_hits"] = cache.hits();
      details["cache_misses"] = cache.misses();
      details["prompt_tokens"] = result.prompt_tokens;
      details["completion_tokens"] = result.completion_tokens;
      details["backend_failures"] = result.failures.size();
      for (const auto& f : result.failures) {
        spdlog::warn("{}: abstained after {} attempts: {}", f.doc_id, f.attempts, f.message);
      }
    }
    std::size_t abstained = 0;
    for (const auto& [id, ann] : annotated.annotations()) abstained += ann.abstained ? 1 : 0;
    details["documents"] = annotated.size();
    details["abstentions"] = abstained;

    save_dataset(annotated, store.path(kAnnotated));
    const auto split = eval::split_train_test(annotated, cfg.eval.test_fraction, cfg.eval.split_seed);
    ordered_json sj;
    sj["test_fraction"] = cfg.eval.test_fraction;
    sj["split_seed"] = cfg.eval.split_seed;
    sj["train"] = json::array();
    sj["test"] = json::array();
    for (const auto& d : split.train.documents()) sj["train"].push_back(d.doc_id);
    for (const auto& d : split.test.documents()) sj["test"].push_back(d.doc_id);
    write_file_atomic(store.path(kSplit), sj.dump(2) + "\n");

    auto& info = store.info();
    info["task_id"] = cfg.schema.task_id();
    info["schema_hash"] = cfg.schema.schema_hash();
    info["backend"] = backend_id;
    info["prompt_style"] = to_string(cfg.schema.prompt_style());
    info["corpus"] = std::filesystem::absolute(cfg.corpus).string();
    store.finish(Stage::label, {{"annotated", kAnnotated}, {"split", kSplit}}, details);
    return {false, fmt::format("label: {} documents annotated by {} ({} abstentions) -> {}", annotated.size(),
                               backend_id, abstained, store.path(kAnnotated).string())};
  });
}

StageOutcome cmd_sample(const PipelineConfig& cfg, const std::string& run_id, const SampleOptions& opts) {
  const auto strategy = opts.strategy.value_or(cfg.sampling.strategy);
  const double p = opts.p.value_or(cfg.sampling.p);
  const auto seed = opts.seed.value_or(cfg.sampling.seed);
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError(fmt::format("p must lie in (0, 1], got {}", p));

  auto store = open_existing(cfg, run_id, Stage::sample);
  json fp_in;
  fp_in["label"] = stage_fingerprint(store, Stage::label);
  fp_in["strategy"] = sampler::to_string(strategy);
  fp_in["p"] = p;
  if (strategy == sampler::Strategy::random) fp_in["seed"] = seed;
  const auto fp = fingerprint(fp_in);

  return run_stage(store, Stage::sample, fp, [&]() -> StageOutcome {
    const auto annotated = load_annotated(store, cfg.schema);
    const auto split = load_split(store, annotated);
    const auto manifest = strategy == sampler::Strategy::random
                              ? sampler::sample_random(split.train, p, seed)
                              : sampler::sample_confidence_informed(split.train, p);
    write_file_atomic(store.path(kSampling), manifest.to_json(cfg.schema).dump(2) + "\n");
    auto& info = store.info();
    info["strategy"] = sampler::to_string(strategy);
    info["p"] = p;
    if (strategy == sampler::Strategy::random) {
      info["sampling_seed"] = seed;
    } else {
      info.erase("sampling_seed");
    }
    store.finish(Stage::sample, {{"sampling_manifest", kSampling}},
                 {{"selected", manifest.selected_doc_ids.size()}, {"train_documents", split.train.size()}});
    return {false, fmt::format("sample: {} of {} training documents selected ({}, p={})",
                               manifest.selected_doc_ids.size(), split.train.size(), sampler::to_string(strategy), p)};
  });
}

StageOutcome cmd_annotate(const PipelineConfig& cfg, const std::string& run_id, const AnnotateOptions& opts) {
  auto store = open_existing(cfg, run_id, Stage::annotate);
  json fp_in;
  fp_in["sample"] = stage_fingerprint(store, Stage::sample);
  switch (opts.mode) {
    case AnnotateOptions::Mode::serve: fp_in["mode"] = "serve"; break;
    case AnnotateOptions::Mode::from_gold: fp_in["mode"] = "oracle"; break;
    case AnnotateOptions::Mode::import_file:
      if (!opts.labels_file) throw ConfigError("annotate: a labels file is required for import");
      if (!std::filesystem::exists(*opts.labels_file)) {
        throw ConfigError("labels file not found: " + opts.labels_file->string());
      }
      fp_in["mode"] = "import";
      fp_in["labels"] = to_hex(file_fingerprint(*opts.labels_file));
      break;
  }
  const auto fp = fingerprint(fp_in);

  return run_stage(store, Stage::annotate, fp, [&]() -> StageOutcome {
    const auto annotated = load_annotated(store, cfg.schema);
    const auto split = load_split(store, annotated);
    const auto manifest =
        sampler::SamplingManifest::from_json(json::parse(read_file(store.path(kSampling))), cfg.schema);

    std::map<std::string, ClassIndex> labels;
    std::string source;
    std::map<std::string, std::string> outputs{{"expert_labels", kExpertLabels}};
    switch (opts.mode) {
      case AnnotateOptions::Mode::from_gold:
        for (const auto& id : manifest.selected_doc_ids) {
          const auto* doc = split.train.find(id);
          if (!doc->gold_label) throw DataError("oracle annotation: document '" + id + "' has no gold label");
          labels[id] = *doc->gold_label;
        }
        source = "oracle";
        break;
      case AnnotateOptions::Mode::import_file:
        labels = parse_expert_labels(json::parse(read_file(*opts.labels_file)), cfg.schema);
        source = "import";
        break;
      case AnnotateOptions::Mode::serve: {
        AnnotationQueue::Options qo;
        qo.lease = std::chrono::seconds(cfg.annotation.lease_seconds);
        qo.reveal_llm_label = opts.reveal_llm_label.value_or(cfg.annotation.reveal_llm_label);
        AnnotationQueue queue(split.train, manifest, store.path(kJournal), qo);
        if (queue.replayed() > 0) spdlog::info("replayed {} labels from the journal", queue.replayed());
        std::optional<std::filesystem::path> ui;
        if (!cfg.annotation.ui_dir.empty()) ui = cfg.annotation.ui_dir;
        AnnotationServer server(queue, ui);
        const int port = server.bind(opts.host, opts.port);
        spdlog::info("annotation service for run '{}' on http://{}:{} ({} tasks)", run_id, opts.host, port,
                     manifest.selected_doc_ids.size());
        if (opts.on_listening) opts.on_listening(port);
        server.run(true);
        if (!queue.all_completed()) throw Error("annotation service stopped before all tasks were labeled");
        labels = queue.labels();
        source = "annotators";
        outputs["journal"] = kJournal;
        break;
      }
    }
    // Validates ids and classes against the manifest.
    const auto with_experts = sampler::apply_expert_labels(split.train, manifest, labels);
    write_file_atomic(store.path(kExpertLabels), expert_labels_json(labels, cfg.schema).dump(2) + "\n");
    store.info()["expert_source"] = source;
    store.info()["oracle_expert"] = source == "oracle";
    store.finish(Stage::annotate, outputs,
                 {{"labeled", labels.size()}, {"pending", with_experts.expert_pending().size()}, {"source", source}});
    return {false, fmt::format("annotate: {} expert labels ({}), {} still pending", labels.size(), source,
                               with_experts.expert_pending().size())};
  });
}

StageOutcome cmd_train(const PipelineConfig& cfg, const std::string& run_id, const TrainOptions& opts) {
  const auto seeds = opts.seeds.empty() ? cfg.training_seeds() : opts.seeds;
  if (seeds.empty()) throw ConfigError("train: no seeds given");
  auto store = open_existing(cfg, run_id, Stage::fuse);

  json fuse_in;
  fuse_in["annotate"] = stage_fingerprint(store, Stage::annotate);
  fuse_in["soft_labels"] = cfg.training.soft_labels;
  const auto fuse_fp = fingerprint(fuse_in);
  auto fused_outcome = run_stage(store, Stage::fuse, fuse_fp, [&]() -> StageOutcome {
    const auto annotated = load_annotated(store, cfg.schema);
    const auto split = load_split(store, annotated);
    const auto manifest =
        sampler::SamplingManifest::from_json(json::parse(read_file(store.path(kSampling))), cfg.schema);
    const auto labels = parse_expert_labels(json::parse(read_file(store.path(kExpertLabels))), cfg.schema);
    const auto ds = sampler::apply_expert_labels(split.train, manifest, labels);
    const auto fused =
        softlabel::fuse(ds, cfg.training.soft_labels ? softlabel::LlmTargets::soft : softlabel::LlmTargets::hard);
    write_file_atomic(store.path(kFused), softlabel::serialize_fused(fused));
    store.finish(Stage::fuse, {{"fused", kFused}},
                 {{"examples", fused.size()}, {"expert_examples", labels.size()}});
    return {false, fmt::format("fuse: {} training targets ({} expert)", fused.size(), labels.size())};
  });

  json train_in;
  train_in["fuse"] = fuse_fp;
  train_in["train"] = {{"epochs", cfg.training.train.epochs},
                       {"learning_rate", cfg.training.train.learning_rate},
                       {"l2", cfg.training.train.l2},
                       {"batch_size", cfg.training.train.batch_size}};
  train_in["featurizer"] = json(cfg.training.featurizer.to_json());
  train_in["seeds"] = seeds;
  const auto fp = fingerprint(train_in);

  auto outcome = run_stage(store, Stage::train, fp, [&]() -> StageOutcome {
    const auto annotated = load_annotated(store, cfg.schema);
    const auto split = load_split(store, annotated);
    const auto fused = softlabel::parse_fused(read_file(store.path(kFused)));
    if (fused.size() != split.train.size()) {
      throw DataError(fmt::format("{} holds {} examples but the train split has {} documents", kFused, fused.size(),
                                  split.train.size()));
    }
    std::vector<trainer::TrainingExample> examples;
    examples.reserve(fused.size());
    for (const auto& ex : fused) {
      const auto* doc = split.train.find(ex.doc_id);
      if (!doc) throw DataError(std::string(kFused) + " names unknown document '" + ex.doc_id + "'");
      examples.push_back({trainer::featurize(*doc, cfg.training.featurizer), ex.target.probs()});
    }
    std::map<std::string, std::string> outputs;
    json objectives = json::object();
    for (auto seed : seeds) {
      auto tc = cfg.training.train;
      tc.seed = seed;
      auto result = trainer::train(examples, tc, cfg.schema, cfg.training.featurizer);
      const auto rel = model_file(seed);
      trainer::export_model(result.model, store.path(rel));
      outputs["model_seed_" + std::to_string(seed)] = rel;
      objectives[std::to_string(seed)] = result.epoch_objective.empty() ? 0.0 : result.epoch_objective.back();
      spdlog::info("trained seed {}: final objective {:.6f}", seed, objectives[std::to_string(seed)].get<double>());
    }
    store.info()["seeds"] = seeds;
    store.info()["soft_labels"] = cfg.training.soft_labels;
    store.info()["setting"] = run_setting_label(
        sampler::strategy_from_string(store.info().value("strategy", std::string("confidence_informed"))),
        cfg.training.soft_labels, store.info().value("p", cfg.sampling.p));
    store.finish(Stage::train, outputs, {{"final_objective", objectives}, {"examples", examples.size()}});
    return {false, fmt::format("train: {} model(s) on {} examples -> {}", seeds.size(), examples.size(),
                               store.path("models").string())};
  });
  if (!fused_outcome.skipped) outcome.summary = fused_outcome.summary + "\n" + outcome.summary;
  return outcome;
}

StageOutcome cmd_eval(const PipelineConfig& cfg, const std::string& run_id, const EvalOptions& opts) {
  auto store = open_existing(cfg, run_id, Stage::eval);
  json fp_in;
  fp_in["train"] = stage_fingerprint(store, Stage::train);
  fp_in["bins"] = cfg.eval.histogram_bins;
  fp_in["baseline_trials"] = cfg.eval.baseline_trials;
  fp_in["matrix"] = opts.matrix;
  if (opts.matrix) fp_in["eval"] = cfg.raw.value("eval", json::object());
  const auto fp = fingerprint(fp_in);

  return run_stage(store, Stage::eval, fp, [&]() -> StageOutcome {
    const auto annotated = load_annotated(store, cfg.schema);
    const auto split = load_split(store, annotated);
    const auto gold = gold_or_throw(split.test, "test split");
    const auto seeds = store.info().at("seeds").get<std::vector<std::uint64_t>>();
    const auto K = cfg.schema.num_classes();

    std::vector<eval::EvalReport> runs;
    std::vector<trainer::SparseVector> features;
    std::optional<trainer::FeaturizerConfig> feat_cfg;
    for (auto seed : seeds) {
      const auto model = trainer::import_model(store.path(model_file(seed)), cfg.schema);
      if (!feat_cfg || !(*feat_cfg == model.featurizer)) {
        feat_cfg = model.featurizer;
        features.clear();
        for (const auto& d : split.test.documents()) features.push_back(trainer::featurize(d, model.featurizer));
      }
      std::vector<ClassIndex> pred;
      pred.reserve(features.size());
      for (const auto& x : features) pred.push_back(trainer::predict(model, x).label);
      runs.push_back(eval::weighted_f1(gold, pred, K));
    }
    const auto agg = eval::aggregate(runs);

    std::vector<ClassIndex> llm_pred;
    for (const auto& d : split.test.documents()) llm_pred.push_back(split.test.annotation(d.doc_id)->predicted_class);
    const auto llm = eval::weighted_f1(gold, llm_pred, K);
    const auto baseline = eval::random_baseline(gold, K, cfg.eval.split_seed, cfg.eval.baseline_trials);
    const auto separation = eval::confidence_separation_report(annotated, cfg.eval.histogram_bins);

    const auto setting = store.info().value("setting", std::string("model"));
    ordered_json report;
    report["run_id"] = run_id;
    report["task_id"] = cfg.schema.task_id();
    report["setting"] = setting;
    report["oracle_expert"] = store.info().value("oracle_expert", false);
    report["num_train"] = split.train.size();
    report["num_test"] = split.test.size();
    report["model"] = agg.to_json(cfg.schema.class_names());
    report["model"]["f1_per_seed"] = [&] {
      json a = json::array();
      for (const auto& r : runs) a.push_back(r.weighted_f1);
      return a;
    }();
    report["llm_weighted_f1"] = llm.weighted_f1;
    report["random_baseline"] = {{"mean", baseline.mean},
                                 {"standard_error", baseline.standard_error},
                                 {"trials", baseline.trials}};
    report["confidence_separation"] = separation.to_json();

    std::map<std::string, std::string> outputs{{"report", kEvalReport}, {"histogram", kHistogram}};
    std::string matrix_text;
    if (opts.matrix) {
      auto mc = cfg.matrix_config();
      mc.p = store.info().value("p", cfg.sampling.p);
      const auto matrix = eval::run_matrix(split.train, split.test, mc);
      write_file_atomic(store.path(kMatrix), matrix.to_json().dump(2) + "\n");
      outputs["matrix"] = kMatrix;
      matrix_text = "\n" + matrix.to_text();
    }
    write_file_atomic(store.path(kHistogram), separation.histogram_csv());
    write_file_atomic(store.path(kEvalReport), report.dump(2) + "\n");
    store.info()["settings"] = [&] {
      json a = json::array();
      for (auto s : cfg.eval.settings) a.push_back(eval::to_string(s));
      return a;
    }();
    store.finish(Stage::eval, outputs, {{"mean_weighted_f1", agg.mean_weighted_f1}, {"sd", agg.sd_weighted_f1}});

    std::string ks;
    if (separation.ks) {
      ks = fmt::format("KS D={:.4f} p={:.3g}", separation.ks->statistic, separation.ks->p_value);
    } else {
      ks = "KS skipped: " + separation.notice;
    }
    return {false, fmt::format("eval ({} test documents)\n"
                               "  {:<24} {:.3f} +/- {:.3f} over {} seed(s)\n"
                               "  {:<24} {:.3f}\n"
                               "  {:<24} {:.3f}\n"
                               "  confidence separation: {}{}",
                               split.test.size(), setting, agg.mean_weighted_f1, agg.sd_weighted_f1, seeds.size(),
                               "LLM labels", llm.weighted_f1, "random", baseline.mean, ks, matrix_text)};
  });
}

StageOutcome cmd_export(const PipelineConfig& cfg, const std::string& run_id, const ExportOptions& opts) {
  if (opts.out.empty()) throw ConfigError("export: an output path is required");
  auto store = open_existing(cfg, run_id, Stage::export_model);
  const auto seeds = store.info().at("seeds").get<std::vector<std::uint64_t>>();
  const auto seed = opts.seed.value_or(seeds.front());
  if (std::find(seeds.begin(), seeds.end(), seed) == seeds.end()) {
    throw ConfigError(fmt::format("export: run '{}' has no model for seed {}", run_id, seed));
  }
  const auto out = std::filesystem::absolute(opts.out);
  json fp_in;
  fp_in["train"] = stage_fingerprint(store, Stage::train);
  fp_in["seed"] = seed;
  fp_in["out"] = out.string();
  const auto fp = fingerprint(fp_in);

  return run_stage(store, Stage::export_model, fp, [&]() -> StageOutcome {
    const auto src = store.path(model_file(seed));
    const auto bytes = read_file(src);
    // Round-trip through the reader so a corrupt artifact never ships.
    const auto model = trainer::deserialize_model(bytes);
    trainer::check_schema(model, cfg.schema);
    write_file_atomic(out, bytes);
    store.finish(Stage::export_model, {{"model", out.string()}},
                 {{"seed", seed}, {"bytes", bytes.size()}, {"checksum", to_hex(fnv1a64(bytes))}});
    return {false, fmt::format("export: seed {} model ({} bytes) -> {}", seed, bytes.size(), out.string())};
  });
}

StageOutcome cmd_infer(const InferOptions& opts) {
  if (!std::filesystem::exists(opts.model)) throw ConfigError("model file not found: " + opts.model.string());
  if (!std::filesystem::exists(opts.input)) throw ConfigError("input file not found: " + opts.input.string());
  const auto model = trainer::import_model(opts.model, opts.schema);

  std::istringstream in(read_file(opts.input));
  std::string line;
  std::size_t lineno = 0;
  std::string out;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Document doc;
    try {
      const auto j = json::parse(line);
      doc.doc_id = j.at("doc_id").get<std::string>();
      doc.text = j.at("text").get<std::string>();
      if (j.contains("target") && !j["target"].is_null()) doc.target = j["target"].get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{} line {}: {}", opts.input.string(), lineno, e.what()));
    }
    const auto pred = trainer::predict(model, trainer::featurize(doc, model.featurizer));
    ordered_json o;
    o["doc_id"] = doc.doc_id;
    o["label"] = model.class_names.at(pred.label);
    ordered_json probs = ordered_json::object();
    for (std::size_t k = 0; k < pred.probs.size(); ++k) probs[model.class_names[k]] = pred.probs[k];
    o["probs"] = probs;
    out += o.dump() + "\n";
    ++n;
  }
  write_file_atomic(opts.output, out);
  return {false, fmt::format("infer: {} predictions -> {}", n, opts.output.string())};
}

StageOutcome cmd_sweep(const PipelineConfig& cfg, const std::string& run_id, const SweepOptions& opts) {
  const auto p_values = opts.p_values.empty() ? cfg.eval.sweep_p : opts.p_values;
  if (p_values.empty()) throw ConfigError("sweep: the set of p values is empty");
  for (double p : p_values) {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError(fmt::format("sweep: p must lie in (0, 1], got {}", p));
  }
  RunStore store(cfg.run_root, run_id);
  store.require_complete({Stage::label}, "sweep");

  auto mc = cfg.matrix_config();
  if (!opts.settings.empty()) mc.settings = opts.settings;
  if (opts.weight_argument) mc.weight_argument = *opts.weight_argument;
  const auto annotated = load_annotated(store, cfg.schema);
  const auto result = eval::run_sweep(annotated, p_values, mc);
  write_file_atomic(store.path("sweep.json"), result.to_json().dump(2) + "\n");
  write_file_atomic(store.path("sweep.csv"), result.to_csv());
  return {false, result.to_text() + "\n-> " + store.path("sweep.json").string()};
}

}  // namespace redct::pipeline
