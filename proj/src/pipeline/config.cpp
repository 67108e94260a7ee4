#include "redct/pipeline/config.hpp"

#include "redct/common.hpp"

namespace redct::pipeline {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

labeler::BetaParams beta_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw ConfigError("Beta parameters need [alpha, beta]");
  return {v[0], v[1]};
}

}  // namespace

std::vector<std::uint64_t> PipelineConfig::training_seeds() const {
  if (!eval.seeds.empty()) return eval.seeds;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < training.train.repetitions; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
  return seeds;
}

eval::MatrixConfig PipelineConfig::matrix_config() const {
  eval::MatrixConfig m;
  m.settings = eval.settings;
  m.p = sampling.p;
  m.seeds = training_seeds();
  m.train = training.train;
  m.featurizer = training.featurizer;
  m.test_fraction = eval.test_fraction;
  m.split_seed = eval.split_seed;
  m.baseline_trials = eval.baseline_trials;
  m.parallelism = eval.parallelism;
  return m;
}

PipelineConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  c.raw = j;
  try {
    c.schema = TaskSchema::from_json(j.at("task"));
    c.run_root = resolve(base_dir, j.value("run_root", std::string("runs")));
    c.corpus = resolve(base_dir, j.at("corpus").get<std::string>());
    if (j.contains("template")) c.template_path = resolve(base_dir, j.at("template").get<std::string>());

    const auto& b = j.at("backend");
    const auto kind = b.at("kind").get<std::string>();
    if (kind == "simulator") {
      c.backend.kind = BackendSettings::Kind::simulator;
      auto& s = c.backend.simulator;
      s.accuracy_per_class = b.at("accuracy_per_class").get<std::vector<double>>();
      if (b.contains("correct")) s.correct = beta_from(b.at("correct"));
      if (b.contains("wrong")) s.wrong = beta_from(b.at("wrong"));
      s.seed = b.value("seed", std::uint64_t{0});
      s.validate(c.schema.num_classes());
      c.backend.simulator_via_prompts = b.value("via_prompts", false);
    } else if (kind == "http") {
      c.backend.kind = BackendSettings::Kind::http;
      auto& h = c.backend.http;
      if (b.contains("api_key")) {
        throw ConfigError("backend.api_key is not allowed; name an environment variable in api_key_env");
      }
      h.base_url = b.at("base_url").get<std::string>();
      h.model = b.at("model").get<std::string>();
      h.api_key_env = b.value("api_key_env", h.api_key_env);
      h.top_logprobs = b.value("top_logprobs", h.top_logprobs);
      h.max_tokens = b.value("max_tokens", h.max_tokens);
      h.timeout = std::chrono::seconds(b.value("timeout_s", 60));
    } else {
      throw ConfigError("backend.kind must be 'simulator' or 'http', got '" + kind + "'");
    }

    if (j.contains("labeling")) {
      const auto& l = j.at("labeling");
      c.labeling.parallelism = l.value("parallelism", c.labeling.parallelism);
      c.labeling.retries = l.value("retries", c.labeling.retries);
      c.labeling.backoff_ms = l.value("backoff_ms", c.labeling.backoff_ms);
      if (l.contains("cache_dir")) c.labeling.cache_dir = resolve(base_dir, l.at("cache_dir").get<std::string>());
    }
    if (c.labeling.cache_dir.empty()) c.labeling.cache_dir = c.run_root / "cache";
    if (c.labeling.parallelism < 1) throw ConfigError("labeling.parallelism must be >= 1");
    if (c.labeling.retries < 0) throw ConfigError("labeling.retries must be >= 0");

    if (j.contains("sampling")) {
      const auto& s = j.at("sampling");
      c.sampling.strategy = sampler::strategy_from_string(s.value("strategy", std::string("confidence_informed")));
      c.sampling.p = s.value("p", c.sampling.p);
      c.sampling.seed = s.value("seed", c.sampling.seed);
    }
    if (!(c.sampling.p > 0.0 && c.sampling.p <= 1.0)) throw ConfigError("sampling.p must lie in (0, 1]");

    c.training.featurizer.include_target_prefix = c.schema.requires_target();
    if (j.contains("training")) {
      const auto& t = j.at("training");
      auto& tc = c.training.train;
      tc.epochs = t.value("epochs", tc.epochs);
      tc.learning_rate = t.value("learning_rate", tc.learning_rate);
      tc.l2 = t.value("l2", tc.l2);
      tc.batch_size = t.value("batch_size", tc.batch_size);
      tc.repetitions = t.value("repetitions", tc.repetitions);
      c.training.soft_labels = t.value("soft_labels", c.training.soft_labels);
      if (t.contains("featurizer")) {
        json f = t.at("featurizer");
        if (!f.contains("include_target_prefix")) f["include_target_prefix"] = c.schema.requires_target();
        c.training.featurizer = trainer::FeaturizerConfig::from_json(f);
      }
    }
    c.training.train.validate();
    c.training.featurizer.validate();

    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      if (e.contains("settings")) {
        c.eval.settings.clear();
        for (const auto& s : e.at("settings")) c.eval.settings.push_back(eval::setting_from_string(s.get<std::string>()));
      }
      if (e.contains("seeds")) c.eval.seeds = e.at("seeds").get<std::vector<std::uint64_t>>();
      c.eval.test_fraction = e.value("test_fraction", c.eval.test_fraction);
      c.eval.split_seed = e.value("split_seed", c.eval.split_seed);
      c.eval.baseline_trials = e.value("baseline_trials", c.eval.baseline_trials);
      c.eval.histogram_bins = e.value("histogram_bins", c.eval.histogram_bins);
      if (e.contains("sweep_p")) c.eval.sweep_p = e.at("sweep_p").get<std::vector<double>>();
      c.eval.parallelism = e.value("parallelism", c.eval.parallelism);
    }
    if (!(c.eval.test_fraction > 0.0 && c.eval.test_fraction < 1.0)) {
      throw ConfigError("eval.test_fraction must lie in (0, 1)");
    }
    if (c.eval.parallelism < 1) throw ConfigError("eval.parallelism must be >= 1");

    if (j.contains("annotation")) {
      const auto& a = j.at("annotation");
      c.annotation.lease_seconds = a.value("lease_seconds", c.annotation.lease_seconds);
      c.annotation.reveal_llm_label = a.value("reveal_llm_label", c.annotation.reveal_llm_label);
      if (a.contains("ui_dir")) c.annotation.ui_dir = resolve(base_dir, a.at("ui_dir").get<std::string>());
    }
    if (c.annotation.lease_seconds < 1) throw ConfigError("annotation.lease_seconds must be positive");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  auto c = parse_config(j, std::filesystem::absolute(path).parent_path());
  c.source = path;
  return c;
}

}  // namespace redct::pipeline
