#include "redct/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "redct/common.hpp"
#include "redct/sampler.hpp"
#include "redct/softlabel.hpp"

namespace redct::eval {

std::string to_string(Setting s) {
  switch (s) {
    case Setting::base: return "base";
    case Setting::SL: return "SL";
    case Setting::RS: return "RS";
    case Setting::CI: return "CI";
    case Setting::CI_SL: return "CI_SL";
  }
  return "base";
}

Setting setting_from_string(const std::string& s) {
  if (s == "base") return Setting::base;
  if (s == "SL") return Setting::SL;
  if (s == "RS") return Setting::RS;
  if (s == "CI") return Setting::CI;
  if (s == "CI_SL") return Setting::CI_SL;
  throw ConfigError("unknown setting '" + s + "' (expected base, SL, RS, CI or CI_SL)");
}

std::string display_name(Setting s, double p) {
  const auto pct = fmt::format("{:g}%", p * 100.0);
  switch (s) {
    case Setting::base: return "Base";
    case Setting::SL: return "SL";
    case Setting::RS: return "RS " + pct;
    case Setting::CI: return "CI " + pct;
    case Setting::CI_SL: return "CI SL " + pct;
  }
  return "";
}

bool uses_experts(Setting s) { return s == Setting::RS || s == Setting::CI || s == Setting::CI_SL; }

TrainTestSplit split_train_test(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_test = std::min(ds.size(), ceil_fraction(test_fraction, ds.size()));
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {ds.subset(train), ds.subset(test)};
}

void MatrixConfig::validate() const {
  if (settings.empty()) throw ConfigError("matrix: no settings given");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("matrix: p must lie in (0, 1]");
  if (seeds.empty()) throw ConfigError("matrix: at least one seed (repetition) is required");
  if (parallelism < 1) throw ConfigError("matrix: parallelism must be >= 1");
  train.validate();
  featurizer.validate();
}

const SettingResult& MatrixResult::at(Setting s) const {
  for (const auto& r : settings) {
    if (r.setting == s) return r;
  }
  throw Error("setting " + to_string(s) + " was not part of the run");
}

namespace {

std::vector<ClassIndex> gold_labels(const Dataset& ds) {
  std::vector<ClassIndex> gold;
  gold.reserve(ds.size());
  for (const auto& d : ds.documents()) {
    if (!d.gold_label) throw DataError("evaluation needs a gold label on '" + d.doc_id + "'");
    gold.push_back(*d.gold_label);
  }
  return gold;
}

std::map<std::string, ClassIndex> oracle_labels(const Dataset& ds, const sampler::SamplingManifest& m) {
  std::map<std::string, ClassIndex> labels;
  for (const auto& id : m.selected_doc_ids) labels[id] = *ds.find(id)->gold_label;
  return labels;
}

struct Cell {
  std::size_t setting_idx;
  std::size_t seed_idx;
};

}  // namespace

MatrixResult run_matrix(const Dataset& train, const Dataset& test, const MatrixConfig& cfg) {
  cfg.validate();
  if (train.empty() || test.empty()) throw DataError("matrix: train and test splits must be nonempty");
  if (!train.fully_annotated()) throw DataError("matrix: training split is not annotated");
  const auto& schema = train.schema();
  const std::size_t k = schema.num_classes();
  const auto test_gold = gold_labels(test);
  gold_labels(train);  // oracle experts need gold on the training side too

  MatrixResult result;
  result.task_id = schema.task_id();
  result.p = cfg.p;
  result.weight_argument = cfg.weight_argument;
  result.seeds = cfg.seeds;
  result.num_train = train.size();
  result.num_test = test.size();

  if (test.fully_annotated()) {
    std::vector<ClassIndex> llm_pred;
    for (const auto& d : test.documents()) llm_pred.push_back(test.annotation(d.doc_id)->predicted_class);
    result.llm_f1 = weighted_f1(test_gold, llm_pred, k).weighted_f1;
  } else {
    result.llm_f1 = std::nan("");
  }
  result.random_f1 = random_baseline(test_gold, k, cfg.split_seed, cfg.baseline_trials).mean;

  std::vector<trainer::SparseVector> train_x;
  std::vector<trainer::SparseVector> test_x;
  for (const auto& d : train.documents()) train_x.push_back(trainer::featurize(d, cfg.featurizer));
  for (const auto& d : test.documents()) test_x.push_back(trainer::featurize(d, cfg.featurizer));

  result.settings.resize(cfg.settings.size());
  for (std::size_t s = 0; s < cfg.settings.size(); ++s) {
    result.settings[s].setting = cfg.settings[s];
    result.settings[s].f1_per_seed.assign(cfg.seeds.size(), 0.0);
  }

  std::vector<Cell> cells;
  for (std::size_t s = 0; s < cfg.settings.size(); ++s) {
    for (std::size_t r = 0; r < cfg.seeds.size(); ++r) cells.push_back({s, r});
  }
  std::vector<std::size_t> expert_counts(cells.size(), 0);

  auto run_cell = [&](std::size_t ci) {
    const auto [s, r] = cells[ci];
    const auto setting = cfg.settings[s];
    const auto seed = cfg.seeds[r];
    Dataset labeled = train;
    if (setting == Setting::RS) {
      const auto m = sampler::sample_random(train, cfg.p, seed);
      labeled = sampler::apply_expert_labels(train, m, oracle_labels(train, m));
    } else if (setting == Setting::CI || setting == Setting::CI_SL) {
      const auto m = sampler::sample_confidence_informed(train, cfg.p);
      labeled = sampler::apply_expert_labels(train, m, oracle_labels(train, m));
    }
    const auto targets = (setting == Setting::SL || setting == Setting::CI_SL)
                             ? softlabel::LlmTargets::soft
                             : softlabel::LlmTargets::hard;
    const auto fused = softlabel::fuse(labeled, targets, cfg.weight_argument);
    std::vector<trainer::TrainingExample> examples;
    examples.reserve(fused.size());
    for (std::size_t i = 0; i < fused.size(); ++i) examples.push_back({train_x[i], fused[i].target.probs()});
    auto tcfg = cfg.train;
    tcfg.seed = seed;
    const auto model = trainer::train(examples, tcfg, schema, cfg.featurizer).model;
    std::vector<ClassIndex> pred;
    pred.reserve(test_x.size());
    for (const auto& x : test_x) pred.push_back(trainer::predict(model, x).label);
    result.settings[s].f1_per_seed[r] = weighted_f1(test_gold, pred, k).weighted_f1;
    expert_counts[ci] = labeled.expert_labels().size();
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.parallelism), cells.size());
  if (workers <= 1) {
    for (std::size_t ci = 0; ci < cells.size(); ++ci) run_cell(ci);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t ci; (ci = next.fetch_add(1)) < cells.size();) run_cell(ci);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    auto& sr = result.settings[cells[ci].setting_idx];
    sr.expert_labels = std::max(sr.expert_labels, expert_counts[ci]);
  }
  for (auto& sr : result.settings) {
    const auto ms = mean_sd(sr.f1_per_seed);
    sr.mean = ms.mean;
    sr.sd = ms.sd;
    spdlog::debug("{}: mean F1 {:.4f} (sd {:.4f})", display_name(sr.setting, cfg.p), sr.mean, sr.sd);
  }
  return result;
}

MatrixResult run_matrix(const Dataset& annotated, const MatrixConfig& cfg) {
  cfg.validate();
  auto split = split_train_test(annotated, cfg.test_fraction, cfg.split_seed);
  return run_matrix(split.train, split.test, cfg);
}

nlohmann::ordered_json MatrixResult::to_json() const {
  nlohmann::ordered_json j;
  j["task_id"] = task_id;
  j["metric"] = "weighted F1 (support-weighted mean of per-class F1, 0/0 = 0)";
  j["p"] = p;
  j["seeds"] = seeds;
  j["num_train"] = num_train;
  j["num_test"] = num_test;
  j["expert_source"] = oracle_expert ? "oracle (gold labels stand in for experts)" : "human";
  j["llm_f1"] = std::isnan(llm_f1) ? nlohmann::ordered_json() : nlohmann::ordered_json(llm_f1);
  j["random_f1"] = random_f1;
  j["soft_label_weight"] = "expit(" + softlabel::to_string(weight_argument) + " of the predicted token)";
  const SettingResult* base = nullptr;
  for (const auto& s : settings) {
    if (s.setting == Setting::base) base = &s;
  }
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& s : settings) {
    nlohmann::ordered_json row;
    row["setting"] = to_string(s.setting);
    row["label"] = display_name(s.setting, p);
    row["mean_f1"] = s.mean;
    row["sd_f1"] = s.sd;
    row["f1_per_seed"] = s.f1_per_seed;
    row["expert_labels"] = s.expert_labels;
    if (base != nullptr && base->mean > 0.0) {
      row["improvement_over_base_abs"] = s.mean - base->mean;
      row["improvement_over_base_rel"] = (s.mean - base->mean) / base->mean;
    }
    rows.push_back(row);
  }
  j["settings"] = rows;
  return j;
}

std::string MatrixResult::to_text() const {
  std::ostringstream out;
  out << "task: " << task_id << "  train: " << num_train << "  test: " << num_test
      << "  repetitions: " << seeds.size() << "\n";
  out << "metric: weighted F1; expert labels: "
      << (oracle_expert ? "oracle (gold labels)" : "human") << "\n";
  out << fmt::format("{:<14} {:>8} {:>8} {:>9} {:>9}\n", "setting", "mean", "sd", "d_abs", "d_rel");
  out << std::string(52, '-') << "\n";
  out << fmt::format("{:<14} {:>8.3f}\n", "Random", random_f1);
  if (!std::isnan(llm_f1)) out << fmt::format("{:<14} {:>8.3f}\n", "LLM labels", llm_f1);
  const SettingResult* base = nullptr;
  for (const auto& s : settings) {
    if (s.setting == Setting::base) base = &s;
  }
  for (const auto& s : settings) {
    out << fmt::format("{:<14} {:>8.3f} {:>8.3f}", display_name(s.setting, p), s.mean, s.sd);
    if (base != nullptr && base->mean > 0.0) {
      out << fmt::format(" {:>+9.3f} {:>+8.1f}%", s.mean - base->mean,
                         100.0 * (s.mean - base->mean) / base->mean);
    }
    out << "\n";
  }
  return out.str();
}

std::vector<double> default_sweep_fractions() { return {0.02, 0.05, 0.10, 0.15, 0.20}; }

SweepResult run_sweep(const Dataset& annotated, const std::vector<double>& p_values, MatrixConfig cfg) {
  if (p_values.empty()) throw ConfigError("sweep: no expert fractions given");
  auto split = split_train_test(annotated, cfg.test_fraction, cfg.split_seed);
  SweepResult out;
  out.p_values = p_values;
  out.weight_argument = cfg.weight_argument;
  for (double p : p_values) {
    cfg.p = p;
    spdlog::info("sweep: p = {}", p);
    out.points.push_back(run_matrix(split.train, split.test, cfg));
  }
  out.llm_f1 = out.points.front().llm_f1;
  return out;
}

nlohmann::ordered_json SweepResult::to_json() const {
  nlohmann::ordered_json j;
  j["llm_f1_reference"] = std::isnan(llm_f1) ? nlohmann::ordered_json() : nlohmann::ordered_json(llm_f1);
  j["p_values"] = p_values;
  j["weight_argument"] = softlabel::to_string(weight_argument);
  nlohmann::ordered_json series = nlohmann::ordered_json::object();
  for (const auto& pt : points) {
    for (const auto& s : pt.settings) {
      series[to_string(s.setting)].push_back({{"p", pt.p}, {"mean_f1", s.mean}, {"sd_f1", s.sd}});
    }
  }
  j["series"] = series;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const auto& pt : points) pts.push_back(pt.to_json());
  j["points"] = pts;
  return j;
}

std::string SweepResult::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "p,setting,mean_f1,sd_f1,llm_f1\n";
  for (const auto& pt : points) {
    for (const auto& s : pt.settings) {
      out << pt.p << ',' << to_string(s.setting) << ',' << s.mean << ',' << s.sd << ',' << llm_f1 << '\n';
    }
  }
  return out.str();
}

std::string SweepResult::to_text() const {
  std::ostringstream out;
  if (points.empty()) return "";
  out << fmt::format("{:<8}", "p");
  for (const auto& s : points.front().settings) out << fmt::format(" {:>9}", to_string(s.setting));
  out << "\n";
  for (const auto& pt : points) {
    out << fmt::format("{:<8g}", pt.p);
    for (const auto& s : pt.settings) out << fmt::format(" {:>9.3f}", s.mean);
    out << "\n";
  }
  if (!std::isnan(llm_f1)) out << fmt::format("LLM labels (reference line): {:.3f}\n", llm_f1);
  out << fmt::format("soft-label weight: expit({})\n", softlabel::to_string(weight_argument));
  return out.str();
}

}  // namespace redct::eval
