// redct: hub-side pipeline (label, sample, annotate, train, eval, export,
// sweep) and the edge-side `infer` command.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "redct/common.hpp"
#include "redct/labeler.hpp"
#include "redct/pipeline/commands.hpp"
#include "redct/pipeline/config.hpp"

namespace {

using namespace redct;
using namespace redct::pipeline;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::vector<double> parse_doubles(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& s : items) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(s, &pos));
      if (pos != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + s + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("redct");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");

  CLI::App app{"Confidence-informed LLM labeling, expert review and edge classifier training"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  std::string config_path;
  std::string run_id;
  const auto add_run_opts = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Pipeline config (JSON)")->required();
    sub->add_option("--run", run_id, "Run id under the config's run_root")->required();
  };

  auto* label = app.add_subcommand("label", "Annotate the corpus with the configured backend");
  add_run_opts(label);
  std::optional<int> parallelism;
  label->add_option("--parallelism", parallelism, "Concurrent backend requests");

  auto* sample = app.add_subcommand("sample", "Select documents for expert labeling");
  add_run_opts(sample);
  std::string strategy;
  std::optional<double> p;
  std::optional<std::uint64_t> sample_seed;
  sample->add_option("--strategy", strategy, "confidence_informed | random");
  sample->add_option("--p", p, "Fraction routed to experts, in (0, 1]");
  sample->add_option("--seed", sample_seed, "Seed for random sampling");

  auto* annotate = app.add_subcommand("annotate", "Collect expert labels for the sampled documents");
  add_run_opts(annotate);
  AnnotateOptions ao;
  bool from_gold = false;
  std::string labels_file;
  bool reveal = false;
  annotate->add_option("--port", ao.port, "Serve the annotation API on this port")->capture_default_str();
  annotate->add_option("--host", ao.host, "Bind address")->capture_default_str();
  auto* gold_flag = annotate->add_flag("--from-gold", from_gold, "Oracle mode: copy gold labels");
  auto* labels_opt = annotate->add_option("--labels", labels_file, "Import {doc_id: class_name} JSON");
  gold_flag->excludes(labels_opt);
  annotate->add_flag("--reveal-llm-label", reveal, "Include the LLM suggestion in task payloads");

  auto* train = app.add_subcommand("train", "Fuse labels and train edge classifiers");
  add_run_opts(train);
  std::vector<std::uint64_t> train_seeds;
  train->add_option("--seeds", train_seeds, "Training seeds")->delimiter(',');

  auto* eval = app.add_subcommand("eval", "Evaluate trained models on the held-out split");
  add_run_opts(eval);
  EvalOptions eo;
  eval->add_flag("--matrix", eo.matrix, "Also run the oracle-expert settings matrix");

  auto* exp = app.add_subcommand("export", "Validate and copy a trained model artifact");
  add_run_opts(exp);
  ExportOptions xo;
  std::optional<std::uint64_t> export_seed;
  exp->add_option("--out", xo.out, "Destination file")->required();
  exp->add_option("--seed", export_seed, "Which seed's model (default: first)");

  auto* infer = app.add_subcommand("infer", "Edge inference from a model file (no network)");
  InferOptions io;
  std::string infer_config;
  infer->add_option("--model", io.model, "Model artifact")->required();
  infer->add_option("--input", io.input, "JSONL documents {doc_id, text, target?}")->required();
  infer->add_option("--output", io.output, "Predictions JSONL")->required();
  infer->add_option("--config", infer_config, "Check the model against this config's schema");

  auto* sweep = app.add_subcommand("sweep", "F1 as a function of the expert fraction");
  add_run_opts(sweep);
  std::vector<std::string> sweep_p;
  std::vector<std::string> sweep_settings;
  sweep->add_option("--p", sweep_p, "Expert fractions")->delimiter(',');
  sweep->add_option("--settings", sweep_settings, "base,SL,RS,CI,CI_SL")->delimiter(',');
  std::string sweep_weight_arg;
  sweep->add_option("--weight-arg", sweep_weight_arg, "Soft-label weight: expit of probability or log_probability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    StageOutcome out;
    if (*infer) {
      if (!infer_config.empty()) io.schema = load_config(infer_config).schema;
      out = cmd_infer(io);
    } else {
      const auto cfg = load_config(config_path);
      if (*label) {
        out = cmd_label(cfg, run_id, {parallelism});
      } else if (*sample) {
        SampleOptions so;
        if (!strategy.empty()) so.strategy = sampler::strategy_from_string(strategy);
        so.p = p;
        so.seed = sample_seed;
        out = cmd_sample(cfg, run_id, so);
      } else if (*annotate) {
        if (from_gold) {
          ao.mode = AnnotateOptions::Mode::from_gold;
        } else if (!labels_file.empty()) {
          ao.mode = AnnotateOptions::Mode::import_file;
          ao.labels_file = labels_file;
        }
        if (reveal) ao.reveal_llm_label = true;
        out = cmd_annotate(cfg, run_id, ao);
      } else if (*train) {
        out = cmd_train(cfg, run_id, {train_seeds});
      } else if (*eval) {
        out = cmd_eval(cfg, run_id, eo);
      } else if (*exp) {
        xo.seed = export_seed;
        out = cmd_export(cfg, run_id, xo);
      } else if (*sweep) {
        SweepOptions wo;
        wo.p_values = parse_doubles(sweep_p);
        for (const auto& s : sweep_settings) wo.settings.push_back(eval::setting_from_string(s));
        if (!sweep_weight_arg.empty()) wo.weight_argument = softlabel::weight_argument_from_string(sweep_weight_arg);
        out = cmd_sweep(cfg, run_id, wo);
      }
    }
    std::cout << out.summary << std::endl;
    return 0;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const StageOrderError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const labeler::LabelingError& e) {
    spdlog::error("{} (after {} attempts)", e.what(), e.attempts());
    return kExitRuntime;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
}
