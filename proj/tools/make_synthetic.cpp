// Writes the bundled synthetic task: a gold-labeled corpus plus a simulator
// pipeline config that points at it.

#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "redct/common.hpp"
#include "redct/dataset_io.hpp"
#include "redct/synthetic.hpp"

int main(int argc, char** argv) {
  using namespace redct;
  CLI::App app{"Generate the synthetic task corpus and a simulator config"};
  std::filesystem::path out_dir = "synthetic";
  eval::SyntheticTaskConfig sc;
  double accuracy = 0.70;
  std::uint64_t sim_seed = 0;
  app.add_option("--out-dir", out_dir, "Destination directory")->capture_default_str();
  app.add_option("--docs", sc.num_docs, "Number of documents")->capture_default_str();
  app.add_option("--classes", sc.num_classes, "Number of classes")->capture_default_str();
  app.add_option("--signal", sc.signal, "Share of class-vocabulary tokens")->capture_default_str();
  app.add_option("--seed", sc.seed, "Corpus seed")->capture_default_str();
  app.add_option("--accuracy", accuracy, "Simulated LLM accuracy, every class")->capture_default_str();
  app.add_option("--sim-seed", sim_seed, "Simulator seed")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const auto ds = eval::make_synthetic_task(sc);
    save_dataset(ds, out_dir / "corpus.jsonl");

    nlohmann::ordered_json cfg;
    cfg["task"] = ds.schema().to_json();
    cfg["corpus"] = "corpus.jsonl";
    cfg["run_root"] = "runs";
    cfg["backend"] = {{"kind", "simulator"},
                      {"accuracy_per_class", std::vector<double>(sc.num_classes, accuracy)},
                      {"correct", {8.0, 2.0}},
                      {"wrong", {2.0, 2.0}},
                      {"seed", sim_seed}};
    cfg["sampling"] = {{"strategy", "confidence_informed"}, {"p", 0.10}, {"seed", 0}};
    cfg["training"] = {{"epochs", 20},
                       {"learning_rate", 0.1},
                       {"l2", 1e-5},
                       {"batch_size", 64},
                       {"repetitions", 5},
                       {"soft_labels", true},
                       {"featurizer", {{"dim", 16384}}}};
    cfg["eval"] = {{"settings", {"base", "SL", "RS", "CI", "CI_SL"}},
                   {"seeds", {0, 1, 2, 3, 4}},
                   {"test_fraction", 0.2},
                   {"split_seed", 0}};
    write_file_atomic(out_dir / "config.json", cfg.dump(2) + "\n");
    std::cout << "wrote " << ds.size() << " documents to " << (out_dir / "corpus.jsonl").string() << " and "
              << (out_dir / "config.json").string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
