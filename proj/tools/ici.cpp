#include "ici/errors.hpp"
#include "ici/experiment.hpp"
#include "ici/verify.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kDivergence = 3, kTrainingAbort = 4, kSuiteFailed = 1, kInternal = 1 };

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ici::ConfigError("bad seed '" + item + "' in --seeds");
    }
  }
  if (seeds.empty()) throw ici::ConfigError("--seeds is empty");
  return seeds;
}

void print_train_summary(const ici::TrainResult& r) {
  std::cout << "final loss " << r.loss_curve.back() << " (best epoch " << r.best_epoch << ", "
            << r.loss_curve.size() << " epochs)\n"
            << "diverged predictions during training: " << r.diverged_predictions << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop identification with internal controller parameterization"};
  app.require_subcommand(1);
  std::string config_path, dataset_dir, out_dir, seeds, suite;

  auto* gen = app.add_subcommand("generate", "Simulate the true closed loop and write a dataset");
  gen->add_option("--config", config_path)->required();
  gen->add_option("--out", out_dir)->required();

  auto* tr = app.add_subcommand("train", "Fit a model to a dataset");
  tr->add_option("--config", config_path)->required();
  tr->add_option("--dataset", dataset_dir)->required();
  tr->add_option("--out", out_dir)->required();

  auto* ev = app.add_subcommand("evaluate", "Compute metrics for a trained run directory");
  ev->add_option("--config", config_path)->required();
  ev->add_option("--out", out_dir, "Run directory holding checkpoint.json")->required();

  auto* sw = app.add_subcommand("sweep", "Generate, train and evaluate seeds x strategies x sigmas");
  sw->add_option("--config", config_path)->required();
  sw->add_option("--out", out_dir)->required();
  sw->add_option("--seeds", seeds, "Comma-separated seed list overriding the config");

  auto* ve = app.add_subcommand("verify", "Run a property suite");
  ve->add_option("--suite", suite)
      ->required()
      ->check(CLI::IsMember({"theorem1", "corollary1", "gradients", "consistency"}));
  ve->add_option("--out", out_dir, "Directory for report.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ve) {
      const auto report = ici::run_suite(suite);
      const std::string text = ici::dump_json(report.details);
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        ici::write_text(std::filesystem::path(out_dir) / "report.json", text);
      }
      std::cout << text;
      std::cout << suite << ": " << (report.passed ? "PASS" : "FAIL") << "\n";
      return report.passed ? kOk : kSuiteFailed;
    }

    auto cfg = ici::ExperimentConfig::load(config_path);
    const std::filesystem::path out(out_dir);

    if (*gen) {
      const auto ds = ici::generate_dataset(cfg);
      ici::save_dataset(out, ds);
      std::cout << "wrote " << ds.size() << " trajectories to " << out.string() << "\n"
                << "dataset hash " << ici::dataset_hash(ds) << "\n";
    } else if (*tr) {
      const auto ds = ici::load_dataset(dataset_dir);
      const auto hash = ici::dataset_hash(ds);
      if (!cfg.dataset_hash.empty() && cfg.dataset_hash != hash)
        throw ici::ConfigError("dataset hash " + hash + " does not match config " +
                               cfg.dataset_hash);
      const auto result = ici::train_model(cfg, ds);
      ici::write_training_artifacts(out, cfg, hash, result);
      print_train_summary(result);
    } else if (*ev) {
      const auto model = ici::load_model(cfg, out);
      const auto evaluation = ici::evaluate_model(cfg, model);
      ici::write_evaluation_artifacts(out, evaluation);
      std::cout << ici::dump_json(evaluation.report.to_json());
    } else if (*sw) {
      if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
      std::filesystem::create_directories(out);
      ici::write_text(out / "config.json", ici::dump_json(cfg.to_json()));
      const auto rows = ici::run_sweep(cfg, out);
      ici::write_results_csv(out / "results.csv", rows);
      const auto summary = ici::sweep_summary(rows);
      ici::write_text(out / "summary.json", ici::dump_json(summary));
      std::cout << ici::dump_json(summary);
    }
  } catch (const ici::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ici::DivergedRun& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const ici::TrainingAborted& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return kTrainingAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
