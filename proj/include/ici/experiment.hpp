#pragma once

#include "ici/config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ici {

/// Base seed of the training data of a run with seed `seed`.
std::uint64_t data_seed(std::uint64_t seed);
/// Base seed of the test set of a run with seed `seed`.
std::uint64_t test_seed(const ExperimentConfig& cfg, std::uint64_t seed);

Dataset generate_dataset(const ExperimentConfig& cfg);

/// Trains cfg.strategy on the dataset. Initialization is seeded by cfg.seed.
TrainResult train_model(const ExperimentConfig& cfg, const Dataset& ds);

/// The model named by cfg.strategy: the true plant, or the checkpoint in `run_dir`.
ModelUnderTest load_model(const ExperimentConfig& cfg, const std::filesystem::path& run_dir);

Evaluation evaluate_model(const ExperimentConfig& cfg, const ModelUnderTest& model);

/// config.json (with dataset hash), checkpoint.json, loss.csv.
void write_training_artifacts(const std::filesystem::path& dir, ExperimentConfig cfg,
                              const std::string& data_hash, const TrainResult& result);
/// metrics.json, ol_bands.csv, cl_bands.csv.
void write_evaluation_artifacts(const std::filesystem::path& dir, const Evaluation& ev);

struct SweepRow {
  std::string benchmark;
  std::string strategy;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  MetricReport metrics;
  Index train_diverged = 0;

  bool diverged() const { return metrics.ol_diverged > 0 || metrics.cl_diverged > 0; }
};

/// Cross product of sigmas x seeds x strategies (each list defaulting to the
/// single value in the config). One dataset per (sigma, seed) is shared by
/// all strategies. With `out`, every run gets its own directory below it.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& out = {});

void write_results_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

/// Per (strategy, sigma): mean and 95% half-width of every metric over the
/// seeds where it was computable.
nlohmann::json sweep_summary(const std::vector<SweepRow>& rows);

}  // namespace ici
