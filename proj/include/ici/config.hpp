#pragma once

#include "ici/eval.hpp"
#include "ici/plants.hpp"
#include "ici/training.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ici {

/// A complete experiment description. Serialized as flat JSON; a run is a
/// pure function of this file.
struct ExperimentConfig {
  std::string benchmark = "scalar_unstable";
  std::string strategy = "S3_indir_ici";  // or "true_plant" for evaluation
  double sigma_r = 0.5;
  Index n_trajectories = 40;
  Index horizon = 100;
  NoiseSpec noise;
  bool noise_from_benchmark = true;
  ModelSizing sizing;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> strategies;
  std::vector<double> sigmas;
  Index n_test = 100;
  Index test_horizon = 100;
  std::uint64_t test_seed_offset = 500001;  // test base seed = seed * kSeedStride + offset
  std::string dataset_hash;  // optional expectation checked by `train`
  double scalar_x0 = 0.0;
  RobotParams robot;
  Vector kappa;

  BenchmarkOptions benchmark_options() const;
  Benchmark make_benchmark() const { return ici::make_benchmark(benchmark_options()); }
  StrategySpec strategy_spec() const;

  nlohmann::json to_json() const;
  /// Throws ConfigError on unknown keys, wrong types or invalid values.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
};

/// Pretty JSON with a trailing newline, as written to every run directory.
std::string dump_json(const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace ici
