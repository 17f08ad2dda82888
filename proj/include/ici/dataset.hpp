#pragma once

#include "ici/plants.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ici {

/// Base seeds of distinct runs are spaced by this stride so that the
/// per-trajectory seeds (base + n) of different runs never overlap.
inline constexpr std::uint64_t kSeedStride = 1000003;

struct Trajectory {
  Sequence r;
  Sequence u;
  Sequence y;
};

struct DatasetMeta {
  std::string benchmark;
  std::string controller;
  Index n_trajectories = 0;
  Index horizon = 0;
  Index input_dim = 0;
  Index output_dim = 0;
  double sigma_r = 0.0;
  NoiseSpec noise;
  std::uint64_t base_seed = 0;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Trajectory> trajectories;

  Index size() const { return static_cast<Index>(trajectories.size()); }
};

/// Excitation and noise for trajectory `index` of a run seeded by `base_seed`.
/// Streams are keyed by (base_seed + index, stream id) so they do not depend
/// on scheduling order.
struct TrajectoryNoise {
  Sequence r;
  Sequence v;
};
TrajectoryNoise draw_trajectory_noise(const Benchmark& bench, Index horizon, double sigma_r,
                                      std::uint64_t base_seed, Index index);

/// Runs the true closed loop N times from the fixed initial condition.
/// Trajectories are simulated in parallel (see ICI_THREADS).
Dataset collect_dataset(const Benchmark& bench, Index n_trajectories, Index horizon,
                        double sigma_r, std::uint64_t base_seed);

/// Writes meta.json and traj_<n>.csv files into `dir`.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

/// SHA-256 (hex) over the serialized meta.json and CSV files in order.
std::string dataset_hash(const Dataset& ds);

std::string sha256_hex(const std::string& bytes);

}  // namespace ici
