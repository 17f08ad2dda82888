#pragma once

#include "ici/eval.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace ici {

/// Outcome of a property suite: overall verdict plus a machine-readable
/// record of every property with sample counts and margins.
struct SuiteReport {
  bool passed = false;
  nlohmann::json details;
};

struct Theorem1Options {
  Index n_theta = 50;
  Index n_pairs = 100;
  Index horizon = 50;
  Index n_linear_pairs = 50;
  Index reconstruction_horizon = 100;
  std::uint64_t seed = 0;
};

/// T.1: with a random stable operator Q and a proportional controller of
/// certified gain gamma_K, the loop (ICI(Q, K), K) keeps
/// ||omega||_2 <= ||r||_2 + gamma_K ||v||_2 for unit-norm (r, v).
SuiteReport verify_internal_bound(const Theorem1Options& opts = {});

/// T.2: ICI(construct_true_q(G, K), K) reproduces G on random stabilized
/// linear pairs and on the scalar benchmark.
SuiteReport verify_reconstruction(const Theorem1Options& opts = {});

SuiteReport verify_theorem1(const Theorem1Options& opts = {});

/// b = feedback_inverse(Y)(a) followed by (I + Y)(b) returns a, for random
/// strictly causal Y.
SuiteReport verify_corollary1(Index n_instances = 100, Index horizon = 100,
                              std::uint64_t seed = 0);

/// Analytic vs central-difference gradients for S1, S2, S3 on N = 2, T = 20
/// slices of the scalar and robot benchmarks.
SuiteReport verify_gradients(Index n_theta = 5, Index n_trajectories = 2, Index horizon = 20,
                             std::uint64_t seed = 0);

struct ConsistencySuiteOptions {
  ConsistencyOptions white;
  ConsistencyOptions colored;
  double final_fraction = 0.05;  // of ||Q_true||
  double bias_ratio = 3.0;       // S1 / S3 under colored noise

  ConsistencySuiteOptions();
};

/// S3 error decreases with data under white noise and ends below
/// final_fraction * ||Q_true||; under colored noise S1 ends above
/// bias_ratio times S3.
SuiteReport verify_consistency(const ConsistencySuiteOptions& opts = {});

/// Dispatch by name: theorem1, corollary1, gradients, consistency.
SuiteReport run_suite(const std::string& name);

}  // namespace ici
