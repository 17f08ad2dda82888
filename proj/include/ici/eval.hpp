#pragma once

#include "ici/dataset.hpp"
#include "ici/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ici {

/// A model under evaluation: a trained operator used per its strategy, or
/// the true plant itself.
struct ModelUnderTest {
  std::optional<Strategy> strategy;  // empty: the true plant
  StableOperatorParams params;

  static ModelUnderTest true_plant() { return {}; }
  static ModelUnderTest learned(Strategy s, StableOperatorParams p) { return {s, std::move(p)}; }
};

/// The plant model G_hat realized by a model (S1: Q itself, S2/S3: the ICI
/// interconnection with a copy of the controller).
StrictPtr realize_plant_model(const ModelUnderTest& model, const Benchmark& bench);

/// R^2 = 1 - sum ||y - y_hat||^2 / sum ||y - y_bar||^2 with y_bar the
/// overall componentwise mean. Empty when the denominator is zero.
std::optional<double> r_squared(std::span<const Sequence> measured,
                                std::span<const Sequence> predicted);

struct MetricReport {
  std::optional<double> ol_mse;  // empty: not computable (diverged)
  std::optional<double> cl_mse;
  std::optional<double> ol_r2;
  std::optional<double> cl_r2;
  Index n_test = 0;
  Index ol_diverged = 0;
  Index cl_diverged = 0;

  nlohmann::json to_json() const;
};

/// Per-step mean and 95% band (mean +/- 1.96 std / sqrt(n)) of true and
/// model outputs, one row per (t, component).
struct BandRow {
  Index t = 0;
  Index component = 0;
  double true_mean = 0, true_lo = 0, true_hi = 0;
  double model_mean = 0, model_lo = 0, model_hi = 0;
};

struct EvalOptions {
  Index n_test = 100;
  Index horizon = 100;
  double sigma_r = 0.5;
  std::uint64_t seed = 0;
};

struct Evaluation {
  MetricReport report;
  std::vector<BandRow> ol_bands;
  std::vector<BandRow> cl_bands;
};

/// Open loop: the excitation drives the true plant (plus measurement noise)
/// and the model. Closed loop: both loops see identical (r, v).
Evaluation evaluate(const ModelUnderTest& model, const Benchmark& bench, const EvalOptions& opts);

void write_bands_csv(const std::filesystem::path& path, const std::vector<BandRow>& rows);

struct ConfidenceInterval {
  double mean = 0.0;
  double halfwidth = 0.0;
};

/// mean +/- 1.96 s / sqrt(n), s with n - 1 denominator. Needs n >= 2.
ConfidenceInterval confidence_interval(std::span<const double> values);

/// Response to a unit impulse at t = 0 on input channel 0, minus the response
/// to zero input, at lags 1..n_lags.
Vector impulse_response(const CausalOperator& op, Index n_lags);

/// The ICI operator a trained model implies: Q itself for S2/S3, and
/// G_hat (I - K G_hat)^{-1} for S1.
StrictPtr implied_q(const ModelUnderTest& model, const Benchmark& bench);

struct ConsistencyOptions {
  std::vector<std::pair<Index, Index>> sizes{{10, 100}, {40, 100}, {160, 100}};
  std::vector<Strategy> strategies{Strategy::indirect_ici};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  NoiseSpec noise = NoiseSpec::gaussian(0.1);
  double sigma_r = 1.0;
  Index n_lags = 20;
  ModelSizing sizing{2, 2, 0.95};
  TrainConfig train;
};

struct ConsistencyCell {
  Strategy strategy = Strategy::indirect_ici;
  Index n = 0;
  Index horizon = 0;
  std::uint64_t seed = 0;
  std::optional<double> error;  // empty: training failed
};

struct ConsistencyTable {
  double true_q_norm = 0.0;
  std::vector<ConsistencyCell> cells;

  /// Mean error of a (strategy, N, T) cell over seeds; empty if any failed.
  std::optional<double> mean_error(Strategy s, Index n, Index horizon) const;
};

/// Trains each strategy at each size and seed on the linear benchmark and
/// records the impulse-response distance to the true ICI operator.
ConsistencyTable consistency_sweep(const ConsistencyOptions& opts);

}  // namespace ici
