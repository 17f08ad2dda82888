#pragma once

#include "ici/dataset.hpp"
#include "ici/plants.hpp"
#include "ici/stable_family.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ici {

enum class Strategy {
  direct_id,     // S1: y_hat = G(u)
  direct_ici,    // S2: y_hat = Q(u - K(y_hat))
  indirect_ici,  // S3: y_hat = Q(r)
};

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct StrategySpec {
  Strategy kind = Strategy::indirect_ici;
  ControllerSpec controller;  // unused by S1
};

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  Index epochs = 500;
  double learning_rate = 1e-3;
  /// The learning rate decays geometrically to learning_rate * lr_decay
  /// over the epochs; 1 keeps it constant.
  double lr_decay = 1.0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Index batch_size = 0;  // 0 or >= N means full batch
  std::uint64_t seed = 0;
  Index patience = 50;
  double min_delta = 1e-9;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Loss charged to a trajectory whose prediction diverged.
inline constexpr double kDivergedLoss = 1e6;

/// (1/N) sum_n (1/T) sum_t ||y_t - y_hat_t||^2.
double cost(std::span<const Sequence> measured, std::span<const Sequence> predicted);

/// Prediction of one trajectory under the strategy's constraint.
Sequence predict(const StrategySpec& strategy, const StableOperatorParams& params,
                 const Trajectory& traj);

/// The signal a strategy feeds to the trained operator (u for S1/S2, r for S3).
const Sequence& model_input(Strategy kind, const Trajectory& traj);

struct LossGradient {
  double loss = 0.0;
  Vector gradient;
  Index diverged = 0;
  Index first_diverged = -1;
};

/// J over the given trajectories and dJ/dtheta. Trajectories are processed
/// in parallel and reduced in index order.
LossGradient loss_and_gradient(const StrategySpec& strategy, const StableOperatorParams& params,
                               std::span<const Trajectory> data);

/// max_i |g_i - fd_i| / max(|g_i|, |fd_i|) over components with magnitude
/// above 1e-8, using central differences with step `fd_step`. Trajectories
/// that diverge at `params` are left out.
double grad_check(const StrategySpec& strategy, std::span<const Trajectory> data,
                  const StableOperatorParams& params, double fd_step = 1e-5);

struct TrainResult {
  StableOperatorParams params;
  /// J at the parameters before each epoch; without early stopping a last
  /// entry holds J after the final update.
  std::vector<double> loss_curve;
  Index best_epoch = 0;
  Index diverged_predictions = 0;
  bool early_stopped = false;
};

/// Called after every epoch with (epoch, current parameters).
using EpochCallback = std::function<void(Index, const StableOperatorParams&)>;

/// Fits the operator by minimizing J. Returns the parameters with the lowest
/// recorded epoch loss. Throws TrainingAborted on a non-finite loss or
/// gradient.
TrainResult train(const StrategySpec& strategy, StableOperatorParams init, const Dataset& dataset,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Loop gain gamma_Q * gamma_K of the initial model.
inline constexpr double kInitialLoopGain = 0.5;

/// Random initialization with normalization scales taken from the data,
/// near-identity recurrence and readout scaled to a small initial gain.
StableOperatorParams initial_params(const StrategySpec& strategy, const ModelSizing& sizing,
                                    const Dataset& dataset, std::uint64_t seed);

/// Adam / SGD state over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, Index n);
  void step(Vector& theta, const Vector& grad, double lr);

 private:
  TrainConfig cfg_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

}  // namespace ici
