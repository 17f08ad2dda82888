#include "ici/training.hpp"

#include "ici/errors.hpp"
#include "ici/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace ici {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::direct_id: return "S1_direct_id";
    case Strategy::direct_ici: return "S2_dir_ici";
    case Strategy::indirect_ici: return "S3_indir_ici";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& s) {
  for (auto k : {Strategy::direct_id, Strategy::direct_ici, Strategy::indirect_ici})
    if (to_string(k) == s) return k;
  if (s == "S1") return Strategy::direct_id;
  if (s == "S2") return Strategy::direct_ici;
  if (s == "S3") return Strategy::indirect_ici;
  throw ConfigError("unknown strategy '" + s + "'");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"learning_rate", learning_rate},
          {"lr_decay", lr_decay},
          {"optimizer", optimizer == OptimizerKind::adam ? "adam" : "sgd"},
          {"beta1", beta1},
          {"beta2", beta2},
          {"epsilon", epsilon},
          {"batch_size", batch_size},
          {"train_seed", seed},
          {"patience", patience},
          {"min_delta", min_delta}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  const std::string opt = j.value("optimizer", std::string("adam"));
  if (opt == "adam")
    c.optimizer = OptimizerKind::adam;
  else if (opt == "sgd")
    c.optimizer = OptimizerKind::sgd;
  else
    throw ConfigError("unknown optimizer '" + opt + "'");
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("train_seed", c.seed);
  c.patience = j.value("patience", c.patience);
  c.min_delta = j.value("min_delta", c.min_delta);
  if (c.epochs < 1 || !(c.learning_rate > 0.0) || !(c.lr_decay > 0.0) || c.patience < 1 ||
      c.batch_size < 0 || !(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0) ||
      !(c.epsilon > 0.0) || c.min_delta < 0.0)
    throw ConfigError("invalid training configuration");
  return c;
}

double cost(std::span<const Sequence> measured, std::span<const Sequence> predicted) {
  if (measured.size() != predicted.size() || measured.empty())
    throw ContractViolation("cost: prediction and measurement counts differ or are empty");
  double total = 0.0;
  for (std::size_t n = 0; n < measured.size(); ++n) {
    const auto& y = measured[n];
    const auto& p = predicted[n];
    if (y.dim() != p.dim() || y.horizon() != p.horizon() || y.horizon() == 0)
      throw ContractViolation("cost: sequence shapes differ");
    total += (y.matrix() - p.matrix()).squaredNorm() / static_cast<double>(y.horizon());
  }
  return total / static_cast<double>(measured.size());
}

const Sequence& model_input(Strategy kind, const Trajectory& traj) {
  return kind == Strategy::indirect_ici ? traj.r : traj.u;
}

namespace {

struct TrajectoryPass {
  Sequence prediction;
  double squared_error = 0.0;
  Vector gradient;
  bool diverged = false;
};

// Forward pass of one trajectory under a strategy, then optionally the
// reverse pass for d/dtheta of weight * sum_t ||y_t - y_hat_t||^2.
TrajectoryPass run_trajectory(const EffectiveModel& model, const StrategySpec& strategy,
                              const Trajectory& tr, double weight, bool want_gradient) {
  const auto& p = model.params();
  const Sequence& input = model_input(strategy.kind, tr);
  if (input.dim() != p.in_dim() || tr.y.dim() != p.out_dim())
    throw ConfigError("trajectory dimensions do not match the model");
  const Index T = input.horizon();
  const bool in_loop = strategy.kind == Strategy::direct_ici;

  ControllerPtr k;
  if (in_loop) {
    k = make_controller(strategy.controller);
    if (k->in_dim() != p.out_dim() || k->out_dim() != p.in_dim())
      throw ConfigError("controller dimensions do not match the model");
  }

  TrajectoryPass pass;
  Matrix H = Matrix::Zero(p.n_hidden(), T + 1);
  Matrix W(p.in_dim(), T);
  pass.prediction = Sequence(p.out_dim(), T);
  std::vector<Matrix> k_y;
  ControllerJacobian state_jac;
  if (in_loop && want_gradient) k_y.reserve(static_cast<std::size_t>(T));

  Vector h(p.n_hidden()), h_next(p.n_hidden());
  for (Index t = 0; t < T; ++t) {
    h = H.col(t);
    const Vector y = model.readout(h);
    if (!is_bounded(y)) {
      pass.diverged = true;
      return pass;
    }
    pass.prediction[t] = y;
    if (in_loop) {
      W.col(t) = input[t] - k->step(y);
      if (want_gradient) {
        state_jac = k->last_jacobian();
        k_y.push_back(state_jac.k_y);
      }
    } else {
      W.col(t) = input[t];
    }
    if (!is_bounded(W.col(t))) {
      pass.diverged = true;
      return pass;
    }
    model.transition(h, W.col(t), h_next);
    H.col(t + 1) = h_next;
  }
  pass.squared_error = (tr.y.matrix() - pass.prediction.matrix()).squaredNorm();
  if (!want_gradient) return pass;

  GradientAccumulator acc(model);
  const Index n_k = in_loop ? k->state_dim() : 0;
  Vector lambda = Vector::Zero(p.n_hidden());
  Vector lambda_h(p.n_hidden());
  Vector mu = Vector::Zero(n_k);
  Vector gw(p.in_dim());
  Vector gy(p.out_dim());
  for (Index t = T - 1; t >= 0; --t) {
    h = H.col(t);
    acc.transition(h, W.col(t), H.col(t + 1), lambda, gw, lambda_h);
    gy = -2.0 * weight * (tr.y[t] - pass.prediction[t]);
    if (in_loop) {
      // w_t = u_t - kappa_t, kappa_t = k(x_t, y_t), x_{t+1} = f(x_t, y_t)
      const Vector g_kappa = -gw;
      gy.noalias() += k_y[static_cast<std::size_t>(t)].transpose() * g_kappa;
      if (n_k > 0) {
        gy.noalias() += state_jac.x_y.transpose() * mu;
        Vector mu_prev = state_jac.k_x.transpose() * g_kappa;
        mu_prev.noalias() += state_jac.x_x.transpose() * mu;
        mu.swap(mu_prev);
      }
    }
    acc.readout(h, gy, lambda_h);
    lambda.swap(lambda_h);
  }
  pass.gradient = acc.finish();
  return pass;
}

double rms(const Dataset& ds, const Sequence Trajectory::*member) {
  double sq = 0.0;
  double count = 0.0;
  for (const auto& tr : ds.trajectories) {
    sq += (tr.*member).matrix().squaredNorm();
    count += static_cast<double>((tr.*member).matrix().size());
  }
  const double v = count > 0 ? std::sqrt(sq / count) : 0.0;
  return v > 1e-12 ? v : 1.0;
}

}  // namespace

Sequence predict(const StrategySpec& strategy, const StableOperatorParams& params,
                 const Trajectory& traj) {
  const EffectiveModel model(params);
  auto pass = run_trajectory(model, strategy, traj, 0.0, false);
  if (pass.diverged) throw DivergedRun(-1, to_string(strategy.kind) + " prediction diverged");
  return std::move(pass.prediction);
}

LossGradient loss_and_gradient(const StrategySpec& strategy, const StableOperatorParams& params,
                               std::span<const Trajectory> data) {
  if (data.empty()) throw ContractViolation("loss_and_gradient: no trajectories");
  const EffectiveModel model(params);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  std::vector<TrajectoryPass> passes(data.size());
  parallel_for(data.size(), [&](std::size_t n) {
    const double weight = inv_n / static_cast<double>(data[n].y.horizon());
    passes[n] = run_trajectory(model, strategy, data[n], weight, true);
  });
  LossGradient out;
  out.gradient = Vector::Zero(params.parameter_count());
  for (std::size_t n = 0; n < passes.size(); ++n) {
    const auto& pass = passes[n];
    if (pass.diverged) {
      out.loss += kDivergedLoss * inv_n;
      if (out.diverged++ == 0) out.first_diverged = static_cast<Index>(n);
      continue;
    }
    out.loss += pass.squared_error * inv_n / static_cast<double>(data[n].y.horizon());
    out.gradient += pass.gradient;
  }
  return out;
}

double grad_check(const StrategySpec& strategy, std::span<const Trajectory> data,
                  const StableOperatorParams& params, double fd_step) {
  // A diverged trajectory contributes a constant; it has no derivative to
  // check and its large value would swamp the differences.
  std::vector<Trajectory> bounded;
  for (const auto& tr : data)
    if (loss_and_gradient(strategy, params, std::span(&tr, 1)).diverged == 0) bounded.push_back(tr);
  if (bounded.empty()) throw ContractViolation("grad_check: every trajectory diverges at theta");
  data = bounded;
  const Vector analytic = loss_and_gradient(strategy, params, data).gradient;
  const Vector theta = params.to_vector();
  StableOperatorParams probe = params;
  double worst = 0.0;
  for (Index i = 0; i < theta.size(); ++i) {
    Vector shifted = theta;
    shifted(i) = theta(i) + fd_step;
    probe.assign(shifted);
    const double up = loss_and_gradient(strategy, probe, data).loss;
    shifted(i) = theta(i) - fd_step;
    probe.assign(shifted);
    const double down = loss_and_gradient(strategy, probe, data).loss;
    const double fd = (up - down) / (2.0 * fd_step);
    const double scale = std::max(std::abs(analytic(i)), std::abs(fd));
    if (scale <= 1e-8) continue;
    worst = std::max(worst, std::abs(analytic(i) - fd) / scale);
  }
  return worst;
}

Optimizer::Optimizer(const TrainConfig& cfg, Index n)
    : cfg_(cfg), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

void Optimizer::step(Vector& theta, const Vector& grad, double lr) {
  if (cfg_.optimizer == OptimizerKind::sgd) {
    theta -= lr * grad;
    return;
  }
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  theta.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.epsilon);
}

StableOperatorParams initial_params(const StrategySpec& strategy, const ModelSizing& sizing,
                                    const Dataset& dataset, std::uint64_t seed) {
  auto p = StableOperatorParams::random(sizing, dataset.meta.input_dim, dataset.meta.output_dim,
                                        seed);
  // Start close to the identity so every hidden mode is slow; random small
  // recurrences forget the initial transient too quickly to fit it.
  p.A_raw = Matrix::Identity(sizing.n_hidden, sizing.n_hidden) + 0.1 * p.A_raw;
  p.in_scale = strategy.kind == Strategy::indirect_ici ? rms(dataset, &Trajectory::r)
                                                       : rms(dataset, &Trajectory::u);
  p.out_scale = rms(dataset, &Trajectory::y);
  // Small initial gain: with gain below 1 / gamma_K the initial ICI loop is
  // a contraction and the first forward passes stay bounded.
  const auto gamma_k = make_controller(strategy.controller)->certified_ifg();
  const double target = kInitialLoopGain / std::max(1.0, gamma_k.value_or(1.0));
  if (const double g = incremental_gain_bound(p); g > target) p.C *= target / g;
  return p;
}

TrainResult train(const StrategySpec& strategy, StableOperatorParams init, const Dataset& dataset,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (dataset.trajectories.empty()) throw ConfigError("train: empty dataset");
  const std::span<const Trajectory> all(dataset.trajectories);
  const std::size_t n = all.size();
  const std::size_t batch =
      (cfg.batch_size <= 0 || static_cast<std::size_t>(cfg.batch_size) >= n)
          ? n
          : static_cast<std::size_t>(cfg.batch_size);

  TrainResult result;
  StableOperatorParams params = std::move(init);
  Vector theta = params.to_vector();
  Optimizer opt(cfg, theta.size());
  std::seed_seq shuffle_seed{cfg.seed, std::uint64_t{0xba7c}};
  std::mt19937_64 rng(shuffle_seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  double best = std::numeric_limits<double>::infinity();
  Vector best_theta = theta;
  Index since_best = 0;

  auto check = [](const LossGradient& lg, Index epoch) {
    if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
      throw TrainingAborted(epoch, lg.first_diverged, "non-finite training loss or gradient");
    }
  };

  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double frac =
        cfg.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1) : 0.0;
    const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, frac);
    const Vector evaluated = theta;
    double epoch_loss = 0.0;
    if (batch == n) {
      const auto lg = loss_and_gradient(strategy, params, all);
      check(lg, epoch);
      epoch_loss = lg.loss;
      result.diverged_predictions += lg.diverged;
      opt.step(theta, lg.gradient, lr);
    } else {
      const auto full = loss_and_gradient(strategy, params, all);
      check(full, epoch);
      epoch_loss = full.loss;
      result.diverged_predictions += full.diverged;
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<Trajectory> mini;
      for (std::size_t start = 0; start < n; start += batch) {
        mini.clear();
        for (std::size_t i = start; i < std::min(n, start + batch); ++i)
          mini.push_back(all[order[i]]);
        const auto lg = loss_and_gradient(strategy, params, mini);
        check(lg, epoch);
        opt.step(theta, lg.gradient, lr);
        params.assign(theta);
      }
    }
    params.assign(theta);
    result.loss_curve.push_back(epoch_loss);
    if (epoch_loss < best - cfg.min_delta) {
      best = epoch_loss;
      best_theta = evaluated;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      result.early_stopped = true;
    }
    if (on_epoch) on_epoch(epoch, params);
    if (result.early_stopped) break;
  }
  if (!result.early_stopped) {
    const auto last = loss_and_gradient(strategy, params, all);
    if (std::isfinite(last.loss) && last.loss < best) {
      best = last.loss;
      best_theta = theta;
      result.best_epoch = static_cast<Index>(result.loss_curve.size());
    }
    result.loss_curve.push_back(last.loss);
  }
  params.assign(best_theta);
  result.params = std::move(params);
  return result;
}

}  // namespace ici
