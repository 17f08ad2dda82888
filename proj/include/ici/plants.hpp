#pragma once

#include "ici/operator.hpp"
#include "ici/stable_family.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>

namespace ici {

// ---------------------------------------------------------------------------
// Controllers

/// Local derivatives of a controller step kappa_t = k(x_t, y_t),
/// x_{t+1} = f(x_t, y_t). Used to differentiate through the ICI loop.
struct ControllerJacobian {
  Matrix k_y;  // d kappa_t / d y_t
  Matrix k_x;  // d kappa_t / d x_t
  Matrix x_x;  // d x_{t+1} / d x_t
  Matrix x_y;  // d x_{t+1} / d y_t
};

class Controller : public CausalOperator {
 public:
  virtual Index state_dim() const { return 0; }
  /// Jacobians of the most recent step.
  virtual ControllerJacobian last_jacobian() const = 0;
  /// Certified global incremental l2 gain, when one exists.
  virtual std::optional<double> certified_ifg() const = 0;
  virtual std::unique_ptr<Controller> clone_controller() const = 0;
  OperatorPtr clone() const final { return clone_controller(); }
};

using ControllerPtr = std::unique_ptr<Controller>;

enum class ControllerKind { zero, scalar_poly, proportional_2d, linear_ss };

std::string to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(const std::string& s);

struct ControllerSpec {
  ControllerKind kind = ControllerKind::zero;
  Index in_dim = 1;   // d_y
  Index out_dim = 1;  // d_u
  Vector kappa;       // proportional gains
  Vector target;      // proportional set-point y*
  Matrix A, B, C, D;  // linear_ss: x' = A x + B y, kappa = C x + D y

  static ControllerSpec zero(Index d_y, Index d_u);
  static ControllerSpec scalar_poly();
  static ControllerSpec proportional(const Vector& kappa);
  static ControllerSpec linear(Matrix A, Matrix B, Matrix C, Matrix D);
  static ControllerSpec static_gain(Matrix D);
};

ControllerPtr make_controller(const ControllerSpec& spec);

/// K(y) = -y^2 - 1 + 0.5 y.
double scalar_poly_control(double y);

// ---------------------------------------------------------------------------
// Plants. All are strictly causal and return noise-free outputs.

/// x_{t+1} = x_t^2 + 1 + u_t, y_t = x_t. Returns x_t and updates x in place;
/// throws DivergedRun when the new state is unbounded.
double scalar_plant_step(double& x, double u);

class ScalarUnstablePlant final : public StrictlyCausalOperator {
 public:
  explicit ScalarUnstablePlant(double x0 = 0.0) : x0_(x0), x_(x0) {}
  Index in_dim() const override { return 1; }
  Index out_dim() const override { return 1; }
  void reset() override { x_ = x0_; }
  Vector output() const override { return Vector::Constant(1, x_); }
  void advance(const Vector& u) override { x_ = x_ * x_ + 1.0 + u(0); }
  StrictPtr clone_strict() const override { return std::make_unique<ScalarUnstablePlant>(*this); }

 private:
  double x0_;
  double x_;
};

struct RobotParams {
  double mass_kg = 1.0;
  double ts_seconds = 0.05;
  double drag_b1 = 1.0;
  double drag_b2 = 0.01;
  Eigen::Vector2d x0_position_m{-2.0, -2.0};
  Eigen::Vector2d x0_velocity_mps{10.0, 0.0};
};

struct RobotState {
  Eigen::Vector2d position;
  Eigen::Vector2d velocity;
};

/// C(x2) = b1 x2 - b2 ||x2|| x2.
Eigen::Vector2d robot_drag(const RobotParams& p, const Eigen::Vector2d& velocity);

/// Returns the noisy position from the pre-update state, then applies one
/// forward-Euler step with force u.
Eigen::Vector2d robot_step(RobotState& state, const RobotParams& p, const Eigen::Vector2d& u,
                           const Eigen::Vector2d& v);

class PointMassRobot final : public StrictlyCausalOperator {
 public:
  explicit PointMassRobot(RobotParams params = {});
  Index in_dim() const override { return 2; }
  Index out_dim() const override { return 2; }
  void reset() override;
  Vector output() const override { return state_.position; }
  void advance(const Vector& u) override;
  StrictPtr clone_strict() const override { return std::make_unique<PointMassRobot>(*this); }

  const RobotState& state() const { return state_; }

 private:
  RobotParams params_;
  RobotState state_;
};

/// x' = A x + B u, y = C x from initial state x0.
class LinearPlant final : public StrictlyCausalOperator {
 public:
  LinearPlant(Matrix A, Matrix B, Matrix C, Vector x0 = {});
  Index in_dim() const override { return B_.cols(); }
  Index out_dim() const override { return C_.rows(); }
  void reset() override { x_ = x0_; }
  Vector output() const override { return C_ * x_; }
  void advance(const Vector& u) override { x_ = A_ * x_ + B_ * u; }
  StrictPtr clone_strict() const override { return std::make_unique<LinearPlant>(*this); }

 private:
  Matrix A_, B_, C_;
  Vector x0_, x_;
};

double spectral_radius(const Matrix& a);

// ---------------------------------------------------------------------------
// Noise

enum class NoiseKind { zero, gaussian, truncated_gaussian, colored_arma };

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& s);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::zero;
  /// Std of the underlying normal (truncated_gaussian: before truncation;
  /// colored_arma: stationary std of the filtered output).
  double std = 0.0;
  double lower = -0.25;
  double upper = 0.25;
  double ar = 0.9;
  double ma = 0.5;
  Index burn_in = 200;

  static NoiseSpec zero() { return {}; }
  static NoiseSpec gaussian(double std);
  static NoiseSpec truncated(double std, double lower, double upper);
  static NoiseSpec colored(double std, double ar = 0.9, double ma = 0.5);

  nlohmann::json to_json() const;
  static NoiseSpec from_json(const nlohmann::json& j);
};

/// Standard deviation of N(0, std^2) truncated to (lower, upper).
double truncated_normal_std(double std, double lower, double upper);
/// Stationary variance of v_t = ar v_{t-1} + e_t + ma e_{t-1} per unit white variance.
double arma_variance_gain(double ar, double ma);
double arma_lag1_autocorrelation(double ar, double ma);

/// Per-component i.i.d. noise stream. Components of colored noise are
/// independent ARMA(1,1) processes.
class NoiseGenerator {
 public:
  NoiseGenerator(const NoiseSpec& spec, Index dim, std::seed_seq& seed);

  Vector next();
  Sequence sample(Index horizon);

 private:
  double draw_truncated();

  NoiseSpec spec_;
  Index dim_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  double white_std_ = 0.0;
  Vector prev_v_;
  Vector prev_e_;
};

// ---------------------------------------------------------------------------
// Benchmark registry

struct BenchmarkOptions {
  std::string id = "scalar_unstable";
  double scalar_x0 = 0.0;
  RobotParams robot;
  Vector kappa;  // proportional gains for the robot, defaults to (1, 1)
  std::optional<NoiseSpec> noise;
};

struct Benchmark {
  std::string id;
  Index input_dim = 1;
  Index output_dim = 1;
  ControllerSpec controller;
  NoiseSpec noise;
  BenchmarkOptions options;

  StrictPtr make_plant() const;
  ControllerPtr make_controller() const { return ici::make_controller(controller); }
};

/// Registry lookup: "scalar_unstable", "robot", "linear_bench".
Benchmark make_benchmark(const BenchmarkOptions& options);

/// SISO two-state plant with spectral radius 1.25, a static output gain that
/// places the closed-loop poles at 0.5 and 0.25, and the true ICI operator
/// written as an identity-activated member of the stable family.
struct LinearBenchmark {
  Matrix A, B, C;
  double gain = 0.0;
  Matrix closed_loop;
  StableOperatorParams true_q;
};

LinearBenchmark linear_benchmark();

}  // namespace ici
