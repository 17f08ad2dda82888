#include "ici/plants.hpp"

#include "ici/errors.hpp"

#include <cmath>
#include <numbers>

namespace ici {

// ---------------------------------------------------------------------------
// Controllers

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::zero: return "zero";
    case ControllerKind::scalar_poly: return "scalar_poly";
    case ControllerKind::proportional_2d: return "proportional_2d";
    case ControllerKind::linear_ss: return "linear_ss";
  }
  return "unknown";
}

ControllerKind controller_kind_from_string(const std::string& s) {
  for (auto k : {ControllerKind::zero, ControllerKind::scalar_poly, ControllerKind::proportional_2d,
                 ControllerKind::linear_ss})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown controller kind '" + s + "'");
}

ControllerSpec ControllerSpec::zero(Index d_y, Index d_u) {
  ControllerSpec s;
  s.kind = ControllerKind::zero;
  s.in_dim = d_y;
  s.out_dim = d_u;
  return s;
}

ControllerSpec ControllerSpec::scalar_poly() {
  ControllerSpec s;
  s.kind = ControllerKind::scalar_poly;
  return s;
}

ControllerSpec ControllerSpec::proportional(const Vector& kappa) {
  ControllerSpec s;
  s.kind = ControllerKind::proportional_2d;
  s.in_dim = s.out_dim = kappa.size();
  s.kappa = kappa;
  s.target = Vector::Zero(kappa.size());
  return s;
}

ControllerSpec ControllerSpec::linear(Matrix A, Matrix B, Matrix C, Matrix D) {
  ControllerSpec s;
  s.kind = ControllerKind::linear_ss;
  s.in_dim = D.cols();
  s.out_dim = D.rows();
  s.A = std::move(A);
  s.B = std::move(B);
  s.C = std::move(C);
  s.D = std::move(D);
  return s;
}

ControllerSpec ControllerSpec::static_gain(Matrix D) {
  const Index d_y = D.cols();
  const Index d_u = D.rows();
  return linear(Matrix(0, 0), Matrix(0, d_y), Matrix(d_u, 0), std::move(D));
}

double scalar_poly_control(double y) { return -y * y - 1.0 + 0.5 * y; }

namespace {

class ZeroController final : public Controller {
 public:
  ZeroController(Index d_y, Index d_u) : d_y_(d_y), d_u_(d_u) {}
  Index in_dim() const override { return d_y_; }
  Index out_dim() const override { return d_u_; }
  void reset() override {}
  Vector step(const Vector&) override { return Vector::Zero(d_u_); }
  ControllerJacobian last_jacobian() const override {
    return {Matrix::Zero(d_u_, d_y_), Matrix(d_u_, 0), Matrix(0, 0), Matrix(0, d_y_)};
  }
  std::optional<double> certified_ifg() const override { return 0.0; }
  ControllerPtr clone_controller() const override { return std::make_unique<ZeroController>(*this); }

 private:
  Index d_y_, d_u_;
};

class ScalarPolyController final : public Controller {
 public:
  Index in_dim() const override { return 1; }
  Index out_dim() const override { return 1; }
  void reset() override { last_y_ = 0.0; }
  Vector step(const Vector& y) override {
    last_y_ = y(0);
    return Vector::Constant(1, scalar_poly_control(last_y_));
  }
  ControllerJacobian last_jacobian() const override {
    return {Matrix::Constant(1, 1, -2.0 * last_y_ + 0.5), Matrix(1, 0), Matrix(0, 0), Matrix(0, 1)};
  }
  // Quadratic growth: no global incremental gain.
  std::optional<double> certified_ifg() const override { return std::nullopt; }
  ControllerPtr clone_controller() const override {
    return std::make_unique<ScalarPolyController>(*this);
  }

 private:
  double last_y_ = 0.0;
};

class ProportionalController final : public Controller {
 public:
  ProportionalController(Vector kappa, Vector target)
      : kappa_(std::move(kappa)), target_(std::move(target)) {
    if (target_.size() != kappa_.size()) throw ConfigError("proportional target dimension mismatch");
    if ((kappa_.array() < 0.0).any()) throw ConfigError("proportional gains must be nonnegative");
  }
  Index in_dim() const override { return kappa_.size(); }
  Index out_dim() const override { return kappa_.size(); }
  void reset() override {}
  Vector step(const Vector& y) override { return kappa_.cwiseProduct(target_ - y); }
  ControllerJacobian last_jacobian() const override {
    const Index d = kappa_.size();
    return {Matrix((-kappa_).asDiagonal()), Matrix(d, 0), Matrix(0, 0), Matrix(0, d)};
  }
  std::optional<double> certified_ifg() const override { return kappa_.maxCoeff(); }
  ControllerPtr clone_controller() const override {
    return std::make_unique<ProportionalController>(*this);
  }

 private:
  Vector kappa_;
  Vector target_;
};

class LinearController final : public Controller {
 public:
  LinearController(Matrix A, Matrix B, Matrix C, Matrix D)
      : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)),
        x_(Vector::Zero(A_.rows())) {
    const Index n = A_.rows();
    if (A_.cols() != n || B_.rows() != n || C_.cols() != n || B_.cols() != D_.cols() ||
        C_.rows() != D_.rows())
      throw ConfigError("linear controller matrices have inconsistent shapes");
  }
  Index in_dim() const override { return D_.cols(); }
  Index out_dim() const override { return D_.rows(); }
  Index state_dim() const override { return A_.rows(); }
  void reset() override { x_.setZero(); }
  Vector step(const Vector& y) override {
    Vector kappa = C_ * x_ + D_ * y;
    x_ = A_ * x_ + B_ * y;
    return kappa;
  }
  ControllerJacobian last_jacobian() const override { return {D_, C_, A_, B_}; }
  std::optional<double> certified_ifg() const override {
    if (A_.rows() == 0) return spectral_norm(D_);
    const double a = spectral_norm(A_);
    if (a >= 1.0) return std::nullopt;
    return spectral_norm(D_) + spectral_norm(C_) * spectral_norm(B_) / (1.0 - a);
  }
  ControllerPtr clone_controller() const override {
    return std::make_unique<LinearController>(*this);
  }

 private:
  Matrix A_, B_, C_, D_;
  Vector x_;
};

}  // namespace

ControllerPtr make_controller(const ControllerSpec& spec) {
  switch (spec.kind) {
    case ControllerKind::zero: return std::make_unique<ZeroController>(spec.in_dim, spec.out_dim);
    case ControllerKind::scalar_poly: return std::make_unique<ScalarPolyController>();
    case ControllerKind::proportional_2d:
      return std::make_unique<ProportionalController>(
          spec.kappa, spec.target.size() ? spec.target : Vector::Zero(spec.kappa.size()));
    case ControllerKind::linear_ss:
      return std::make_unique<LinearController>(spec.A, spec.B, spec.C, spec.D);
  }
  throw ConfigError("unknown controller kind");
}

// ---------------------------------------------------------------------------
// Plants

double scalar_plant_step(double& x, double u) {
  const double y = x;
  x = x * x + 1.0 + u;
  if (!std::isfinite(x) || std::abs(x) > kDivergenceThreshold)
    throw DivergedRun(-1, "scalar plant state diverged");
  return y;
}

Eigen::Vector2d robot_drag(const RobotParams& p, const Eigen::Vector2d& velocity) {
  return p.drag_b1 * velocity - p.drag_b2 * velocity.norm() * velocity;
}

Eigen::Vector2d robot_step(RobotState& s, const RobotParams& p, const Eigen::Vector2d& u,
                           const Eigen::Vector2d& v) {
  const Eigen::Vector2d y = s.position + v;
  const Eigen::Vector2d accel = (u - robot_drag(p, s.velocity)) / p.mass_kg;
  s.position += p.ts_seconds * s.velocity;
  s.velocity += p.ts_seconds * accel;
  if (!is_bounded(s.position) || !is_bounded(s.velocity))
    throw DivergedRun(-1, "robot state diverged");
  return y;
}

PointMassRobot::PointMassRobot(RobotParams params) : params_(std::move(params)) {
  if (!(params_.mass_kg > 0.0) || !(params_.ts_seconds > 0.0))
    throw ConfigError("robot mass and sampling time must be positive");
  if (!(params_.drag_b2 > 0.0 && params_.drag_b2 < params_.drag_b1))
    throw ConfigError("robot drag needs 0 < b2 < b1");
  reset();
}

void PointMassRobot::reset() {
  state_.position = params_.x0_position_m;
  state_.velocity = params_.x0_velocity_mps;
}

void PointMassRobot::advance(const Vector& u) {
  const Eigen::Vector2d accel = (Eigen::Vector2d(u) - robot_drag(params_, state_.velocity)) /
                                params_.mass_kg;
  state_.position += params_.ts_seconds * state_.velocity;
  state_.velocity += params_.ts_seconds * accel;
}

LinearPlant::LinearPlant(Matrix A, Matrix B, Matrix C, Vector x0)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), x0_(std::move(x0)) {
  if (x0_.size() == 0) x0_ = Vector::Zero(A_.rows());
  if (A_.rows() != A_.cols() || B_.rows() != A_.rows() || C_.cols() != A_.rows() ||
      x0_.size() != A_.rows())
    throw ConfigError("linear plant matrices have inconsistent shapes");
  x_ = x0_;
}

double spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::EigenSolver<Matrix>(a, false).eigenvalues().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Noise

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::zero: return "zero";
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::truncated_gaussian: return "truncated_gaussian";
    case NoiseKind::colored_arma: return "colored_arma";
  }
  return "unknown";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  for (auto k : {NoiseKind::zero, NoiseKind::gaussian, NoiseKind::truncated_gaussian,
                 NoiseKind::colored_arma})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown noise kind '" + s + "'");
}

NoiseSpec NoiseSpec::gaussian(double std) {
  NoiseSpec s;
  s.kind = NoiseKind::gaussian;
  s.std = std;
  return s;
}

NoiseSpec NoiseSpec::truncated(double std, double lower, double upper) {
  NoiseSpec s;
  s.kind = NoiseKind::truncated_gaussian;
  s.std = std;
  s.lower = lower;
  s.upper = upper;
  return s;
}

NoiseSpec NoiseSpec::colored(double std, double ar, double ma) {
  NoiseSpec s;
  s.kind = NoiseKind::colored_arma;
  s.std = std;
  s.ar = ar;
  s.ma = ma;
  return s;
}

nlohmann::json NoiseSpec::to_json() const {
  nlohmann::json j{{"kind", to_string(kind)}, {"std", std}};
  if (kind == NoiseKind::truncated_gaussian) {
    j["lower"] = lower;
    j["upper"] = upper;
  }
  if (kind == NoiseKind::colored_arma) {
    j["ar"] = ar;
    j["ma"] = ma;
    j["burn_in"] = burn_in;
  }
  return j;
}

NoiseSpec NoiseSpec::from_json(const nlohmann::json& j) {
  NoiseSpec s;
  s.kind = noise_kind_from_string(j.at("kind").get<std::string>());
  s.std = j.value("std", 0.0);
  s.lower = j.value("lower", s.lower);
  s.upper = j.value("upper", s.upper);
  s.ar = j.value("ar", s.ar);
  s.ma = j.value("ma", s.ma);
  s.burn_in = j.value("burn_in", s.burn_in);
  return s;
}

double truncated_normal_std(double std, double lower, double upper) {
  auto pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
  auto cdf = [](double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); };
  const double a = lower / std;
  const double b = upper / std;
  const double z = cdf(b) - cdf(a);
  const double m = (pdf(a) - pdf(b)) / z;
  const double var = 1.0 + (a * pdf(a) - b * pdf(b)) / z - m * m;
  return std * std::sqrt(var);
}

double arma_variance_gain(double ar, double ma) {
  return (1.0 + 2.0 * ar * ma + ma * ma) / (1.0 - ar * ar);
}

double arma_lag1_autocorrelation(double ar, double ma) {
  return (1.0 + ar * ma) * (ar + ma) / (1.0 + 2.0 * ar * ma + ma * ma);
}

NoiseGenerator::NoiseGenerator(const NoiseSpec& spec, Index dim, std::seed_seq& seed)
    : spec_(spec), dim_(dim), rng_(seed), prev_v_(Vector::Zero(dim)), prev_e_(Vector::Zero(dim)) {
  if (spec_.std < 0.0) throw ConfigError("noise std must be nonnegative");
  if (spec_.kind == NoiseKind::truncated_gaussian && !(spec_.lower < 0.0 && spec_.upper > 0.0))
    throw ConfigError("truncation interval must contain zero");
  if (spec_.kind == NoiseKind::colored_arma) {
    if (!(std::abs(spec_.ar) < 1.0)) throw ConfigError("ARMA filter must be stable (|ar| < 1)");
    white_std_ = spec_.std / std::sqrt(arma_variance_gain(spec_.ar, spec_.ma));
    for (Index k = 0; k < spec_.burn_in; ++k) next();
  }
}

double NoiseGenerator::draw_truncated() {
  if (spec_.std == 0.0) return 0.0;
  for (;;) {
    const double x = spec_.std * normal_(rng_);
    if (x > spec_.lower && x < spec_.upper) return x;
  }
}

Vector NoiseGenerator::next() {
  Vector v(dim_);
  switch (spec_.kind) {
    case NoiseKind::zero: v.setZero(); break;
    case NoiseKind::gaussian:
      for (Index i = 0; i < dim_; ++i) v(i) = spec_.std * normal_(rng_);
      break;
    case NoiseKind::truncated_gaussian:
      for (Index i = 0; i < dim_; ++i) v(i) = draw_truncated();
      break;
    case NoiseKind::colored_arma:
      for (Index i = 0; i < dim_; ++i) {
        const double e = white_std_ * normal_(rng_);
        v(i) = spec_.ar * prev_v_(i) + e + spec_.ma * prev_e_(i);
        prev_e_(i) = e;
      }
      prev_v_ = v;
      break;
  }
  return v;
}

Sequence NoiseGenerator::sample(Index horizon) {
  Sequence s(dim_, horizon);
  for (Index t = 0; t < horizon; ++t) s[t] = next();
  return s;
}

// ---------------------------------------------------------------------------
// Benchmarks

StrictPtr Benchmark::make_plant() const {
  if (id == "scalar_unstable") return std::make_unique<ScalarUnstablePlant>(options.scalar_x0);
  if (id == "robot") return std::make_unique<PointMassRobot>(options.robot);
  if (id == "linear_bench") {
    const LinearBenchmark lb = linear_benchmark();
    return std::make_unique<LinearPlant>(lb.A, lb.B, lb.C);
  }
  throw ConfigError("unknown benchmark '" + id + "'");
}

Benchmark make_benchmark(const BenchmarkOptions& options) {
  Benchmark b;
  b.id = options.id;
  b.options = options;
  if (options.id == "scalar_unstable") {
    b.input_dim = b.output_dim = 1;
    b.controller = ControllerSpec::scalar_poly();
    b.noise = NoiseSpec::truncated(0.1, -0.25, 0.25);
  } else if (options.id == "robot") {
    b.input_dim = b.output_dim = 2;
    const Vector kappa = options.kappa.size() ? options.kappa : Vector(Vector::Ones(2));
    if (kappa.size() != 2) throw ConfigError("robot needs two proportional gains");
    b.controller = ControllerSpec::proportional(kappa);
    b.noise = NoiseSpec::gaussian(0.1);
  } else if (options.id == "linear_bench") {
    b.input_dim = b.output_dim = 1;
    b.controller = ControllerSpec::static_gain(Matrix::Constant(1, 1, linear_benchmark().gain));
    b.noise = NoiseSpec::gaussian(0.1);
  } else {
    throw ConfigError("unknown benchmark '" + options.id + "'");
  }
  if (options.noise) b.noise = *options.noise;
  return b;
}

LinearBenchmark linear_benchmark() {
  LinearBenchmark lb;
  lb.A.resize(2, 2);
  lb.A << 1.25, 1.0, 0.0, -0.5;
  lb.B.resize(2, 1);
  lb.B << 0.0, 1.0;
  lb.C.resize(1, 2);
  lb.C << 1.0, 0.0;
  // u = r + gain * y gives characteristic polynomial
  // z^2 - 0.75 z - (0.625 + gain); gain = -0.75 puts the roots at 0.5 and 0.25.
  lb.gain = -0.75;
  lb.closed_loop = lb.A + lb.gain * lb.B * lb.C;

  // Q = G (I - K G)^{-1} has state matrix A + B K C. In its eigenbasis the
  // state matrix is diag(0.5, 0.25), whose spectral norm is below alpha.
  Eigen::EigenSolver<Matrix> es(lb.closed_loop);
  Vector lambda = es.eigenvalues().real();
  Matrix V = es.eigenvectors().real();
  if (lambda(0) < lambda(1)) {
    std::swap(lambda(0), lambda(1));
    V.col(0).swap(V.col(1));
  }
  const Matrix V_inv = V.inverse();
  const ModelSizing sizing{2, 2, 0.95};
  lb.true_q = StableOperatorParams::zeros(sizing, 1, 1);
  lb.true_q.A_raw = Matrix(lambda.asDiagonal()) / sizing.alpha;
  lb.true_q.B = V_inv * lb.B;
  lb.true_q.C = lb.C * V;
  return lb;
}

}  // namespace ici
