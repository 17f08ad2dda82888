#include "ici/verify.hpp"

#include "ici/errors.hpp"
#include "ici/interconnect.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ici {

namespace {

nlohmann::json opt(const std::optional<double>& x) {
  return x ? nlohmann::json(*x) : nlohmann::json(nullptr);
}

Sequence gaussian_sequence(std::mt19937_64& rng, Index dim, Index horizon) {
  std::normal_distribution<double> n01;
  Sequence s(dim, horizon);
  for (Index t = 0; t < horizon; ++t)
    for (Index i = 0; i < dim; ++i) s[t](i) = n01(rng);
  return s;
}

Sequence unit_norm_sequence(std::mt19937_64& rng, Index dim, Index horizon) {
  Sequence s = gaussian_sequence(rng, dim, horizon);
  s.matrix() /= lp_norm(s, 2);
  return s;
}

Matrix gaussian_matrix(std::mt19937_64& rng, Index rows, Index cols, double std) {
  std::normal_distribution<double> n01;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = std * n01(rng);
  return m;
}

bool all_bounded(const Sequence& s) {
  for (Index t = 0; t < s.horizon(); ++t)
    if (!is_bounded(s[t])) return false;
  return true;
}

// A random linear plant and controller whose closed loop has spectral radius
// below 0.95; the plant has pole radius at most 0.9.
struct LinearPair {
  Matrix A, B, C;
  ControllerSpec controller;
};

LinearPair random_stabilized_pair(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> states(1, 3), dims(1, 2), kstates(0, 2);
  for (;;) {
    const Index n = states(rng), du = dims(rng), dy = dims(rng), nk = kstates(rng);
    LinearPair p;
    p.A = gaussian_matrix(rng, n, n, 0.7);
    p.B = gaussian_matrix(rng, n, du, 1.0);
    p.C = gaussian_matrix(rng, dy, n, 1.0);
    if (spectral_radius(p.A) > 0.9) continue;
    const Matrix Ak = gaussian_matrix(rng, nk, nk, 0.4);
    const Matrix Bk = gaussian_matrix(rng, nk, dy, 0.5);
    const Matrix Ck = gaussian_matrix(rng, du, nk, 0.5);
    const Matrix Dk = gaussian_matrix(rng, du, dy, 0.5);
    // Closed loop with u = Ck xk + Dk y, y = C x.
    Matrix loop(n + nk, n + nk);
    loop.topLeftCorner(n, n) = p.A + p.B * Dk * p.C;
    loop.topRightCorner(n, nk) = p.B * Ck;
    loop.bottomLeftCorner(nk, n) = Bk * p.C;
    loop.bottomRightCorner(nk, nk) = Ak;
    if (spectral_radius(loop) >= 0.95) continue;
    p.controller = nk == 0 ? ControllerSpec::static_gain(Dk) : ControllerSpec::linear(Ak, Bk, Ck, Dk);
    return p;
  }
}

double reconstruction_error(const StrictlyCausalOperator& plant, const ControllerSpec& k,
                            const Sequence& u_hat, double& scale) {
  auto g = plant.clone_strict();
  g->reset();
  const Sequence y = run(*g, u_hat);
  ICIModel model(construct_true_q(plant, *make_controller(k)), make_controller(k));
  model.reset();
  const Sequence y_ici = run(model, u_hat);
  scale = std::max(1.0, lp_norm(y, 2));
  return distance(y, y_ici);
}

}  // namespace

SuiteReport verify_internal_bound(const Theorem1Options& opts) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> gain(0.1, 2.0);
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_ratio = 0.0;
  Index violations = 0, unbounded = 0;
  for (Index i = 0; i < opts.n_theta; ++i) {
    const auto params = StableOperatorParams::random({8, 4, 0.95}, 2, 2, opts.seed * 1000 + i);
    const ControllerSpec k = ControllerSpec::proportional(Eigen::Vector2d(gain(rng), gain(rng)));
    const double gamma_k = *make_controller(k)->certified_ifg();
    auto model = std::make_unique<ICIModel>(std::make_unique<StableOperator>(params),
                                            make_controller(k));
    ICIModel* ici = model.get();
    ClosedLoopSystem loop(std::move(model), make_controller(k));
    for (Index j = 0; j < opts.n_pairs; ++j) {
      const Sequence r = unit_norm_sequence(rng, 2, opts.horizon);
      const Sequence v = unit_norm_sequence(rng, 2, opts.horizon);
      Sequence omega(2, opts.horizon);
      const auto sig = closed_loop_run(loop, r, v, [&](Index t) { omega[t] = ici->last_internal(); },
                                       false);
      if (!all_bounded(sig.u) || !all_bounded(sig.y) || !all_bounded(omega)) {
        ++unbounded;
        continue;
      }
      const double bound = lp_norm(r, 2) + gamma_k * lp_norm(v, 2);
      const double norm = lp_norm(omega, 2);
      worst_margin = std::min(worst_margin, bound - norm);
      worst_ratio = std::max(worst_ratio, norm / bound);
      if (norm > bound + 1e-9) ++violations;
    }
  }
  SuiteReport rep;
  rep.passed = violations == 0 && unbounded == 0;
  rep.details = {{"property", "internal signal bound ||omega|| <= ||r|| + gamma_K ||v||"},
                 {"n_theta", opts.n_theta},
                 {"pairs_per_theta", opts.n_pairs},
                 {"horizon", opts.horizon},
                 {"violations", violations},
                 {"unbounded_runs", unbounded},
                 {"min_margin", worst_margin},
                 {"max_ratio_to_bound", worst_ratio},
                 {"passed", rep.passed}};
  return rep;
}

SuiteReport verify_reconstruction(const Theorem1Options& opts) {
  std::mt19937_64 rng(opts.seed + 17);
  const Index T = opts.reconstruction_horizon;
  double worst_linear = 0.0;
  Index linear_fail = 0;
  for (Index i = 0; i < opts.n_linear_pairs; ++i) {
    const auto pair = random_stabilized_pair(rng);
    LinearPlant plant(pair.A, pair.B, pair.C);
    const Sequence u_hat = gaussian_sequence(rng, pair.B.cols(), T);
    double scale = 1.0;
    const double err = reconstruction_error(plant, pair.controller, u_hat, scale);
    worst_linear = std::max(worst_linear, err / scale);
    if (!(err <= 1e-6 * scale)) ++linear_fail;
  }

  // Scalar benchmark: bounded inputs are those a stabilized loop produces.
  BenchmarkOptions bo;
  bo.id = "scalar_unstable";
  const Benchmark bench = make_benchmark(bo);
  const Index n_scalar = 10;
  double worst_scalar = 0.0;
  Index scalar_fail = 0;
  for (Index i = 0; i < n_scalar; ++i) {
    ClosedLoopSystem loop(bench.make_plant(), bench.make_controller());
    Sequence r = gaussian_sequence(rng, 1, T);
    r.matrix() *= 0.5;
    const Sequence u_hat = closed_loop_run(loop, r, Sequence(1, T)).u;
    double scale = 1.0;
    const double err = reconstruction_error(*bench.make_plant(), bench.controller, u_hat, scale);
    worst_scalar = std::max(worst_scalar, err / scale);
    if (!(err <= 1e-6 * scale)) ++scalar_fail;
  }

  SuiteReport rep;
  rep.passed = linear_fail == 0 && scalar_fail == 0;
  rep.details = {{"property", "ICI(construct_true_q(G, K), K) == G"},
                 {"horizon", T},
                 {"linear_pairs", opts.n_linear_pairs},
                 {"linear_failures", linear_fail},
                 {"linear_max_relative_error", worst_linear},
                 {"scalar_inputs", n_scalar},
                 {"scalar_failures", scalar_fail},
                 {"scalar_max_relative_error", worst_scalar},
                 {"tolerance", 1e-6},
                 {"passed", rep.passed}};
  return rep;
}

SuiteReport verify_theorem1(const Theorem1Options& opts) {
  const auto t1 = verify_internal_bound(opts);
  const auto t2 = verify_reconstruction(opts);
  return {t1.passed && t2.passed,
          {{"suite", "theorem1"}, {"T1", t1.details}, {"T2", t2.details},
           {"passed", t1.passed && t2.passed}}};
}

SuiteReport verify_corollary1(Index n_instances, Index horizon, std::uint64_t seed) {
  std::mt19937_64 rng(seed + 29);
  std::uniform_int_distribution<int> dims(1, 3), hidden(1, 6);
  double worst = 0.0;
  Index failures = 0;
  for (Index i = 0; i < n_instances; ++i) {
    const Index d = dims(rng);
    StrictPtr upsilon;
    if (i % 2 == 0) {
      const Index nh = hidden(rng);
      const ModelSizing sizing{nh, std::uniform_int_distribution<Index>(0, nh)(rng), 0.9};
      auto params = StableOperatorParams::random(sizing, d, d, seed * 1000 + i);
      // Gain below one keeps b = a - Y(b) bounded over the horizon.
      const double gain = incremental_gain_bound(params);
      if (gain > 0.9) params.C *= 0.9 / gain;
      upsilon = std::make_unique<StableOperator>(params);
    } else {
      // A nonlinear functional of the whole past with geometric memory.
      const Matrix M = gaussian_matrix(rng, d, d, 0.5);
      const Matrix W = gaussian_matrix(rng, d, d, 0.5);
      const Vector bias = gaussian_matrix(rng, d, 1, 1.0);
      upsilon = std::make_unique<HistoryOperator>(d, d, [M, W, bias](std::span<const Vector> past) {
        Vector acc = Vector::Zero(M.rows());
        double w = 1.0;
        for (auto it = past.rbegin(); it != past.rend(); ++it, w *= 0.6) acc += w * (M * *it);
        return Vector(bias + W * acc.array().tanh().matrix());
      });
    }
    const Sequence a = gaussian_sequence(rng, d, horizon);
    auto inverse = feedback_inverse(upsilon->clone());
    inverse->reset();
    const Sequence b = run(*inverse, a);
    auto forward = identity_plus(upsilon->clone());
    forward->reset();
    const double err = distance(run(*forward, b), a);
    worst = std::max(worst, err);
    if (!(err <= 1e-9)) ++failures;
  }
  SuiteReport rep;
  rep.passed = failures == 0;
  rep.details = {{"suite", "corollary1"},
                 {"property", "(I + Y) o feedback_inverse(Y) == I"},
                 {"instances", n_instances},
                 {"horizon", horizon},
                 {"failures", failures},
                 {"max_error", worst},
                 {"tolerance", 1e-9},
                 {"passed", rep.passed}};
  return rep;
}

SuiteReport verify_gradients(Index n_theta, Index n_trajectories, Index horizon,
                             std::uint64_t seed) {
  SuiteReport rep;
  rep.passed = true;
  rep.details = {{"suite", "gradients"}, {"tolerance", 1e-4}, {"fd_step", 1e-5}};
  nlohmann::json cases = nlohmann::json::array();
  for (const std::string id : {"scalar_unstable", "robot"}) {
    BenchmarkOptions bo;
    bo.id = id;
    const Benchmark bench = make_benchmark(bo);
    const double sigma = id == "robot" ? 10.0 : 0.5;
    const Dataset ds = collect_dataset(bench, n_trajectories, horizon, sigma, seed * kSeedStride);
    for (const auto s : {Strategy::direct_id, Strategy::direct_ici, Strategy::indirect_ici}) {
      const StrategySpec spec{s, bench.controller};
      double worst = 0.0;
      for (Index i = 0; i < n_theta; ++i) {
        const auto params = initial_params(spec, ModelSizing{}, ds, seed * 100 + i);
        worst = std::max(worst, grad_check(spec, ds.trajectories, params));
      }
      const bool ok = worst < 1e-4;
      rep.passed = rep.passed && ok;
      cases.push_back({{"benchmark", id},
                       {"strategy", to_string(s)},
                       {"n_theta", n_theta},
                       {"N", n_trajectories},
                       {"T", horizon},
                       {"max_relative_error", worst},
                       {"passed", ok}});
    }
  }
  rep.details["cases"] = cases;
  rep.details["passed"] = rep.passed;
  return rep;
}

ConsistencySuiteOptions::ConsistencySuiteOptions() {
  TrainConfig train;
  train.epochs = 2000;
  train.learning_rate = 0.01;
  train.lr_decay = 0.1;
  train.patience = 300;
  white.train = colored.train = train;
  white.strategies = {Strategy::indirect_ici};
  white.noise = NoiseSpec::gaussian(0.1);
  colored.strategies = {Strategy::direct_id, Strategy::indirect_ici};
  colored.noise = NoiseSpec::colored(0.1);
  colored.sizes = {white.sizes.back()};
}

SuiteReport verify_consistency(const ConsistencySuiteOptions& opts) {
  const auto white = consistency_sweep(opts.white);
  const auto colored = consistency_sweep(opts.colored);

  nlohmann::json white_rows = nlohmann::json::array();
  bool decreasing = true;
  std::optional<double> previous;
  std::optional<double> last;
  for (const auto& [n, t] : opts.white.sizes) {
    const auto e = white.mean_error(Strategy::indirect_ici, n, t);
    white_rows.push_back({{"N", n}, {"T", t}, {"mean_error", opt(e)}});
    if (!e || (previous && !(*e < *previous))) decreasing = false;
    previous = e;
    last = e;
  }
  const auto [fn, ft] = opts.colored.sizes.back();
  const auto s1 = colored.mean_error(Strategy::direct_id, fn, ft);
  const auto s3 = colored.mean_error(Strategy::indirect_ici, fn, ft);
  const bool small = last && *last < opts.final_fraction * white.true_q_norm;
  const bool biased = s1 && s3 && *s1 > opts.bias_ratio * *s3;

  SuiteReport rep;
  rep.passed = decreasing && small && biased;
  rep.details = {{"suite", "consistency"},
                 {"true_q_norm", white.true_q_norm},
                 {"seeds", opts.white.seeds.size()},
                 {"white_S3", white_rows},
                 {"white_S3_decreasing", decreasing},
                 {"white_S3_final_over_norm", opt(last ? std::optional(*last / white.true_q_norm) : std::nullopt)},
                 {"white_S3_final_below_fraction", small},
                 {"colored_S1_final", opt(s1)},
                 {"colored_S3_final", opt(s3)},
                 {"colored_S1_over_S3", opt(s1 && s3 ? std::optional(*s1 / *s3) : std::nullopt)},
                 {"colored_bias_ratio_met", biased},
                 {"passed", rep.passed}};
  return rep;
}

SuiteReport run_suite(const std::string& name) {
  if (name == "theorem1") return verify_theorem1();
  if (name == "corollary1") return verify_corollary1();
  if (name == "gradients") return verify_gradients();
  if (name == "consistency") return verify_consistency();
  throw ConfigError("unknown suite '" + name + "'");
}

}  // namespace ici
