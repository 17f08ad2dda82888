#include "helpers.hpp"

#include "ici/errors.hpp"
#include "ici/eval.hpp"
#include "ici/interconnect.hpp"
#include "ici/training.hpp"

#include <doctest.h>

#include <cmath>

using namespace ici;
using ici::test::random_sequence;
using ici::test::run_fresh;

namespace {

Benchmark bench(const std::string& id, std::optional<NoiseSpec> noise = {}) {
  BenchmarkOptions o;
  o.id = id;
  o.noise = noise;
  return make_benchmark(o);
}

}  // namespace

TEST_CASE("cost examples") {
  std::vector<Sequence> y{Sequence::scalar({1, 2})};
  std::vector<Sequence> zero{Sequence::scalar({0, 0})};
  CHECK(cost(y, y) == 0.0);
  CHECK(cost(y, zero) == 2.5);

  std::vector<Sequence> y2{Sequence::scalar({1, 1}), Sequence::scalar({std::sqrt(3.0), std::sqrt(3.0)})};
  std::vector<Sequence> z2{Sequence::scalar({0, 0}), Sequence::scalar({0, 0})};
  CHECK(cost(y2, z2) == doctest::Approx(2.0).epsilon(1e-15));

  std::vector<Sequence> vec2{Sequence::from_steps({ici::test::vec({3, 4})})};
  std::vector<Sequence> vec0{Sequence::from_steps({ici::test::vec({0, 0})})};
  CHECK(cost(vec2, vec0) == 25.0);

  CHECK_THROWS_AS(cost(y, std::vector<Sequence>{Sequence::scalar({0})}), ContractViolation);
  CHECK_THROWS_AS(cost(y, z2), ContractViolation);
}

TEST_CASE("strategy names") {
  CHECK(to_string(Strategy::direct_id) == "S1_direct_id");
  CHECK(strategy_from_string("S2_dir_ici") == Strategy::direct_ici);
  CHECK(strategy_from_string("S3") == Strategy::indirect_ici);
  CHECK_THROWS_AS(strategy_from_string("S4"), ConfigError);
}

TEST_CASE("predict examples") {
  const auto robot = bench("robot");
  const auto ds = collect_dataset(robot, 3, 30, 10.0, 1);
  const auto& tr = ds.trajectories[0];

  const auto zero = StableOperatorParams::zeros({8, 4, 0.99}, 2, 2);
  CHECK(predict({Strategy::indirect_ici, robot.controller}, zero, tr).matrix().isZero(0.0));

  const auto p = StableOperatorParams::random({8, 4, 0.99}, 2, 2, 3);
  const auto s1 = predict({Strategy::direct_id, robot.controller}, p, tr);
  const auto s2_no_k = predict({Strategy::direct_ici, ControllerSpec::zero(2, 2)}, p, tr);
  CHECK(s1 == s2_no_k);
  const auto s2 = predict({Strategy::direct_ici, robot.controller}, p, tr);
  CHECK(s2 == predict({Strategy::direct_ici, robot.controller}, p, tr));
  CHECK(s2 != s1);

  // S2 is the ICI model driven by u; S3 is Q driven by r.
  ICIModel model(std::make_unique<StableOperator>(p), robot.make_controller());
  CHECK(s2 == run_fresh(model, tr.u));
  StableOperator q(p);
  CHECK(predict({Strategy::indirect_ici, robot.controller}, p, tr) == run_fresh(q, tr.r));
}

TEST_CASE("S3 prediction is a convolution on the linear benchmark") {
  const auto lin = bench("linear_bench");
  const auto params = linear_benchmark().true_q;
  StableOperator q(params);
  const Vector ir = impulse_response(q, 30);
  q.reset();
  const Vector y0 = Vector::Constant(1, q.output()(0));
  const auto ds = collect_dataset(lin, 2, 30, 1.0, 2);
  for (const auto& tr : ds.trajectories) {
    const auto pred = predict({Strategy::indirect_ici, lin.controller}, params, tr);
    for (Index t = 0; t < 30; ++t) {
      double conv = y0(0);
      for (Index k = 1; k <= t; ++k) conv += ir(k - 1) * tr.r[t - k](0);
      CHECK(pred[t](0) == doctest::Approx(conv).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("S3 regressor ignores the noise realization") {
  const auto robot = bench("robot");
  const auto ds = collect_dataset(robot, 1, 40, 10.0, 4);
  Trajectory tr = ds.trajectories[0];
  // Same excitation, different noise.
  std::mt19937_64 rng(5);
  ClosedLoopSystem loop(robot.make_plant(), robot.make_controller());
  const auto other = closed_loop_run(loop, tr.r, random_sequence(rng, 2, 40, 0.1));
  Trajectory tr2{tr.r, other.u, other.y};
  const auto p = StableOperatorParams::random({8, 4, 0.99}, 2, 2, 6);
  const StrategySpec s3{Strategy::indirect_ici, robot.controller};
  CHECK(predict(s3, p, tr) == predict(s3, p, tr2));
  const StrategySpec s1{Strategy::direct_id, robot.controller};
  CHECK(predict(s1, p, tr) != predict(s1, p, tr2));
}

TEST_CASE("gradient checks for all strategies") {
  for (const std::string id : {"robot", "scalar_unstable", "linear_bench"}) {
    const auto b = bench(id);
    const auto ds = collect_dataset(b, 2, 20, id == "robot" ? 10.0 : 0.5, 7);
    for (const auto s : {Strategy::direct_id, Strategy::direct_ici, Strategy::indirect_ici}) {
      const StrategySpec spec{s, b.controller};
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto p = initial_params(spec, ModelSizing{}, ds, seed);
        CHECK(grad_check(spec, ds.trajectories, p) < 1e-4);
      }
    }
  }
  // A dynamic linear controller in the S2 loop.
  const auto lin = bench("linear_bench");
  const auto ds = collect_dataset(lin, 2, 20, 1.0, 8);
  Matrix A(1, 1), B(1, 1), C(1, 1), D(1, 1);
  A << 0.6;
  B << 0.5;
  C << -0.4;
  D << -0.3;
  const StrategySpec dyn{Strategy::direct_ici, ControllerSpec::linear(A, B, C, D)};
  CHECK(grad_check(dyn, ds.trajectories, initial_params(dyn, ModelSizing{}, ds, 1)) < 1e-4);
}

TEST_CASE("a perfect fit has zero gradient") {
  const auto robot = bench("robot");
  const auto ds = collect_dataset(robot, 2, 10, 10.0, 9);
  const StrategySpec spec{Strategy::indirect_ici, robot.controller};
  auto p = initial_params(spec, ModelSizing{}, ds, 0);
  std::vector<Trajectory> fitted = ds.trajectories;
  for (auto& tr : fitted) tr.y = predict(spec, p, tr);
  const auto lg = loss_and_gradient(spec, p, fitted);
  CHECK(lg.loss == 0.0);
  CHECK(lg.gradient.isZero(0.0));
}

TEST_CASE("zero-noise linear benchmark: S3 recovers the true operator") {
  const auto lin = bench("linear_bench", NoiseSpec::zero());
  const auto ds = collect_dataset(lin, 5, 100, 1.0, 0);
  const StrategySpec spec{Strategy::indirect_ici, lin.controller};
  TrainConfig cfg;
  cfg.epochs = 5000;
  cfg.learning_rate = 0.01;
  cfg.lr_decay = 0.01;
  cfg.patience = cfg.epochs;
  const auto res = train(spec, initial_params(spec, {2, 2, 0.95}, ds, 0), ds, cfg);
  CHECK(res.loss_curve.at(res.best_epoch) < 1e-8);
  const auto q = implied_q(ModelUnderTest::learned(Strategy::indirect_ici, res.params), lin);
  const auto truth = implied_q(ModelUnderTest::true_plant(), lin);
  CHECK((impulse_response(*q, 20) - impulse_response(*truth, 20)).norm() < 1e-4);
}

TEST_CASE("constant zero data drives the loss to zero") {
  Dataset ds;
  ds.meta.input_dim = ds.meta.output_dim = 1;
  for (int n = 0; n < 3; ++n) ds.trajectories.push_back({Sequence(1, 20), Sequence(1, 20), Sequence(1, 20)});
  const StrategySpec spec{Strategy::indirect_ici, ControllerSpec::zero(1, 1)};
  auto init = StableOperatorParams::random({4, 2, 0.9}, 1, 1, 1);
  init.b.setConstant(0.5);
  init.c.setConstant(0.5);
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.learning_rate = 0.01;
  cfg.min_delta = 0.0;
  cfg.patience = cfg.epochs;
  const auto res = train(spec, init, ds, cfg);
  CHECK(res.loss_curve.front() > 0.1);
  CHECK(res.loss_curve.at(res.best_epoch) < 1e-5);
}

TEST_CASE("small-step gradient descent decreases the loss monotonically") {
  const auto robot = bench("robot");
  const auto ds = collect_dataset(robot, 4, 30, 10.0, 10);
  const StrategySpec spec{Strategy::direct_ici, robot.controller};
  const auto init = initial_params(spec, ModelSizing{}, ds, 2);
  bool found = false;
  for (double lr : {1e-2, 1e-3, 1e-4, 1e-5}) {
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::sgd;
    cfg.epochs = 30;
    cfg.learning_rate = lr;
    cfg.patience = cfg.epochs;
    const auto res = train(spec, init, ds, cfg);
    bool monotone = true;
    for (std::size_t e = 1; e < res.loss_curve.size(); ++e)
      monotone = monotone && res.loss_curve[e] <= res.loss_curve[e - 1] + 1e-12;
    if (monotone && res.loss_curve.back() < res.loss_curve.front()) found = true;
  }
  CHECK(found);
}

TEST_CASE("training is deterministic") {
  const auto robot = bench("robot");
  const auto ds = collect_dataset(robot, 6, 30, 10.0, 11);
  const StrategySpec spec{Strategy::direct_ici, robot.controller};
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 4;
  cfg.seed = 3;
  const auto init = initial_params(spec, ModelSizing{}, ds, 0);
  const auto a = train(spec, init, ds, cfg);
  const auto b = train(spec, init, ds, cfg);
  CHECK(a.loss_curve == b.loss_curve);
  CHECK(a.params == b.params);
  cfg.seed = 4;
  CHECK(train(spec, init, ds, cfg).loss_curve != a.loss_curve);
}

TEST_CASE("best parameters and early stopping") {
  const auto robot = bench("robot");
  const auto ds = collect_dataset(robot, 4, 30, 10.0, 12);
  const StrategySpec spec{Strategy::indirect_ici, robot.controller};
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 0.5;  // large enough to oscillate
  cfg.patience = 5;
  const auto res = train(spec, initial_params(spec, ModelSizing{}, ds, 0), ds, cfg);
  const double best = *std::min_element(res.loss_curve.begin(), res.loss_curve.end());
  CHECK(res.loss_curve.at(res.best_epoch) == best);
  CHECK(loss_and_gradient(spec, res.params, ds.trajectories).loss == best);
  if (res.early_stopped) CHECK(static_cast<Index>(res.loss_curve.size()) < cfg.epochs);
}

TEST_CASE("non-finite data aborts training with epoch and trajectory") {
  const auto robot = bench("robot");
  auto ds = collect_dataset(robot, 3, 10, 10.0, 13);
  ds.trajectories[1].y[4](0) = std::nan("");
  const StrategySpec spec{Strategy::indirect_ici, robot.controller};
  TrainConfig cfg;
  cfg.epochs = 5;
  try {
    train(spec, initial_params(spec, ModelSizing{}, ds, 0), ds, cfg);
    FAIL("expected abort");
  } catch (const TrainingAborted& e) {
    CHECK(e.epoch() == 0);
  }
}

TEST_CASE("S1 on the scalar benchmark reports diverged predictions honestly") {
  const auto scalar = bench("scalar_unstable");
  const auto ds = collect_dataset(scalar, 10, 100, 0.5, 14);
  const StrategySpec spec{Strategy::direct_id, scalar.controller};
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 0.01;
  const auto res = train(spec, initial_params(spec, ModelSizing{}, ds, 0), ds, cfg);
  // The stable family cannot produce an unstable model, so S1 stays bounded.
  CHECK(res.diverged_predictions == 0);
  EvalOptions eo;
  eo.n_test = 10;
  const auto ev = evaluate(ModelUnderTest::learned(Strategy::direct_id, res.params), scalar, eo);
  CHECK(ev.report.ol_diverged == 10);  // the true plant diverges in open loop
  CHECK(ev.report.cl_mse.has_value());
}

TEST_CASE("S2 models stay stable in closed loop throughout training") {
  const auto robot = bench("robot");
  const auto ds = collect_dataset(robot, 4, 50, 10.0, 15);
  const StrategySpec spec{Strategy::direct_ici, robot.controller};
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 0.05;
  cfg.patience = cfg.epochs;
  std::mt19937_64 rng(16);
  int checked = 0;
  train(spec, initial_params(spec, ModelSizing{}, ds, 0), ds, cfg,
        [&](Index epoch, const StableOperatorParams& p) {
          if (epoch % 20 != 0) return;
          ClosedLoopSystem loop(std::make_unique<ICIModel>(std::make_unique<StableOperator>(p),
                                                           robot.make_controller()),
                                robot.make_controller());
          const auto sig = closed_loop_run(loop, random_sequence(rng, 2, 100, 50.0),
                                           random_sequence(rng, 2, 100, 1.0));
          CHECK(sig.y.matrix().allFinite());
          ++checked;
        });
  CHECK(checked == 3);
}

TEST_CASE("train config serialization") {
  TrainConfig c;
  c.epochs = 17;
  c.learning_rate = 0.25;
  c.optimizer = OptimizerKind::sgd;
  c.seed = 9;
  const auto back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  auto bad = c.to_json();
  bad["learning_rate"] = -1.0;
  CHECK_THROWS_AS(TrainConfig::from_json(bad), ConfigError);
  bad = c.to_json();
  bad["optimizer"] = "lbfgs";
  CHECK_THROWS_AS(TrainConfig::from_json(bad), ConfigError);
}

TEST_CASE("adam step matches the update formula") {
  TrainConfig cfg;
  Optimizer opt(cfg, 2);
  Vector theta = Vector::Zero(2);
  Vector g(2);
  g << 0.5, -2.0;
  opt.step(theta, g, 0.1);
  // First bias-corrected step moves every coordinate by lr * sign(g).
  CHECK(theta(0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(theta(1) == doctest::Approx(0.1).epsilon(1e-6));
  cfg.optimizer = OptimizerKind::sgd;
  Optimizer sgd(cfg, 2);
  Vector t2 = Vector::Zero(2);
  sgd.step(t2, g, 0.1);
  CHECK(t2(0) == -0.05);
}
