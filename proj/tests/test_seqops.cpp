#include "helpers.hpp"

#include "ici/errors.hpp"
#include "ici/operator.hpp"
#include "ici/plants.hpp"
#include "ici/stable_family.hpp"

#include <doctest.h>

using namespace ici;
using ici::test::random_sequence;
using ici::test::run_fresh;
using ici::test::vec;

TEST_CASE("lp_norm examples") {
  CHECK(lp_norm(Sequence::scalar({0, 0, 0}), 2) == 0.0);
  CHECK(lp_norm(Sequence::scalar({3, 4}), 2) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(lp_norm(Sequence::from_steps({vec({1, 1}), vec({1, 1})}), 2) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(lp_norm(Sequence(), 2) == 0.0);
  CHECK(lp_norm(Sequence::scalar({-3, 4}), 1) == doctest::Approx(7.0));
}

TEST_CASE("sequence truncation is inclusive and empty when reversed") {
  const auto x = Sequence::scalar({0, 1, 2, 3, 4});
  CHECK(x.truncate(1, 3) == Sequence::scalar({1, 2, 3}));
  CHECK(x.truncate(2, 2) == Sequence::scalar({2}));
  CHECK(x.truncate(3, 1).empty());
  CHECK_THROWS_AS(Sequence::from_steps({vec({1}), vec({1, 2})}), ConfigError);
}

TEST_CASE("run examples") {
  Identity id(2);
  std::mt19937_64 rng(1);
  const auto u = random_sequence(rng, 2, 7);
  CHECK(run(id, u) == u);

  UnitDelay delay(1);
  CHECK(run(delay, Sequence::scalar({1, 2, 3})) == Sequence::scalar({0, 1, 2}));

  StaticMap k(1, 1, [](const Vector& y) { return Vector::Constant(1, scalar_poly_control(y(0))); });
  CHECK(run(k, Sequence::scalar({0, 1})) == Sequence::scalar({-1, -1.5}));

  CHECK_THROWS_AS(run(delay, Sequence(2, 3)), ConfigError);
}

TEST_CASE("series examples and causality class") {
  std::mt19937_64 rng(2);
  const auto u = random_sequence(rng, 1, 20);
  auto op = std::make_unique<StableOperator>(StableOperatorParams::random({4, 2, 0.9}, 1, 1, 3));
  auto expected = op->clone();
  auto s = series(std::make_unique<Identity>(1), op->clone());
  CHECK(s->causality() == Causality::strictly_causal);
  CHECK(run_fresh(*s, u) == run_fresh(*expected, u));

  auto dd = series(std::make_unique<UnitDelay>(1), std::make_unique<UnitDelay>(1));
  CHECK(run(*dd, Sequence::scalar({1, 0, 0})) == Sequence::scalar({0, 0, 1}));

  CHECK(series(std::make_unique<Identity>(1), std::make_unique<Identity>(1))->causality() ==
        Causality::causal);
  CHECK(series(std::make_unique<Identity>(1), std::make_unique<UnitDelay>(1))->causality() ==
        Causality::strictly_causal);
  CHECK_THROWS_AS(series(std::make_unique<Identity>(2), std::make_unique<Identity>(1)), ConfigError);

  // Plant followed by the controller equals the manual two-stage evaluation.
  auto g = std::make_unique<ScalarUnstablePlant>();
  auto gk = series(g->clone(), make_controller(ControllerSpec::scalar_poly()));
  const auto small = Sequence::scalar({-1.0, -1.2, -0.5, -1.1, -0.9});
  const auto y = run(*g, small);
  Sequence manual(1, small.horizon());
  for (Index t = 0; t < y.horizon(); ++t) manual[t](0) = scalar_poly_control(y[t](0));
  CHECK(run(*gk, small) == manual);
}

TEST_CASE("feedback_inverse examples") {
  // Zero operator: identity.
  auto zero = std::make_unique<HistoryOperator>(1, 1, [](std::span<const Vector>) {
    return Vector::Zero(1).eval();
  });
  auto inv0 = feedback_inverse(std::move(zero));
  const auto a = Sequence::scalar({0.3, -1, 2});
  CHECK(run(*inv0, a) == a);

  auto inv = feedback_inverse(std::make_unique<UnitDelay>(1));
  const auto b = run(*inv, Sequence::scalar({1, 1, 1}));
  CHECK(b == Sequence::scalar({1, 0, 1}));
  auto fwd = identity_plus(std::make_unique<UnitDelay>(1));
  CHECK(run(*fwd, b) == Sequence::scalar({1, 1, 1}));

  CHECK_THROWS_AS(feedback_inverse(std::make_unique<Identity>(1)), ContractViolation);
}

TEST_CASE("feedback_inverse round trip on random operators") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Index d = 1 + i % 3;
    auto params = StableOperatorParams::random({5, i % 6, 0.9}, d, d, 100 + i);
    const double g = incremental_gain_bound(params);
    if (g > 0.9) params.C *= 0.9 / g;
    StableOperator upsilon(params);
    const auto a = random_sequence(rng, d, 50);
    auto inv = feedback_inverse(upsilon.clone());
    auto fwd = identity_plus(upsilon.clone());
    const auto back = run(*fwd, run(*inv, a));
    CHECK(distance(back, a) <= 1e-9 * std::max(1.0, lp_norm(a, 2)));
  }
}

namespace {

// Perturbing u_t must leave outputs 0..t unchanged for a strictly causal
// operator, and 0..t-1 for a causal one.
void causality_probe(CausalOperator& op, const Sequence& u, Index t) {
  const auto base = run_fresh(op, u);
  Sequence pert = u;
  pert[t].array() += 1.0;
  const auto y = run_fresh(op, pert);
  const Index last = op.causality() == Causality::strictly_causal ? t : t - 1;
  for (Index s = 0; s <= last; ++s) CHECK(y[s] == base[s]);
}

}  // namespace

TEST_CASE("strict causality probe and determinism") {
  std::mt19937_64 rng(5);
  const auto u = random_sequence(rng, 1, 30);
  StableOperator q(StableOperatorParams::random({8, 4, 0.95}, 1, 1, 9));
  auto inv = feedback_inverse(q.clone());
  auto composed = series(std::make_unique<Identity>(1), q.clone());
  for (Index t : {0, 7, 29}) {
    causality_probe(q, u, t);
    causality_probe(*inv, u, t);
    causality_probe(*composed, u, t);
  }
  CHECK(run_fresh(q, u) == run_fresh(q, u));

  // The perturbation does reach later outputs.
  Sequence pert = u;
  pert[3](0) += 1.0;
  const auto y0 = run_fresh(q, u);
  const auto y1 = run_fresh(q, pert);
  CHECK(y1[4] != y0[4]);
}

TEST_CASE("run guards against divergence") {
  ScalarUnstablePlant g;
  const auto zeros = Sequence(1, 12);
  CHECK_THROWS_AS(run_fresh(g, zeros), DivergedRun);
  const auto y = run_fresh(g, zeros, false);
  CHECK(y[5](0) == 677.0);
}
