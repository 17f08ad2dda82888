#pragma once

#include "ici/operator.hpp"

#include <random>

namespace ici::test {

inline Sequence random_sequence(std::mt19937_64& rng, Index dim, Index horizon, double std = 1.0) {
  std::normal_distribution<double> n(0.0, std);
  Sequence s(dim, horizon);
  for (Index t = 0; t < horizon; ++t)
    for (Index i = 0; i < dim; ++i) s[t](i) = n(rng);
  return s;
}

/// run() from the operator's initial condition.
inline Sequence run_fresh(CausalOperator& op, const Sequence& u, bool guard = true) {
  op.reset();
  return run(op, u, guard);
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace ici::test
