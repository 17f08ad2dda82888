#include "ici/sequence.hpp"

#include "ici/errors.hpp"

#include <cmath>

namespace ici {

bool is_bounded(const Eigen::Ref<const Vector>& x) {
  for (Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x(i)) || std::abs(x(i)) > kDivergenceThreshold) return false;
  }
  return true;
}

Sequence::Sequence(Index dim, Index horizon) : data_(Matrix::Zero(dim, horizon)) {
  if (dim < 0 || horizon < 0) throw ConfigError("negative sequence shape");
}

Sequence Sequence::scalar(const std::vector<double>& values) {
  Sequence s(1, static_cast<Index>(values.size()));
  for (std::size_t t = 0; t < values.size(); ++t) s.data_(0, static_cast<Index>(t)) = values[t];
  return s;
}

Sequence Sequence::from_steps(const std::vector<Vector>& steps) {
  if (steps.empty()) return {};
  Sequence s(steps.front().size(), static_cast<Index>(steps.size()));
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (steps[t].size() != s.dim()) throw ConfigError("sequence samples differ in dimension");
    s[static_cast<Index>(t)] = steps[t];
  }
  return s;
}

Sequence Sequence::truncate(Index i, Index j) const {
  if (j < i) return Sequence(dim(), 0);
  if (i < 0 || j >= horizon()) throw ContractViolation("truncation outside the horizon");
  return Sequence(Matrix(data_.middleCols(i, j - i + 1)));
}

double lp_norm(const Sequence& x, int p) {
  if (p < 1) throw ContractViolation("lp_norm needs p >= 1");
  if (x.empty()) return 0.0;
  if (p == 2) return x.matrix().norm();
  double acc = 0.0;
  for (Index t = 0; t < x.horizon(); ++t) acc += std::pow(x[t].norm(), p);
  return std::pow(acc, 1.0 / p);
}

double distance(const Sequence& a, const Sequence& b) {
  if (a.dim() != b.dim() || a.horizon() != b.horizon())
    throw ContractViolation("distance between sequences of different shape");
  return (a.matrix() - b.matrix()).norm();
}

}  // namespace ici
