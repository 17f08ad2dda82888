#pragma once

#include <Eigen/Dense>

#include <vector>

namespace ici {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Magnitude beyond which a simulated signal counts as diverged.
inline constexpr double kDivergenceThreshold = 1e12;

/// True when every component is finite and no larger than the divergence
/// threshold in magnitude.
bool is_bounded(const Eigen::Ref<const Vector>& x);

/// Finite-horizon vector signal. Column t holds the sample at time t.
class Sequence {
 public:
  Sequence() = default;
  Sequence(Index dim, Index horizon);
  explicit Sequence(Matrix data) : data_(std::move(data)) {}

  static Sequence zeros(Index dim, Index horizon) { return Sequence(dim, horizon); }
  /// Scalar signal from a list of values.
  static Sequence scalar(const std::vector<double>& values);
  /// Signal from per-step vectors; all must share one dimension.
  static Sequence from_steps(const std::vector<Vector>& steps);

  Index dim() const { return data_.rows(); }
  Index horizon() const { return data_.cols(); }
  bool empty() const { return data_.cols() == 0; }

  auto operator[](Index t) { return data_.col(t); }
  auto operator[](Index t) const { return data_.col(t); }

  /// Samples i..j inclusive; empty when j < i.
  Sequence truncate(Index i, Index j) const;

  const Matrix& matrix() const { return data_; }
  Matrix& matrix() { return data_; }

  bool operator==(const Sequence& other) const {
    return data_.rows() == other.data_.rows() && data_.cols() == other.data_.cols() &&
           data_ == other.data_;
  }

 private:
  Matrix data_;
};

/// (sum_t |x_t|^p)^(1/p) with |.| the Euclidean norm of each sample.
double lp_norm(const Sequence& x, int p);

/// Euclidean l2 norm of a - b over the whole horizon.
double distance(const Sequence& a, const Sequence& b);

}  // namespace ici
