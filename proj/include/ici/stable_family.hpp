#pragma once

#include "ici/operator.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

namespace ici {

/// Hidden size, number of identity-activated units and contraction margin.
struct ModelSizing {
  Index n_hidden = 8;
  Index n_linear = 4;
  double alpha = 0.95;
};

/// Parameters of the contracting recurrence
///
///   y_t     = out_scale * (C h_t + c)
///   h_{t+1} = phi(A h_t + B w_t / in_scale + b),  A = project_spectral(A_raw, alpha)
///
/// phi is the identity on the first n_linear units and tanh on the rest, so
/// it is 1-Lipschitz componentwise and ||A||_2 <= alpha < 1 makes the
/// operator incrementally l2-stable for every parameter value. The scales
/// are fixed normalization constants and are not trained.
struct StableOperatorParams {
  Matrix A_raw;
  Matrix B;
  Matrix C;
  Vector b;
  Vector c;
  double alpha = 0.95;
  Index n_linear = 0;
  double in_scale = 1.0;
  double out_scale = 1.0;

  Index n_hidden() const { return A_raw.rows(); }
  Index in_dim() const { return B.cols(); }
  Index out_dim() const { return C.rows(); }
  /// Number of trainable scalars.
  Index parameter_count() const;

  /// Trainable parameters flattened as A_raw, B, C, b, c (column-major).
  Vector to_vector() const;
  void assign(const Vector& theta);

  static StableOperatorParams zeros(const ModelSizing& sizing, Index in_dim, Index out_dim);
  static StableOperatorParams random(const ModelSizing& sizing, Index in_dim, Index out_dim,
                                     std::uint64_t seed);

  bool operator==(const StableOperatorParams&) const = default;
};

double spectral_norm(const Matrix& a);

struct SpectralProjection {
  Matrix A;
  double sigma_max = 0.0;
  Vector left;   // top singular vectors of A_raw, used by the backward pass
  Vector right;
};

/// alpha * A_raw / max(1, sigma_max(A_raw)); the result has ||A||_2 <= alpha.
Matrix project_spectral(const Matrix& A_raw, double alpha);
SpectralProjection project_spectral_detail(const Matrix& A_raw, double alpha);
/// Pulls dL/dA back to dL/dA_raw through the projection.
Matrix project_spectral_backward(const SpectralProjection& proj, const Matrix& A_raw, double alpha,
                                 const Matrix& grad_A);

struct OperatorState {
  Vector h;
  static OperatorState zero(Index n_hidden) { return {Vector::Zero(n_hidden)}; }
};

/// Parameters with the spectral projection evaluated once; shared read-only
/// across trajectories during a forward/backward pass.
class EffectiveModel {
 public:
  explicit EffectiveModel(StableOperatorParams params);

  const StableOperatorParams& params() const { return params_; }
  const SpectralProjection& projection() const { return proj_; }
  const Matrix& A() const { return proj_.A; }

  Vector readout(const Vector& h) const;
  void transition(const Vector& h, const Vector& w, Vector& h_next) const;

 private:
  StableOperatorParams params_;
  SpectralProjection proj_;
};

/// One step: read y_t from the current state, then update the state with w_t.
std::pair<Vector, OperatorState> q_step(const StableOperatorParams& params,
                                        const OperatorState& state, const Vector& w);

/// Certified incremental l2 gain out_scale/in_scale * ||C|| ||B|| / (1 - ||A||).
double incremental_gain_bound(const StableOperatorParams& params);

/// Q^theta as a strictly causal operator.
class StableOperator final : public StrictlyCausalOperator {
 public:
  explicit StableOperator(std::shared_ptr<const EffectiveModel> model);
  explicit StableOperator(const StableOperatorParams& params)
      : StableOperator(std::make_shared<const EffectiveModel>(params)) {}

  Index in_dim() const override { return model_->params().in_dim(); }
  Index out_dim() const override { return model_->params().out_dim(); }
  void reset() override { state_ = OperatorState::zero(model_->params().n_hidden()); }
  Vector output() const override { return model_->readout(state_.h); }
  void advance(const Vector& w) override;
  StrictPtr clone_strict() const override { return std::make_unique<StableOperator>(*this); }

  const OperatorState& state() const { return state_; }

 private:
  std::shared_ptr<const EffectiveModel> model_;
  OperatorState state_;
  Vector scratch_;
};

// ---------------------------------------------------------------------------
// Reverse-mode differentiation through the recurrence

/// States h_0..h_T (columns), inputs w_0..w_{T-1} and outputs y_0..y_{T-1}.
struct ForwardRecord {
  Matrix H;
  Matrix W;
  Matrix Y;
  Index horizon() const { return W.cols(); }
};

ForwardRecord forward(const EffectiveModel& model, const Sequence& w);

/// Accumulates dL/dtheta one time step at a time, latest step first.
class GradientAccumulator {
 public:
  explicit GradientAccumulator(const EffectiveModel& model);

  /// Back through h_{t+1} = phi(A h_t + B w_t / in_scale + b). `lambda_next`
  /// is dL/dh_{t+1}; writes dL/dw_t and sets `lambda_h` to the part of
  /// dL/dh_t that flows through the recurrence.
  void transition(const Vector& h_t, const Vector& w_t, const Vector& h_next,
                  const Vector& lambda_next, Vector& grad_w, Vector& lambda_h);
  /// Back through y_t = out_scale (C h_t + c); adds to `lambda_h`.
  void readout(const Vector& h_t, const Vector& grad_y, Vector& lambda_h);

  /// Flat gradient w.r.t. the raw parameters, projection included.
  Vector finish() const;

 private:
  const EffectiveModel& model_;
  Matrix dA_;
  Matrix dB_;
  Matrix dC_;
  Vector db_;
  Vector dc_;
  Vector dz_;
};

/// dJ/dtheta for an open-loop pass given dJ/dy_t. Optionally returns dJ/dw_t.
Vector q_backward(const EffectiveModel& model, const ForwardRecord& record,
                  const Sequence& grad_y, Sequence* grad_w = nullptr);

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json params_to_json(const StableOperatorParams& params);
StableOperatorParams params_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const StableOperatorParams& params);
StableOperatorParams load_checkpoint(const std::filesystem::path& path);

}  // namespace ici
