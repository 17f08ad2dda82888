#pragma once

#include "ici/operator.hpp"

#include <functional>

namespace ici {

/// The ICI model y_hat = Q(u_hat - K(y_hat)), resolved recursively: the
/// output of Q is read first, the controller is advanced on it, and Q then
/// consumes u_hat_t - kappa_t. No implicit equation is solved.
class ICIModel final : public StrictlyCausalOperator {
 public:
  ICIModel(StrictPtr q, OperatorPtr k);
  ICIModel(const ICIModel& other);

  Index in_dim() const override { return q_->in_dim(); }
  Index out_dim() const override { return q_->out_dim(); }
  void reset() override;
  Vector output() const override { return q_->output(); }
  void advance(const Vector& u_hat) override;
  StrictPtr clone_strict() const override { return std::make_unique<ICIModel>(*this); }

  /// omega_t = u_hat_t - K(y_hat)_t from the last advance.
  const Vector& last_internal() const { return internal_; }

 private:
  StrictPtr q_;
  OperatorPtr k_;
  Vector internal_;
};

/// Returns y_hat_t and advances the model on u_hat_t.
Vector ici_step(ICIModel& model, const Vector& u_hat);

/// The loop y = G(u) + v, u = r + K(y).
struct ClosedLoopSystem {
  StrictPtr plant;
  OperatorPtr controller;

  ClosedLoopSystem(StrictPtr plant, OperatorPtr controller);
};

struct LoopSignals {
  Sequence u;
  Sequence y;
};

/// Simulates the loop from reset. Per step: y_t = plant output + v_t,
/// u_t = r_t + K(y_{t:0}), then the plant consumes u_t. Throws DivergedRun at
/// the first step with an unbounded signal unless `guard` is false. `observer`,
/// when given, is called after each step with the step index.
LoopSignals closed_loop_run(ClosedLoopSystem& loop, const Sequence& r, const Sequence& v,
                            const std::function<void(Index)>& observer = {}, bool guard = true);

/// The true ICI operator of a stabilized plant: w -> G((I - K G)^{-1} w),
/// realized with feedback_inverse. Its initial output equals the plant's.
StrictPtr construct_true_q(const StrictlyCausalOperator& plant, const CausalOperator& k);

}  // namespace ici
