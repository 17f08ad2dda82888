#include "ici/interconnect.hpp"

#include "ici/errors.hpp"

#include <string>

namespace ici {

ICIModel::ICIModel(StrictPtr q, OperatorPtr k) : q_(std::move(q)), k_(std::move(k)) {
  if (!q_ || !k_) throw ConfigError("ICI model needs an operator and a controller");
  if (q_->causality() != Causality::strictly_causal)
    throw ContractViolation("ICI model: the trained operator must be strictly causal");
  if (k_->in_dim() != q_->out_dim() || k_->out_dim() != q_->in_dim())
    throw ConfigError("ICI model: controller maps R^" + std::to_string(k_->in_dim()) + " -> R^" +
                      std::to_string(k_->out_dim()) + ", operator maps R^" +
                      std::to_string(q_->in_dim()) + " -> R^" + std::to_string(q_->out_dim()));
  internal_ = Vector::Zero(q_->in_dim());
}

ICIModel::ICIModel(const ICIModel& other)
    : q_(other.q_->clone_strict()), k_(other.k_->clone()), internal_(other.internal_) {}

void ICIModel::reset() {
  q_->reset();
  k_->reset();
  internal_.setZero();
}

void ICIModel::advance(const Vector& u_hat) {
  if (u_hat.size() != q_->in_dim()) throw ConfigError("ICI model: input dimension mismatch");
  const Vector kappa = k_->step(q_->output());
  internal_ = u_hat - kappa;
  q_->advance(internal_);
}

Vector ici_step(ICIModel& model, const Vector& u_hat) { return model.step(u_hat); }

ClosedLoopSystem::ClosedLoopSystem(StrictPtr p, OperatorPtr k)
    : plant(std::move(p)), controller(std::move(k)) {
  if (!plant || !controller) throw ConfigError("closed loop needs a plant and a controller");
  if (plant->causality() != Causality::strictly_causal)
    throw ContractViolation("closed loop: plant must be strictly causal");
  if (controller->in_dim() != plant->out_dim() || controller->out_dim() != plant->in_dim())
    throw ConfigError("closed loop: plant and controller dimensions do not match");
}

LoopSignals closed_loop_run(ClosedLoopSystem& loop, const Sequence& r, const Sequence& v,
                            const std::function<void(Index)>& observer, bool guard) {
  auto& plant = *loop.plant;
  auto& k = *loop.controller;
  if (r.dim() != plant.in_dim() || v.dim() != plant.out_dim())
    throw ConfigError("closed_loop_run: excitation or noise dimension mismatch");
  if (r.horizon() != v.horizon())
    throw ConfigError("closed_loop_run: excitation and noise horizons differ");
  plant.reset();
  k.reset();
  const Index T = r.horizon();
  LoopSignals out{Sequence(plant.in_dim(), T), Sequence(plant.out_dim(), T)};
  for (Index t = 0; t < T; ++t) {
    out.y[t] = plant.output() + v[t];
    if (guard && !is_bounded(out.y[t])) throw DivergedRun(t, "closed-loop output diverged");
    out.u[t] = r[t] + k.step(out.y[t]);
    if (guard && !is_bounded(out.u[t])) throw DivergedRun(t, "closed-loop input diverged");
    plant.advance(out.u[t]);
    if (observer) observer(t);
  }
  return out;
}

StrictPtr construct_true_q(const StrictlyCausalOperator& plant, const CausalOperator& k) {
  if (k.in_dim() != plant.out_dim() || k.out_dim() != plant.in_dim())
    throw ConfigError("construct_true_q: plant and controller dimensions do not match");
  // (I - K G)^{-1}: feedback_inverse of the strictly causal -K G, i.e.
  // b_t = w_t + K_t(G(b)_{t:0}). The outer copy of G then sees the same b.
  OperatorPtr loop = negate(series(plant.clone(), k.clone()));
  OperatorPtr inverse = feedback_inverse(std::move(loop));
  return require_strict(series(std::move(inverse), plant.clone()), "construct_true_q");
}

}  // namespace ici
