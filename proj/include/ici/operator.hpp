#pragma once

#include "ici/sequence.hpp"

#include <functional>
#include <memory>
#include <span>

namespace ici {

enum class Causality { causal, strictly_causal };

/// Stateful step-wise map u_t -> y_t. Implementations are single-threaded;
/// clone() yields an independent copy carrying the current state.
class CausalOperator {
 public:
  virtual ~CausalOperator() = default;

  virtual Index in_dim() const = 0;
  virtual Index out_dim() const = 0;
  virtual Causality causality() const { return Causality::causal; }

  /// Restores the nominal initial condition.
  virtual void reset() = 0;
  /// Consumes u_t and returns y_t.
  virtual Vector step(const Vector& u) = 0;
  virtual std::unique_ptr<CausalOperator> clone() const = 0;
};

/// Operator whose output at t depends on u_{t-1:0} only. The output can be
/// read before the current input is known, which is what makes feedback
/// loops resolvable one step at a time.
class StrictlyCausalOperator : public CausalOperator {
 public:
  Causality causality() const final { return Causality::strictly_causal; }

  /// y_t from the current state.
  virtual Vector output() const = 0;
  /// Consumes u_t and moves to t + 1.
  virtual void advance(const Vector& u) = 0;

  Vector step(const Vector& u) final {
    Vector y = output();
    advance(u);
    return y;
  }

  virtual std::unique_ptr<StrictlyCausalOperator> clone_strict() const = 0;
  std::unique_ptr<CausalOperator> clone() const final { return clone_strict(); }
};

using OperatorPtr = std::unique_ptr<CausalOperator>;
using StrictPtr = std::unique_ptr<StrictlyCausalOperator>;

/// Downcasts a handle that is required to be strictly causal.
StrictPtr require_strict(OperatorPtr op, const char* who);

/// Runs the operator over the whole input from its current state. With
/// `guard` set, an unbounded output raises DivergedRun at the first bad step.
Sequence run(CausalOperator& op, const Sequence& u, bool guard = true);

// ---------------------------------------------------------------------------
// Elementary operators

class Identity final : public CausalOperator {
 public:
  explicit Identity(Index dim) : dim_(dim) {}
  Index in_dim() const override { return dim_; }
  Index out_dim() const override { return dim_; }
  void reset() override {}
  Vector step(const Vector& u) override { return u; }
  OperatorPtr clone() const override { return std::make_unique<Identity>(*this); }

 private:
  Index dim_;
};

/// y_t = u_{t-1}, y_0 = 0.
class UnitDelay final : public StrictlyCausalOperator {
 public:
  explicit UnitDelay(Index dim) : last_(Vector::Zero(dim)) {}
  Index in_dim() const override { return last_.size(); }
  Index out_dim() const override { return last_.size(); }
  void reset() override { last_.setZero(); }
  Vector output() const override { return last_; }
  void advance(const Vector& u) override { last_ = u; }
  StrictPtr clone_strict() const override { return std::make_unique<UnitDelay>(*this); }

 private:
  Vector last_;
};

/// Memoryless y_t = f(u_t).
class StaticMap final : public CausalOperator {
 public:
  using Fn = std::function<Vector(const Vector&)>;
  StaticMap(Index in_dim, Index out_dim, Fn fn)
      : in_dim_(in_dim), out_dim_(out_dim), fn_(std::move(fn)) {}
  Index in_dim() const override { return in_dim_; }
  Index out_dim() const override { return out_dim_; }
  void reset() override {}
  Vector step(const Vector& u) override { return fn_(u); }
  OperatorPtr clone() const override { return std::make_unique<StaticMap>(*this); }

 private:
  Index in_dim_;
  Index out_dim_;
  Fn fn_;
};

/// Strictly causal operator defined on the stored input history:
/// y_t = f(u_{t-1:0}), with the history passed oldest first.
class HistoryOperator final : public StrictlyCausalOperator {
 public:
  using Fn = std::function<Vector(std::span<const Vector>)>;
  HistoryOperator(Index in_dim, Index out_dim, Fn fn)
      : in_dim_(in_dim), out_dim_(out_dim), fn_(std::move(fn)) {}
  Index in_dim() const override { return in_dim_; }
  Index out_dim() const override { return out_dim_; }
  void reset() override { history_.clear(); }
  Vector output() const override { return fn_(history_); }
  void advance(const Vector& u) override { history_.push_back(u); }
  StrictPtr clone_strict() const override { return std::make_unique<HistoryOperator>(*this); }

 private:
  Index in_dim_;
  Index out_dim_;
  Fn fn_;
  std::vector<Vector> history_;
};

// ---------------------------------------------------------------------------
// Composition

/// b(a(.)). Strictly causal if either factor is.
OperatorPtr series(OperatorPtr a, OperatorPtr b);

/// -op(.), keeping the causality class.
OperatorPtr negate(OperatorPtr op);

/// I + upsilon_o for a strictly causal upsilon_o.
OperatorPtr identity_plus(OperatorPtr upsilon_o);

/// Inverse of I + upsilon_o through b_t = a_t - upsilon_o_t(b_{t-1:0}).
/// The wrapped operator carries its own memory (finite state or history).
OperatorPtr feedback_inverse(OperatorPtr upsilon_o);

}  // namespace ici
