#include "ici/operator.hpp"

#include "ici/errors.hpp"

#include <string>

namespace ici {

StrictPtr require_strict(OperatorPtr op, const char* who) {
  if (!op || op->causality() != Causality::strictly_causal)
    throw ContractViolation(std::string(who) + ": operator must be strictly causal");
  return StrictPtr(static_cast<StrictlyCausalOperator*>(op.release()));
}

Sequence run(CausalOperator& op, const Sequence& u, bool guard) {
  if (u.dim() != op.in_dim())
    throw ConfigError("run: input dimension " + std::to_string(u.dim()) + " != operator input " +
                      std::to_string(op.in_dim()));
  Sequence y(op.out_dim(), u.horizon());
  for (Index t = 0; t < u.horizon(); ++t) {
    y[t] = op.step(u[t]);
    if (guard && !is_bounded(y[t])) throw DivergedRun(t, "operator output diverged");
  }
  return y;
}

namespace {

void check_chain(const CausalOperator& a, const CausalOperator& b) {
  if (a.out_dim() != b.in_dim())
    throw ConfigError("series: output dimension " + std::to_string(a.out_dim()) +
                      " != input dimension " + std::to_string(b.in_dim()));
}

// a strictly causal: b's output is computed eagerly whenever a moves on.
class SeriesLeadingDelay final : public StrictlyCausalOperator {
 public:
  SeriesLeadingDelay(StrictPtr a, OperatorPtr b) : a_(std::move(a)), b_(std::move(b)) {
    pending_ = b_->step(a_->output());
  }
  SeriesLeadingDelay(const SeriesLeadingDelay& o)
      : a_(o.a_->clone_strict()), b_(o.b_->clone()), pending_(o.pending_) {}

  Index in_dim() const override { return a_->in_dim(); }
  Index out_dim() const override { return b_->out_dim(); }
  void reset() override {
    a_->reset();
    b_->reset();
    pending_ = b_->step(a_->output());
  }
  Vector output() const override { return pending_; }
  void advance(const Vector& u) override {
    a_->advance(u);
    pending_ = b_->step(a_->output());
  }
  StrictPtr clone_strict() const override { return std::make_unique<SeriesLeadingDelay>(*this); }

 private:
  StrictPtr a_;
  OperatorPtr b_;
  Vector pending_;
};

// a causal, b strictly causal.
class SeriesTrailingDelay final : public StrictlyCausalOperator {
 public:
  SeriesTrailingDelay(OperatorPtr a, StrictPtr b) : a_(std::move(a)), b_(std::move(b)) {}
  SeriesTrailingDelay(const SeriesTrailingDelay& o) : a_(o.a_->clone()), b_(o.b_->clone_strict()) {}

  Index in_dim() const override { return a_->in_dim(); }
  Index out_dim() const override { return b_->out_dim(); }
  void reset() override {
    a_->reset();
    b_->reset();
  }
  Vector output() const override { return b_->output(); }
  void advance(const Vector& u) override { b_->advance(a_->step(u)); }
  StrictPtr clone_strict() const override { return std::make_unique<SeriesTrailingDelay>(*this); }

 private:
  OperatorPtr a_;
  StrictPtr b_;
};

class SeriesCausal final : public CausalOperator {
 public:
  SeriesCausal(OperatorPtr a, OperatorPtr b) : a_(std::move(a)), b_(std::move(b)) {}
  SeriesCausal(const SeriesCausal& o) : a_(o.a_->clone()), b_(o.b_->clone()) {}

  Index in_dim() const override { return a_->in_dim(); }
  Index out_dim() const override { return b_->out_dim(); }
  void reset() override {
    a_->reset();
    b_->reset();
  }
  Vector step(const Vector& u) override { return b_->step(a_->step(u)); }
  OperatorPtr clone() const override { return std::make_unique<SeriesCausal>(*this); }

 private:
  OperatorPtr a_;
  OperatorPtr b_;
};

class IdentityPlus final : public CausalOperator {
 public:
  explicit IdentityPlus(StrictPtr o) : o_(std::move(o)) {}
  IdentityPlus(const IdentityPlus& other) : o_(other.o_->clone_strict()) {}

  Index in_dim() const override { return o_->in_dim(); }
  Index out_dim() const override { return o_->out_dim(); }
  void reset() override { o_->reset(); }
  Vector step(const Vector& b) override {
    Vector a = b + o_->output();
    o_->advance(b);
    return a;
  }
  OperatorPtr clone() const override { return std::make_unique<IdentityPlus>(*this); }

 private:
  StrictPtr o_;
};

class FeedbackInverse final : public CausalOperator {
 public:
  explicit FeedbackInverse(StrictPtr o) : o_(std::move(o)) {}
  FeedbackInverse(const FeedbackInverse& other) : o_(other.o_->clone_strict()) {}

  Index in_dim() const override { return o_->in_dim(); }
  Index out_dim() const override { return o_->out_dim(); }
  void reset() override { o_->reset(); }
  Vector step(const Vector& a) override {
    Vector b = a - o_->output();
    o_->advance(b);
    return b;
  }
  OperatorPtr clone() const override { return std::make_unique<FeedbackInverse>(*this); }

 private:
  StrictPtr o_;
};

void check_square(const CausalOperator& op, const char* who) {
  if (op.in_dim() != op.out_dim())
    throw ConfigError(std::string(who) + ": operator must have equal input and output dimension");
}

}  // namespace

OperatorPtr series(OperatorPtr a, OperatorPtr b) {
  check_chain(*a, *b);
  if (a->causality() == Causality::strictly_causal)
    return std::make_unique<SeriesLeadingDelay>(require_strict(std::move(a), "series"),
                                                std::move(b));
  if (b->causality() == Causality::strictly_causal)
    return std::make_unique<SeriesTrailingDelay>(std::move(a),
                                                 require_strict(std::move(b), "series"));
  return std::make_unique<SeriesCausal>(std::move(a), std::move(b));
}

OperatorPtr negate(OperatorPtr op) {
  const Index d = op->out_dim();
  return series(std::move(op), std::make_unique<StaticMap>(d, d, [](const Vector& x) -> Vector {
                  return -x;
                }));
}

OperatorPtr identity_plus(OperatorPtr upsilon_o) {
  check_square(*upsilon_o, "identity_plus");
  return std::make_unique<IdentityPlus>(require_strict(std::move(upsilon_o), "identity_plus"));
}

OperatorPtr feedback_inverse(OperatorPtr upsilon_o) {
  check_square(*upsilon_o, "feedback_inverse");
  return std::make_unique<FeedbackInverse>(require_strict(std::move(upsilon_o), "feedback_inverse"));
}

}  // namespace ici
