#include "ici/stable_family.hpp"

#include "ici/config.hpp"
#include "ici/errors.hpp"

#include <cmath>
#include <random>

namespace ici {

Index StableOperatorParams::parameter_count() const {
  return A_raw.size() + B.size() + C.size() + b.size() + c.size();
}

Vector StableOperatorParams::to_vector() const {
  Vector theta(parameter_count());
  Index k = 0;
  for (const Matrix* m : {&A_raw, &B, &C}) {
    theta.segment(k, m->size()) = m->reshaped();
    k += m->size();
  }
  theta.segment(k, b.size()) = b;
  k += b.size();
  theta.segment(k, c.size()) = c;
  return theta;
}

void StableOperatorParams::assign(const Vector& theta) {
  if (theta.size() != parameter_count())
    throw ContractViolation("parameter vector has " + std::to_string(theta.size()) +
                            " entries, expected " + std::to_string(parameter_count()));
  Index k = 0;
  for (Matrix* m : {&A_raw, &B, &C}) {
    m->reshaped() = theta.segment(k, m->size());
    k += m->size();
  }
  b = theta.segment(k, b.size());
  k += b.size();
  c = theta.segment(k, c.size());
}

StableOperatorParams StableOperatorParams::zeros(const ModelSizing& sizing, Index in_dim,
                                                 Index out_dim) {
  if (sizing.n_hidden < 1 || in_dim < 1 || out_dim < 1)
    throw ConfigError("stable operator dimensions must be positive");
  if (!(sizing.alpha > 0.0 && sizing.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (sizing.n_linear < 0 || sizing.n_linear > sizing.n_hidden)
    throw ConfigError("n_linear must lie in [0, n_hidden]");
  StableOperatorParams p;
  p.A_raw = Matrix::Zero(sizing.n_hidden, sizing.n_hidden);
  p.B = Matrix::Zero(sizing.n_hidden, in_dim);
  p.C = Matrix::Zero(out_dim, sizing.n_hidden);
  p.b = Vector::Zero(sizing.n_hidden);
  p.c = Vector::Zero(out_dim);
  p.alpha = sizing.alpha;
  p.n_linear = sizing.n_linear;
  return p;
}

StableOperatorParams StableOperatorParams::random(const ModelSizing& sizing, Index in_dim,
                                                  Index out_dim, std::uint64_t seed) {
  StableOperatorParams p = zeros(sizing, in_dim, out_dim);
  std::seed_seq seq{seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double n_h = static_cast<double>(sizing.n_hidden);
  auto fill = [&](Matrix& m, double std) {
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = std * normal(rng);
  };
  fill(p.A_raw, 0.5 / std::sqrt(n_h));
  fill(p.B, 1.0 / std::sqrt(static_cast<double>(in_dim)));
  fill(p.C, 1.0 / std::sqrt(n_h));
  return p;
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

SpectralProjection project_spectral_detail(const Matrix& A_raw, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractViolation("alpha must lie in (0, 1)");
  SpectralProjection proj;
  Eigen::JacobiSVD<Matrix> svd(A_raw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  proj.sigma_max = svd.singularValues()(0);
  proj.left = svd.matrixU().col(0);
  proj.right = svd.matrixV().col(0);
  proj.A = alpha / std::max(1.0, proj.sigma_max) * A_raw;
  return proj;
}

Matrix project_spectral(const Matrix& A_raw, double alpha) {
  return project_spectral_detail(A_raw, alpha).A;
}

Matrix project_spectral_backward(const SpectralProjection& proj, const Matrix& A_raw, double alpha,
                                 const Matrix& grad_A) {
  if (proj.sigma_max <= 1.0) return alpha * grad_A;
  // A = alpha A_raw / sigma, d sigma / d A_raw = u v^T
  const double s = proj.sigma_max;
  const double inner = (grad_A.array() * A_raw.array()).sum();
  return alpha / s * grad_A - alpha * inner / (s * s) * proj.left * proj.right.transpose();
}

EffectiveModel::EffectiveModel(StableOperatorParams params)
    : params_(std::move(params)), proj_(project_spectral_detail(params_.A_raw, params_.alpha)) {
  if (!(params_.in_scale > 0.0) || !(params_.out_scale > 0.0))
    throw ConfigError("normalization scales must be positive");
}

Vector EffectiveModel::readout(const Vector& h) const {
  return params_.out_scale * (params_.C * h + params_.c);
}

void EffectiveModel::transition(const Vector& h, const Vector& w, Vector& h_next) const {
  h_next.noalias() = proj_.A * h;
  h_next.noalias() += (1.0 / params_.in_scale) * (params_.B * w);
  h_next += params_.b;
  for (Index i = params_.n_linear; i < h_next.size(); ++i) h_next(i) = std::tanh(h_next(i));
}

std::pair<Vector, OperatorState> q_step(const StableOperatorParams& params,
                                        const OperatorState& state, const Vector& w) {
  if (w.size() != params.in_dim()) throw ConfigError("q_step: input dimension mismatch");
  const EffectiveModel model(params);
  OperatorState next{Vector(params.n_hidden())};
  Vector y = model.readout(state.h);
  model.transition(state.h, w, next.h);
  return {std::move(y), std::move(next)};
}

double incremental_gain_bound(const StableOperatorParams& params) {
  const double a = spectral_norm(project_spectral(params.A_raw, params.alpha));
  return params.out_scale / params.in_scale * spectral_norm(params.C) * spectral_norm(params.B) /
         (1.0 - a);
}

StableOperator::StableOperator(std::shared_ptr<const EffectiveModel> model)
    : model_(std::move(model)),
      state_(OperatorState::zero(model_->params().n_hidden())),
      scratch_(model_->params().n_hidden()) {}

void StableOperator::advance(const Vector& w) {
  model_->transition(state_.h, w, scratch_);
  state_.h.swap(scratch_);
}

ForwardRecord forward(const EffectiveModel& model, const Sequence& w) {
  const auto& p = model.params();
  if (w.dim() != p.in_dim()) throw ConfigError("forward: input dimension mismatch");
  const Index T = w.horizon();
  ForwardRecord rec;
  rec.H = Matrix::Zero(p.n_hidden(), T + 1);
  rec.W = w.matrix();
  rec.Y.resize(p.out_dim(), T);
  Vector h_next(p.n_hidden());
  for (Index t = 0; t < T; ++t) {
    const Vector h = rec.H.col(t);
    rec.Y.col(t) = model.readout(h);
    model.transition(h, rec.W.col(t), h_next);
    rec.H.col(t + 1) = h_next;
  }
  return rec;
}

GradientAccumulator::GradientAccumulator(const EffectiveModel& model)
    : model_(model),
      dA_(Matrix::Zero(model.params().n_hidden(), model.params().n_hidden())),
      dB_(Matrix::Zero(model.params().n_hidden(), model.params().in_dim())),
      dC_(Matrix::Zero(model.params().out_dim(), model.params().n_hidden())),
      db_(Vector::Zero(model.params().n_hidden())),
      dc_(Vector::Zero(model.params().out_dim())),
      dz_(model.params().n_hidden()) {}

void GradientAccumulator::transition(const Vector& h_t, const Vector& w_t, const Vector& h_next,
                                     const Vector& lambda_next, Vector& grad_w,
                                     Vector& lambda_h) {
  const auto& p = model_.params();
  dz_ = lambda_next;
  for (Index i = p.n_linear; i < dz_.size(); ++i) dz_(i) *= 1.0 - h_next(i) * h_next(i);
  const double inv = 1.0 / p.in_scale;
  dA_.noalias() += dz_ * h_t.transpose();
  dB_.noalias() += inv * dz_ * w_t.transpose();
  db_ += dz_;
  grad_w.noalias() = inv * (p.B.transpose() * dz_);
  lambda_h.noalias() = model_.A().transpose() * dz_;
}

void GradientAccumulator::readout(const Vector& h_t, const Vector& grad_y, Vector& lambda_h) {
  const auto& p = model_.params();
  const Vector g = p.out_scale * grad_y;
  dC_.noalias() += g * h_t.transpose();
  dc_ += g;
  lambda_h.noalias() += p.C.transpose() * g;
}

Vector GradientAccumulator::finish() const {
  const auto& p = model_.params();
  StableOperatorParams g = p;
  g.A_raw = project_spectral_backward(model_.projection(), p.A_raw, p.alpha, dA_);
  g.B = dB_;
  g.C = dC_;
  g.b = db_;
  g.c = dc_;
  return g.to_vector();
}

Vector q_backward(const EffectiveModel& model, const ForwardRecord& record,
                  const Sequence& grad_y, Sequence* grad_w) {
  const auto& p = model.params();
  const Index T = record.horizon();
  if (grad_y.horizon() != T || grad_y.dim() != p.out_dim())
    throw ContractViolation("q_backward: upstream gradient does not match the forward record");
  GradientAccumulator acc(model);
  Vector lambda = Vector::Zero(p.n_hidden());
  Vector lambda_h(p.n_hidden());
  Vector gw(p.in_dim());
  if (grad_w) *grad_w = Sequence(p.in_dim(), T);
  for (Index t = T - 1; t >= 0; --t) {
    const Vector h_t = record.H.col(t);
    acc.transition(h_t, record.W.col(t), record.H.col(t + 1), lambda, gw, lambda_h);
    acc.readout(h_t, grad_y[t], lambda_h);
    lambda.swap(lambda_h);
    if (grad_w) (*grad_w)[t] = gw;
  }
  return acc.finish();
}

nlohmann::json params_to_json(const StableOperatorParams& p) {
  auto array = [](const std::string& name, const Matrix& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return nlohmann::json{{"name", name}, {"shape", {m.rows(), m.cols()}}, {"data", data}};
  };
  nlohmann::json j;
  j["format"] = "ici-stable-operator-v1";
  j["n_hidden"] = p.n_hidden();
  j["n_linear"] = p.n_linear;
  j["alpha"] = p.alpha;
  j["in_scale"] = p.in_scale;
  j["out_scale"] = p.out_scale;
  j["parameter_count"] = p.parameter_count();
  j["arrays"] = nlohmann::json::array({array("A_raw", p.A_raw), array("B", p.B), array("C", p.C),
                                       array("b", p.b), array("c", p.c)});
  return j;
}

StableOperatorParams params_from_json(const nlohmann::json& j) {
  try {
    StableOperatorParams p;
    p.alpha = j.at("alpha").get<double>();
    p.n_linear = j.at("n_linear").get<Index>();
    p.in_scale = j.at("in_scale").get<double>();
    p.out_scale = j.at("out_scale").get<double>();
    auto read = [&](const std::string& name) {
      for (const auto& a : j.at("arrays")) {
        if (a.at("name") != name) continue;
        const Index rows = a.at("shape").at(0).get<Index>();
        const Index cols = a.at("shape").at(1).get<Index>();
        const auto data = a.at("data").get<std::vector<double>>();
        if (static_cast<Index>(data.size()) != rows * cols)
          throw ConfigError("checkpoint array '" + name + "' has the wrong size");
        return Matrix(Eigen::Map<const Matrix>(data.data(), rows, cols));
      }
      throw ConfigError("checkpoint is missing array '" + name + "'");
    };
    p.A_raw = read("A_raw");
    p.B = read("B");
    p.C = read("C");
    p.b = read("b").reshaped();
    p.c = read("c").reshaped();
    const Index n_h = j.at("n_hidden").get<Index>();
    if (p.A_raw.rows() != n_h || p.A_raw.cols() != n_h || p.B.rows() != n_h ||
        p.C.cols() != n_h || p.b.size() != n_h || p.c.size() != p.C.rows())
      throw ConfigError("checkpoint arrays have inconsistent shapes");
    if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw ConfigError("checkpoint alpha outside (0, 1)");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const StableOperatorParams& params) {
  write_text(path, dump_json(params_to_json(params)));
}

StableOperatorParams load_checkpoint(const std::filesystem::path& path) {
  try {
    return params_from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace ici
