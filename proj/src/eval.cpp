#include "ici/eval.hpp"

#include "ici/errors.hpp"
#include "ici/interconnect.hpp"
#include "ici/parallel.hpp"

#include <cmath>
#include <fstream>

namespace ici {

StrictPtr realize_plant_model(const ModelUnderTest& model, const Benchmark& bench) {
  if (!model.strategy) return bench.make_plant();
  auto q = std::make_unique<StableOperator>(model.params);
  if (*model.strategy == Strategy::direct_id) return q;
  return std::make_unique<ICIModel>(std::move(q), bench.make_controller());
}

std::optional<double> r_squared(std::span<const Sequence> measured,
                                std::span<const Sequence> predicted) {
  if (measured.size() != predicted.size() || measured.empty())
    throw ContractViolation("r_squared: prediction and measurement counts differ or are empty");
  const Index d = measured.front().dim();
  Vector mean = Vector::Zero(d);
  double count = 0.0;
  for (const auto& y : measured) {
    if (y.dim() != d) throw ContractViolation("r_squared: inconsistent dimensions");
    mean += y.matrix().rowwise().sum();
    count += static_cast<double>(y.horizon());
  }
  mean /= count;
  double residual = 0.0;
  double total = 0.0;
  for (std::size_t n = 0; n < measured.size(); ++n) {
    const auto& y = measured[n].matrix();
    const auto& p = predicted[n].matrix();
    if (p.rows() != y.rows() || p.cols() != y.cols())
      throw ContractViolation("r_squared: sequence shapes differ");
    residual += (y - p).squaredNorm();
    total += (y.colwise() - mean).squaredNorm();
  }
  if (!(total > 0.0)) return std::nullopt;
  return 1.0 - residual / total;
}

nlohmann::json MetricReport::to_json() const {
  auto opt = [](const std::optional<double>& x) -> nlohmann::json {
    return x ? nlohmann::json(*x) : nlohmann::json(nullptr);
  };
  return {{"ol_mse", opt(ol_mse)},           {"cl_mse", opt(cl_mse)},
          {"ol_r2", opt(ol_r2)},             {"cl_r2", opt(cl_r2)},
          {"n_test", n_test},                {"ol_diverged_trajectories", ol_diverged},
          {"cl_diverged_trajectories", cl_diverged}};
}

namespace {

bool bounded(const Sequence& s) {
  for (Index t = 0; t < s.horizon(); ++t)
    if (!is_bounded(s[t])) return false;
  return true;
}

std::vector<BandRow> bands(const std::vector<Sequence>& truth, const std::vector<Sequence>& model) {
  std::vector<BandRow> rows;
  const double n = static_cast<double>(truth.size());
  const Index T = truth.front().horizon();
  const Index d = truth.front().dim();
  auto stats = [&](const std::vector<Sequence>& s, Index t, Index i, double& mean, double& lo,
                   double& hi) {
    double sum = 0.0;
    for (const auto& x : s) sum += x[t](i);
    mean = sum / n;
    double sq = 0.0;
    for (const auto& x : s) sq += (x[t](i) - mean) * (x[t](i) - mean);
    const double half = n > 1 ? 1.96 * std::sqrt(sq / (n - 1.0)) / std::sqrt(n) : 0.0;
    lo = mean - half;
    hi = mean + half;
  };
  for (Index t = 0; t < T; ++t) {
    for (Index i = 0; i < d; ++i) {
      BandRow row;
      row.t = t;
      row.component = i;
      stats(truth, t, i, row.true_mean, row.true_lo, row.true_hi);
      stats(model, t, i, row.model_mean, row.model_lo, row.model_hi);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace

Evaluation evaluate(const ModelUnderTest& model, const Benchmark& bench, const EvalOptions& opts) {
  if (opts.n_test < 1 || opts.horizon < 1) throw ConfigError("evaluation needs n_test, T >= 1");
  const auto n = static_cast<std::size_t>(opts.n_test);
  std::vector<Sequence> ol_true(n), ol_model(n), cl_true(n), cl_model(n);
  std::vector<char> ol_bad(n, 0), cl_bad(n, 0);

  parallel_for(n, [&](std::size_t i) {
    const auto [r, v] =
        draw_trajectory_noise(bench, opts.horizon, opts.sigma_r, opts.seed, static_cast<Index>(i));

    auto plant = bench.make_plant();
    plant->reset();
    ol_true[i] = Sequence(Matrix(run(*plant, r, false).matrix() + v.matrix()));
    auto g_hat = realize_plant_model(model, bench);
    g_hat->reset();
    ol_model[i] = run(*g_hat, r, false);
    ol_bad[i] = !(bounded(ol_true[i]) && bounded(ol_model[i]));

    ClosedLoopSystem true_loop(bench.make_plant(), bench.make_controller());
    cl_true[i] = closed_loop_run(true_loop, r, v, {}, false).y;
    ClosedLoopSystem model_loop(realize_plant_model(model, bench), bench.make_controller());
    cl_model[i] = closed_loop_run(model_loop, r, v, {}, false).y;
    cl_bad[i] = !(bounded(cl_true[i]) && bounded(cl_model[i]));
  });

  Evaluation out;
  auto& rep = out.report;
  rep.n_test = opts.n_test;
  for (std::size_t i = 0; i < n; ++i) {
    rep.ol_diverged += ol_bad[i];
    rep.cl_diverged += cl_bad[i];
  }
  if (rep.ol_diverged == 0) {
    rep.ol_mse = cost(ol_true, ol_model);
    rep.ol_r2 = r_squared(ol_true, ol_model);
  }
  if (rep.cl_diverged == 0) {
    rep.cl_mse = cost(cl_true, cl_model);
    rep.cl_r2 = r_squared(cl_true, cl_model);
  }
  out.ol_bands = bands(ol_true, ol_model);
  out.cl_bands = bands(cl_true, cl_model);
  return out;
}

void write_bands_csv(const std::filesystem::path& path, const std::vector<BandRow>& rows) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os.precision(17);
  os << "t,component,true_mean,true_lo,true_hi,model_mean,model_lo,model_hi\n";
  for (const auto& r : rows)
    os << r.t << ',' << r.component << ',' << r.true_mean << ',' << r.true_lo << ',' << r.true_hi
       << ',' << r.model_mean << ',' << r.model_lo << ',' << r.model_hi << '\n';
}

ConfidenceInterval confidence_interval(std::span<const double> values) {
  if (values.size() < 2) throw ContractViolation("confidence_interval needs at least two values");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, 1.96 * std::sqrt(sq / (n - 1.0)) / std::sqrt(n)};
}

Vector impulse_response(const CausalOperator& op, Index n_lags) {
  auto with_impulse = op.clone();
  auto baseline = op.clone();
  with_impulse->reset();
  baseline->reset();
  Sequence impulse(op.in_dim(), n_lags + 1);
  impulse[0](0) = 1.0;
  const Sequence zero(op.in_dim(), n_lags + 1);
  const Matrix diff = run(*with_impulse, impulse, false).matrix() - run(*baseline, zero, false).matrix();
  return diff.rightCols(n_lags).reshaped();
}

StrictPtr implied_q(const ModelUnderTest& model, const Benchmark& bench) {
  const auto k = bench.make_controller();
  if (!model.strategy) return construct_true_q(*bench.make_plant(), *k);
  StableOperator q(model.params);
  if (*model.strategy == Strategy::direct_id) return construct_true_q(q, *k);
  return q.clone_strict();
}

std::optional<double> ConsistencyTable::mean_error(Strategy s, Index n, Index horizon) const {
  double sum = 0.0;
  int count = 0;
  for (const auto& c : cells) {
    if (c.strategy != s || c.n != n || c.horizon != horizon) continue;
    if (!c.error) return std::nullopt;
    sum += *c.error;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

ConsistencyTable consistency_sweep(const ConsistencyOptions& opts) {
  BenchmarkOptions bo;
  bo.id = "linear_bench";
  bo.noise = opts.noise;
  const Benchmark bench = make_benchmark(bo);
  const Vector true_ir = impulse_response(*implied_q(ModelUnderTest::true_plant(), bench), opts.n_lags);

  ConsistencyTable table;
  table.true_q_norm = true_ir.norm();
  for (const auto seed : opts.seeds) {
    for (const auto& [n, horizon] : opts.sizes) {
      // Larger datasets extend smaller ones: trajectory seeds depend on the
      // run seed and trajectory index only.
      const std::uint64_t data_seed = seed * kSeedStride;
      const Dataset ds = collect_dataset(bench, n, horizon, opts.sigma_r, data_seed);
      for (const auto strategy : opts.strategies) {
        ConsistencyCell cell{strategy, n, horizon, seed, std::nullopt};
        try {
          const StrategySpec spec{strategy, bench.controller};
          TrainConfig cfg = opts.train;
          cfg.seed = seed;
          auto init = initial_params(spec, opts.sizing, ds, seed);
          const auto result = train(spec, std::move(init), ds, cfg);
          const auto q = implied_q(ModelUnderTest::learned(strategy, result.params), bench);
          const Vector ir = impulse_response(*q, opts.n_lags);
          if (ir.allFinite()) cell.error = (ir - true_ir).norm();
        } catch (const std::exception&) {
        }
        table.cells.push_back(cell);
      }
    }
  }
  return table;
}

}  // namespace ici
