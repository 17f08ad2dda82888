#include "ici/experiment.hpp"

#include "ici/errors.hpp"
#include "ici/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

namespace ici {

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : "NA"; }

std::string short_sigma(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", s);
  return buf;
}

}  // namespace

std::uint64_t data_seed(std::uint64_t seed) { return seed * kSeedStride; }

std::uint64_t test_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  return data_seed(seed) + cfg.test_seed_offset;
}

Dataset generate_dataset(const ExperimentConfig& cfg) {
  return collect_dataset(cfg.make_benchmark(), cfg.n_trajectories, cfg.horizon, cfg.sigma_r,
                         data_seed(cfg.seed));
}

TrainResult train_model(const ExperimentConfig& cfg, const Dataset& ds) {
  const StrategySpec spec = cfg.strategy_spec();
  const Benchmark bench = cfg.make_benchmark();
  if (ds.meta.benchmark != bench.id || ds.meta.input_dim != bench.input_dim ||
      ds.meta.output_dim != bench.output_dim)
    throw ConfigError("dataset was generated for benchmark '" + ds.meta.benchmark + "'");
  auto init = initial_params(spec, cfg.sizing, ds, cfg.seed);
  return train(spec, std::move(init), ds, cfg.train);
}

ModelUnderTest load_model(const ExperimentConfig& cfg, const std::filesystem::path& run_dir) {
  if (cfg.strategy == "true_plant") return ModelUnderTest::true_plant();
  const auto path = run_dir / "checkpoint.json";
  if (!std::filesystem::exists(path)) throw ConfigError("missing checkpoint " + path.string());
  return ModelUnderTest::learned(strategy_from_string(cfg.strategy), load_checkpoint(path));
}

Evaluation evaluate_model(const ExperimentConfig& cfg, const ModelUnderTest& model) {
  EvalOptions opts;
  opts.n_test = cfg.n_test;
  opts.horizon = cfg.test_horizon;
  opts.sigma_r = cfg.sigma_r;
  opts.seed = test_seed(cfg, cfg.seed);
  return evaluate(model, cfg.make_benchmark(), opts);
}

void write_training_artifacts(const std::filesystem::path& dir, ExperimentConfig cfg,
                              const std::string& data_hash, const TrainResult& result) {
  std::filesystem::create_directories(dir);
  cfg.dataset_hash = data_hash;
  auto echo = cfg.to_json();
  echo["controller"] = to_string(cfg.make_benchmark().controller.kind);
  write_text(dir / "config.json", dump_json(echo));
  save_checkpoint(dir / "checkpoint.json", result.params);
  std::ostringstream loss;
  loss << "epoch,J\n";
  for (std::size_t e = 0; e < result.loss_curve.size(); ++e)
    loss << e << ',' << fmt(result.loss_curve[e]) << '\n';
  write_text(dir / "loss.csv", loss.str());
}

void write_evaluation_artifacts(const std::filesystem::path& dir, const Evaluation& ev) {
  std::filesystem::create_directories(dir);
  write_text(dir / "metrics.json", dump_json(ev.report.to_json()));
  write_bands_csv(dir / "ol_bands.csv", ev.ol_bands);
  write_bands_csv(dir / "cl_bands.csv", ev.cl_bands);
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& out) {
  const auto sigmas = cfg.sigmas.empty() ? std::vector<double>{cfg.sigma_r} : cfg.sigmas;
  const auto seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : cfg.seeds;
  const auto strategies =
      cfg.strategies.empty() ? std::vector<std::string>{cfg.strategy} : cfg.strategies;

  const std::size_t n_units = sigmas.size() * seeds.size();
  std::vector<std::vector<SweepRow>> per_unit(n_units);
  parallel_for(n_units, [&](std::size_t i) {
    ExperimentConfig unit = cfg;
    unit.sigma_r = sigmas[i / seeds.size()];
    unit.seed = seeds[i % seeds.size()];
    unit.train.seed = unit.seed;
    unit.seeds.clear();
    unit.sigmas.clear();
    unit.strategies.clear();
    std::optional<std::filesystem::path> unit_dir;
    if (out)
      unit_dir = *out / cfg.benchmark / ("sigma_" + short_sigma(unit.sigma_r)) /
                 ("seed_" + std::to_string(unit.seed));

    const bool needs_data = std::any_of(strategies.begin(), strategies.end(),
                                        [](const std::string& s) { return s != "true_plant"; });
    Dataset ds;
    std::string hash;
    if (needs_data) {
      ds = generate_dataset(unit);
      hash = dataset_hash(ds);
      if (unit_dir) save_dataset(*unit_dir / "dataset", ds);
    }
    for (const auto& s : strategies) {
      ExperimentConfig run = unit;
      run.strategy = s;
      SweepRow row{cfg.benchmark, s, unit.sigma_r, unit.seed, {}, 0};
      ModelUnderTest model = ModelUnderTest::true_plant();
      if (s != "true_plant") {
        const auto trained = train_model(run, ds);
        row.train_diverged = trained.diverged_predictions;
        model = ModelUnderTest::learned(strategy_from_string(s), trained.params);
        if (unit_dir) write_training_artifacts(*unit_dir / s, run, hash, trained);
      }
      const auto ev = evaluate_model(run, model);
      row.metrics = ev.report;
      if (unit_dir) {
        if (s == "true_plant") write_text(*unit_dir / s / "config.json", dump_json(run.to_json()));
        write_evaluation_artifacts(*unit_dir / s, ev);
      }
      per_unit[i].push_back(row);
    }
  });

  std::vector<SweepRow> rows;
  for (auto& u : per_unit) rows.insert(rows.end(), u.begin(), u.end());
  return rows;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "benchmark,strategy,sigma,seed,ol_mse,cl_mse,ol_r2,cl_r2,diverged_flag\n";
  for (const auto& r : rows)
    os << r.benchmark << ',' << r.strategy << ',' << fmt(r.sigma) << ',' << r.seed << ','
       << fmt(r.metrics.ol_mse) << ',' << fmt(r.metrics.cl_mse) << ',' << fmt(r.metrics.ol_r2)
       << ',' << fmt(r.metrics.cl_r2) << ',' << (r.diverged() ? 1 : 0) << '\n';
  write_text(path, os.str());
}

nlohmann::json sweep_summary(const std::vector<SweepRow>& rows) {
  std::map<std::pair<std::string, double>, std::vector<const SweepRow*>> groups;
  for (const auto& r : rows) groups[{r.strategy, r.sigma}].push_back(&r);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [key, group] : groups) {
    nlohmann::json g{{"strategy", key.first}, {"sigma", key.second}, {"n_seeds", group.size()}};
    const std::pair<const char*, std::optional<double> MetricReport::*> metrics[] = {
        {"ol_mse", &MetricReport::ol_mse},
        {"cl_mse", &MetricReport::cl_mse},
        {"ol_r2", &MetricReport::ol_r2},
        {"cl_r2", &MetricReport::cl_r2}};
    for (const auto& [name, member] : metrics) {
      std::vector<double> values;
      for (const auto* r : group)
        if (r->metrics.*member) values.push_back(*(r->metrics.*member));
      nlohmann::json m{{"n_computable", values.size()}};
      if (values.size() >= 2) {
        const auto ci = confidence_interval(values);
        m["mean"] = ci.mean;
        m["ci95_halfwidth"] = ci.halfwidth;
      } else if (values.size() == 1) {
        m["mean"] = values.front();
      }
      g[name] = m;
    }
    out.push_back(g);
  }
  return out;
}

}  // namespace ici
