// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "ici/config.hpp"
#include "ici/experiment.hpp"
#include "ici/interconnect.hpp"
#include "ici/verify.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>

namespace fs = std::filesystem;
using namespace ici;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

fs::path scratch_dir(const std::string& name) {
  std::random_device rd;
  auto p = fs::temp_directory_path() / ("ici_acceptance_" + name + "_" + std::to_string(rd()));
  fs::create_directories(p);
  return p;
}

ExperimentConfig shipped(const char* name) {
  return ExperimentConfig::load(fs::path(ICI_SOURCE_DIR) / "configs" / name);
}

Outcome from_suite(const SuiteReport& r, double seconds, double budget) {
  const bool in_time = seconds < budget;
  return {r.passed && in_time, r.details.dump()};
}

template <class F>
Outcome timed_suite(F&& run, double budget) {
  const auto t0 = std::chrono::steady_clock::now();
  const SuiteReport r = run();
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto o = from_suite(r, s, budget);
  o.detail = "runtime " + std::to_string(s) + " s; " + o.detail;
  return o;
}

Outcome scalar_experiment() {
  const auto cfg = shipped("scalar.json");
  const auto dir = scratch_dir("scalar");
  const auto rows = run_sweep(cfg, dir);
  const auto bench = cfg.make_benchmark();
  bool ok = true;
  std::vector<double> cl;
  std::string detail;
  for (const auto& row : rows) {
    char sigma[32];
    std::snprintf(sigma, sizeof sigma, "%g", row.sigma);
    const auto ckpt = dir / bench.id / ("sigma_" + std::string(sigma)) /
                      ("seed_" + std::to_string(row.seed)) / row.strategy / "checkpoint.json";
    const auto model = realize_plant_model(
        ModelUnderTest::learned(strategy_from_string(row.strategy), load_checkpoint(ckpt)), bench);
    // Open loop under zero input, unguarded.
    model->reset();
    double peak = 0.0;
    Index blowup_step = -1;
    for (Index t = 0; t <= 10 && blowup_step < 0; ++t) {
      const double y = std::abs(model->step(Vector::Zero(1))(0));
      peak = std::max(peak, y);
      if (!(y <= 1e3)) blowup_step = t;
    }
    const bool seed_ok = blowup_step >= 0 && row.metrics.cl_mse && *row.metrics.cl_mse < 0.05;
    ok = ok && seed_ok;
    if (row.metrics.cl_mse) cl.push_back(*row.metrics.cl_mse);
    detail += "seed " + std::to_string(row.seed) + ": zero-input blowup step " +
              std::to_string(blowup_step) + ", cl_mse " +
              (row.metrics.cl_mse ? std::to_string(*row.metrics.cl_mse) : "NA") + "; ";
  }
  if (cl.size() >= 2) {
    const auto ci = confidence_interval(cl);
    detail += "mean cl_mse " + std::to_string(ci.mean) + " +/- " + std::to_string(ci.halfwidth);
  }
  fs::remove_all(dir);
  return {ok && rows.size() == 10, detail};
}

Outcome robot_orderings() {
  const auto cfg = shipped("robot.json");
  const auto dir = scratch_dir("robot");
  const auto rows = run_sweep(cfg, dir);
  fs::remove_all(dir);
  const auto summary = sweep_summary(rows);
  std::map<std::pair<std::string, double>, nlohmann::json> by;
  for (const auto& g : summary) by[{g.at("strategy").get<std::string>(), g.at("sigma").get<double>()}] = g;
  auto mean = [&](const std::string& s, double sigma, const char* metric) -> double {
    const auto& m = by.at({s, sigma}).at(metric);
    // Every seed must be computable for a mean to count.
    if (m.at("n_computable").get<std::size_t>() != cfg.seeds.size() || !m.contains("mean"))
      return std::numeric_limits<double>::quiet_NaN();
    return m.at("mean").get<double>();
  };
  bool ok = true;
  std::string detail;
  for (double sigma : cfg.sigmas) {
    for (const char* metric : {"ol_mse", "cl_mse"}) {
      const double s1 = mean("S1_direct_id", sigma, metric);
      const double s2 = mean("S2_dir_ici", sigma, metric);
      const double s3 = mean("S3_indir_ici", sigma, metric);
      const bool ordered = s3 < s2 && s2 < s1;
      ok = ok && ordered;
      detail += "sigma " + std::to_string(sigma) + " " + metric + ": S3 " + std::to_string(s3) +
                " S2 " + std::to_string(s2) + " S1 " + std::to_string(s1) +
                (ordered ? "" : " (order violated)") + "; ";
    }
    const double r3 = mean("S3_indir_ici", sigma, "cl_r2");
    const double r1 = mean("S1_direct_id", sigma, "cl_r2");
    ok = ok && r3 > r1;
    detail += "cl_r2 S3 " + std::to_string(r3) + " S1 " + std::to_string(r1) + "; ";
  }
  return {ok, detail};
}

Outcome metric_units() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::vector<Sequence> y{Sequence::scalar({1, 2, 3, 4})};
  ok = ok && r_squared(y, y) == 1.0;
  std::vector<Sequence> mean_pred{Sequence::scalar({2.5, 2.5, 2.5, 2.5})};
  ok = ok && r_squared(y, mean_pred) == 0.0;
  std::vector<Sequence> a{Sequence::scalar({1, 2})}, zero{Sequence::scalar({0, 0})};
  ok = ok && cost(a, a) == 0.0 && cost(a, zero) == 2.5;
  std::vector<Sequence> b{Sequence::scalar({1, 1}), Sequence::scalar({std::sqrt(3.0), std::sqrt(3.0)})};
  std::vector<Sequence> z2{zero[0], zero[0]};
  ok = ok && std::abs(cost(b, z2) - 2.0) <= 4 * std::numeric_limits<double>::epsilon();
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ok && s < 1.0, "runtime " + std::to_string(s) + " s"};
}

Outcome determinism() {
  const auto dir = scratch_dir("determinism");
  auto cfg = shipped("robot.json");
  cfg.strategy = "S2_dir_ici";
  cfg.sigma_r = 10.0;
  cfg.n_trajectories = 8;
  cfg.train.epochs = 50;
  cfg.n_test = 20;
  auto once = [&](const fs::path& root) {
    const auto ds = generate_dataset(cfg);
    save_dataset(root / "dataset", ds);
    const auto loaded = load_dataset(root / "dataset");
    const auto res = train_model(cfg, loaded);
    write_training_artifacts(root / "run", cfg, dataset_hash(loaded), res);
    write_evaluation_artifacts(root / "run", evaluate_model(cfg, load_model(cfg, root / "run")));
  };
  once(dir / "a");
  once(dir / "b");
  std::map<std::string, std::string> files_a, files_b;
  for (auto* m : {&files_a, &files_b}) {
    const auto root = dir / (m == &files_a ? "a" : "b");
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) (*m)[fs::relative(e.path(), root).string()] = read_text(e.path());
  }
  fs::remove_all(dir);
  const bool ok = !files_a.empty() && files_a == files_b;
  return {ok, std::to_string(files_a.size()) + " files compared"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 internal signal bound", [] { return timed_suite([] { return verify_internal_bound(); }, 30); }},
      {"2 true Q reconstruction", [] { return timed_suite([] { return verify_reconstruction(); }, 60); }},
      {"3 feedback inverse round trip", [] { return timed_suite([] { return verify_corollary1(); }, 1e9); }},
      {"4 gradient correctness", [] { return timed_suite([] { return verify_gradients(); }, 1e9); }},
      {"5 linear consistency", [] { return timed_suite([] { return verify_consistency(); }, 600); }},
      {"6 scalar unstable experiment", scalar_experiment},
      {"7 robot strategy orderings", robot_orderings},
      {"8 metric unit checks", metric_units},
      {"9 determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "criterion " << name << " (" << s << " s): " << o.detail << "\n";
    std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << name << std::endl;
    if (!o.passed) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
