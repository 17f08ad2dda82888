#include "ici/config.hpp"

#include "ici/errors.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace ici {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "benchmark",   "strategy",       "sigma_r",       "n_trajectories", "horizon",
      "noise_kind",  "noise_std",      "noise_lower",   "noise_upper",    "noise_ar",
      "noise_ma",    "noise_burn_in",  "n_hidden",      "n_linear",       "alpha",
      "epochs",      "learning_rate",  "lr_decay",      "optimizer",      "beta1",
      "beta2",       "epsilon",        "batch_size",    "train_seed",     "patience",
      "min_delta",   "seed",           "seeds",         "strategies",     "sigmas",
      "n_test",      "test_horizon",   "test_seed_offset", "dataset_hash", "scalar_x0",
      "mass_kg",     "ts_seconds",     "drag_b1",       "drag_b2",        "x0_position_m",
      "x0_velocity_mps", "kappa",        "controller"};
  return keys;
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

Eigen::Vector2d read_pair(const nlohmann::json& j, const char* key, Eigen::Vector2d fallback) {
  std::vector<double> v;
  read(j, key, v);
  if (!j.contains(key)) return fallback;
  if (v.size() != 2) throw ConfigError(std::string("config key '") + key + "' needs 2 values");
  return {v[0], v[1]};
}

}  // namespace

BenchmarkOptions ExperimentConfig::benchmark_options() const {
  BenchmarkOptions o;
  o.id = benchmark;
  o.scalar_x0 = scalar_x0;
  o.robot = robot;
  o.kappa = kappa;
  if (!noise_from_benchmark) o.noise = noise;
  return o;
}

StrategySpec ExperimentConfig::strategy_spec() const {
  if (strategy == "true_plant") throw ConfigError("'true_plant' cannot be trained");
  return {strategy_from_string(strategy), make_benchmark().controller};
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j{{"benchmark", benchmark},
                   {"strategy", strategy},
                   {"sigma_r", sigma_r},
                   {"n_trajectories", n_trajectories},
                   {"horizon", horizon},
                   {"n_hidden", sizing.n_hidden},
                   {"n_linear", sizing.n_linear},
                   {"alpha", sizing.alpha},
                   {"seed", seed},
                   {"seeds", seeds},
                   {"strategies", strategies},
                   {"sigmas", sigmas},
                   {"n_test", n_test},
                   {"test_horizon", test_horizon},
                   {"test_seed_offset", test_seed_offset},
                   {"scalar_x0", scalar_x0},
                   {"mass_kg", robot.mass_kg},
                   {"ts_seconds", robot.ts_seconds},
                   {"drag_b1", robot.drag_b1},
                   {"drag_b2", robot.drag_b2},
                   {"x0_position_m", {robot.x0_position_m(0), robot.x0_position_m(1)}},
                   {"x0_velocity_mps", {robot.x0_velocity_mps(0), robot.x0_velocity_mps(1)}}};
  j.update(train.to_json());
  if (!noise_from_benchmark) {
    j["noise_kind"] = to_string(noise.kind);
    j["noise_std"] = noise.std;
    j["noise_lower"] = noise.lower;
    j["noise_upper"] = noise.upper;
    j["noise_ar"] = noise.ar;
    j["noise_ma"] = noise.ma;
    j["noise_burn_in"] = noise.burn_in;
  }
  if (kappa.size() > 0) j["kappa"] = std::vector<double>(kappa.begin(), kappa.end());
  if (!dataset_hash.empty()) j["dataset_hash"] = dataset_hash;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");

  ExperimentConfig c;
  read(j, "benchmark", c.benchmark);
  read(j, "strategy", c.strategy);
  read(j, "sigma_r", c.sigma_r);
  read(j, "n_trajectories", c.n_trajectories);
  read(j, "horizon", c.horizon);
  read(j, "n_hidden", c.sizing.n_hidden);
  read(j, "n_linear", c.sizing.n_linear);
  read(j, "alpha", c.sizing.alpha);
  read(j, "seed", c.seed);
  read(j, "seeds", c.seeds);
  read(j, "strategies", c.strategies);
  read(j, "sigmas", c.sigmas);
  read(j, "n_test", c.n_test);
  read(j, "test_horizon", c.test_horizon);
  read(j, "test_seed_offset", c.test_seed_offset);
  read(j, "dataset_hash", c.dataset_hash);
  read(j, "scalar_x0", c.scalar_x0);
  read(j, "mass_kg", c.robot.mass_kg);
  read(j, "ts_seconds", c.robot.ts_seconds);
  read(j, "drag_b1", c.robot.drag_b1);
  read(j, "drag_b2", c.robot.drag_b2);
  c.robot.x0_position_m = read_pair(j, "x0_position_m", c.robot.x0_position_m);
  c.robot.x0_velocity_mps = read_pair(j, "x0_velocity_mps", c.robot.x0_velocity_mps);
  if (j.contains("kappa")) {
    std::vector<double> k;
    read(j, "kappa", k);
    c.kappa = Eigen::Map<const Vector>(k.data(), static_cast<Index>(k.size()));
  }
  if (j.contains("noise_kind")) {
    c.noise_from_benchmark = false;
    std::string kind;
    read(j, "noise_kind", kind);
    try {
      c.noise.kind = noise_kind_from_string(kind);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    read(j, "noise_std", c.noise.std);
    read(j, "noise_lower", c.noise.lower);
    read(j, "noise_upper", c.noise.upper);
    read(j, "noise_ar", c.noise.ar);
    read(j, "noise_ma", c.noise.ma);
    read(j, "noise_burn_in", c.noise.burn_in);
  }
  try {
    c.train = TrainConfig::from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training keys: ") + e.what());
  }
  c.validate();
  // Run directories echo the controller; it must agree with the benchmark.
  if (j.contains("controller")) {
    const auto& k = j.at("controller");
    if (!k.is_string() || k.get<std::string>() != to_string(c.make_benchmark().controller.kind))
      throw ConfigError("controller does not match benchmark '" + c.benchmark + "'");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::validate() const {
  if (benchmark != "scalar_unstable" && benchmark != "robot" && benchmark != "linear_bench")
    throw ConfigError("unknown benchmark '" + benchmark + "'");
  auto check_strategy = [](const std::string& s) {
    if (s == "true_plant") return;
    try {
      strategy_from_string(s);
    } catch (const std::exception&) {
      throw ConfigError("unknown strategy '" + s + "'");
    }
  };
  check_strategy(strategy);
  for (const auto& s : strategies) check_strategy(s);
  if (!(sigma_r >= 0.0)) throw ConfigError("sigma_r must be >= 0");
  for (double s : sigmas)
    if (!(s >= 0.0)) throw ConfigError("sigmas must be >= 0");
  if (n_trajectories < 1 || horizon < 1) throw ConfigError("n_trajectories and horizon must be >= 1");
  if (n_test < 1 || test_horizon < 1) throw ConfigError("n_test and test_horizon must be >= 1");
  if (n_trajectories > static_cast<Index>(test_seed_offset) ||
      static_cast<Index>(test_seed_offset) + n_test > static_cast<Index>(kSeedStride))
    throw ConfigError("test_seed_offset must separate training and test trajectory seeds");
  if (sizing.n_hidden < 1 || sizing.n_linear < 0 || sizing.n_linear > sizing.n_hidden)
    throw ConfigError("need n_hidden >= 1 and 0 <= n_linear <= n_hidden");
  if (!(sizing.alpha > 0.0 && sizing.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!noise_from_benchmark && !(noise.std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  if (!noise_from_benchmark && noise.kind == NoiseKind::truncated_gaussian &&
      !(noise.lower < noise.upper))
    throw ConfigError("noise_lower must be below noise_upper");
  if (!(robot.mass_kg > 0.0) || !(robot.ts_seconds > 0.0))
    throw ConfigError("mass_kg and ts_seconds must be positive");
  if (!(robot.drag_b2 > 0.0 && robot.drag_b2 < robot.drag_b1))
    throw ConfigError("robot drag needs 0 < drag_b2 < drag_b1");
  if (kappa.size() != 0 && kappa.size() != 2) throw ConfigError("kappa needs 2 values");
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << text;
  if (!os) throw ConfigError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace ici
