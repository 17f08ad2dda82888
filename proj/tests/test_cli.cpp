#include "ici/config.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Scratch directory removed at scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("ici_cli_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ICI_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json small_config() {
  return {{"benchmark", "robot"}, {"strategy", "S3_indir_ici"}, {"sigma_r", 10.0},
          {"n_trajectories", 3},  {"horizon", 20},             {"epochs", 15},
          {"learning_rate", 0.01}, {"n_test", 4},              {"test_horizon", 20},
          {"seed", 1}};
}

fs::path write_config(const TempDir& dir, const std::string& name, const json& j) {
  const auto p = dir.path / name;
  ici::write_text(p, ici::dump_json(j));
  return p;
}

std::string slurp(const fs::path& p) { return ici::read_text(p); }

/// All files under a directory with their contents.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST_CASE("configuration errors exit with code 2") {
  TempDir tmp;
  auto j = small_config();
  j["bogus"] = true;
  CHECK(run_cli("generate --config " + write_config(tmp, "a.json", j).string() + " --out " +
            (tmp.path / "d").string()) == 2);
  j = small_config();
  j["n_trajectories"] = 0;
  CHECK(run_cli("generate --config " + write_config(tmp, "b.json", j).string() + " --out " +
            (tmp.path / "d").string()) == 2);
  CHECK(run_cli("generate --config " + (tmp.path / "missing.json").string() + " --out " +
            (tmp.path / "d").string()) == 2);
  CHECK(run_cli("frobnicate") != 0);
  CHECK(run_cli("verify --suite nonsense") != 0);
}

TEST_CASE("generate, train and evaluate are reproducible") {
  TempDir tmp;
  const auto cfg = write_config(tmp, "cfg.json", small_config()).string();
  const auto d1 = tmp.path / "d1", d2 = tmp.path / "d2";
  REQUIRE(run_cli("generate --config " + cfg + " --out " + d1.string()) == 0);
  REQUIRE(run_cli("generate --config " + cfg + " --out " + d2.string()) == 0);
  CHECK(tree(d1) == tree(d2));
  CHECK(fs::exists(d1 / "meta.json"));

  const auto r1 = tmp.path / "r1", r2 = tmp.path / "r2";
  REQUIRE(run_cli("train --config " + cfg + " --dataset " + d1.string() + " --out " + r1.string()) == 0);
  REQUIRE(run_cli("train --config " + cfg + " --dataset " + d2.string() + " --out " + r2.string()) == 0);
  REQUIRE(run_cli("evaluate --config " + cfg + " --out " + r1.string()) == 0);
  REQUIRE(run_cli("evaluate --config " + cfg + " --out " + r2.string()) == 0);
  CHECK(tree(r1) == tree(r2));
  for (const char* f : {"config.json", "checkpoint.json", "loss.csv", "metrics.json",
                        "ol_bands.csv", "cl_bands.csv"})
    CHECK(fs::exists(r1 / f));

  // The echoed run config is itself a valid config carrying the dataset hash.
  const auto echoed = r1 / "config.json";
  CHECK(json::parse(slurp(echoed)).contains("dataset_hash"));
  CHECK(run_cli("train --config " + echoed.string() + " --dataset " + d1.string() + " --out " +
            (tmp.path / "r3").string()) == 0);
  CHECK(slurp(tmp.path / "r3" / "checkpoint.json") == slurp(r1 / "checkpoint.json"));

  const auto metrics = json::parse(slurp(r1 / "metrics.json"));
  CHECK(metrics.at("n_test") == 4);
}

TEST_CASE("dataset hash mismatch and missing checkpoint exit with code 2") {
  TempDir tmp;
  auto j = small_config();
  const auto cfg = write_config(tmp, "cfg.json", j).string();
  REQUIRE(run_cli("generate --config " + cfg + " --out " + (tmp.path / "d").string()) == 0);
  j["dataset_hash"] = std::string(64, '0');
  const auto bad = write_config(tmp, "bad.json", j).string();
  CHECK(run_cli("train --config " + bad + " --dataset " + (tmp.path / "d").string() + " --out " +
            (tmp.path / "r").string()) == 2);
  CHECK_FALSE(fs::exists(tmp.path / "r" / "checkpoint.json"));
  fs::create_directories(tmp.path / "empty");
  CHECK(run_cli("evaluate --config " + cfg + " --out " + (tmp.path / "empty").string()) == 2);
  CHECK(run_cli("train --config " + cfg + " --dataset " + (tmp.path / "nodata").string() + " --out " +
            (tmp.path / "r").string()) == 2);
}

TEST_CASE("the true plant can be evaluated without a checkpoint") {
  TempDir tmp;
  auto j = small_config();
  j["strategy"] = "true_plant";
  const auto cfg = write_config(tmp, "cfg.json", j).string();
  REQUIRE(run_cli("evaluate --config " + cfg + " --out " + tmp.path.string()) == 0);
  const auto m = json::parse(slurp(tmp.path / "metrics.json"));
  CHECK(m.at("cl_mse") == 0.0);
}

TEST_CASE("sweep writes one results row per run") {
  TempDir tmp;
  auto j = small_config();
  j["strategies"] = {"S1_direct_id", "S3_indir_ici"};
  j["sigmas"] = {10.0, 50.0};
  const auto cfg = write_config(tmp, "cfg.json", j).string();
  REQUIRE(run_cli("sweep --config " + cfg + " --seeds 0,1 --out " + (tmp.path / "s").string()) == 0);
  std::ifstream in(tmp.path / "s" / "results.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "benchmark,strategy,sigma,seed,ol_mse,cl_mse,ol_r2,cl_r2,diverged_flag");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 8);
  CHECK(fs::exists(tmp.path / "s" / "summary.json"));
  CHECK(fs::exists(tmp.path / "s" / "robot" / "sigma_50" / "seed_1" / "S1_direct_id" / "metrics.json"));
  CHECK(run_cli("sweep --config " + cfg + " --seeds 0,x --out " + (tmp.path / "t").string()) == 2);
}

TEST_CASE("verify writes a report") {
  TempDir tmp;
  CHECK(run_cli("verify --suite corollary1 --out " + tmp.path.string()) == 0);
  CHECK(json::parse(slurp(tmp.path / "report.json")).is_object());
}
