#include "ici/dataset.hpp"

#include "ici/config.hpp"
#include "ici/errors.hpp"
#include "ici/interconnect.hpp"
#include "ici/parallel.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ici {

namespace {

constexpr std::uint64_t kExcitationStream = 0;
constexpr std::uint64_t kNoiseStream = 1;

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

nlohmann::json meta_to_json(const DatasetMeta& m) {
  return {{"benchmark", m.benchmark},
          {"controller", m.controller},
          {"n_trajectories", m.n_trajectories},
          {"horizon", m.horizon},
          {"input_dim", m.input_dim},
          {"output_dim", m.output_dim},
          {"sigma_r", m.sigma_r},
          {"noise", m.noise.to_json()},
          {"base_seed", m.base_seed},
          {"excitation_seed_rule", "seed_seq(base_seed + n, 0)"},
          {"noise_seed_rule", "seed_seq(base_seed + n, 1)"}};
}

DatasetMeta meta_from_json(const nlohmann::json& j) {
  DatasetMeta m;
  m.benchmark = j.at("benchmark").get<std::string>();
  m.controller = j.at("controller").get<std::string>();
  m.n_trajectories = j.at("n_trajectories").get<Index>();
  m.horizon = j.at("horizon").get<Index>();
  m.input_dim = j.at("input_dim").get<Index>();
  m.output_dim = j.at("output_dim").get<Index>();
  m.sigma_r = j.at("sigma_r").get<double>();
  m.noise = NoiseSpec::from_json(j.at("noise"));
  m.base_seed = j.at("base_seed").get<std::uint64_t>();
  return m;
}

std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  os << "t";
  for (const auto& [name, seq] : {std::pair{"r", &tr.r}, {"u", &tr.u}, {"y", &tr.y}})
    for (Index i = 0; i < seq->dim(); ++i) os << ',' << name << '[' << i << ']';
  os << '\n';
  for (Index t = 0; t < tr.y.horizon(); ++t) {
    os << t;
    for (const Sequence* seq : {&tr.r, &tr.u, &tr.y})
      for (Index i = 0; i < seq->dim(); ++i) os << ',' << format_double((*seq)[t](i));
    os << '\n';
  }
  return os.str();
}

Trajectory parse_trajectory_csv(const std::string& text, const DatasetMeta& m,
                                const std::string& name) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError(name + ": empty trajectory file");
  Trajectory tr{Sequence(m.input_dim, m.horizon), Sequence(m.input_dim, m.horizon),
                Sequence(m.output_dim, m.horizon)};
  const Index cols = 1 + 2 * m.input_dim + m.output_dim;
  Index t = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (t >= m.horizon) throw ConfigError(name + ": more rows than the horizon");
    std::vector<double> values;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) values.push_back(std::stod(cell));
    if (static_cast<Index>(values.size()) != cols)
      throw ConfigError(name + ": row " + std::to_string(t) + " has the wrong column count");
    Index k = 1;
    for (Sequence* seq : {&tr.r, &tr.u, &tr.y})
      for (Index i = 0; i < seq->dim(); ++i) (*seq)[t](i) = values[k++];
    ++t;
  }
  if (t != m.horizon) throw ConfigError(name + ": fewer rows than the horizon");
  return tr;
}

std::string traj_name(Index n) { return "traj_" + std::to_string(n) + ".csv"; }

}  // namespace

TrajectoryNoise draw_trajectory_noise(const Benchmark& bench, Index horizon, double sigma_r,
                                      std::uint64_t base_seed, Index index) {
  const std::uint64_t key = base_seed + static_cast<std::uint64_t>(index);
  std::seed_seq r_seed{key, kExcitationStream};
  std::seed_seq v_seed{key, kNoiseStream};
  NoiseGenerator excitation(NoiseSpec::gaussian(sigma_r), bench.input_dim, r_seed);
  NoiseGenerator noise(bench.noise, bench.output_dim, v_seed);
  return {excitation.sample(horizon), noise.sample(horizon)};
}

Dataset collect_dataset(const Benchmark& bench, Index n_trajectories, Index horizon,
                        double sigma_r, std::uint64_t base_seed) {
  if (n_trajectories < 1 || horizon < 1)
    throw ConfigError("dataset needs at least one trajectory and a positive horizon");
  if (sigma_r < 0.0) throw ConfigError("sigma_r must be nonnegative");
  Dataset ds;
  ds.meta = {bench.id,          to_string(bench.controller.kind), n_trajectories, horizon,
             bench.input_dim,   bench.output_dim,                 sigma_r,        bench.noise,
             base_seed};
  ds.trajectories.resize(static_cast<std::size_t>(n_trajectories));
  parallel_for(ds.trajectories.size(), [&](std::size_t n) {
    auto [r, v] = draw_trajectory_noise(bench, horizon, sigma_r, base_seed, static_cast<Index>(n));
    ClosedLoopSystem loop(bench.make_plant(), bench.make_controller());
    auto signals = closed_loop_run(loop, r, v);
    ds.trajectories[n] = {std::move(r), std::move(signals.u), std::move(signals.y)};
  });
  return ds;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  write_text(dir / "meta.json", dump_json(meta_to_json(ds.meta)));
  for (Index n = 0; n < ds.size(); ++n)
    write_text(dir / traj_name(n), trajectory_csv(ds.trajectories[static_cast<std::size_t>(n)]));
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "meta.json"))
    throw ConfigError("no dataset at " + dir.string() + " (meta.json missing)");
  Dataset ds;
  try {
    ds.meta = meta_from_json(nlohmann::json::parse(read_text(dir / "meta.json")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed dataset meta.json: " + std::string(e.what()));
  }
  for (Index n = 0; n < ds.meta.n_trajectories; ++n) {
    const auto name = traj_name(n);
    ds.trajectories.push_back(parse_trajectory_csv(read_text(dir / name), ds.meta, name));
  }
  return ds;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string dataset_hash(const Dataset& ds) {
  std::string bytes = dump_json(meta_to_json(ds.meta));
  for (const auto& tr : ds.trajectories) bytes += trajectory_csv(tr);
  return sha256_hex(bytes);
}

}  // namespace ici
