#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybridsim/errors.hpp"
#include "hybridsim/hybrid.hpp"
#include "hybridsim/io.hpp"
#include "hybridsim/limitset.hpp"
#include "hybridsim/measure.hpp"
#include "hybridsim/systems.hpp"

namespace {

namespace hs = hybridsim;
using hs::io::fmt_double;
using nlohmann::json;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x00000100000001B3ULL;
  }
  return hash;
}

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

struct LoadedConfig {
  std::string path;
  std::string hash;
  hs::systems::LoadedSystem sys;
};

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw hs::UsageError("cannot open config file \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::exception& e) {
    throw hs::SchemaViolationError(path, std::string("not valid JSON: ") + e.what());
  }
  return LoadedConfig{path, to_hex(fnv1a(bytes)), hs::systems::load_system(doc)};
}

int resolve_threads(int flag_value) {
  if (const char* env = std::getenv("HYBRIDSIM_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && n >= 1) return static_cast<int>(n);
    throw hs::UsageError("HYBRIDSIM_THREADS must be a positive integer");
  }
  if (flag_value >= 1) return flag_value;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

class Manifest {
 public:
  Manifest(std::string command, const LoadedConfig& config)
      : start_(std::chrono::steady_clock::now()), command_(std::move(command)), config_hash_(config.hash) {
    params_["config"] = config.path;
    params_["system"] = config.sys.name;
  }

  template <typename T>
  void param(const std::string& key, const T& value) {
    params_[key] = value;
  }

  void artifact(const std::string& path) { artifacts_.push_back(path); }

  void write(const std::string& path) const {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json doc{{"command", command_},
             {"config_hash", config_hash_},
             {"parameters", params_},
             {"artifacts", artifacts_},
             {"wall_clock_seconds", elapsed}};
    std::ofstream out(path);
    if (!out) throw hs::UsageError("cannot write manifest \"" + path + "\"");
    out << doc.dump(2) << '\n';
  }

 private:
  std::chrono::steady_clock::time_point start_;
  std::string command_;
  std::string config_hash_;
  json params_ = json::object();
  std::vector<std::string> artifacts_;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw hs::UsageError("cannot open \"" + path + "\" for writing");
  return out;
}

void write_columns_header(std::ofstream& out, const std::string& kind, const LoadedConfig& config,
                          const std::vector<std::pair<std::string, std::string>>& params,
                          const std::string& columns) {
  out << "# hybridsim-" << kind << " v1\n";
  out << "# config: " << config.hash << '\n';
  out << "# system: " << config.sys.name << '\n';
  for (const auto& [k, v] : params) out << "# " << k << ": " << v << '\n';
  out << "# columns: " << columns << '\n';
}

std::string position_columns(int dim) {
  std::string cols;
  for (int a = 0; a < dim; ++a) cols += " x" + std::to_string(a + 1);
  return cols;
}

hs::hybrid::HybridState initial_state(const LoadedConfig& config, const std::vector<double>& x0_flag, int z0_flag) {
  hs::hybrid::HybridState y0{config.sys.x0, config.sys.z0};
  if (!x0_flag.empty()) {
    if (static_cast<int>(x0_flag.size()) != config.sys.spec.fields.dimension())
      throw hs::UsageError("--x0 needs one coordinate per axis");
    y0.x = x0_flag;
  }
  if (z0_flag >= 0) {
    if (z0_flag >= config.sys.spec.q.size()) throw hs::UsageError("--z0 state index out of range");
    y0.state = z0_flag;
  }
  return y0;
}

hs::measure::GridSpec grid_of(const LoadedConfig& config) {
  return hs::measure::GridSpec{config.sys.spec.box, config.sys.bins};
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::uint64_t seed = 0;
  double t_end = 50.0;
  double sample_dt = 0.1;
  std::string out = "trajectory.txt";
  std::vector<double> x0;
  int z0 = -1;
};

void run_simulate(const SimulateArgs& args) {
  const LoadedConfig config = load_config(args.config);
  const auto y0 = initial_state(config, args.x0, args.z0);
  Manifest manifest("simulate", config);
  manifest.param("seed", args.seed);
  manifest.param("t_end", args.t_end);
  manifest.param("sample_dt", args.sample_dt);
  manifest.param("x0", y0.x);
  manifest.param("z0", y0.state);

  auto out = open_output(args.out);
  write_columns_header(out, "trajectory", config,
                       {{"seed", std::to_string(args.seed)},
                        {"t_end", fmt_double(args.t_end)},
                        {"sample_dt", fmt_double(args.sample_dt)}},
                       "time state" + position_columns(config.sys.spec.fields.dimension()));
  hs::hybrid::walk(config.sys.spec, y0, args.t_end, args.sample_dt, args.seed, 0,
                   [&](double t, std::span<const double> x, int state) {
                     out << fmt_double(t) << ' ' << state;
                     for (double v : x) out << ' ' << fmt_double(v);
                     out << '\n';
                   });
  out.close();
  manifest.artifact(args.out);
  manifest.write(args.out + ".manifest.json");
}

struct SpiderArgs {
  std::string config;
  double t0 = 0.0;
  int depth = 6;
  long long max_nodes = 1'000'000;
  std::string out = "spider.txt";
  std::vector<double> x0;
  int z0 = -1;
};

void run_spider(const SpiderArgs& args) {
  const LoadedConfig config = load_config(args.config);
  const auto y0 = initial_state(config, args.x0, args.z0);
  Manifest manifest("spider", config);
  manifest.param("t0", args.t0);
  manifest.param("depth", args.depth);
  manifest.param("x0", y0.x);
  manifest.param("z0", y0.state);

  const auto tree = hs::hybrid::spider(config.sys.spec, y0, args.t0, args.depth, args.max_nodes);

  auto out = open_output(args.out);
  write_columns_header(out, "spider", config,
                       {{"t0", fmt_double(args.t0)}, {"depth", std::to_string(args.depth)}},
                       "level node parent state probability" + position_columns(config.sys.spec.fields.dimension()));
  std::vector<long> offset(tree.levels.size(), 0);
  long id = 0;
  for (std::size_t level = 0; level < tree.levels.size(); ++level) {
    offset[level] = id;
    id += static_cast<long>(tree.levels[level].size());
  }
  id = 0;
  for (std::size_t level = 0; level < tree.levels.size(); ++level) {
    for (const auto& node : tree.levels[level]) {
      const long parent_id = node.parent < 0 ? -1 : offset[level - 1] + node.parent;
      out << level << ' ' << id << ' ' << parent_id << ' ' << node.y.state << ' ' << fmt_double(node.prob);
      for (double v : node.y.x) out << ' ' << fmt_double(v);
      out << '\n';
      ++id;
    }
  }
  out.close();
  manifest.artifact(args.out);
  manifest.write(args.out + ".manifest.json");
}

struct StationaryArgs {
  std::string config;
  std::string out = "stationary.txt";
};

void run_stationary(const StationaryArgs& args) {
  const LoadedConfig config = load_config(args.config);
  Manifest manifest("stationary", config);
  const auto pi = hs::markov::stationary_distribution(config.sys.spec.q);
  auto out = open_output(args.out);
  write_columns_header(out, "stationary", config, {}, "state weight");
  for (int i = 0; i < pi.size(); ++i) {
    out << i << ' ' << fmt_double(pi.weights[static_cast<std::size_t>(i)]) << '\n';
    std::cout << "state " << i << ": " << fmt_double(pi.weights[static_cast<std::size_t>(i)]) << '\n';
  }
  out.close();
  manifest.artifact(args.out);
  manifest.write(args.out + ".manifest.json");
}

struct MeasureArgs {
  std::string config;
  std::vector<double> phases{0.0};
  long burn_in = 1000;
  long samples = 100000;
  std::uint64_t seed = 0;
  std::string out_dir = "measures";
  int points_per_axis = 1;
  int threads = 0;
  std::vector<double> x0;
  int z0 = -1;
};

void run_measure(const MeasureArgs& args) {
  const LoadedConfig config = load_config(args.config);
  const auto y0 = initial_state(config, args.x0, args.z0);
  const int threads = resolve_threads(args.threads);
  Manifest manifest("measure", config);
  manifest.param("seed", args.seed);
  manifest.param("phases", args.phases);
  manifest.param("burn_in", args.burn_in);
  manifest.param("samples", args.samples);
  manifest.param("points_per_axis", args.points_per_axis);

  std::vector<double> phases = args.phases;
  std::sort(phases.begin(), phases.end());
  const auto family =
      hs::measure::phase_family(config.sys.spec, y0, phases, args.burn_in, args.samples, grid_of(config), args.seed);

  std::filesystem::create_directories(args.out_dir);
  const hs::measure::TransferOptions transfer{args.points_per_axis, threads};

  const std::string report_path = args.out_dir + "/invariance_report.txt";
  auto report = open_output(report_path);
  write_columns_header(report, "invariance", config,
                       {{"samples", std::to_string(args.samples)},
                        {"points_per_axis", std::to_string(args.points_per_axis)}},
                       "phase tv_after_one_period");
  for (std::size_t i = 0; i < family.size(); ++i) {
    const std::string path = args.out_dir + "/measure_p" + std::to_string(i) + ".txt";
    hs::io::write_grid_measure(path, family[i], config.sys.spec.h,
                               {{"config", config.hash}, {"seed", std::to_string(args.seed)}});
    manifest.artifact(path);
    const auto pushed = hs::measure::pushforward(config.sys.spec, family[i], config.sys.spec.h, transfer);
    const double tv = hs::measure::total_variation(pushed, family[i]);
    report << fmt_double(family[i].phase) << ' ' << fmt_double(tv) << '\n';
    std::cout << "phase " << fmt_double(family[i].phase) << ": TV(pushforward(mu, h), mu) = " << fmt_double(tv)
              << '\n';
  }
  report.close();
  manifest.artifact(report_path);
  manifest.write(args.out_dir + "/manifest.json");
}

struct LimitSetArgs {
  std::string config;
  double t_total = 10000.0;
  double sample_dt = 0.02;
  double burn_in_time = 100.0;
  int threshold = 3;
  std::uint64_t seed = 0;
  std::string out = "limitset.txt";
  std::vector<double> x0;
  int z0 = -1;
};

void run_limitset(const LimitSetArgs& args) {
  const LoadedConfig config = load_config(args.config);
  const auto y0 = initial_state(config, args.x0, args.z0);
  Manifest manifest("limitset", config);
  manifest.param("seed", args.seed);
  manifest.param("t_total", args.t_total);
  manifest.param("sample_dt", args.sample_dt);
  manifest.param("burn_in_time", args.burn_in_time);
  manifest.param("threshold", args.threshold);

  const auto estimate = hs::limitset::estimate_limit_set(config.sys.spec, y0, args.t_total, args.sample_dt,
                                                         args.burn_in_time, args.threshold, grid_of(config),
                                                         args.seed);
  hs::io::write_limit_set(args.out, estimate, config.sys.spec.h, args.threshold,
                          {{"config", config.hash}, {"seed", std::to_string(args.seed)}});
  std::cout << "limit set: " << estimate.cells.size() << " cells\n";
  manifest.artifact(args.out);
  manifest.write(args.out + ".manifest.json");
}

struct HittingArgs {
  std::string config;
  double x_star = 0.0;
  int m = 1;
  long trials = 100000;
  std::uint64_t seed = 0;
  std::string out = "hitting.txt";
  int threads = 0;
  std::vector<double> x0;
  int z0 = -1;
};

void run_hitting(const HittingArgs& args) {
  const LoadedConfig config = load_config(args.config);
  const auto y0 = initial_state(config, args.x0, args.z0);
  const int threads = resolve_threads(args.threads);
  if (args.m < 1) throw hs::UsageError("--m must be at least 1");
  Manifest manifest("hitting", config);
  manifest.param("seed", args.seed);
  manifest.param("x_star", args.x_star);
  manifest.param("m", args.m);
  manifest.param("trials", args.trials);

  const auto bound = hs::limitset::hitting_bound(config.sys.spec.q, args.x_star, y0.state);
  const double analytic = 1.0 - std::pow(1.0 - bound.p_lower, args.m);
  const double empirical = hs::limitset::hitting_experiment(
      config.sys.spec, y0.x.at(0), y0.state, args.x_star, static_cast<long>(args.m) * bound.k, args.trials, args.seed,
      threads);
  const double se = std::sqrt(std::max(empirical * (1.0 - empirical), 1e-12) / static_cast<double>(args.trials));

  auto out = open_output(args.out);
  write_columns_header(out, "hitting", config,
                       {{"seed", std::to_string(args.seed)},
                        {"x_star", fmt_double(args.x_star)},
                        {"m", std::to_string(args.m)},
                        {"trials", std::to_string(args.trials)}},
                       "quantity value");
  out << "k " << bound.k << '\n';
  out << "p_lower " << fmt_double(bound.p_lower) << '\n';
  out << "analytic_lower_bound " << fmt_double(analytic) << '\n';
  out << "empirical " << fmt_double(empirical) << '\n';
  out << "stderr " << fmt_double(se) << '\n';
  out.close();
  std::cout << "k = " << bound.k << ", p_lower = " << fmt_double(bound.p_lower)
            << ", bound = " << fmt_double(analytic) << ", empirical = " << fmt_double(empirical) << '\n';
  manifest.artifact(args.out);
  manifest.write(args.out + ".manifest.json");
}

void add_initial_flags(CLI::App* cmd, std::vector<double>& x0, int& z0) {
  cmd->add_option("--x0", x0, "Initial position (overrides the config)")->delimiter(',');
  cmd->add_option("--z0", z0, "Initial state index (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybridsim: simulator for ODE systems switched by a finite Markov chain"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Sample one random trajectory to a columnar file");
  sim_cmd->add_option("--config", sim.config, "Config file (JSON)")->required();
  sim_cmd->add_option("--seed", sim.seed, "RNG seed");
  sim_cmd->add_option("--t-end", sim.t_end, "End time");
  sim_cmd->add_option("--sample-dt", sim.sample_dt, "Sampling interval");
  sim_cmd->add_option("--out", sim.out, "Output file");
  add_initial_flags(sim_cmd, sim.x0, sim.z0);

  SpiderArgs spi;
  auto* spi_cmd = app.add_subcommand("spider", "Enumerate every switching branch from one start point");
  spi_cmd->add_option("--config", spi.config, "Config file (JSON)")->required();
  spi_cmd->add_option("--t0", spi.t0, "Phase in [0,h)");
  spi_cmd->add_option("--depth", spi.depth, "Number of switching periods");
  spi_cmd->add_option("--max-nodes", spi.max_nodes, "Node budget");
  spi_cmd->add_option("--out", spi.out, "Output file");
  add_initial_flags(spi_cmd, spi.x0, spi.z0);

  StationaryArgs sta;
  auto* sta_cmd = app.add_subcommand("stationary", "Stationary distribution of the switching chain");
  sta_cmd->add_option("--config", sta.config, "Config file (JSON)")->required();
  sta_cmd->add_option("--out", sta.out, "Output file");

  MeasureArgs mea;
  auto* mea_cmd = app.add_subcommand("measure", "Empirical phase-indexed invariant measures plus invariance report");
  mea_cmd->add_option("--config", mea.config, "Config file (JSON)")->required();
  mea_cmd->add_option("--phases", mea.phases, "Phases in [0,h)")->delimiter(',');
  mea_cmd->add_option("--burn-in", mea.burn_in, "Discarded switching periods");
  mea_cmd->add_option("--samples", mea.samples, "Sections per phase");
  mea_cmd->add_option("--seed", mea.seed, "RNG seed");
  mea_cmd->add_option("--out-dir", mea.out_dir, "Output directory");
  mea_cmd->add_option("--points-per-axis", mea.points_per_axis, "Transfer representatives per cell axis");
  mea_cmd->add_option("--threads", mea.threads, "Worker threads (default: all cores)");
  add_initial_flags(mea_cmd, mea.x0, mea.z0);

  LimitSetArgs lim;
  auto* lim_cmd = app.add_subcommand("limitset", "Estimate the stochastic limit set by revisited cells");
  lim_cmd->add_option("--config", lim.config, "Config file (JSON)")->required();
  lim_cmd->add_option("--t-total", lim.t_total, "Total simulated time");
  lim_cmd->add_option("--sample-dt", lim.sample_dt, "Sampling interval");
  lim_cmd->add_option("--burn-in-time", lim.burn_in_time, "Discarded initial time");
  lim_cmd->add_option("--threshold", lim.threshold, "Revisit epochs required");
  lim_cmd->add_option("--seed", lim.seed, "RNG seed");
  lim_cmd->add_option("--out", lim.out, "Output file");
  add_initial_flags(lim_cmd, lim.x0, lim.z0);

  HittingArgs hit;
  auto* hit_cmd = app.add_subcommand("hitting", "Crossing-probability experiment against the analytic lower bound");
  hit_cmd->add_option("--config", hit.config, "Config file (JSON)")->required();
  hit_cmd->add_option("--x-star", hit.x_star, "Level to cross, in (-1,1)")->required();
  hit_cmd->add_option("--m", hit.m, "Bound exponent (horizon is m*k transitions)");
  hit_cmd->add_option("--trials", hit.trials, "Number of trials");
  hit_cmd->add_option("--seed", hit.seed, "RNG seed");
  hit_cmd->add_option("--out", hit.out, "Output file");
  hit_cmd->add_option("--threads", hit.threads, "Worker threads (default: all cores)");
  add_initial_flags(hit_cmd, hit.x0, hit.z0);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim_cmd->parsed()) run_simulate(sim);
    if (spi_cmd->parsed()) run_spider(spi);
    if (sta_cmd->parsed()) run_stationary(sta);
    if (mea_cmd->parsed()) run_measure(mea);
    if (lim_cmd->parsed()) run_limitset(lim);
    if (hit_cmd->parsed()) run_hitting(hit);
  } catch (const hs::NumericError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const hs::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
