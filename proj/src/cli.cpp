#include "pilotwave/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pilotwave/config.hpp"
#include "pilotwave/protocol.hpp"
#include "pilotwave/spin_expr.hpp"
#include "pilotwave/stats.hpp"

#ifndef PILOTWAVE_VERSION
#define PILOTWAVE_VERSION "0.0.0"
#endif
#ifndef PILOTWAVE_CONFIG_DIR
#define PILOTWAVE_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;

namespace pilotwave::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidArgument, fmt::format("cannot write '{}'", path.string()));
  f << content;
}

fs::path output_dir(const std::optional<std::string>& flag, const std::optional<std::string>& from_config) {
  if (flag) return *flag;
  if (from_config) return *from_config;
  if (const char* env = std::getenv("PILOTWAVE_OUT_DIR"); env && *env) return env;
  return "pilotwave-out";
}

ScenarioConfig load(const std::string& name) {
  const fs::path path = resolve_config(name);
  try {
    return load_config(path);
  } catch (const ConfigError& e) {
    std::string msg = fmt::format("{}: invalid configuration", path.string());
    for (const auto& d : e.diagnostics()) {
      msg += d.line ? fmt::format("\n  line {}, column {}: {}", d.line, d.column, d.message)
                    : fmt::format("\n  {}", d.message);
    }
    throw UsageError(msg);
  }
}

std::string trajectory_csv(const Trajectory& traj, const DofRegistry& registry) {
  std::string out = "t";
  for (const auto& d : registry.dofs()) out += "," + d.id;
  out += ",branch_id\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    out += fmt::format("{:.12g}", traj.times[i]);
    for (Eigen::Index d = 0; d < traj.states[i].size(); ++d) out += fmt::format(",{:.12g}", traj.states[i][d]);
    out += "," + traj.branch_ids[i] + "\n";
  }
  return out;
}

std::string hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::string> out_dir;
  std::size_t trajectories = 0;
  unsigned threads = 1;
  std::optional<double> dt;
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  ScenarioConfig config = load(a.config);
  ExchangeScenario& s = config.scenario;
  if (a.seed) s.seed = *a.seed;
  if (a.runs) s.runs = *a.runs;
  RunOptions options;
  options.dt = a.dt;

  Ensemble ens;
  try {
    ens = run_ensemble(s, options, a.threads);
  } catch (const Error& e) {
    err << "run failed: " << e.what() << "\n";
    return kExitFailure;
  }
  const StatsReport& st = ens.stats;
  const DofRegistry registry = s.registry();

  std::uint64_t exchange_mismatches = 0;
  for (const auto& r : ens.runs) {
    for (const auto& e : r.events) {
      if (e.partner_bell && *e.partner_bell != e.outcome) ++exchange_mismatches;
    }
  }

  nlohmann::json checks = nlohmann::json::array();
  bool ok = true;
  const auto check = [&](const std::string& name, bool pass, bool hard, const std::string& detail) {
    checks.push_back({{"name", name}, {"pass", pass}, {"required", hard}, {"detail", detail}});
    if (hard && !pass) ok = false;
  };
  if (!st.second_spin.empty() && !st.bell_device.empty()) {
    check("spin (anti)correlation", st.correlation_violations == 0, true,
          fmt::format("{} violation(s)", st.correlation_violations));
  }
  check("partner pair Bell state matches pointer", exchange_mismatches == 0, true,
        fmt::format("{} mismatch(es)", exchange_mismatches));
  for (const auto& [kind, count] : st.bell_counts) {
    const double f = st.bell_frequency(kind);
    const double r = st.radius(0.25);
    check(fmt::format("{} frequency 0.25 +- 3 sigma", kind), std::abs(f - 0.25) <= r, false,
          fmt::format("{:.4f} (radius {:.4f})", f, r));
  }

  const fs::path dir = output_dir(a.out_dir, config.output_dir);
  fs::create_directories(dir);
  nlohmann::json stats_json = to_json(st);
  stats_json["checks"] = checks;
  write_file(dir / "stats.json", stats_json.dump(2) + "\n");
  std::string text = render_text(st);
  text += "\nchecks:\n";
  for (const auto& c : checks) {
    text += fmt::format("  {} {}: {}\n",
                        c["pass"].get<bool>() ? "PASS" : (c["required"].get<bool>() ? "FAIL" : "WARN"),
                        c["name"].get<std::string>(), c["detail"].get<std::string>());
  }
  write_file(dir / "stats.txt", text);
  std::string lines;
  for (const auto& r : ens.runs) lines += to_json(r, registry).dump() + "\n";
  write_file(dir / "runs.jsonl", lines);

  nlohmann::json outputs = {"stats.json", "stats.txt", "runs.jsonl"};
  if (a.trajectories > 0) {
    fs::create_directories(dir / "trajectories");
    RunOptions keep = options;
    keep.keep_trajectory = true;
    for (std::size_t i = 0; i < std::min(a.trajectories, s.runs); ++i) {
      const RunRecord r = run_once(s, stats::run_seed(s.seed, i), keep);
      const std::string name = fmt::format("trajectories/run_{:05d}.csv", i);
      write_file(dir / name, trajectory_csv(*r.trajectory, registry));
      outputs.push_back(name);
    }
  }
  const nlohmann::json manifest = {{"command", "run"},
                                   {"config", a.config},
                                   {"config_hash", "fnv1a64:" + hex(config_hash(config.text))},
                                   {"seed", s.seed},
                                   {"runs", s.runs},
                                   {"seed_scheme", "splitmix64(seed xor run_index)"},
                                   {"version", PILOTWAVE_VERSION},
                                   {"outputs", outputs}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  out << text;
  out << "outputs written to " << dir.string() << "\n";
  return ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------

std::pair<int, int> parse_pair(const std::string& text) {
  int i = 0, j = 0;
  char comma = 0;
  std::istringstream in(text);
  if (!(in >> i >> comma >> j) || comma != ',' || !in.eof()) {
    throw UsageError(fmt::format("'{}' is not a slot pair like 1,3", text));
  }
  return {i, j};
}

std::string format_coefficient(Complex c) {
  const double re = std::abs(c.real()) < 1e-14 ? 0.0 : c.real();
  const double im = std::abs(c.imag()) < 1e-14 ? 0.0 : c.imag();
  if (im == 0) return fmt::format("{:+.12g}", re);
  if (re == 0) return fmt::format("{:+.12g}i", im);
  return fmt::format("({:+.12g}{:+.12g}i)", re, im);
}

int cmd_bell_expand(const std::string& expr, const std::string& pair1_text, const std::string& pair2_text, bool all,
                    std::ostream& out, std::ostream& err) {
  InternalState state;
  try {
    state = parse_state(expr);
  } catch (const ParseError& e) {
    err << "error: " << e.detail() << "\n" << e.caret(expr) << "\n";
    return kExitUsage;
  }
  const auto p1 = parse_pair(pair1_text);
  const auto p2 = parse_pair(pair2_text);
  Eigen::Matrix4cd c;
  try {
    c = bell_decompose(state, p1, p2);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  out << "state: " << render(state) << "\n";
  out << fmt::format("basis: Bell({},{}) x Bell({},{})\n", p1.first, p1.second, p2.first, p2.second);
  for (BellKind m : kBellKinds) {
    for (BellKind n : kBellKinds) {
      const Complex v = c(static_cast<int>(m), static_cast<int>(n));
      if (!all && std::abs(v) < 1e-12) continue;
      out << fmt::format("  {}({},{}) {}({},{})  {}\n", to_string(m), p1.first, p1.second, to_string(n), p2.first,
                         p2.second, format_coefficient(v));
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EquivArgs {
  std::size_t n = 10000;
  double t_factor = std::sqrt(3.0);
  std::uint64_t seed = 1;
  double sigma = 1.0;
  double mass = 1.0;
  double hbar = 1.0;
  double center = 0.0;
  double wavenumber = 0.0;
  std::optional<double> dt;
  std::size_t bins = 40;
  std::optional<std::string> out_dir;
};

int cmd_equivariance(const EquivArgs& a, std::ostream& out) {
  const GaussianPacket p0 = GaussianPacket::make(a.center, a.sigma, a.wavenumber);
  const double t = a.t_factor * 2.0 * a.mass * a.sigma * a.sigma / a.hbar;
  std::mt19937_64 rng(a.seed);
  const EquivarianceReport rep = equivariance_test(p0, a.hbar, a.mass, a.n, t, rng, a.dt);
  const double sd = std::sqrt(rep.expected_variance);

  out << fmt::format("n: {}\nt: {:.10g}\nsigma(t)/sigma0: {:.10g}\n", rep.n, rep.t, sd / a.sigma);
  out << fmt::format("ks_statistic: {:.6g}\np_value: {:.6g}\n", rep.ks_statistic, rep.p_value);
  out << fmt::format("mean: {:.6g} (expected {:.6g})\nvariance: {:.6g} (expected {:.6g})\n", rep.sample_mean,
                     rep.expected_mean, rep.sample_variance, rep.expected_variance);

  const double lo = rep.expected_mean - 5 * sd;
  const double width = 10 * sd / static_cast<double>(a.bins);
  std::vector<std::uint64_t> counts(a.bins, 0);
  for (double x : rep.final_positions) {
    const double k = std::floor((x - lo) / width);
    if (k >= 0 && k < static_cast<double>(a.bins)) ++counts[static_cast<std::size_t>(k)];
  }
  std::string csv = "bin_lo,bin_hi,count,empirical_density,expected_density\n";
  for (std::size_t i = 0; i < a.bins; ++i) {
    const double x0 = lo + static_cast<double>(i) * width;
    const double x1 = x0 + width;
    const double expected = (stats::normal_cdf((x1 - rep.expected_mean) / sd) -
                             stats::normal_cdf((x0 - rep.expected_mean) / sd)) / width;
    const double empirical = static_cast<double>(counts[i]) / (static_cast<double>(a.n) * width);
    csv += fmt::format("{:.10g},{:.10g},{},{:.10g},{:.10g}\n", x0, x1, counts[i], empirical, expected);
  }
  const fs::path dir = output_dir(a.out_dir, std::nullopt);
  fs::create_directories(dir);
  write_file(dir / "equivariance_histogram.csv", csv);
  out << "histogram written to " << (dir / "equivariance_histogram.csv").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_recombine(const std::string& config_name, std::optional<std::size_t> runs,
                  const std::optional<std::string>& out_dir, std::ostream& out, std::ostream& err) {
  const ScenarioConfig config = load(config_name);
  RecombinationReport rep;
  try {
    rep = recombination_check(config.scenario, runs);
  } catch (const Error& e) {
    err << "recombination check failed: " << e.what() << "\n";
    return kExitFailure;
  }
  out << render_text(rep);
  if (out_dir) {
    fs::create_directories(*out_dir);
    write_file(fs::path(*out_dir) / "recombine.json", to_json(rep).dump(2) + "\n");
  }
  return rep.passed() ? kExitOk : kExitFailure;
}

}  // namespace

fs::path resolve_config(const std::string& name) {
  if (fs::is_regular_file(name)) return name;
  std::vector<fs::path> dirs;
  if (const char* env = std::getenv("PILOTWAVE_CONFIG_DIR"); env && *env) dirs.emplace_back(env);
  dirs.emplace_back(PILOTWAVE_CONFIG_DIR);
  dirs.emplace_back("configs");
  for (const auto& d : dirs) {
    for (const char* ext : {".conf", ".json", ""}) {
      const fs::path p = d / (name + ext);
      if (fs::is_regular_file(p)) return p;
    }
  }
  throw UsageError(fmt::format("no configuration file or bundled configuration named '{}'", name));
}

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bohmian trajectories through an entanglement-exchange experiment"};
  app.name(args.empty() ? "pilotwave" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);
  app.set_version_flag("--version", PILOTWAVE_VERSION);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario ensemble and write statistics");
  run_cmd->add_option("config", run.config, "Configuration file or bundled name")->required();
  run_cmd->add_option("--seed", run.seed, "Base seed");
  run_cmd->add_option("--runs", run.runs, "Number of runs")->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
  run_cmd->add_option("--out-dir", run.out_dir, "Output directory (default $PILOTWAVE_OUT_DIR or ./pilotwave-out)");
  run_cmd->add_option("--trajectories", run.trajectories, "Write trajectory CSVs for the first K runs");
  run_cmd->add_option("--threads", run.threads, "Worker threads")->check(CLI::Range(1u, 256u));
  run_cmd->add_option("--dt", run.dt, "Integrator step override")->check(CLI::PositiveNumber);

  std::string expr, pair1 = "1,3", pair2 = "2,4";
  bool all = false;
  auto* bell_cmd = app.add_subcommand("bell-expand", "Expand a four-slot state in a product Bell basis");
  bell_cmd->add_option("state", expr, "State expression, e.g. 'alpha(1,2)*alpha(3,4)'")->required();
  bell_cmd->add_option("--pair1", pair1, "First slot pair")->capture_default_str();
  bell_cmd->add_option("--pair2", pair2, "Second slot pair")->capture_default_str();
  bell_cmd->add_flag("--all", all, "Print zero coefficients too");

  EquivArgs eq;
  auto* eq_cmd = app.add_subcommand("equivariance", "Check that trajectories keep the |psi|^2 distribution");
  eq_cmd->add_option("--n", eq.n, "Trajectories")->check(CLI::Range(std::size_t{1000}, std::size_t{100000000}));
  eq_cmd->add_option("--t-factor", eq.t_factor, "Time in units of 2 m sigma^2 / hbar")->check(CLI::NonNegativeNumber);
  eq_cmd->add_option("--seed", eq.seed, "Seed");
  eq_cmd->add_option("--sigma", eq.sigma, "Initial width")->check(CLI::PositiveNumber);
  eq_cmd->add_option("--mass", eq.mass, "Mass")->check(CLI::PositiveNumber);
  eq_cmd->add_option("--hbar", eq.hbar, "hbar")->check(CLI::PositiveNumber);
  eq_cmd->add_option("--center", eq.center, "Initial centre");
  eq_cmd->add_option("--wavenumber", eq.wavenumber, "Wavenumber");
  eq_cmd->add_option("--dt", eq.dt, "Integrator step")->check(CLI::PositiveNumber);
  eq_cmd->add_option("--bins", eq.bins, "Histogram bins")->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  eq_cmd->add_option("--out-dir", eq.out_dir, "Output directory");

  std::string rec_config;
  std::optional<std::size_t> rec_runs;
  std::optional<std::string> rec_out;
  auto* rec_cmd = app.add_subcommand("recombine", "Recombine the pointer and test the partner pair");
  rec_cmd->add_option("config", rec_config, "Configuration file or bundled name")->required();
  rec_cmd->add_option("--runs", rec_runs, "Runs for the spin statistics")
      ->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
  rec_cmd->add_option("--out-dir", rec_out, "Write recombine.json here");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  if (args.empty()) argv.push_back("pilotwave");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run, out, err);
    if (*bell_cmd) return cmd_bell_expand(expr, pair1, pair2, all, out, err);
    if (*eq_cmd) return cmd_equivariance(eq, out);
    if (*rec_cmd) return cmd_recombine(rec_config, rec_runs, rec_out, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace pilotwave::cli
