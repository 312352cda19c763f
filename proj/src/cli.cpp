#include "fkuq/cli.hpp"

#include "fkuq/connectome.hpp"
#include "fkuq/csv.hpp"
#include "fkuq/errors.hpp"
#include "fkuq/field.hpp"
#include "fkuq/forward_mc.hpp"
#include "fkuq/mcmc.hpp"
#include "fkuq/models.hpp"
#include "fkuq/qoi.hpp"
#include "fkuq/solver.hpp"
#include "fkuq/sparse_grid.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#ifndef FKUQ_VERSION
#define FKUQ_VERSION "unknown"
#endif

namespace fkuq::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Small parsing helpers
// ---------------------------------------------------------------------------

std::vector<std::string> split(const std::string& text, char sep)
{
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

double parse_double(const std::string& s, const std::string& what)
{
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError(what + ": '" + s + "' is not a number");
}

long parse_long(const std::string& s, const std::string& what)
{
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError(what + ": '" + s + "' is not an integer");
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what)
{
  std::vector<double> out;
  for (const auto& s : split(text, ',')) out.push_back(parse_double(s, what));
  return out;
}

/// "3..8" or "3,4,5".
std::vector<int> parse_levels(const std::string& text)
{
  std::vector<int> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const long lo = parse_long(text.substr(0, dots), "--levels");
    const long hi = parse_long(text.substr(dots + 2), "--levels");
    if (lo > hi) throw ValidationError("--levels: empty range " + text);
    for (long l = lo; l <= hi; ++l) out.push_back(static_cast<int>(l));
  } else {
    for (const auto& s : split(text, ',')) out.push_back(static_cast<int>(parse_long(s, "--levels")));
  }
  if (out.empty()) throw ValidationError("--levels: no levels given");
  return out;
}

std::string fnv1a64(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  std::uint64_t h = 1469598103934665603ull;
  char buf[8192];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 1099511628211ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

// ---------------------------------------------------------------------------
// Subcommand scaffolding: every option is recorded so that the manifest can
// replay the run through --config.
// ---------------------------------------------------------------------------

class Command
{
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description)
      : name_(name), app_(parent.add_subcommand(name, description))
  {
  }

  template <typename T>
  CLI::Option* option(const std::string& flag, T& value, const std::string& description)
  {
    CLI::Option* o = app_->add_option("--" + flag, value, description);
    o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->capture_default_str();
    recorders_.emplace_back(flag, [&value] { return json(value); });
    return o;
  }

  /// Path option; `input` files are fingerprinted in the manifest.
  CLI::Option* path(const std::string& flag, std::string& value, const std::string& description, bool input)
  {
    CLI::Option* o = option(flag, value, description);
    if (input) inputs_.emplace_back(flag, &value);
    return o;
  }

  CLI::Option* flag(const std::string& flag, bool& value, const std::string& description)
  {
    CLI::Option* o = app_->add_flag("--" + flag, value, description);
    o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    recorders_.emplace_back(flag, [&value] { return json(value); });
    return o;
  }

  CLI::App* app() const { return app_; }
  const std::string& name() const { return name_; }

  json options() const
  {
    json out = json::object();
    for (const auto& [flag, record] : recorders_) out[flag] = record();
    return out;
  }

  json inputs() const
  {
    json out = json::object();
    for (const auto& [flag, value] : inputs_)
      if (!value->empty()) out[flag] = {{"path", *value}, {"fnv1a64", fnv1a64(*value)}};
    return out;
  }

  std::vector<fs::path> input_paths() const
  {
    std::vector<fs::path> out;
    for (const auto& [flag, value] : inputs_)
      if (!value->empty()) out.emplace_back(*value);
    return out;
  }

 private:
  std::string name_;
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<json()>>> recorders_;
  std::vector<std::pair<std::string, std::string*>> inputs_;
};

void write_manifest(const Command& cmd, const std::vector<fs::path>& outputs, const fs::path& path)
{
  json m;
  m["tool"] = "fkuq";
  m["version"] = FKUQ_VERSION;
  m["command"] = cmd.name();
  m["options"] = cmd.options();
  m["inputs"] = cmd.inputs();
  json outs = json::object();
  for (const auto& o : outputs) outs[o.string()] = fnv1a64(o);
  m["outputs"] = outs;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write manifest " + path.string());
  out << m.dump(2) << '\n';
}

/// Outputs must not overwrite any input file.
void check_outputs(const Command& cmd, const std::vector<fs::path>& outputs)
{
  for (const auto& o : outputs) {
    if (o.empty()) continue;
    for (const auto& in : cmd.input_paths()) {
      std::error_code ec;
      if (fs::exists(o) && fs::exists(in) && fs::equivalent(o, in, ec))
        throw ValidationError("output " + o.string() + " would overwrite input " + in.string());
    }
    const fs::path parent = o.parent_path();
    if (!parent.empty() && !fs::is_directory(parent))
      throw ValidationError("output directory " + parent.string() + " does not exist");
  }
}

void require_file(const std::string& path, const std::string& flag)
{
  if (path.empty()) throw ValidationError("--" + flag + " is required");
  if (!fs::is_regular_file(path)) throw ValidationError("--" + flag + ": file not found: " + path);
}

NodeField load_concentration(const Connectome& g, const std::string& path, bool already_scaled, const char* what)
{
  const Eigen::VectorXd raw = load_scan_csv(g, path);
  if (already_scaled) {
    validate_concentration(g, raw, what);
    return raw;
  }
  return project_scan(g, raw);
}

PosteriorSummary load_posterior(const Connectome& g, const std::string& path)
{
  PosteriorSummary post = posterior_from_records(load_region_records(path));
  if (post.size() != g.region_count())
    throw ValidationError("posterior has " + std::to_string(post.size()) + " regions, graph has " +
                          std::to_string(g.region_count()));
  return post;
}

std::vector<std::string> region_names(const Connectome& g)
{
  if (g.region_count() == static_cast<int>(lobe_names().size())) return lobe_names();
  std::vector<std::string> names;
  for (int j = 1; j <= g.region_count(); ++j) names.push_back("region_" + std::to_string(j));
  return names;
}

// ---------------------------------------------------------------------------
// Settings shared by the forward-UQ subcommands
// ---------------------------------------------------------------------------

struct ForwardArgs
{
  std::string graph, posterior, c0;
  bool already_scaled = false;
  double T = 20.0;
  double dt = 0.02;
  std::string times = "5,10,15,20";
  int threads = 0;

  void add(Command& cmd)
  {
    cmd.path("graph", graph, "connectome JSON", true);
    cmd.path("posterior", posterior, "posterior JSON (mu, var per region)", true);
    cmd.path("c0", c0, "initial concentration scan CSV (node_id,value)", true);
    cmd.flag("already-scaled", already_scaled, "c0 values are already in [0, 1]");
    cmd.option("T", T, "final time (years)");
    cmd.option("dt", dt, "time step (years)");
    cmd.option("times", times, "comma-separated report times");
    cmd.option("threads", threads, "worker threads (0: FKUQ_THREADS or hardware)");
  }

  struct Loaded
  {
    Connectome graph;
    PosteriorSummary post;
    QoIModel model;
  };

  Loaded load() const
  {
    require_file(graph, "graph");
    require_file(posterior, "posterior");
    require_file(c0, "c0");
    Connectome g = load_connectome(graph);
    PosteriorSummary post = load_posterior(g, posterior);
    const NodeField init = load_concentration(g, c0, already_scaled, "c0");
    SolverConfig cfg;
    cfg.dt = dt;
    cfg.T = T;
    cfg.sample_times = parse_doubles(times, "--times");
    if (cfg.sample_times.empty()) throw ValidationError("--times: no report times");
    QoIModel model = make_forward_model(g, init, cfg);
    return {std::move(g), std::move(post), std::move(model)};
  }
};

struct GridArgs
{
  std::string rule = "leja";
  std::string lev2knots = "linear";

  void add(Command& cmd)
  {
    cmd.option("rule", rule, "1D knots: leja | gauss-hermite");
    cmd.option("lev2knots", lev2knots, "level-to-knot map: linear | two-step");
  }
};

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct GenSyntheticArgs
{
  int regions = 7;
  int nodes_per_region = 6;
  double intra_density = 0.6;
  double inter_density = 0.08;
  double weight_scale = 0.05;
  std::uint64_t seed = 42;
  double scan_lo = 0.0;
  double scan_hi = 0.3;
  double horizon = 7.0;
  double dt = 0.2;
  std::string truth;
  std::string out_dir = ".";
};

int gen_synthetic(const Command& cmd, const GenSyntheticArgs& a)
{
  if (a.regions < 1 || a.nodes_per_region < 1) throw ValidationError("--regions and --nodes-per-region must be >= 1");
  const fs::path dir(a.out_dir);
  if (!fs::is_directory(dir)) throw ValidationError("output directory " + dir.string() + " does not exist");

  SyntheticSpec spec;
  spec.nodes_per_region.assign(a.regions, a.nodes_per_region);
  spec.intra_density = a.intra_density;
  spec.inter_density = a.inter_density;
  spec.weight_scale = a.weight_scale;
  const Connectome g = generate_synthetic(spec, a.seed);
  const std::vector<std::string> names = region_names(g);

  PriorBounds prior;
  ParameterVector truth;
  if (!a.truth.empty()) {
    require_file(a.truth, "truth");
    const auto records = load_region_records(a.truth);
    truth.resize(static_cast<Eigen::Index>(records.size()));
    for (std::size_t l = 0; l < records.size(); ++l) truth[static_cast<Eigen::Index>(l)] = records[l].mu;
    if (truth.size() != g.region_count() || !truth.allFinite())
      throw ValidationError("--truth must give a finite mu for each of the " + std::to_string(g.region_count()) +
                            " regions");
  } else if (g.region_count() == 7) {
    truth = lobe_posterior().mu;
  } else {
    truth = ParameterVector::Constant(g.region_count(), 0.1);
  }
  if (g.region_count() == 7) {
    prior = lobe_prior();
  } else {
    prior = PriorBounds(truth.array() - 0.25, truth.array() + 0.25);
  }

  const NodeField scan1 = generate_synthetic_scan(g, a.seed + 1, a.scan_lo, a.scan_hi);
  SolverConfig cfg;
  cfg.dt = a.dt;
  cfg.T = a.horizon;
  cfg.sample_times = {a.horizon};
  const NodeField scan2 = solve_trajectory(g, assemble_reaction_vector(g, truth), scan1, cfg).states.back();

  PosteriorSummary truth_summary{truth, Eigen::VectorXd::Zero(truth.size())};
  const std::vector<fs::path> outputs{dir / "graph.json", dir / "prior.json", dir / "truth.json", dir / "scan1.csv",
                                      dir / "scan2.csv"};
  save_connectome(g, outputs[0]);
  save_region_records(make_records(names, &prior, nullptr), outputs[1]);
  save_region_records(make_records(names, nullptr, &truth_summary), outputs[2]);
  save_scan_csv(scan1, outputs[3]);
  save_scan_csv(scan2, outputs[4]);
  write_manifest(cmd, outputs, dir / "manifest.json");
  std::cout << "nodes=" << g.node_count() << " edges=" << g.edges().size() << " regions=" << g.region_count() << '\n';
  return 0;
}

struct SimulateArgs
{
  std::string graph, c0, params, p;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  bool already_scaled = false;
  double T = 20.0;
  double dt = 0.02;
  std::string times;
  double every = 1.0;
  std::string out, trajectory_out;
};

int simulate(const Command& cmd, const SimulateArgs& a)
{
  require_file(a.graph, "graph");
  require_file(a.c0, "c0");
  if (a.out.empty()) throw ValidationError("--out is required");
  const Connectome g = load_connectome(a.graph);
  const NodeField c0 = load_concentration(g, a.c0, a.already_scaled, "c0");

  const int sources = !a.params.empty() + !a.p.empty() + !std::isnan(a.alpha);
  if (sources != 1) throw ValidationError("give exactly one of --params, --p, --alpha");
  ParameterVector p;
  if (!a.params.empty()) {
    require_file(a.params, "params");
    const auto records = load_region_records(a.params);
    p.resize(static_cast<Eigen::Index>(records.size()));
    for (std::size_t l = 0; l < records.size(); ++l) p[static_cast<Eigen::Index>(l)] = records[l].mu;
  } else if (!a.p.empty()) {
    const auto v = parse_doubles(a.p, "--p");
    p = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  } else {
    p = ParameterVector::Constant(g.region_count(), a.alpha);
  }
  if (p.size() != g.region_count())
    throw ValidationError("reaction parameters: expected " + std::to_string(g.region_count()) + " values, got " +
                          std::to_string(p.size()));
  if (!p.allFinite()) throw ValidationError("reaction parameters must be finite");

  SolverConfig cfg;
  cfg.dt = a.dt;
  cfg.T = a.T;
  cfg.sample_times = a.times.empty() ? uniform_sample_times(a.T, a.every) : parse_doubles(a.times, "--times");

  std::vector<fs::path> outputs{a.out};
  if (!a.trajectory_out.empty()) outputs.emplace_back(a.trajectory_out);
  check_outputs(cmd, outputs);
  const Trajectory traj = solve_trajectory(g, assemble_reaction_vector(g, p), c0, cfg);
  write_regional_csv(compute_qoi_series(g, traj), a.out);
  if (!a.trajectory_out.empty()) write_trajectory_csv(traj, a.trajectory_out);
  write_manifest(cmd, outputs, a.out + ".manifest.json");
  return 0;
}

struct CalibrateArgs
{
  std::string graph, scan1, scan2, prior;
  bool already_scaled = false;
  double horizon = 7.0;
  double dt = 0.2;
  int steps = 100000;
  int burn_in = 10000;
  double proposal_sigma = 1e-2;
  double lik_sigma = 0.1;
  double outlier_tol = 0.10;
  std::uint64_t seed = 1;
  std::string out, chain_out;
};

int calibrate(const Command& cmd, const CalibrateArgs& a)
{
  require_file(a.graph, "graph");
  require_file(a.scan1, "scan1");
  require_file(a.scan2, "scan2");
  if (a.out.empty()) throw ValidationError("--out is required");
  const Connectome g = load_connectome(a.graph);
  const NodeField s1 = load_concentration(g, a.scan1, a.already_scaled, "scan1");
  const NodeField s2 = load_concentration(g, a.scan2, a.already_scaled, "scan2");

  PriorBounds prior;
  if (!a.prior.empty()) {
    require_file(a.prior, "prior");
    prior = prior_from_records(load_region_records(a.prior));
  } else if (g.region_count() == 7) {
    prior = lobe_prior();
  } else {
    throw ValidationError("--prior is required for graphs without 7 regions");
  }
  if (prior.size() != g.region_count()) throw ValidationError("prior and graph disagree on the region count");

  const std::vector<bool> mask = filter_outlier_nodes(s1, s2, a.outlier_tol);
  const Eigen::VectorXd q_data = regional_averages(g, s2, &mask);
  McmcConfig mc;
  mc.proposal_sigma = a.proposal_sigma;
  mc.likelihood_sigma = a.lik_sigma;
  mc.chain_length = a.steps;
  mc.burn_in = a.burn_in;
  mc.seed = a.seed;
  mc.bounds = prior;
  mc.horizon = a.horizon;
  mc.validate();

  std::vector<fs::path> outputs{a.out};
  if (!a.chain_out.empty()) outputs.emplace_back(a.chain_out);
  check_outputs(cmd, outputs);

  const Chain chain = run_mcmc(make_calibration_model(g, s1, mask, a.horizon, a.dt), q_data, mc);
  const PosteriorSummary post = posterior_summary(chain, a.burn_in);
  save_region_records(make_records(region_names(g), &prior, &post), a.out);
  if (!a.chain_out.empty()) write_chain_csv(chain, a.chain_out);
  write_manifest(cmd, outputs, a.out + ".manifest.json");

  const long excluded = std::count(mask.begin(), mask.end(), false);
  std::cout << "acceptance_rate=" << csv::format(chain.acceptance_rate()) << " excluded_nodes=" << excluded
            << " model_failures=" << chain.model_failures << '\n';
  return 0;
}

struct UqMcArgs
{
  ForwardArgs fwd;
  long samples = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

int uq_mc(const Command& cmd, const UqMcArgs& a)
{
  if (a.out.empty()) throw ValidationError("--out is required");
  check_outputs(cmd, {a.out});
  const auto in = a.fwd.load();
  const MomentSeries m = mc_estimate(in.model, in.post, a.samples, a.seed, a.fwd.threads);
  write_moments_csv(m, in.graph.region_weights(), a.out);
  write_manifest(cmd, {a.out}, a.out + ".manifest.json");
  return 0;
}

struct UqScArgs
{
  ForwardArgs fwd;
  GridArgs grid;
  int level = 5;
  bool count_only = false;
  std::string out, grid_out;
};

int uq_sc(const Command& cmd, const UqScArgs& a)
{
  const KnotFamily family = parse_knot_family(a.grid.rule);
  const LevelToKnots growth = parse_level_to_knots(a.grid.lev2knots);
  if (a.level < 0) throw ValidationError("--level must be >= 0");
  if (a.count_only) {
    // Only the dimension is needed; take it from the graph when given.
    int dim = 7;
    if (!a.fwd.graph.empty()) {
      require_file(a.fwd.graph, "graph");
      dim = load_connectome(a.fwd.graph).region_count();
    }
    std::cout << count_sparse_grid_points(dim, family, growth, smolyak_index_set(dim, a.level)) << '\n';
    return 0;
  }
  if (a.out.empty()) throw ValidationError("--out is required");
  std::vector<fs::path> outputs{a.out};
  if (!a.grid_out.empty()) outputs.emplace_back(a.grid_out);
  check_outputs(cmd, outputs);
  const auto in = a.fwd.load();
  const int dim = static_cast<int>(in.post.size());
  const SparseGrid grid =
      build_sparse_grid(dim, KnotRule::from_posterior(in.post, family, growth), smolyak_index_set(dim, a.level));
  const MomentSeries m = sc_moments(in.model, grid, a.fwd.threads);
  write_moments_csv(m, in.graph.region_weights(), a.out);
  if (!a.grid_out.empty()) write_grid_csv(grid, a.grid_out);
  write_manifest(cmd, outputs, a.out + ".manifest.json");
  std::cout << "points=" << grid.size() << '\n';
  return 0;
}

struct McConvergenceArgs
{
  ForwardArgs fwd;
  std::string counts = "100,1000,10000";
  std::string reference;
  std::uint64_t seed = 1;
  std::string out;
};

int uq_mc_convergence(const Command& cmd, const McConvergenceArgs& a)
{
  if (a.out.empty()) throw ValidationError("--out is required");
  require_file(a.reference, "reference");
  check_outputs(cmd, {a.out});
  std::vector<long> counts;
  for (const auto& s : split(a.counts, ',')) counts.push_back(parse_long(s, "--counts"));
  const auto in = a.fwd.load();
  const MomentSeries ref = read_moments_csv(a.reference);
  const auto rows = mc_convergence(in.model, in.post, counts, ref, in.graph.region_weights(), a.seed, a.fwd.threads);
  write_errors_csv(rows, a.out);
  write_manifest(cmd, {a.out}, a.out + ".manifest.json");

  // Least-squares slope of the lobe-averaged mean error per report time.
  const std::size_t nt = ref.times.size();
  for (std::size_t t = 0; t < nt; ++t) {
    std::vector<double> x, y;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      x.push_back(static_cast<double>(counts[k]));
      y.push_back(rows[k * nt + t].lobe_mean);
    }
    std::cout << "time=" << csv::format(ref.times[t]) << " slope_mean_lobes=" << csv::format(fit_loglog_slope(x, y))
              << '\n';
  }
  return 0;
}

struct ScConvergenceArgs
{
  ForwardArgs fwd;
  GridArgs grid;
  std::string levels = "3..8";
  int reference_level = 9;
  std::string out, reference_out;
};

int uq_sc_convergence(const Command& cmd, const ScConvergenceArgs& a)
{
  if (a.out.empty()) throw ValidationError("--out is required");
  std::vector<fs::path> outputs{a.out};
  if (!a.reference_out.empty()) outputs.emplace_back(a.reference_out);
  check_outputs(cmd, outputs);
  const KnotFamily family = parse_knot_family(a.grid.rule);
  const LevelToKnots growth = parse_level_to_knots(a.grid.lev2knots);
  const std::vector<int> levels = parse_levels(a.levels);
  const auto in = a.fwd.load();
  const ScConvergence conv = sc_convergence(in.model, KnotRule::from_posterior(in.post, family, growth), levels,
                                            a.reference_level, in.graph.region_weights(), a.fwd.threads);
  write_errors_csv(conv.rows, a.out);
  if (!a.reference_out.empty()) write_moments_csv(conv.reference, in.graph.region_weights(), a.reference_out);
  write_manifest(cmd, outputs, a.out + ".manifest.json");
  return 0;
}

struct ReportArgs
{
  std::string moments, chain, errors;
  int burn_in = 0;
  int bins = 30;
  std::string out_dir = ".";
};

void report_bands(const csv::Table& t, const fs::path& path)
{
  int r = 0;
  while (t.has_column("mean_region_" + std::to_string(r + 1))) ++r;
  csv::Writer w(path);
  std::vector<std::string> header{"time", "mean_lobes", "lower_lobes", "upper_lobes", "collapsed"};
  for (int j = 1; j <= r; ++j) {
    const std::string s = std::to_string(j);
    header.insert(header.end(), {"mean_region_" + s, "lower_region_" + s, "upper_region_" + s});
  }
  w.header(header);
  const auto tc = t.column("time"), mc = t.column("mean_lobes"), sc = t.column("std_lobes");
  for (const auto& row : t.rows) {
    const double mean = row[mc], sd = row[sc];
    std::vector<double> out{row[tc], mean, mean - sd, mean + sd, sd == 0.0 ? 1.0 : 0.0};
    for (int j = 1; j <= r; ++j) {
      const double mj = row[t.column("mean_region_" + std::to_string(j))];
      const double sj = std::sqrt(std::max(0.0, row[t.column("var_region_" + std::to_string(j))]));
      out.insert(out.end(), {mj, mj - sj, mj + sj});
    }
    w.row(out);
  }
}

void report_histograms(const ChainTable& chain, int burn_in, int bins, const fs::path& path)
{
  const Eigen::Index n = chain.samples.rows() - burn_in;
  if (burn_in < 0 || n < 1) throw ValidationError("report: --burn-in leaves no samples");
  if (bins < 1) throw ValidationError("report: --bins must be >= 1");
  csv::Writer w(path);
  w.header({"region", "bin", "lower", "upper", "count", "density", "gaussian_density", "degenerate"});
  for (Eigen::Index l = 0; l < chain.samples.cols(); ++l) {
    const Eigen::VectorXd x = chain.samples.col(l).tail(n);
    const double lo = x.minCoeff(), hi = x.maxCoeff();
    const double mean = x.mean();
    const double var = n > 1 ? (x.array() - mean).square().sum() / static_cast<double>(n - 1) : 0.0;
    const double region = static_cast<double>(l + 1);
    if (!(hi > lo)) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      w.row({region, 0.0, lo, hi, static_cast<double>(n), nan, nan, 1.0});
      continue;
    }
    std::vector<long> counts(bins, 0);
    const double width = (hi - lo) / bins;
    for (Eigen::Index k = 0; k < n; ++k)
      ++counts[std::min(bins - 1, static_cast<int>((x[k] - lo) / width))];
    for (int b = 0; b < bins; ++b) {
      const double a = lo + b * width, c = a + 0.5 * width;
      const double gauss = var > 0.0 ? std::exp(gaussian_logpdf(c, mean, std::sqrt(var))) : 0.0;
      w.row({region, static_cast<double>(b), a, a + width, static_cast<double>(counts[b]),
             counts[b] / (static_cast<double>(n) * width), gauss, var > 0.0 ? 0.0 : 1.0});
    }
  }
}

std::vector<fs::path> report_errors(const csv::Table& t, const fs::path& dir)
{
  const auto tc = t.column("time");
  std::map<double, std::vector<const std::vector<double>*>> by_time;
  for (const auto& row : t.rows) by_time[row[tc]].push_back(&row);
  std::vector<fs::path> out;
  for (const auto& [time, rows] : by_time) {
    const fs::path path = dir / ("errors_t" + csv::format(time) + ".csv");
    csv::Writer w(path);
    w.header(t.header);
    for (const auto* row : rows) w.row(*row);
    out.push_back(path);
  }
  return out;
}

int report(const Command& cmd, const ReportArgs& a)
{
  const fs::path dir(a.out_dir);
  if (!fs::is_directory(dir)) throw ValidationError("output directory " + dir.string() + " does not exist");
  if (a.moments.empty() && a.chain.empty() && a.errors.empty())
    throw ValidationError("report: give at least one of --moments, --chain, --errors");
  std::vector<fs::path> outputs;
  if (!a.moments.empty()) {
    require_file(a.moments, "moments");
    outputs.push_back(dir / "bands.csv");
    check_outputs(cmd, outputs);
    report_bands(csv::read(a.moments), outputs.back());
  }
  if (!a.chain.empty()) {
    require_file(a.chain, "chain");
    outputs.push_back(dir / "histograms.csv");
    check_outputs(cmd, outputs);
    report_histograms(read_chain_csv(a.chain), a.burn_in, a.bins, outputs.back());
  }
  if (!a.errors.empty()) {
    require_file(a.errors, "errors");
    const auto files = report_errors(csv::read(a.errors), dir);
    outputs.insert(outputs.end(), files.begin(), files.end());
  }
  write_manifest(cmd, outputs, dir / "report.manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// --config handling: the JSON options (a flat object, or a manifest's
// "options" block) are appended after the command-line flags, so they win.
// ---------------------------------------------------------------------------

std::vector<std::string> expand_config(const std::vector<std::string>& args)
{
  std::vector<std::string> out;
  std::string config;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config") {
      if (k + 1 >= args.size()) throw ValidationError("--config needs a file");
      config = args[++k];
    } else if (args[k].rfind("--config=", 0) == 0) {
      config = args[k].substr(9);
    } else {
      out.push_back(args[k]);
    }
  }
  if (config.empty()) return out;
  std::ifstream in(config);
  if (!in) throw ValidationError("--config: cannot open " + config);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw ValidationError("--config: " + config + ": " + ex.what());
  }
  if (j.contains("command") && (out.empty() || j["command"] != out.front()))
    throw ValidationError("--config: " + config + " was written for '" + j["command"].get<std::string>() + "'");
  const json& opts = j.contains("options") ? j["options"] : j;
  if (!opts.is_object()) throw ValidationError("--config: expected a JSON object of options");
  for (const auto& [key, value] : opts.items()) {
    if (value.is_null()) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back("--" + key);
      continue;
    }
    out.push_back("--" + key);
    out.push_back(value.is_string() ? value.get<std::string>() : value.dump());
  }
  return out;
}

std::string one_line(std::string s)
{
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string>& raw_args)
{
  CLI::App app{"Fisher-Kolmogorov reaction-diffusion on connectomes: calibration and forward UQ", "fkuq"};
  app.set_version_flag("--version", FKUQ_VERSION);
  app.require_subcommand(1);

  GenSyntheticArgs gen;
  Command gen_cmd(app, "gen-synthetic", "write a synthetic connectome, priors, truth and two scans");
  gen_cmd.option("regions", gen.regions, "number of regions");
  gen_cmd.option("nodes-per-region", gen.nodes_per_region, "nodes in every region");
  gen_cmd.option("intra-density", gen.intra_density, "edge probability inside a region");
  gen_cmd.option("inter-density", gen.inter_density, "edge probability across regions");
  gen_cmd.option("weight-scale", gen.weight_scale, "edge weight scale");
  gen_cmd.option("seed", gen.seed, "random seed");
  gen_cmd.option("scan-lo", gen.scan_lo, "lower bound of the first scan");
  gen_cmd.option("scan-hi", gen.scan_hi, "upper bound of the first scan");
  gen_cmd.option("horizon", gen.horizon, "years between the scans");
  gen_cmd.option("dt", gen.dt, "time step for the second scan");
  gen_cmd.path("truth", gen.truth, "JSON with the true mu per region", true);
  gen_cmd.option("out-dir", gen.out_dir, "output directory");

  SimulateArgs sim;
  Command sim_cmd(app, "simulate", "solve the FK model for fixed reaction parameters");
  sim_cmd.path("graph", sim.graph, "connectome JSON", true);
  sim_cmd.path("c0", sim.c0, "initial concentration CSV", true);
  sim_cmd.flag("already-scaled", sim.already_scaled, "c0 values are already in [0, 1]");
  sim_cmd.path("params", sim.params, "JSON whose mu entries give p", true);
  sim_cmd.option("p", sim.p, "comma-separated p per region");
  sim_cmd.option("alpha", sim.alpha, "same reaction coefficient in every region");
  sim_cmd.option("T", sim.T, "final time (years)");
  sim_cmd.option("dt", sim.dt, "time step (years)");
  sim_cmd.option("times", sim.times, "comma-separated output times");
  sim_cmd.option("every", sim.every, "output interval when --times is empty");
  sim_cmd.path("out", sim.out, "regional averages CSV", false);
  sim_cmd.path("trajectory-out", sim.trajectory_out, "node states CSV", false);

  CalibrateArgs cal;
  Command cal_cmd(app, "calibrate", "Metropolis-Hastings calibration from two scans");
  cal_cmd.path("graph", cal.graph, "connectome JSON", true);
  cal_cmd.path("scan1", cal.scan1, "first scan CSV", true);
  cal_cmd.path("scan2", cal.scan2, "second scan CSV", true);
  cal_cmd.flag("already-scaled", cal.already_scaled, "scan values are already in [0, 1]");
  cal_cmd.path("prior", cal.prior, "prior box JSON", true);
  cal_cmd.option("horizon", cal.horizon, "years between the scans");
  cal_cmd.option("dt", cal.dt, "time step (years)");
  cal_cmd.option("steps", cal.steps, "chain length");
  cal_cmd.option("burn-in", cal.burn_in, "discarded leading steps");
  cal_cmd.option("proposal-sigma", cal.proposal_sigma, "random-walk standard deviation");
  cal_cmd.option("lik-sigma", cal.lik_sigma, "likelihood standard deviation");
  cal_cmd.option("outlier-tol", cal.outlier_tol, "relative drop that excludes a node");
  cal_cmd.option("seed", cal.seed, "random seed");
  cal_cmd.path("out", cal.out, "posterior JSON", false);
  cal_cmd.path("chain-out", cal.chain_out, "chain CSV", false);

  UqMcArgs mc;
  Command mc_cmd(app, "uq-mc", "Monte Carlo moments of the QoIs");
  mc.fwd.add(mc_cmd);
  mc_cmd.option("samples", mc.samples, "number of samples");
  mc_cmd.option("seed", mc.seed, "random seed");
  mc_cmd.path("out", mc.out, "moments CSV", false);

  UqScArgs sc;
  Command sc_cmd(app, "uq-sc", "sparse-grid collocation moments of the QoIs");
  sc.fwd.add(sc_cmd);
  sc.grid.add(sc_cmd);
  sc_cmd.option("level", sc.level, "Smolyak level w");
  sc_cmd.flag("count-only", sc.count_only, "print the number of collocation points and exit");
  sc_cmd.path("out", sc.out, "moments CSV", false);
  sc_cmd.path("grid-out", sc.grid_out, "grid points and weights CSV", false);

  McConvergenceArgs mcc;
  Command mcc_cmd(app, "uq-mc-convergence", "Monte Carlo error against a reference");
  mcc.fwd.add(mcc_cmd);
  mcc_cmd.option("counts", mcc.counts, "comma-separated increasing sample counts");
  mcc_cmd.path("reference", mcc.reference, "reference moments CSV", true);
  mcc_cmd.option("seed", mcc.seed, "random seed");
  mcc_cmd.path("out", mcc.out, "errors CSV", false);

  ScConvergenceArgs scc;
  Command scc_cmd(app, "uq-sc-convergence", "sparse-grid error against a finer level");
  scc.fwd.add(scc_cmd);
  scc.grid.add(scc_cmd);
  scc_cmd.option("levels", scc.levels, "levels as a..b or a comma list");
  scc_cmd.option("reference-level", scc.reference_level, "reference level");
  scc_cmd.path("out", scc.out, "errors CSV", false);
  scc_cmd.path("reference-out", scc.reference_out, "reference moments CSV", false);

  ReportArgs rep;
  Command rep_cmd(app, "report", "plot data from moments, chains and error tables");
  rep_cmd.path("moments", rep.moments, "moments CSV", true);
  rep_cmd.path("chain", rep.chain, "chain CSV", true);
  rep_cmd.path("errors", rep.errors, "errors CSV", true);
  rep_cmd.option("burn-in", rep.burn_in, "chain rows to skip");
  rep_cmd.option("bins", rep.bins, "histogram bins");
  rep_cmd.option("out-dir", rep.out_dir, "output directory");

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());  // CLI11 expects reversed order
    try {
      app.parse(args);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      throw ValidationError(e.what());
    }

    if (gen_cmd.app()->parsed()) return gen_synthetic(gen_cmd, gen);
    if (sim_cmd.app()->parsed()) return simulate(sim_cmd, sim);
    if (cal_cmd.app()->parsed()) return calibrate(cal_cmd, cal);
    if (mc_cmd.app()->parsed()) return uq_mc(mc_cmd, mc);
    if (sc_cmd.app()->parsed()) return uq_sc(sc_cmd, sc);
    if (mcc_cmd.app()->parsed()) return uq_mc_convergence(mcc_cmd, mcc);
    if (scc_cmd.app()->parsed()) return uq_sc_convergence(scc_cmd, scc);
    if (rep_cmd.app()->parsed()) return report(rep_cmd, rep);
    throw ValidationError("no subcommand given");
  } catch (const NumericalError& e) {
    std::cerr << "fkuq: error: numerical: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fkuq: error: validation: " << one_line(e.what()) << '\n';
    return 1;
  }
}

int run(int argc, char** argv)
{
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run(args);
}

}  // namespace fkuq::cli
