// cardport command-line driver: solve, frontier, apl, backtest, oracle-check.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cardport/cardport.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cardport;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitTolerance = 4;

struct RunConfig {
  std::string command;
  std::string data;
  std::string format = "csv";
  std::string split;
  std::string model = "lam";
  std::vector<std::string> models;
  int k = 10;
  std::vector<int> ks;
  double lower = 0.01;
  double upper = 1.0;
  std::string bounds_file;
  std::vector<std::string> preassigned;
  double epsilon = 0.05;
  std::optional<double> rho;
  std::optional<double> rho_frac;
  std::optional<int> grid;
  int beam = 400;
  std::optional<double> penalty;
  int max_escalations = 6;
  std::string tolerance = "opt";
  std::optional<double> abs_gap;
  long node_limit = 100000;
  std::string covariance = "population";
  std::string out = "cardport_out";
  std::string dataset;
  int threads = 1;
  bool trace = false;
  int synthetic = 0;
  int periods = 120;
  unsigned long long seed = 1;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> errs;
  auto model_ok = [](const std::string& m) {
    try {
      parse_model(m);
      return true;
    } catch (const std::invalid_argument&) {
      return false;
    }
  };
  if (!model_ok(c.model)) errs.push_back("unknown model '" + c.model + "' (expected mv, lam, mad, lamad, cvar, lacvar)");
  for (const auto& m : c.models) {
    if (!model_ok(m)) errs.push_back("unknown model '" + m + "' in --models");
  }
  if (c.data.empty() && c.synthetic <= 0) errs.push_back("no data: give --data FILE or --synthetic N");
  if (!c.data.empty() && c.synthetic > 0) errs.push_back("--data and --synthetic are mutually exclusive");
  if (!c.data.empty() && !fs::exists(c.data)) errs.push_back("data file not found: " + c.data);
  if (!c.bounds_file.empty() && !fs::exists(c.bounds_file)) errs.push_back("bounds file not found: " + c.bounds_file);
  if (c.format != "csv" && c.format != "indtrack") errs.push_back("--format must be csv or indtrack");
  if (c.covariance != "population" && c.covariance != "sample") errs.push_back("--covariance must be population or sample");
  if (c.tolerance != "opt" && c.tolerance != "appr") errs.push_back("--tolerance must be opt or appr");
  if (c.k < 1) errs.push_back("--k must be at least 1");
  for (int k : c.ks) {
    if (k < 1) errs.push_back("--ks entries must be at least 1");
  }
  if (!(c.lower >= 0.0 && c.lower <= c.upper && c.upper <= 1.0)) errs.push_back("need 0 <= lower <= upper <= 1");
  if (!(c.epsilon > 0.0 && c.epsilon <= 1.0)) errs.push_back("--epsilon must lie in (0, 1]");
  if (c.grid && *c.grid < 2) errs.push_back("--grid must be at least 2");
  if (c.beam < 0) errs.push_back("--beam must be >= 0 (0 = unlimited)");
  if (c.penalty && !(*c.penalty > 0.0)) errs.push_back("--penalty must be positive");
  if (c.max_escalations < 0) errs.push_back("--max-escalations must be >= 0");
  if (c.abs_gap && !(*c.abs_gap > 0.0)) errs.push_back("--abs-gap must be positive");
  if (c.node_limit < 1) errs.push_back("--node-limit must be positive");
  if (c.threads < 1) errs.push_back("--threads must be at least 1");
  if (c.synthetic < 0) errs.push_back("--synthetic must be nonnegative");
  if (c.synthetic > 0 && c.periods < 3) errs.push_back("--periods must be at least 3");
  const bool single_rho = c.command == "solve" || c.command == "oracle-check";
  if (single_rho && c.rho.has_value() == c.rho_frac.has_value()) errs.push_back("give exactly one of --rho and --rho-frac");
  if (c.rho_frac && !(*c.rho_frac >= 0.0 && *c.rho_frac <= 1.0)) errs.push_back("--rho-frac must lie in [0, 1]");
  if (c.command == "backtest" && c.split.empty()) errs.push_back("backtest needs --split (last in-sample period)");
  if (c.command == "apl" && !is_limited(model_ok(c.model) ? parse_model(c.model) : ModelTag::Lam)) {
    errs.push_back("apl needs a limited-asset model (lam, lamad, lacvar)");
  }
  return errs;
}

// Geometric random walk with a common factor; INDEX is the equal-weight average price.
PriceSeries synthetic_prices(int n, int periods, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> drift(-0.001, 0.004);
  std::uniform_real_distribution<double> vol(0.01, 0.05);
  std::uniform_real_distribution<double> beta(0.3, 1.2);
  PriceSeries p;
  p.prices.resize(periods, n);
  Eigen::VectorXd d(n), s(n), b(n);
  for (int i = 0; i < n; ++i) {
    p.asset_names.push_back("S" + std::to_string(i + 1));
    d(i) = drift(rng);
    s(i) = vol(rng);
    b(i) = beta(rng);
    p.prices(0, i) = 50.0 + 10.0 * i;
  }
  for (int t = 1; t < periods; ++t) {
    const double f = 0.02 * nd(rng);
    for (int i = 0; i < n; ++i) p.prices(t, i) = p.prices(t - 1, i) * std::exp(d(i) + b(i) * f + s(i) * nd(rng));
  }
  std::ostringstream label;
  for (int t = 0; t < periods; ++t) {
    label.str("");
    label << 't' << std::setw(4) << std::setfill('0') << t;
    p.timestamps.push_back(label.str());
  }
  Eigen::VectorXd idx(periods);
  for (int t = 0; t < periods; ++t) idx(t) = p.prices.row(t).mean();
  p.index_prices = idx;
  return p;
}

void write_prices_csv(std::ostream& os, const PriceSeries& p) {
  os << std::setprecision(17) << "date";
  for (const auto& nm : p.asset_names) os << ',' << nm;
  if (p.index_prices) os << ",INDEX";
  os << '\n';
  for (Eigen::Index t = 0; t < p.periods(); ++t) {
    os << p.timestamps[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < p.assets(); ++i) os << ',' << p.prices(t, i);
    if (p.index_prices) os << ',' << (*p.index_prices)(t);
    os << '\n';
  }
}

struct Loaded {
  PriceSeries clean;
  PriceSeries in_sample;
  PriceSeries out_sample;
  MarketModel model;
  CleanReport report;
};

Loaded load(const RunConfig& c, const fs::path& out) {
  PriceSeries raw;
  if (c.synthetic > 0) {
    raw = synthetic_prices(c.synthetic, c.periods, c.seed);
    std::ofstream f(out / "synthetic_prices.csv");
    write_prices_csv(f, raw);
  } else {
    std::ifstream in(c.data);
    raw = load_prices(in, c.format == "csv" ? PriceFormat::Csv : PriceFormat::OrLibraryIndtrack);
  }
  Loaded l;
  CleanResult cleaned = clean_series(raw);
  l.clean = std::move(cleaned.series);
  l.report = std::move(cleaned.report);
  if (l.clean.assets() == 0) throw ConfigError("no assets left after cleaning");
  if (c.split.empty()) {
    l.in_sample = l.clean;
  } else {
    std::tie(l.in_sample, l.out_sample) = split(l.clean, c.split);
  }
  const auto divisor = c.covariance == "sample" ? CovarianceDivisor::Sample : CovarianceDivisor::Population;
  l.model = estimate(log_returns(l.in_sample), divisor, l.in_sample.asset_names);
  std::ofstream rep(out / "clean_report.txt");
  rep << l.report.to_text();
  return l;
}

LimitedAssetSpec make_spec(const RunConfig& c, const std::vector<std::string>& names, int k) {
  const auto n = static_cast<Eigen::Index>(names.size());
  LimitedAssetSpec s = LimitedAssetSpec::uniform(n, k, c.lower, c.upper);
  std::vector<std::string> errs;
  auto index_of = [&](const std::string& a) -> int {
    const auto it = std::find(names.begin(), names.end(), a);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
  };
  if (!c.bounds_file.empty()) {
    std::ifstream in(c.bounds_file);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#' || line.rfind("asset,", 0) == 0) continue;
      std::istringstream row(line);
      std::string asset, lo, hi;
      std::getline(row, asset, ',');
      std::getline(row, lo, ',');
      std::getline(row, hi, ',');
      const int i = index_of(asset);
      if (i < 0) {
        errs.push_back(c.bounds_file + ":" + std::to_string(line_no) + ": unknown asset '" + asset + "'");
        continue;
      }
      try {
        s.lower(i) = std::stod(lo);
        s.upper(i) = std::stod(hi);
      } catch (const std::exception&) {
        errs.push_back(c.bounds_file + ":" + std::to_string(line_no) + ": expected asset,lower,upper");
      }
    }
  }
  for (const auto& a : c.preassigned) {
    const int i = index_of(a);
    if (i < 0) {
      errs.push_back("pre-assigned asset '" + a + "' not in the data");
    } else {
      s.preassigned.push_back(i);
    }
  }
  std::sort(s.preassigned.begin(), s.preassigned.end());
  s.preassigned.erase(std::unique(s.preassigned.begin(), s.preassigned.end()), s.preassigned.end());
  if (k > n) errs.push_back("K=" + std::to_string(k) + " exceeds the " + std::to_string(n) + " assets available");
  if (errs.empty()) {
    try {
      s.validate(n);
    } catch (const std::invalid_argument& e) {
      errs.push_back(e.what());
    }
  }
  if (!errs.empty()) {
    std::string all;
    for (const auto& e : errs) all += (all.empty() ? "" : "\n") + e;
    throw ConfigError(all);
  }
  return s;
}

SolverConfig solver_config(const RunConfig& c) {
  SolverConfig s;
  s.lam.beam_width = c.beam;
  s.lam.penalty = c.penalty;
  s.lam.max_escalations = c.max_escalations;
  s.bnb = c.tolerance == "appr" ? BnbConfig::approximate() : BnbConfig{};
  if (c.abs_gap) s.bnb.abs_gap_tol = *c.abs_gap;
  s.bnb.node_limit = c.node_limit;
  s.epsilon = c.epsilon;
  return s;
}

int default_grid(const RunConfig& c) {
  if (c.grid) return *c.grid;
  return c.command == "apl" ? 100 : 500;
}

json config_json(const RunConfig& c, const SolverConfig& s) {
  json j;
  j["command"] = c.command;
  j["data"] = c.synthetic > 0 ? json("synthetic") : json(c.data);
  j["format"] = c.format;
  j["split"] = c.split;
  j["model"] = c.model;
  j["models"] = c.models;
  j["k"] = c.k;
  j["ks"] = c.ks;
  j["lower"] = c.lower;
  j["upper"] = c.upper;
  j["bounds_file"] = c.bounds_file;
  j["preassigned"] = c.preassigned;
  j["epsilon"] = c.epsilon;
  j["rho"] = c.rho ? json(*c.rho) : json(nullptr);
  j["rho_frac"] = c.rho_frac ? json(*c.rho_frac) : json(nullptr);
  j["grid"] = default_grid(c);
  j["beam"] = c.beam;
  j["penalty"] = c.penalty ? json(*c.penalty) : json("adaptive");
  j["max_escalations"] = c.max_escalations;
  j["escalation_tol"] = s.lam.escalation_tol;
  j["return_tol"] = s.lam.return_tol;
  j["tolerance"] = c.tolerance;
  j["abs_gap_tol"] = s.bnb.abs_gap_tol;
  j["integrality_tol"] = s.bnb.integrality_tol;
  j["node_limit"] = c.node_limit;
  j["covariance"] = c.covariance;
  j["threads"] = c.threads;
  j["trace"] = c.trace;
  j["synthetic"] = c.synthetic;
  j["periods"] = c.periods;
  j["seed"] = c.seed;
  j["dataset"] = c.dataset;
  return j;
}

json solution_json(const PortfolioSolution& s) {
  json j;
  j["status"] = to_string(s.status);
  j["objective"] = s.usable() ? json(s.objective) : json(nullptr);
  j["achieved_return"] = s.usable() ? json(s.achieved_return) : json(nullptr);
  j["gap"] = std::isfinite(s.gap) ? json(s.gap) : json("inf");
  j["n_support"] = s.support.size();
  return j;
}

void write_manifest(const fs::path& out, const json& cfg, const json& results, const Loaded& l) {
  json m;
  m["config"] = cfg;
  m["results"] = results;
  m["data_summary"] = {{"assets", l.model.assets()},
                       {"in_sample_periods", l.in_sample.periods()},
                       {"out_sample_periods", l.out_sample.periods()},
                       {"dropped", l.report.dropped.size()},
                       {"filled", l.report.fills.size()}};
  std::ofstream f(out / "manifest.json");
  f << m.dump(2) << '\n';
}

void write_solution_csv(const fs::path& file, const PortfolioSolution& s, const std::vector<std::string>& names) {
  std::ofstream f(file);
  f << std::setprecision(17) << "asset,weight\n";
  for (int i : s.support) f << names[static_cast<std::size_t>(i)] << ',' << s.weights(i) << '\n';
}

int exit_for(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
    case SolveStatus::Heuristic: return kExitOk;
    case SolveStatus::Infeasible: return kExitInfeasible;
    case SolveStatus::ToleranceLimited: return kExitTolerance;
  }
  return kExitOk;
}

double target_rho(const RunConfig& c, const ReturnRange& r) {
  return c.rho ? *c.rho : r.rho_min + *c.rho_frac * (r.rho_max - r.rho_min);
}

// One solve with its diagnostics (penalty and trace for LAM, node log for MILP).
PortfolioSolution solve_one(const RunConfig& c, const MarketModel& m, double rho, ModelTag model,
                            const std::optional<LimitedAssetSpec>& spec, const SolverConfig& s,
                            const ReturnRange& range, json& extra, std::string& trace) {
  if (model == ModelTag::Lam) {
    LamConfig lc = s.lam;
    lc.range = range;
    const LamResult r = lam_solve_detailed(m, rho, *spec, lc);
    extra["penalty"] = r.penalty;
    extra["escalations"] = r.escalations;
    extra["levels_executed"] = r.levels_executed;
    extra["refinements"] = r.refinements;
    trace = r.trace;
    return r.solution;
  }
  if (model == ModelTag::Lamad || model == ModelTag::Lacvar || model == ModelTag::Mad || model == ModelTag::Cvar) {
    BnbConfig bc = s.bnb;
    bc.log = c.trace;
    const MilpInstance inst = model == ModelTag::Lamad    ? build_lamad(m, rho, *spec)
                              : model == ModelTag::Lacvar ? build_lacvar(m, rho, *spec, s.epsilon)
                              : model == ModelTag::Mad    ? build_mad(m, rho)
                                                          : build_cvar(m, rho, s.epsilon);
    const BnbResult r = branch_and_bound(inst, bc);
    extra["nodes"] = r.nodes;
    extra["root_bound"] = std::isfinite(r.root_bound) ? json(r.root_bound) : json(nullptr);
    trace = r.log;
    return r.solution;
  }
  return solve_mv(m, rho, range);
}

int cmd_solve(const RunConfig& c, const fs::path& out) {
  const Loaded l = load(c, out);
  const SolverConfig s = solver_config(c);
  const ModelTag model = parse_model(c.model);
  std::optional<LimitedAssetSpec> spec;
  if (is_limited(model)) spec = make_spec(c, l.model.asset_names, c.k);
  const ReturnRange range = return_range(l.model);
  const double rho = target_rho(c, range);
  json extra = json::object();
  std::string trace;
  const PortfolioSolution sol = solve_one(c, l.model, rho, model, spec, s, range, extra, trace);
  write_solution_csv(out / "solution.csv", sol, l.model.asset_names);
  if (c.trace) std::ofstream(out / "trace.txt") << trace;
  json res = solution_json(sol);
  res["rho"] = rho;
  res["rho_min"] = range.rho_min;
  res["rho_max"] = range.rho_max;
  res["diagnostics"] = extra;
  write_manifest(out, config_json(c, s), res, l);
  std::cout << c.model << " rho=" << rho << " status=" << to_string(sol.status);
  if (sol.usable()) std::cout << " objective=" << sol.objective << " assets=" << sol.support.size();
  std::cout << '\n';
  return exit_for(sol.status);
}

int cmd_frontier(const RunConfig& c, const fs::path& out) {
  const Loaded l = load(c, out);
  const SolverConfig s = solver_config(c);
  const ModelTag model = parse_model(c.model);
  std::optional<LimitedAssetSpec> spec;
  if (is_limited(model)) spec = make_spec(c, l.model.asset_names, c.k);
  const int grid = default_grid(c);
  const FrontierCurve curve = sweep(l.model, spec, model, grid, s, c.threads);
  json res;
  int feasible = 0;
  for (const auto& p : curve.points) feasible += p.feasible();
  res["points"] = grid;
  res["feasible_points"] = feasible;
  std::map<std::string, int> statuses;
  for (const auto& p : curve.points) ++statuses[to_string(p.status)];
  res["statuses"] = statuses;
  if (feasible > 0) {
    const FrontierCurve env = lower_envelope(curve);
    std::ofstream(out / "frontier.csv") << [&] {
      std::ostringstream os;
      write_frontier_csv(os, curve, l.model.asset_names, &env);
      return os.str();
    }();
    std::ofstream envf(out / "envelope.csv");
    write_frontier_csv(envf, env, l.model.asset_names);
    std::ofstream eff(out / "efficient.csv");
    const auto pts = efficient_points(curve);
    write_points_csv(eff, pts);
    res["efficient_points"] = pts.size();
  } else {
    std::ofstream f(out / "frontier.csv");
    write_frontier_csv(f, curve, l.model.asset_names);
  }
  write_manifest(out, config_json(c, s), res, l);
  std::cout << c.model << " frontier: " << feasible << '/' << grid << " feasible points\n";
  return feasible > 0 ? kExitOk : kExitInfeasible;
}

int cmd_apl(const RunConfig& c, const fs::path& out) {
  const Loaded l = load(c, out);
  const SolverConfig s = solver_config(c);
  const ModelTag model = parse_model(c.model);
  const LimitedAssetSpec spec = make_spec(c, l.model.asset_names, c.k);
  const int grid = default_grid(c);
  const FrontierCurve constrained = sweep(l.model, spec, model, grid, s, c.threads);
  const FrontierCurve base = sweep(l.model, std::nullopt, base_model(model), grid, s, c.threads);
  const std::string ds = c.dataset.empty() ? (c.synthetic > 0 ? "synthetic" : fs::path(c.data).stem().string())
                                           : c.dataset;
  json res;
  std::ostringstream text;
  bool any = false;
  for (const auto& p : constrained.points) any = any || p.feasible();
  if (!any) {
    res["error"] = "every constrained grid point is infeasible";
    write_manifest(out, config_json(c, s), res, l);
    std::cerr << "apl: every constrained grid point is infeasible\n";
    return kExitInfeasible;
  }
  for (AplVariant v : {AplVariant::Apl1, AplVariant::Apl2}) {
    const AplReport r = apl(constrained, base, v);
    text << r.line(ds) << '\n';
    const std::string key = v == AplVariant::Apl1 ? "apl1" : "apl2";
    res[key] = {{"value", r.value}, {"excluded", r.excluded}};
  }
  std::ofstream(out / "apl.txt") << text.str();
  std::ofstream cf(out / "frontier.csv");
  write_frontier_csv(cf, constrained, l.model.asset_names);
  std::ofstream bf(out / "frontier_unconstrained.csv");
  write_frontier_csv(bf, base, l.model.asset_names);
  write_manifest(out, config_json(c, s), res, l);
  std::cout << text.str();
  return kExitOk;
}

int cmd_backtest(const RunConfig& c, const fs::path& out) {
  const Loaded l = load(c, out);
  if (!l.out_sample.index_prices) throw ConfigError("backtest needs an INDEX column in the price data");
  if (l.out_sample.periods() < 2) throw ConfigError("out-of-sample window after --split is shorter than 2 periods");
  const SolverConfig s = solver_config(c);
  const std::vector<std::string> models = c.models.empty() ? std::vector<std::string>{c.model} : c.models;
  const std::vector<int> ks = c.ks.empty() ? std::vector<int>{c.k} : c.ks;
  const ReturnRange range = return_range(l.model);
  std::vector<PerformancePath> paths;
  json runs = json::array();
  for (const auto& name : models) {
    const ModelTag model = parse_model(name);
    const std::vector<int> k_list = is_limited(model) ? ks : std::vector<int>{0};
    for (int k : k_list) {
      std::optional<LimitedAssetSpec> spec;
      if (is_limited(model)) spec = make_spec(c, l.model.asset_names, k);
      for (const auto& preset : backtest_presets(range)) {
        json extra = json::object();
        std::string trace;
        const PortfolioSolution sol = solve_one(c, l.model, preset.rho, model, spec, s, range, extra, trace);
        const std::string label = name + (k > 0 ? "_K" + std::to_string(k) : "") + "_" + preset.name;
        json run = solution_json(sol);
        run["label"] = label;
        run["rho"] = preset.rho;
        run["diagnostics"] = extra;
        runs.push_back(run);
        if (!sol.usable()) continue;
        write_solution_csv(out / ("weights_" + label + ".csv"), sol, l.model.asset_names);
        paths.push_back(expost_path(sol.weights, l.model.asset_names, l.out_sample, label));
      }
    }
  }
  const ComparisonReport rep = compare(paths, index_path(l.out_sample));
  std::ofstream csv(out / "backtest.csv");
  rep.write_csv(csv);
  std::ofstream(out / "backtest_summary.txt") << rep.summary_text();
  std::ofstream svg(out / "backtest.svg");
  rep.write_svg(svg);
  json res;
  res["runs"] = runs;
  write_manifest(out, config_json(c, s), res, l);
  std::cout << rep.summary_text();
  return paths.empty() ? kExitInfeasible : kExitOk;
}

int cmd_oracle_check(const RunConfig& c, const fs::path& out) {
  const Loaded l = load(c, out);
  RunConfig exact = c;
  exact.beam = kUnlimitedBeam;
  const SolverConfig s = solver_config(exact);
  const ModelTag model = parse_model(c.model);
  const ModelTag limited = is_limited(model) ? model
                           : model == ModelTag::Mv ? ModelTag::Lam
                           : model == ModelTag::Mad ? ModelTag::Lamad
                                                    : ModelTag::Lacvar;
  const LimitedAssetSpec spec = make_spec(c, l.model.asset_names, c.k);
  const ReturnRange range = return_range(l.model);
  const double rho = target_rho(c, range);
  json extra = json::object();
  std::string trace;
  const PortfolioSolution sol = solve_one(exact, l.model, rho, limited, spec, s, range, extra, trace);
  OracleOptions opt;
  opt.epsilon = c.epsilon;
  opt.keep_log = true;
  OracleReport rep;
  try {
    rep = enumerate_exact(l.model, rho, spec, limited, opt);
  } catch (const std::length_error& e) {
    throw ConfigError(e.what());
  }
  std::ofstream log(out / "oracle.csv");
  rep.write_csv(log);
  const bool verdicts_agree = sol.usable() == rep.best.usable();
  double rel = 0.0;
  if (verdicts_agree && sol.usable()) {
    rel = std::abs(sol.objective - rep.best.objective) / std::max(1.0, std::abs(rep.best.objective));
  }
  const bool agree = verdicts_agree && rel <= 1e-7;
  json res;
  res["rho"] = rho;
  res["solver"] = solution_json(sol);
  res["oracle"] = solution_json(rep.best);
  res["subsets_evaluated"] = rep.subsets_evaluated;
  res["relative_difference"] = rel;
  res["agree"] = agree;
  write_manifest(out, config_json(exact, s), res, l);
  std::cout << "oracle-check " << to_string(limited) << " rho=" << rho << " solver=" << to_string(sol.status)
            << " oracle=" << to_string(rep.best.status) << " rel_diff=" << rel << (agree ? " AGREE" : " DISAGREE")
            << '\n';
  return agree ? kExitOk : kExitMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cardport: cardinality-constrained portfolio selection"};
  app.set_config("--config", "", "key=value configuration file; flags override its entries");
  app.require_subcommand(1, 1);
  app.fallthrough();
  RunConfig c;

  app.add_option("--data", c.data, "price file (CSV with date column, optional INDEX column)");
  app.add_option("--format", c.format, "csv | indtrack");
  app.add_option("--split", c.split, "last in-sample period label; later periods are out of sample");
  app.add_option("--model", c.model, "mv | lam | mad | lamad | cvar | lacvar");
  app.add_option("--models", c.models, "models for backtest (comma separated)")->delimiter(',');
  app.add_option("--k", c.k, "maximum number of assets K");
  app.add_option("--ks", c.ks, "K values for backtest (comma separated)")->delimiter(',');
  app.add_option("--lower", c.lower, "minimum weight of a held asset");
  app.add_option("--upper", c.upper, "maximum weight of a held asset");
  app.add_option("--bounds", c.bounds_file, "per-asset bounds CSV: asset,lower,upper");
  app.add_option("--preassigned", c.preassigned, "assets that must be held (comma separated)")->delimiter(',');
  app.add_option("--epsilon", c.epsilon, "CVaR tail probability");
  app.add_option("--rho", c.rho, "target return per period");
  app.add_option("--rho-frac", c.rho_frac, "target as a fraction of [rho_min, rho_max]");
  app.add_option("--grid", c.grid, "frontier grid size (default 500, 100 for apl)");
  app.add_option("--beam", c.beam, "LAM beam width per level, 0 for exhaustive");
  app.add_option("--penalty", c.penalty, "fixed LAM starting penalty M (default adaptive)");
  app.add_option("--max-escalations", c.max_escalations, "tenfold penalty increases allowed");
  app.add_option("--tolerance", c.tolerance, "opt (gap 1e-6) | appr (gap 1e-4)");
  app.add_option("--abs-gap", c.abs_gap, "explicit branch-and-bound absolute gap");
  app.add_option("--node-limit", c.node_limit, "branch-and-bound node limit");
  app.add_option("--covariance", c.covariance, "population | sample");
  app.add_option("--out", c.out, "output directory");
  app.add_option("--dataset", c.dataset, "dataset label for the APL report");
  app.add_option("--threads", c.threads, "worker threads for frontier sweeps");
  app.add_flag("--trace", c.trace, "write solver trace / node log");
  app.add_option("--synthetic", c.synthetic, "generate N synthetic assets instead of reading --data");
  app.add_option("--periods", c.periods, "periods of synthetic data");
  app.add_option("--seed", c.seed, "seed for synthetic data");

  for (const char* name : {"solve", "frontier", "apl", "backtest", "oracle-check"}) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  c.command = app.get_subcommands().front()->get_name();

  const std::vector<std::string> errs = validate(c);
  if (!errs.empty()) {
    for (const auto& e : errs) std::cerr << "config error: " << e << '\n';
    std::cerr << app.help();
    return kExitConfig;
  }
  const fs::path out(c.out);
  try {
    fs::create_directories(out);
    if (c.command == "solve") return cmd_solve(c, out);
    if (c.command == "frontier") return cmd_frontier(c, out);
    if (c.command == "apl") return cmd_apl(c, out);
    if (c.command == "backtest") return cmd_backtest(c, out);
    return cmd_oracle_check(c, out);
  } catch (const ConfigError& e) {
    std::istringstream lines(e.what());
    std::string line;
    while (std::getline(lines, line)) std::cerr << "config error: " << line << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
