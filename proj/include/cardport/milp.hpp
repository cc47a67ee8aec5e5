/**
 * @file milp.hpp
 * @brief Limited Asset MAD and CVaR models as MILPs, solved by best-first
 *        branch-and-bound on the selection binaries over dense LP relaxations.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cardport/lam.hpp"
#include "cardport/lp.hpp"
#include "cardport/market_data.hpp"
#include "cardport/portfolio.hpp"

namespace cardport {

struct MilpInstance {
  LpProblem lp;                  // binaries appear relaxed to [0, 1]
  std::vector<int> weight_cols;  // x_i
  std::vector<int> binaries;     // y_i, empty for the unconstrained LPs
  ModelTag model = ModelTag::Lamad;
  Eigen::VectorXd mu;
  int cardinality = 0;
  int continuous_count = 0;
  int binary_count = 0;
  int constraint_count = 0;  // a two-sided linking pair counts once
};

struct BnbConfig {
  double abs_gap_tol = 1e-6;
  long node_limit = 100000;
  double integrality_tol = 1e-6;
  bool log = false;

  static BnbConfig approximate() {
    BnbConfig c;
    c.abs_gap_tol = 1e-4;
    return c;
  }
};

namespace detail {

struct LinearModelColumns {
  int t = 0;
  int first_d = 0;
  int zeta = -1;
};

// Shared part of every linear model: x columns, scenario rows, budget and return.
inline LinearModelColumns add_scenario_block(MilpInstance& inst, const MarketModel& m, double rho,
                                             bool cvar_model, double eps) {
  const Eigen::MatrixXd& r = m.scenarios.returns;
  const auto n = static_cast<int>(m.assets());
  const auto t = static_cast<int>(r.rows());
  if (t < 1) throw std::invalid_argument("linear risk model needs return scenarios");
  if (r.cols() != n) throw std::invalid_argument("scenario matrix does not match asset count");
  if (cvar_model && !(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon must be in (0, 1]");
  LpProblem& lp = inst.lp;
  LinearModelColumns cols;
  cols.t = t;
  for (int i = 0; i < n; ++i) inst.weight_cols.push_back(lp.add_variable(0.0, 0.0, 1.0));
  const double dcost = cvar_model ? 1.0 / (eps * t) : 1.0 / t;
  cols.first_d = lp.num_variables();
  for (int s = 0; s < t; ++s) lp.add_variable(dcost, 0.0, kInf);
  if (cvar_model) cols.zeta = lp.add_variable(1.0, -kInf, kInf);
  for (int s = 0; s < t; ++s) {
    std::vector<std::pair<int, double>> dev;
    for (int i = 0; i < n; ++i) dev.emplace_back(inst.weight_cols[i], cvar_model ? -r(s, i) : r(s, i) - m.mu(i));
    if (cvar_model) {
      dev.emplace_back(cols.first_d + s, -1.0);
      dev.emplace_back(cols.zeta, -1.0);
      lp.add_row(dev, RowSense::LessEqual, 0.0);
    } else {
      auto above = dev;
      above.emplace_back(cols.first_d + s, -1.0);
      lp.add_row(above, RowSense::LessEqual, 0.0);
      auto below = dev;
      below.emplace_back(cols.first_d + s, 1.0);
      lp.add_row(below, RowSense::GreaterEqual, 0.0);
    }
  }
  std::vector<std::pair<int, double>> budget, ret;
  for (int i = 0; i < n; ++i) {
    budget.emplace_back(inst.weight_cols[i], 1.0);
    ret.emplace_back(inst.weight_cols[i], m.mu(i));
  }
  lp.add_row(ret, RowSense::Equal, rho);
  lp.add_row(budget, RowSense::Equal, 1.0);
  inst.mu = m.mu;
  return cols;
}

inline void add_selection(MilpInstance& inst, const LimitedAssetSpec& spec) {
  const auto n = static_cast<int>(inst.weight_cols.size());
  spec.validate(n);
  LpProblem& lp = inst.lp;
  inst.cardinality = spec.k;
  for (int i = 0; i < n; ++i) {
    const bool forced = std::binary_search(spec.preassigned.begin(), spec.preassigned.end(), i);
    inst.binaries.push_back(lp.add_variable(0.0, forced ? 1.0 : 0.0, 1.0));
  }
  std::vector<std::pair<int, double>> card;
  for (int i = 0; i < n; ++i) card.emplace_back(inst.binaries[i], 1.0);
  lp.add_row(card, RowSense::LessEqual, static_cast<double>(spec.k));
  for (int i = 0; i < n; ++i) {
    lp.add_row({{inst.binaries[i], spec.lower(i)}, {inst.weight_cols[i], -1.0}}, RowSense::LessEqual, 0.0);
    lp.add_row({{inst.weight_cols[i], 1.0}, {inst.binaries[i], -spec.upper(i)}}, RowSense::LessEqual, 0.0);
  }
}

}  // namespace detail

/// min zeta + 1/(eps T) sum d_t with d_t >= -r_t'x - zeta, plus selection rows.
inline MilpInstance build_lacvar(const MarketModel& m, double rho, const LimitedAssetSpec& spec, double epsilon) {
  MilpInstance inst;
  inst.model = ModelTag::Lacvar;
  const auto cols = detail::add_scenario_block(inst, m, rho, true, epsilon);
  detail::add_selection(inst, spec);
  const auto n = static_cast<int>(m.assets());
  inst.continuous_count = n + cols.t + 1;
  inst.binary_count = n;
  inst.constraint_count = cols.t + n + 3;
  return inst;
}

/// min 1/T sum d_t with d_t >= |sum (r_ti - mu_i) x_i|, plus selection rows.
inline MilpInstance build_lamad(const MarketModel& m, double rho, const LimitedAssetSpec& spec) {
  MilpInstance inst;
  inst.model = ModelTag::Lamad;
  const auto cols = detail::add_scenario_block(inst, m, rho, false, 1.0);
  detail::add_selection(inst, spec);
  const auto n = static_cast<int>(m.assets());
  inst.continuous_count = n + cols.t;
  inst.binary_count = n;
  inst.constraint_count = n + 2 * cols.t + 3;
  return inst;
}

inline MilpInstance build_cvar(const MarketModel& m, double rho, double epsilon) {
  MilpInstance inst;
  inst.model = ModelTag::Cvar;
  const auto cols = detail::add_scenario_block(inst, m, rho, true, epsilon);
  inst.continuous_count = static_cast<int>(m.assets()) + cols.t + 1;
  inst.constraint_count = cols.t + 2;
  return inst;
}

inline MilpInstance build_mad(const MarketModel& m, double rho) {
  MilpInstance inst;
  inst.model = ModelTag::Mad;
  const auto cols = detail::add_scenario_block(inst, m, rho, false, 1.0);
  inst.continuous_count = static_cast<int>(m.assets()) + cols.t;
  inst.constraint_count = 2 * cols.t + 2;
  return inst;
}

struct BnbResult {
  PortfolioSolution solution;
  long nodes = 0;
  double root_bound = kInf;
  std::string log;
};

namespace detail {

struct BnbNode {
  long id = 0;
  double bound = -kInf;
  std::vector<signed char> fixed;  // -1 free, 0 or 1 fixed
  Eigen::VectorXd x;
};

struct NodeOrder {
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

inline LpResult solve_node(const MilpInstance& inst, const std::vector<signed char>& fixed) {
  LpProblem lp = inst.lp;
  for (std::size_t i = 0; i < inst.binaries.size(); ++i) {
    if (fixed[i] < 0) continue;
    lp.lower(inst.binaries[i]) = fixed[i];
    lp.upper(inst.binaries[i]) = fixed[i];
  }
  return solve_lp(lp);
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

}  // namespace detail

/**
 * Best-first branch-and-bound. Each node's LP relaxation bounds its subtree;
 * the incumbent always comes from an LP re-solved with every binary fixed,
 * so returned weights satisfy the model rows exactly.
 */
inline BnbResult branch_and_bound(const MilpInstance& inst, const BnbConfig& cfg = {}) {
  if (!(cfg.abs_gap_tol > 0.0)) throw std::invalid_argument("branch_and_bound: abs_gap_tol must be positive");
  inst.lp.validate();
  const auto n = static_cast<Eigen::Index>(inst.weight_cols.size());
  const std::size_t nb = inst.binaries.size();
  BnbResult out;
  out.solution = PortfolioSolution::infeasible(inst.model, n);
  std::ostringstream log;

  struct Best {
    double value = kInf;
    Eigen::VectorXd x;
  };
  std::optional<Best> incumbent;

  auto weights_of = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = x(inst.weight_cols[static_cast<std::size_t>(i)]);
    return w;
  };
  auto try_fixing = [&](std::vector<signed char> fixed) {
    const LpResult r = detail::solve_node(inst, fixed);
    if (r.status == LpStatus::Optimal && (!incumbent || r.value < incumbent->value)) {
      incumbent = Best{r.value, r.x};
    }
  };
  // Rounds the node point to a support: the largest weights first, at most K.
  auto round_support = [&](const detail::BnbNode& node) {
    if (nb == 0) return;
    std::vector<signed char> fixed(nb, 0);
    for (std::size_t i = 0; i < nb; ++i) {
      if (node.fixed[i] == 1 || inst.lp.lower(inst.binaries[i]) == 1.0) fixed[i] = 1;
    }
    std::vector<std::size_t> order(nb);
    for (std::size_t i = 0; i < nb; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return node.x(inst.weight_cols[a]) > node.x(inst.weight_cols[b]);
    });
    int used = 0;
    for (std::size_t i = 0; i < nb; ++i) used += fixed[i] == 1;
    for (std::size_t a : order) {
      if (used >= inst.cardinality) break;
      if (fixed[a] == 1 || node.fixed[a] == 0) continue;
      if (node.x(inst.weight_cols[a]) <= cfg.integrality_tol) break;
      fixed[a] = 1;
      ++used;
    }
    try_fixing(std::move(fixed));
  };

  detail::BnbNode root;
  root.fixed.assign(nb, -1);
  {
    const LpResult r = detail::solve_node(inst, root.fixed);
    out.nodes = 1;
    if (r.status != LpStatus::Optimal) {
      if (r.status != LpStatus::Infeasible) out.solution.status = SolveStatus::ToleranceLimited;
      log << "GAP inf\n";
      out.log = log.str();
      return out;
    }
    root.bound = r.value;
    root.x = r.x;
    out.root_bound = r.value;
  }

  std::priority_queue<detail::BnbNode, std::vector<detail::BnbNode>, detail::NodeOrder> open;
  open.push(root);
  long next_id = 1;
  bool hit_limit = false;
  while (!open.empty()) {
    if (incumbent && open.top().bound >= incumbent->value - cfg.abs_gap_tol) break;
    if (out.nodes >= cfg.node_limit) {
      hit_limit = true;
      break;
    }
    detail::BnbNode node = open.top();
    open.pop();

    int branch = -1;
    double best_frac = cfg.integrality_tol;
    for (std::size_t i = 0; i < nb; ++i) {
      const double y = node.x(inst.binaries[i]);
      const double frac = std::min(y - std::floor(y), std::ceil(y) - y);
      if (frac > best_frac) {
        best_frac = frac;
        branch = static_cast<int>(i);
      }
    }
    if (branch < 0) {
      std::vector<signed char> fixed(nb);
      for (std::size_t i = 0; i < nb; ++i) fixed[i] = node.x(inst.binaries[i]) > 0.5 ? 1 : 0;
      try_fixing(std::move(fixed));
    } else {
      round_support(node);
      for (signed char side : {0, 1}) {
        detail::BnbNode child;
        child.id = next_id++;
        child.fixed = node.fixed;
        child.fixed[static_cast<std::size_t>(branch)] = side;
        const LpResult r = detail::solve_node(inst, child.fixed);
        ++out.nodes;
        if (r.status != LpStatus::Optimal) continue;
        child.bound = std::max(r.value, node.bound);
        child.x = r.x;
        if (incumbent && child.bound >= incumbent->value - cfg.abs_gap_tol) continue;
        open.push(std::move(child));
      }
    }
    if (cfg.log) {
      log << "NODE " << node.id << " bound=" << detail::fmt(node.bound)
          << " incumbent=" << (incumbent ? detail::fmt(incumbent->value) : std::string("inf"))
          << " open=" << open.size() << '\n';
    }
  }

  double gap = 0.0;
  if (incumbent && !open.empty()) gap = std::max(0.0, incumbent->value - open.top().bound);
  if (!incumbent) gap = kInf;
  log << "GAP " << detail::fmt(gap) << '\n';
  out.log = log.str();
  if (!incumbent) {
    if (hit_limit) out.solution.status = SolveStatus::ToleranceLimited;
    return out;
  }
  const SolveStatus st = hit_limit && gap > cfg.abs_gap_tol ? SolveStatus::ToleranceLimited : SolveStatus::Optimal;
  out.solution = finish_solution(weights_of(incumbent->x), inst.mu, incumbent->value, st, inst.model);
  out.solution.gap = gap;
  return out;
}

}  // namespace cardport
