#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cardport/lam.hpp"
#include "cardport/linalg.hpp"
#include "cardport/lp.hpp"
#include "cardport/portfolio.hpp"

namespace cardport {

struct SubsetLogEntry {
  IndexSet set;
  double value = kInf;
  bool feasible = false;
};

struct OracleReport {
  PortfolioSolution best;
  long long subsets_evaluated = 0;
  std::vector<SubsetLogEntry> log;

  /// `subset,value,status` with the subset written as space-separated indices.
  void write_csv(std::ostream& os) const {
    os << "subset,value,status\n" << std::setprecision(17);
    for (const auto& e : log) {
      for (std::size_t a = 0; a < e.set.size(); ++a) os << (a ? " " : "") << e.set[a];
      os << ',';
      if (e.feasible) os << e.value;
      os << ',' << (e.feasible ? "feasible" : "infeasible") << '\n';
    }
  }
};

struct OracleOptions {
  double epsilon = 0.05;  // CVaR level for lacvar
  bool keep_log = false;
};

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

/// Number of supports I with J subset of I and |I| <= K.
inline long long oracle_subset_count(int n, int k, int j) {
  double t = 0.0;
  for (int s = j; s <= k; ++s) t += binomial(n - j, s - j);
  return static_cast<long long>(t);
}

namespace detail {

struct FixedSupport {
  bool feasible = false;
  double value = kInf;
  Eigen::VectorXd x;  // full length n
};

inline FixedSupport oracle_lam(const MarketModel& m, double rho, const LimitedAssetSpec& spec,
                               const IndexSet& set) {
  const auto k = static_cast<Eigen::Index>(set.size());
  QpProblem p;
  p.q = m.sigma.submatrix(set);
  p.lin = Eigen::VectorXd::Zero(k);
  p.a_eq.resize(2, k);
  p.lower.resize(k);
  p.upper.resize(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const int i = set[static_cast<std::size_t>(a)];
    p.a_eq(0, a) = 1.0;
    p.a_eq(1, a) = m.mu(i);
    p.lower(a) = spec.lower(i);
    p.upper(a) = spec.upper(i);
  }
  p.b_eq = Eigen::Vector2d(1.0, rho);
  const QpResult r = constrained_qp(p);
  FixedSupport out;
  if (r.status != QpStatus::Optimal) return out;
  out.x = Eigen::VectorXd::Zero(m.assets());
  for (Eigen::Index a = 0; a < k; ++a) out.x(set[static_cast<std::size_t>(a)]) = r.x(a);
  out.value = m.sigma.quadratic_form(out.x);
  out.feasible = true;
  return out;
}

inline FixedSupport oracle_linear(const MarketModel& m, double rho, const LimitedAssetSpec& spec,
                                  const IndexSet& set, ModelTag model, double eps) {
  const Eigen::MatrixXd& r = m.scenarios.returns;
  const auto t = r.rows();
  const auto k = static_cast<int>(set.size());
  const bool cvar_model = base_model(model) == ModelTag::Cvar;
  LpProblem lp;
  for (int a = 0; a < k; ++a) lp.add_variable(0.0, spec.lower(set[a]), spec.upper(set[a]));
  const double dcost = cvar_model ? 1.0 / (eps * static_cast<double>(t)) : 1.0 / static_cast<double>(t);
  for (Eigen::Index s = 0; s < t; ++s) lp.add_variable(dcost, 0.0, kInf);
  int zeta = -1;
  if (cvar_model) zeta = lp.add_variable(1.0, -kInf, kInf);
  for (Eigen::Index s = 0; s < t; ++s) {
    const int d = k + static_cast<int>(s);
    std::vector<std::pair<int, double>> dev;
    for (int a = 0; a < k; ++a) {
      const int i = set[a];
      dev.emplace_back(a, cvar_model ? -r(s, i) : r(s, i) - m.mu(i));
    }
    if (cvar_model) {
      auto row = dev;
      row.emplace_back(d, -1.0);
      row.emplace_back(zeta, -1.0);
      lp.add_row(row, RowSense::LessEqual, 0.0);
    } else {
      auto up = dev;
      up.emplace_back(d, -1.0);
      lp.add_row(up, RowSense::LessEqual, 0.0);
      std::vector<std::pair<int, double>> down{{d, 1.0}};
      for (const auto& [col, c] : dev) down.emplace_back(col, c);
      lp.add_row(down, RowSense::GreaterEqual, 0.0);
    }
  }
  std::vector<std::pair<int, double>> budget, ret;
  for (int a = 0; a < k; ++a) {
    budget.emplace_back(a, 1.0);
    ret.emplace_back(a, m.mu(set[a]));
  }
  lp.add_row(budget, RowSense::Equal, 1.0);
  lp.add_row(ret, RowSense::Equal, rho);
  const LpResult res = solve_lp(lp);
  FixedSupport out;
  if (res.status != LpStatus::Optimal) return out;
  out.feasible = true;
  out.value = res.value;
  out.x = Eigen::VectorXd::Zero(m.assets());
  for (int a = 0; a < k; ++a) out.x(set[a]) = res.x(a);
  return out;
}

}  // namespace detail

/**
 * Exhaustive reference solve: every support containing the pre-assigned set
 * with at most K assets is fixed in turn and the convex subproblem solved.
 * Refuses (std::length_error) when n > 25 or C(n, K) > 2e6.
 */
inline OracleReport enumerate_exact(const MarketModel& m, double rho, const LimitedAssetSpec& spec,
                                    ModelTag model, const OracleOptions& opt = {}) {
  const auto n = static_cast<int>(m.assets());
  spec.validate(n);
  if (n > 25 || binomial(n, spec.k) > 2e6) {
    throw std::length_error("enumerate_exact: instance exceeds the enumeration guard");
  }
  const ModelTag tag = is_limited(model) ? model : model == ModelTag::Mv ? ModelTag::Lam
                                                 : model == ModelTag::Mad ? ModelTag::Lamad
                                                                          : ModelTag::Lacvar;
  OracleReport rep;
  rep.best = PortfolioSolution::infeasible(tag, n);
  std::optional<detail::FixedSupport> best;

  std::vector<int> free_assets;
  for (int i = 0; i < n; ++i) {
    if (!std::binary_search(spec.preassigned.begin(), spec.preassigned.end(), i)) free_assets.push_back(i);
  }
  const int j = static_cast<int>(spec.preassigned.size());
  const int f = static_cast<int>(free_assets.size());
  for (int size = j; size <= spec.k; ++size) {
    const int extra = size - j;
    if (extra > f) break;
    std::vector<int> pick(static_cast<std::size_t>(extra));
    for (int a = 0; a < extra; ++a) pick[a] = a;
    while (true) {
      IndexSet set = spec.preassigned;
      for (int a : pick) set.push_back(free_assets[a]);
      std::sort(set.begin(), set.end());
      detail::FixedSupport cur;
      if (!set.empty()) {
        cur = base_model(tag) == ModelTag::Mv ? detail::oracle_lam(m, rho, spec, set)
                                              : detail::oracle_linear(m, rho, spec, set, tag, opt.epsilon);
      }
      ++rep.subsets_evaluated;
      if (opt.keep_log) rep.log.push_back({set, cur.value, cur.feasible});
      if (cur.feasible && (!best || cur.value < best->value)) best = cur;
      int pos = extra - 1;
      while (pos >= 0 && pick[pos] == f - extra + pos) --pos;
      if (pos < 0) break;
      ++pick[pos];
      for (int a = pos + 1; a < extra; ++a) pick[a] = pick[a - 1] + 1;
    }
  }
  if (best) rep.best = finish_solution(best->x, m.mu, best->value, SolveStatus::Optimal, tag);
  return rep;
}

}  // namespace cardport
