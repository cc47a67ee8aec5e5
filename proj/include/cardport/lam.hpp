/**
 * @file lam.hpp
 * @brief Limited Asset Markowitz solver.
 *
 * The return constraint is moved into the objective as a quadratic penalty,
 * which on the simplex is again a quadratic form x'Qx. Supports are then grown
 * one asset at a time (the Increasing Set search): each candidate face I is
 * scored by the closed-form face minimizer, faces whose minimizer is interior
 * and PD are kept, and a per-level beam bounds the work. Faces whose
 * minimizer breaks the holding bounds go to an overflow ledger that is later
 * resolved with a bounded QP. Finally the best supports are re-solved exactly
 * with the return constraint as an equality.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cardport/linalg.hpp"
#include "cardport/market_data.hpp"
#include "cardport/mv.hpp"
#include "cardport/portfolio.hpp"

namespace cardport {

struct LimitedAssetSpec {
  int k = 1;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  IndexSet preassigned;

  static LimitedAssetSpec uniform(Eigen::Index n, int k, double lower = 0.01, double upper = 1.0,
                                  IndexSet preassigned = {}) {
    LimitedAssetSpec s;
    s.k = k;
    s.lower = Eigen::VectorXd::Constant(n, lower);
    s.upper = Eigen::VectorXd::Constant(n, upper);
    s.preassigned = std::move(preassigned);
    return s;
  }

  Eigen::Index assets() const { return lower.size(); }

  /// Throws std::invalid_argument when a range invariant is broken.
  void validate(Eigen::Index n) const {
    if (lower.size() != n || upper.size() != n) {
      throw std::invalid_argument("LimitedAssetSpec: bound vectors must have length n");
    }
    if (k < 1 || k > n) throw std::invalid_argument("LimitedAssetSpec: K must lie in [1, n]");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(lower(i) >= 0.0 && lower(i) <= upper(i) && upper(i) <= 1.0)) {
        throw std::invalid_argument("LimitedAssetSpec: need 0 <= lower <= upper <= 1 for asset " +
                                    std::to_string(i));
      }
    }
    if (static_cast<int>(preassigned.size()) > k) {
      throw std::invalid_argument("LimitedAssetSpec: more pre-assigned assets than K");
    }
    if (!preassigned.empty()) detail::check_index_set(preassigned, n);
  }

  bool bounds_trivial() const {
    return (lower.array() == 0.0).all() && (upper.array() == 1.0).all();
  }

  /**
   * Cheap necessary condition for a feasible support: the pre-assigned
   * lower bounds fit in the budget and the K largest upper bounds that can
   * be added reach it.
   */
  bool may_be_feasible() const {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> others;
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      if (std::binary_search(preassigned.begin(), preassigned.end(), static_cast<int>(i))) {
        lo += lower(i);
        hi += upper(i);
      } else {
        others.push_back(upper(i));
      }
    }
    std::sort(others.rbegin(), others.rend());
    const std::size_t extra = static_cast<std::size_t>(k) - preassigned.size();
    for (std::size_t a = 0; a < std::min(extra, others.size()); ++a) hi += others[a];
    return lo <= 1.0 + 1e-12 && hi >= 1.0 - 1e-12;
  }
};

struct StqpInstance {
  SymMatrix q;
  double penalty = 0.0;
  double rho = 0.0;
};

/// Q with x'Qx = x'Px + 2 q'x for every x on the simplex hyperplane.
inline SymMatrix homogenize(const SymMatrix& p, const Eigen::VectorXd& q) {
  const Eigen::VectorXd e = Eigen::VectorXd::Ones(p.size());
  return SymMatrix(p.dense() + e * q.transpose() + q * e.transpose());
}

/// Q = Sigma + M (mu - rho e)(mu - rho e)'.
inline StqpInstance build_stqp(const MarketModel& m, double rho, double penalty) {
  if (!(penalty >= 0.0) || !std::isfinite(penalty)) {
    throw std::invalid_argument("build_stqp: penalty must be finite and nonnegative");
  }
  const Eigen::VectorXd v = m.mu.array() - rho;
  return {SymMatrix(m.sigma.dense() + penalty * v * v.transpose()), penalty, rho};
}

inline constexpr int kUnlimitedBeam = 0;
inline constexpr double kBoundTolerance = 1e-9;

/// One face I with its closed-form minimizer.
struct FaceRecord {
  IndexSet set;
  double value = -kInf;  // w(I) = 1/(e'Q_I^{-1}e) when pd, -inf otherwise
  Eigen::VectorXd x;     // minimizer over sum(x_I) = 1, ordered like `set`
  bool pd = false;
  bool interior = false;
  bool in_bounds = false;
};

struct LevelTrace {
  int level = 0;
  int kept = 0;
  int overflow = 0;
  double min = kInf;
};

struct Incumbent {
  IndexSet set;
  Eigen::VectorXd x;  // full length n
  double value = kInf;
};

struct BeamState {
  int level = 0;
  std::vector<FaceRecord> families;  // retained sets of size `level`
  std::vector<FaceRecord> overflow;  // every retained face that broke a bound
  std::vector<FaceRecord> pool;      // evaluated faces kept for exact refinement
  std::vector<double> min_by_level;  // MIN(j) at index j; +inf before the start level
  std::optional<Incumbent> incumbent;
  std::vector<LevelTrace> trace;
  int levels_executed = 0;
  bool truncated = false;  // the beam discarded at least one candidate
  bool infeasible = false;

  double min_k() const { return min_by_level.empty() ? kInf : min_by_level.back(); }

  std::string trace_text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& t : trace) {
      os << "LEVEL " << t.level << " kept=" << t.kept << " overflow=" << t.overflow
         << " MIN=" << t.min << '\n';
    }
    return os.str();
  }
};

namespace detail {

inline FaceRecord evaluate_face(const SymMatrix& q, const LimitedAssetSpec& spec, IndexSet set) {
  Eigen::MatrixXd qi = q.principal(set);
  const FaceResult f = detail::face_from_principal(qi, std::move(set), kInteriorTolerance);
  FaceRecord r;
  r.set = f.face;
  r.pd = f.pd;
  if (!f.pd) return r;
  r.value = f.value;
  r.x = f.minimizer;
  r.interior = f.interior;
  r.in_bounds = true;
  for (std::size_t a = 0; a < r.set.size(); ++a) {
    const int i = r.set[a];
    const double xi = r.x(static_cast<Eigen::Index>(a));
    if (xi < spec.lower(i) - kBoundTolerance || xi > spec.upper(i) + kBoundTolerance) {
      r.in_bounds = false;
      break;
    }
  }
  return r;
}

inline double lower_sum(const LimitedAssetSpec& spec, const IndexSet& s) {
  double t = 0.0;
  for (int i : s) t += spec.lower(i);
  return t;
}

inline Eigen::VectorXd scatter(const IndexSet& set, const Eigen::VectorXd& xi, Eigen::Index n) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (std::size_t a = 0; a < set.size(); ++a) x(set[a]) = xi(static_cast<Eigen::Index>(a));
  return x;
}

inline bool by_value_then_set(const FaceRecord& a, const FaceRecord& b) {
  if (a.value != b.value) return a.value < b.value;
  return a.set < b.set;
}

}  // namespace detail

/**
 * Level-wise support search. With a finite beam only PD faces with an
 * interior minimizer are retained, at most `beam_width` per level by w(I).
 * With kUnlimitedBeam every face whose lower bounds fit in the budget is
 * retained and recorded for refinement, which makes the search exhaustive
 * for the bounded problem.
 */
inline BeamState increasing_set(const StqpInstance& inst, const LimitedAssetSpec& spec, int beam_width) {
  const Eigen::Index n = inst.q.size();
  spec.validate(n);
  if (beam_width < 0) throw std::invalid_argument("increasing_set: negative beam width");
  const bool exhaustive = beam_width == kUnlimitedBeam;

  BeamState st;
  st.min_by_level.assign(static_cast<std::size_t>(spec.k) + 1, kInf);
  if (!spec.may_be_feasible()) {
    st.infeasible = true;
    return st;
  }

  auto admit = [&](std::vector<FaceRecord>& cands, int level) {
    std::vector<FaceRecord> kept;
    int overflow = 0;
    double level_min = kInf;
    const FaceRecord* level_best = nullptr;
    for (auto& c : cands) {
      const bool budget_ok = detail::lower_sum(spec, c.set) <= 1.0 + kBoundTolerance;
      if (exhaustive && budget_ok) st.pool.push_back(c);
      if (!c.pd || !c.interior) {
        if (exhaustive && budget_ok) kept.push_back(c);
        continue;
      }
      if (!exhaustive) st.pool.push_back(c);
      kept.push_back(c);
    }
    std::sort(kept.begin(), kept.end(), detail::by_value_then_set);
    if (!exhaustive && static_cast<int>(kept.size()) > beam_width) {
      kept.resize(static_cast<std::size_t>(beam_width));
      st.truncated = true;
    }
    for (const auto& c : kept) {
      if (!c.pd || !c.interior) continue;
      if (c.in_bounds) {
        if (c.value < level_min) {
          level_min = c.value;
          level_best = &c;
        }
      } else {
        st.overflow.push_back(c);
        ++overflow;
      }
    }
    const double prev = level > 1 ? st.min_by_level[static_cast<std::size_t>(level) - 1] : kInf;
    double cur = prev;
    if (level_best && level_min < prev) {
      cur = level_min;
      st.incumbent = Incumbent{level_best->set, detail::scatter(level_best->set, level_best->x, n), level_min};
    }
    st.min_by_level[static_cast<std::size_t>(level)] = cur;
    st.trace.push_back({level, static_cast<int>(kept.size()), overflow, cur});
    st.families = std::move(kept);
    st.level = level;
    ++st.levels_executed;
  };

  std::vector<FaceRecord> start;
  int level = 1;
  if (spec.preassigned.empty()) {
    for (int i = 0; i < n; ++i) start.push_back(detail::evaluate_face(inst.q, spec, {i}));
  } else {
    level = static_cast<int>(spec.preassigned.size());
    start.push_back(detail::evaluate_face(inst.q, spec, spec.preassigned));
  }
  admit(start, level);

  while (st.level < spec.k) {
    std::vector<IndexSet> keys;
    for (const auto& fam : st.families) {
      for (int k = 0; k < n; ++k) {
        if (std::binary_search(fam.set.begin(), fam.set.end(), k)) continue;
        IndexSet s = fam.set;
        s.insert(std::upper_bound(s.begin(), s.end(), k), k);
        keys.push_back(std::move(s));
      }
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    if (keys.empty()) break;
    std::vector<FaceRecord> cands;
    cands.reserve(keys.size());
    for (auto& s : keys) cands.push_back(detail::evaluate_face(inst.q, spec, std::move(s)));
    const int prev_level = st.level;
    admit(cands, prev_level + 1);
    if (st.families.empty()) break;
  }
  for (int j = st.level + 1; j <= spec.k; ++j) {
    st.min_by_level[static_cast<std::size_t>(j)] = st.min_by_level[static_cast<std::size_t>(j) - 1];
  }
  return st;
}

namespace detail {

inline QpProblem face_qp(const SymMatrix& q, const LimitedAssetSpec& spec, const IndexSet& set) {
  const auto k = static_cast<Eigen::Index>(set.size());
  QpProblem p;
  p.q = q.submatrix(set);
  p.lin = Eigen::VectorXd::Zero(k);
  p.a_eq = Eigen::MatrixXd::Ones(1, k);
  p.b_eq = Eigen::VectorXd::Ones(1);
  p.lower.resize(k);
  p.upper.resize(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    p.lower(a) = spec.lower(set[static_cast<std::size_t>(a)]);
    p.upper(a) = spec.upper(set[static_cast<std::size_t>(a)]);
  }
  return p;
}

}  // namespace detail

/**
 * Resolves the overflow ledger: every face whose unconstrained value beats
 * the incumbent is re-solved with its holding bounds. Returns the improved
 * incumbent (unchanged when nothing beats it).
 */
inline std::optional<Incumbent> overflow_resolve(const BeamState& state, const StqpInstance& inst,
                                                 const LimitedAssetSpec& spec) {
  std::optional<Incumbent> best = state.incumbent;
  const Eigen::Index n = inst.q.size();
  for (const auto& f : state.overflow) {
    const double bar = best ? best->value : kInf;
    if (f.value >= bar) continue;
    const QpResult r = constrained_qp(detail::face_qp(inst.q, spec, f.set));
    if (r.status != QpStatus::Optimal) continue;
    if (r.value < bar) best = Incumbent{f.set, detail::scatter(f.set, r.x, n), r.value};
  }
  return best;
}

struct LamConfig {
  int beam_width = 400;
  std::optional<double> penalty;  // overrides the adaptive starting M
  int max_escalations = 6;
  double escalation_tol = 1e-6;
  double return_tol = 1e-7;
  std::optional<ReturnRange> range;  // reused across a sweep when given
};

struct LamResult {
  PortfolioSolution solution;
  double penalty = 0.0;
  int escalations = 0;
  int levels_executed = 0;
  int refinements = 0;  // exact QPs solved during refinement
  std::string trace;
};

namespace detail {

struct ExactFace {
  bool feasible = false;
  Eigen::VectorXd x;  // full length n
  double value = kInf;
};

inline ExactFace solve_exact_face(const MarketModel& m, double rho, const LimitedAssetSpec& spec,
                                  const IndexSet& set) {
  const auto k = static_cast<Eigen::Index>(set.size());
  QpProblem p = face_qp(m.sigma, spec, set);
  p.a_eq.conservativeResize(2, k);
  for (Eigen::Index a = 0; a < k; ++a) p.a_eq(1, a) = m.mu(set[static_cast<std::size_t>(a)]);
  p.b_eq = Eigen::Vector2d(1.0, rho);
  const QpResult r = constrained_qp(p);
  ExactFace out;
  if (r.status != QpStatus::Optimal) return out;
  out.feasible = true;
  out.x = scatter(set, r.x, m.assets());
  out.value = m.sigma.quadratic_form(out.x);
  return out;
}

inline double starting_penalty(const MarketModel& m, const ReturnRange& range) {
  const double spread = range.rho_max - range.rho_min;
  return 1e3 * m.sigma.max_diagonal() / std::max(1e-12, spread * spread);
}

}  // namespace detail

/**
 * Limited Asset Markowitz at target return rho. The penalty grows tenfold
 * while the penalized winner misses rho by more than escalation_tol; the
 * refinement then solves the exact problem on pooled supports in order of
 * their lower bound w(I) until no remaining bound can beat the best value.
 */
inline LamResult lam_solve_detailed(const MarketModel& m, double rho, const LimitedAssetSpec& spec,
                                    const LamConfig& cfg = {}) {
  const Eigen::Index n = m.assets();
  spec.validate(n);
  LamResult out;
  out.solution = PortfolioSolution::infeasible(ModelTag::Lam, n);
  const ReturnRange range = cfg.range ? *cfg.range : return_range(m);
  double penalty = cfg.penalty ? *cfg.penalty : detail::starting_penalty(m, range);

  BeamState st;
  std::optional<Incumbent> winner;
  for (int round = 0;; ++round) {
    const StqpInstance inst = build_stqp(m, rho, penalty);
    st = increasing_set(inst, spec, cfg.beam_width);
    winner = overflow_resolve(st, inst, spec);
    out.levels_executed = st.levels_executed;
    out.trace = st.trace_text();
    if (st.infeasible || !winner) break;
    if (std::abs(m.mu.dot(winner->x) - rho) <= cfg.escalation_tol || round >= cfg.max_escalations) break;
    penalty *= 10.0;
    ++out.escalations;
  }
  out.penalty = penalty;
  if (st.infeasible) return out;

  std::vector<const FaceRecord*> order;
  order.reserve(st.pool.size());
  for (const auto& f : st.pool) order.push_back(&f);
  std::sort(order.begin(), order.end(), [](const FaceRecord* a, const FaceRecord* b) {
    return detail::by_value_then_set(*a, *b);
  });
  if (winner) {
    // The penalized winner's support goes first so it seeds the bound.
    auto it = std::find_if(order.begin(), order.end(), [&](const FaceRecord* f) { return f->set == winner->set; });
    if (it != order.end()) std::rotate(order.begin(), it, it + 1);
  }
  std::optional<detail::ExactFace> best;
  for (const FaceRecord* f : order) {
    if (best && f->value >= best->value) break;
    const detail::ExactFace e = detail::solve_exact_face(m, rho, spec, f->set);
    ++out.refinements;
    if (e.feasible && (!best || e.value < best->value)) best = e;
  }

  const bool exhaustive = cfg.beam_width == kUnlimitedBeam;
  if (best) {
    const double miss = std::abs(m.mu.dot(best->x) - rho);
    SolveStatus status = exhaustive ? SolveStatus::Optimal : SolveStatus::Heuristic;
    if (miss > cfg.return_tol) status = SolveStatus::ToleranceLimited;
    out.solution = finish_solution(best->x, m.mu, best->value, status, ModelTag::Lam);
  } else if (winner && !exhaustive) {
    out.solution = finish_solution(winner->x, m.mu, m.sigma.quadratic_form(winner->x),
                                   SolveStatus::ToleranceLimited, ModelTag::Lam);
  }
  return out;
}

inline PortfolioSolution lam_solve(const MarketModel& m, double rho, const LimitedAssetSpec& spec,
                                   const LamConfig& cfg = {}) {
  return lam_solve_detailed(m, rho, spec, cfg).solution;
}

}  // namespace cardport
