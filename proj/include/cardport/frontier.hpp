#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cardport/lam.hpp"
#include "cardport/milp.hpp"
#include "cardport/mv.hpp"
#include "cardport/portfolio.hpp"

namespace cardport {

struct SolverConfig {
  LamConfig lam;
  BnbConfig bnb;
  double epsilon = 0.05;
};

/// Dispatches one solve to the solver matching `model`.
inline PortfolioSolution solve_model(const MarketModel& m, double rho, ModelTag model,
                                     const std::optional<LimitedAssetSpec>& spec, const SolverConfig& cfg,
                                     const ReturnRange& range) {
  if (is_limited(model) && !spec) throw std::invalid_argument("limited-asset model needs a LimitedAssetSpec");
  switch (model) {
    case ModelTag::Mv: return solve_mv(m, rho, range);
    case ModelTag::Lam: {
      LamConfig lc = cfg.lam;
      lc.range = range;
      return lam_solve(m, rho, *spec, lc);
    }
    case ModelTag::Mad: return branch_and_bound(build_mad(m, rho), cfg.bnb).solution;
    case ModelTag::Cvar: return branch_and_bound(build_cvar(m, rho, cfg.epsilon), cfg.bnb).solution;
    case ModelTag::Lamad: return branch_and_bound(build_lamad(m, rho, *spec), cfg.bnb).solution;
    case ModelTag::Lacvar: return branch_and_bound(build_lacvar(m, rho, *spec, cfg.epsilon), cfg.bnb).solution;
  }
  throw std::invalid_argument("solve_model: unknown model");
}

/**
 * Runs `count` independent jobs on up to `threads` workers. Results are
 * stored by index, so the output does not depend on scheduling.
 */
template <class Result, class Job>
std::vector<Result> run_indexed(int count, int threads, Job job) {
  std::vector<Result> out(static_cast<std::size_t>(count));
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int j = 0; j < count; ++j) out[static_cast<std::size_t>(j)] = job(j);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int j = next++; j < count; j = next++) out[static_cast<std::size_t>(j)] = job(j);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

/**
 * One solve per equally spaced return in [rho_min, rho_max]; infeasible
 * points stay in the curve with their status.
 */
inline FrontierCurve sweep(const MarketModel& m, const std::optional<LimitedAssetSpec>& spec, ModelTag model,
                           int grid_size, const SolverConfig& cfg = {}, int threads = 1,
                           std::optional<GridSpec> grid = std::nullopt) {
  if (grid_size < 2) throw std::invalid_argument("sweep: grid_size must be at least 2");
  const ReturnRange range = return_range(m);
  FrontierCurve c;
  c.model = model;
  c.k = spec && is_limited(model) ? spec->k : 0;
  c.grid = grid ? *grid : GridSpec{grid_size, range.rho_min, range.rho_max};
  if (c.grid.count != grid_size) throw std::invalid_argument("sweep: grid size mismatch");
  c.points = run_indexed<FrontierPoint>(grid_size, threads, [&](int j) {
    const double rho = c.grid.at(j);
    return to_point(rho, solve_model(m, rho, model, spec, cfg, range));
  });
  return c;
}

/// Running minimum from the right over feasible points.
inline FrontierCurve lower_envelope(const FrontierCurve& c) {
  FrontierCurve out = c;
  const FrontierPoint* best = nullptr;
  for (std::size_t a = c.points.size(); a-- > 0;) {
    const FrontierPoint& p = c.points[a];
    if (p.feasible() && (!best || p.value < best->value)) best = &p;
    FrontierPoint& q = out.points[a];
    if (best) {
      q.value = best->value;
      q.weights = best->weights;
      q.status = best->status;
      q.n_support = best->n_support;
    }
  }
  if (!best) throw std::domain_error("lower_envelope: every point is infeasible");
  return out;
}

/// Feasible points not dominated by a point with higher return and no more risk.
inline std::vector<FrontierPoint> efficient_points(const FrontierCurve& c) {
  std::vector<FrontierPoint> kept;
  double right_min = kInf;
  for (std::size_t a = c.points.size(); a-- > 0;) {
    const FrontierPoint& p = c.points[a];
    if (!p.feasible()) continue;
    if (p.value < right_min) kept.push_back(p);
    right_min = std::min(right_min, p.value);
  }
  std::reverse(kept.begin(), kept.end());
  return kept;
}

enum class AplVariant { Apl1, Apl2 };

struct AplReport {
  AplVariant variant = AplVariant::Apl1;
  double value = 0.0;
  int excluded = 0;
  int k = 0;

  std::string line(const std::string& dataset) const {
    std::ostringstream os;
    os << "APL" << (variant == AplVariant::Apl1 ? 1 : 2) << ' ' << dataset << " K=" << k
       << " value=" << std::setprecision(10) << value << " excluded=" << excluded;
    return os.str();
  }
};

/**
 * Sum over the grid of (phi_K - phi)/phi, using the lower envelope of the
 * constrained curve for APL2. No averaging. Points where either curve is
 * infeasible are skipped and counted.
 */
inline AplReport apl(const FrontierCurve& constrained, const FrontierCurve& unconstrained, AplVariant variant) {
  if (constrained.points.size() != unconstrained.points.size()) {
    throw std::invalid_argument("apl: curves have different grid sizes");
  }
  for (std::size_t a = 0; a < constrained.points.size(); ++a) {
    const double r1 = constrained.points[a].rho;
    const double r2 = unconstrained.points[a].rho;
    if (std::abs(r1 - r2) > 1e-12 * std::max(1.0, std::abs(r2))) {
      throw std::invalid_argument("apl: curves are on different return grids");
    }
  }
  const FrontierCurve c = variant == AplVariant::Apl2 ? lower_envelope(constrained) : constrained;
  AplReport r;
  r.variant = variant;
  r.k = constrained.k;
  for (std::size_t a = 0; a < c.points.size(); ++a) {
    const FrontierPoint& pk = c.points[a];
    const FrontierPoint& p0 = unconstrained.points[a];
    if (!pk.feasible() || !p0.feasible() || !(p0.value > 0.0)) {
      ++r.excluded;
      continue;
    }
    r.value += (pk.value - p0.value) / p0.value;
  }
  return r;
}

namespace detail {

inline void put_number(std::ostream& os, double v) {
  if (std::isfinite(v)) os << v;
}

}  // namespace detail

/// `rho,risk,n_support,<asset weights>,status,envelope_value`.
inline void write_frontier_csv(std::ostream& os, const FrontierCurve& c, const std::vector<std::string>& names,
                               const FrontierCurve* envelope = nullptr) {
  os << std::setprecision(17);
  os << "rho,risk,n_support";
  for (const auto& nm : names) os << ',' << nm;
  os << ",status,envelope_value\n";
  for (std::size_t a = 0; a < c.points.size(); ++a) {
    const FrontierPoint& p = c.points[a];
    os << p.rho << ',';
    if (p.feasible()) detail::put_number(os, p.value);
    os << ',' << p.n_support;
    for (std::size_t i = 0; i < names.size(); ++i) {
      os << ',';
      if (p.feasible() && static_cast<Eigen::Index>(i) < p.weights.size()) os << p.weights(static_cast<Eigen::Index>(i));
    }
    os << ',' << to_string(p.status) << ',';
    if (envelope && envelope->points[a].feasible()) detail::put_number(os, envelope->points[a].value);
    os << '\n';
  }
}

inline void write_points_csv(std::ostream& os, const std::vector<FrontierPoint>& pts) {
  os << std::setprecision(17) << "rho,risk,n_support\n";
  for (const auto& p : pts) os << p.rho << ',' << p.value << ',' << p.n_support << '\n';
}

}  // namespace cardport
