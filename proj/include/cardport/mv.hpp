#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cardport/linalg.hpp"
#include "cardport/market_data.hpp"
#include "cardport/portfolio.hpp"

namespace cardport {

struct ReturnRange {
  double rho_min = 0.0;
  double rho_max = 0.0;
  int argmax = 0;  // lowest index attaining rho_max
  Eigen::VectorXd gmv;
};

namespace detail {

inline QpProblem simplex_qp(const MarketModel& m) {
  const Eigen::Index n = m.assets();
  QpProblem p;
  p.q = m.sigma;
  p.lin = Eigen::VectorXd::Zero(n);
  p.a_eq = Eigen::MatrixXd::Ones(1, n);
  p.b_eq = Eigen::VectorXd::Ones(1);
  p.lower = Eigen::VectorXd::Zero(n);
  p.upper = Eigen::VectorXd::Ones(n);
  return p;
}

// Slack below which a target return counts as lying on the range boundary.
inline double range_slack(const MarketModel& m) {
  return 1e-12 * std::max(1.0, m.mu.cwiseAbs().maxCoeff());
}

}  // namespace detail

inline ReturnRange return_range(const MarketModel& m) {
  ReturnRange r;
  Eigen::Index arg = 0;
  r.rho_max = m.mu.maxCoeff(&arg);
  r.argmax = static_cast<int>(arg);
  const QpResult gmv = constrained_qp(detail::simplex_qp(m));
  if (gmv.status != QpStatus::Optimal) {
    throw std::runtime_error("return_range: minimum-variance problem failed");
  }
  r.gmv = gmv.x;
  r.rho_min = std::min(m.mu.dot(gmv.x), r.rho_max);
  return r;
}

enum class ReturnConstraint { Equality, AtLeast };

/**
 * Minimum-variance long-only portfolio with return rho. Targets below the
 * minimum-variance return or above max(mu) are reported infeasible.
 * With ReturnConstraint::AtLeast the return row becomes mu'x >= rho.
 */
inline PortfolioSolution solve_mv(const MarketModel& m, double rho, const ReturnRange& range,
                                  ReturnConstraint kind = ReturnConstraint::Equality) {
  const Eigen::Index n = m.assets();
  const double slack = detail::range_slack(m);
  if (rho < range.rho_min - slack || rho > range.rho_max + slack) {
    return PortfolioSolution::infeasible(ModelTag::Mv, n);
  }
  QpProblem p = detail::simplex_qp(m);
  if (kind == ReturnConstraint::Equality) {
    p.a_eq.conservativeResize(2, n);
    p.a_eq.row(1) = m.mu.transpose();
    p.b_eq = Eigen::Vector2d(1.0, rho);
  } else {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n + 1, n + 1);
    q.topLeftCorner(n, n) = m.sigma.dense();
    p.q = SymMatrix(q);
    p.lin = Eigen::VectorXd::Zero(n + 1);
    p.a_eq = Eigen::MatrixXd::Zero(2, n + 1);
    p.a_eq.row(0).head(n).setOnes();
    p.a_eq.row(1).head(n) = m.mu.transpose();
    p.a_eq(1, n) = -1.0;
    p.b_eq = Eigen::Vector2d(1.0, rho);
    p.lower = Eigen::VectorXd::Zero(n + 1);
    p.upper = Eigen::VectorXd::Ones(n + 1);
    p.upper(n) = std::max(0.0, range.rho_max - rho) + 1.0;
  }
  const QpResult r = constrained_qp(p);
  if (r.status == QpStatus::Infeasible) return PortfolioSolution::infeasible(ModelTag::Mv, n);
  const Eigen::VectorXd w = r.x.head(n);
  const SolveStatus st = r.status == QpStatus::Optimal ? SolveStatus::Optimal : SolveStatus::ToleranceLimited;
  return finish_solution(w, m.mu, variance(m.sigma, w), st, ModelTag::Mv);
}

inline PortfolioSolution solve_mv(const MarketModel& m, double rho) {
  return solve_mv(m, rho, return_range(m));
}

inline FrontierPoint to_point(double rho, const PortfolioSolution& s) {
  FrontierPoint p;
  p.rho = rho;
  p.status = s.status;
  if (s.status != SolveStatus::Infeasible) {
    p.value = s.objective;
    p.weights = s.weights;
    p.n_support = static_cast<int>(s.support.size());
  }
  return p;
}

/// phi on `grid_size` equally spaced returns spanning [rho_min, rho_max].
inline FrontierCurve mv_frontier(const MarketModel& m, int grid_size) {
  if (grid_size < 2) throw std::invalid_argument("mv_frontier: grid_size must be at least 2");
  const ReturnRange range = return_range(m);
  FrontierCurve c;
  c.model = ModelTag::Mv;
  c.grid = {grid_size, range.rho_min, range.rho_max};
  for (int j = 0; j < grid_size; ++j) {
    const double rho = c.grid.at(j);
    c.points.push_back(to_point(rho, solve_mv(m, rho, range)));
  }
  return c;
}

}  // namespace cardport
