#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cardport/common.hpp"
#include "cardport/market_data.hpp"

namespace cardport {

enum class ModelTag { Mv, Lam, Mad, Lamad, Cvar, Lacvar };
enum class SolveStatus { Optimal, Heuristic, Infeasible, ToleranceLimited };

inline std::string to_string(ModelTag m) {
  switch (m) {
    case ModelTag::Mv: return "mv";
    case ModelTag::Lam: return "lam";
    case ModelTag::Mad: return "mad";
    case ModelTag::Lamad: return "lamad";
    case ModelTag::Cvar: return "cvar";
    case ModelTag::Lacvar: return "lacvar";
  }
  return "unknown";
}

inline ModelTag parse_model(const std::string& s) {
  for (ModelTag m : {ModelTag::Mv, ModelTag::Lam, ModelTag::Mad, ModelTag::Lamad,
                     ModelTag::Cvar, ModelTag::Lacvar}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown model tag '" + s + "'");
}

inline bool is_limited(ModelTag m) {
  return m == ModelTag::Lam || m == ModelTag::Lamad || m == ModelTag::Lacvar;
}

/// Unconstrained counterpart of a limited-asset model (mv for lam, etc).
inline ModelTag base_model(ModelTag m) {
  switch (m) {
    case ModelTag::Lam: return ModelTag::Mv;
    case ModelTag::Lamad: return ModelTag::Mad;
    case ModelTag::Lacvar: return ModelTag::Cvar;
    default: return m;
  }
}

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Heuristic: return "heuristic";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::ToleranceLimited: return "tolerance-limited";
  }
  return "unknown";
}

inline constexpr double kSupportThreshold = 1e-9;

inline IndexSet support_of(const Eigen::VectorXd& w, double threshold = kSupportThreshold) {
  IndexSet s;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) > threshold) s.push_back(static_cast<int>(i));
  }
  return s;
}

struct PortfolioSolution {
  Eigen::VectorXd weights;
  IndexSet support;
  double objective = kInf;
  double achieved_return = 0.0;
  SolveStatus status = SolveStatus::Infeasible;
  ModelTag model = ModelTag::Mv;
  double gap = 0.0;  // final bound gap for branch-and-bound, 0 otherwise

  bool usable() const {
    return status == SolveStatus::Optimal || status == SolveStatus::Heuristic ||
           status == SolveStatus::ToleranceLimited;
  }

  static PortfolioSolution infeasible(ModelTag model, Eigen::Index n) {
    PortfolioSolution s;
    s.model = model;
    s.weights = Eigen::VectorXd::Zero(n);
    return s;
  }
};

/// Clips tiny negatives, recomputes support and return.
inline PortfolioSolution finish_solution(Eigen::VectorXd w, const Eigen::VectorXd& mu, double objective,
                                         SolveStatus status, ModelTag model) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (std::abs(w(i)) <= kSupportThreshold) w(i) = 0.0;
  }
  PortfolioSolution s;
  s.support = support_of(w);
  s.achieved_return = mu.dot(w);
  s.weights = std::move(w);
  s.objective = objective;
  s.status = status;
  s.model = model;
  return s;
}

struct FrontierPoint {
  double rho = 0.0;
  double value = kInf;
  Eigen::VectorXd weights;
  SolveStatus status = SolveStatus::Infeasible;
  int n_support = 0;

  bool feasible() const { return status != SolveStatus::Infeasible; }
};

struct GridSpec {
  int count = 0;
  double rho_min = 0.0;
  double rho_max = 0.0;

  /// Equally spaced, endpoints reproduced exactly.
  double at(int j) const {
    if (j == count - 1) return rho_max;
    return rho_min + (rho_max - rho_min) * static_cast<double>(j) / static_cast<double>(count - 1);
  }
  bool operator==(const GridSpec&) const = default;
};

struct FrontierCurve {
  ModelTag model = ModelTag::Mv;
  int k = 0;  // 0 when unconstrained
  GridSpec grid;
  std::vector<FrontierPoint> points;
};

// Risk functionals evaluated directly from weights.

inline double variance(const SymMatrix& sigma, const Eigen::VectorXd& w) {
  return sigma.quadratic_form(w);
}

/// Mean absolute deviation of portfolio returns around the portfolio mean.
inline double mad(const Eigen::MatrixXd& scenarios, const Eigen::VectorXd& w) {
  const Eigen::VectorXd r = scenarios * w;
  const double m = r.mean();
  return (r.array() - m).abs().mean();
}

/// Mean downside semi-deviation: average of max(0, mean - r_t).
inline double semideviation(const Eigen::MatrixXd& scenarios, const Eigen::VectorXd& w) {
  const Eigen::VectorXd r = scenarios * w;
  const double m = r.mean();
  return (m - r.array()).max(0.0).mean();
}

/**
 * CVaR of the loss -r at level eps, i.e. min over z of
 * z + 1/(eps T) sum max(0, -r_t - z). The minimum is attained at a scenario
 * loss, so every candidate is checked.
 */
inline double cvar(const Eigen::MatrixXd& scenarios, const Eigen::VectorXd& w, double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("cvar: eps must be in (0, 1]");
  const Eigen::VectorXd loss = -(scenarios * w);
  const double t = static_cast<double>(loss.size());
  double best = kInf;
  for (Eigen::Index k = 0; k < loss.size(); ++k) {
    const double z = loss(k);
    const double v = z + (loss.array() - z).max(0.0).sum() / (eps * t);
    best = std::min(best, v);
  }
  return best;
}

inline double risk_of(ModelTag model, const MarketModel& m, const Eigen::VectorXd& w, double eps) {
  switch (model) {
    case ModelTag::Mv:
    case ModelTag::Lam: return variance(m.sigma, w);
    case ModelTag::Mad:
    case ModelTag::Lamad: return mad(m.scenarios.returns, w);
    case ModelTag::Cvar:
    case ModelTag::Lacvar: return cvar(m.scenarios.returns, w, eps);
  }
  return kInf;
}

}  // namespace cardport
