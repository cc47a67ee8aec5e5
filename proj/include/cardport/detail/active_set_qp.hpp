// Primal active-set method for  min x'Qx + lin'x  s.t.  A x = b, lo <= x <= hi.
//
// Included from linalg.hpp; not a standalone header.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cardport/lp.hpp"

namespace cardport {
namespace detail {

// Lowest-index-first maximal set of linearly independent rows.
inline std::vector<int> independent_rows(const Eigen::MatrixXd& a) {
  std::vector<int> keep;
  if (a.rows() == 0) return keep;
  const double scale = 1.0 + a.cwiseAbs().maxCoeff();
  Eigen::MatrixXd basis(0, a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Eigen::MatrixXd trial(basis.rows() + 1, a.cols());
    trial << basis, a.row(i);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial.transpose());
    qr.setThreshold(1e-12 * scale);
    if (qr.rank() == trial.rows()) {
      basis = std::move(trial);
      keep.push_back(static_cast<int>(i));
    }
  }
  return keep;
}

// Orthonormal basis for the null space of `a` (k x n); n x 0 when trivial.
inline Eigen::MatrixXd null_space(const Eigen::MatrixXd& a, Eigen::Index n) {
  if (a.rows() == 0) return Eigen::MatrixXd::Identity(n, n);
  if (n == 0) return Eigen::MatrixXd(0, 0);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.transpose());
  qr.setThreshold(1e-12 * (1.0 + a.cwiseAbs().maxCoeff()));
  const Eigen::Index r = qr.rank();
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return q.rightCols(n - r);
}

struct ReducedStep {
  Eigen::VectorXd direction;  // over the free variables
  bool ray = false;           // zero-curvature descent direction
};

// Minimizer step of the quadratic model restricted to null(a_f), or a
// descent ray when the reduced Hessian is singular along the gradient.
inline ReducedStep reduced_step(const Eigen::MatrixXd& hess_f, const Eigen::VectorXd& grad_f,
                                const Eigen::MatrixXd& a_f) {
  const Eigen::Index nf = grad_f.size();
  ReducedStep out;
  out.direction = Eigen::VectorXd::Zero(nf);
  if (nf == 0) return out;
  const Eigen::MatrixXd z = null_space(a_f, nf);
  if (z.cols() == 0) return out;
  const Eigen::MatrixXd h = z.transpose() * hess_f * z;
  const Eigen::VectorXd g = z.transpose() * grad_f;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const Eigen::MatrixXd& v = eig.eigenvectors();
  const double lam_scale = std::max(1e-300, lam.cwiseAbs().maxCoeff());
  const double curv_tol = 1e-11 * lam_scale;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(h.rows());
  Eigen::VectorXd flat = Eigen::VectorXd::Zero(h.rows());
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    const double c = v.col(k).dot(g);
    if (lam(k) > curv_tol) {
      s -= (c / lam(k)) * v.col(k);
    } else {
      flat += c * v.col(k);
    }
  }
  if (flat.norm() > 1e-10 * (1.0 + g.norm())) {
    out.ray = true;
    out.direction = -(z * flat);
    return out;
  }
  out.direction = z * s;
  return out;
}

enum BoundState : int { kFree = 0, kAtLower = -1, kAtUpper = 1, kPinned = 2 };

}  // namespace detail

inline QpResult constrained_qp(const QpProblem& p) {
  const Eigen::Index n = p.q.size();
  Eigen::VectorXd lin = p.lin.size() == 0 ? Eigen::VectorXd::Zero(n) : p.lin;
  if (lin.size() != n || p.lower.size() != n || p.upper.size() != n ||
      p.a_eq.rows() != p.b_eq.size() || (p.a_eq.rows() > 0 && p.a_eq.cols() != n)) {
    throw std::invalid_argument("constrained_qp: dimension mismatch");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(p.lower(i) <= p.upper(i))) {
      throw std::invalid_argument("constrained_qp: lower bound exceeds upper bound");
    }
  }
  detail::require_finite(p.q.dense(), "constrained_qp");

  QpResult res;
  const Eigen::MatrixXd hess = 2.0 * p.q.dense();
  const Eigen::MatrixXd a_all = p.a_eq.rows() > 0 ? p.a_eq : Eigen::MatrixXd(0, n);
  const std::vector<int> rows = detail::independent_rows(a_all);
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd a(m, n);
  Eigen::VectorXd b(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    a.row(k) = a_all.row(rows[k]);
    b(k) = p.b_eq(rows[k]);
  }
  double xscale = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isfinite(p.lower(i))) xscale = std::max(xscale, 1.0 + std::abs(p.lower(i)));
    if (std::isfinite(p.upper(i))) xscale = std::max(xscale, 1.0 + std::abs(p.upper(i)));
  }
  const double bound_tol = 1e-12 * xscale;

  std::vector<int> state(n, detail::kFree);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p.lower(i) == p.upper(i)) {
      state[i] = detail::kPinned;
      x(i) = p.lower(i);
    }
  }
  auto free_indices = [&] {
    std::vector<int> f;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[i] == detail::kFree) f.push_back(static_cast<int>(i));
    }
    return f;
  };
  auto gather = [&](const std::vector<int>& f, Eigen::MatrixXd& h_f, Eigen::VectorXd& g_f,
                    Eigen::MatrixXd& a_f) {
    const Eigen::VectorXd g = hess * x + lin;
    const auto nf = static_cast<Eigen::Index>(f.size());
    h_f.resize(nf, nf);
    g_f.resize(nf);
    a_f.resize(m, nf);
    for (Eigen::Index r = 0; r < nf; ++r) {
      g_f(r) = g(f[r]);
      a_f.col(r) = a.col(f[r]);
      for (Eigen::Index c = 0; c < nf; ++c) h_f(r, c) = hess(f[r], f[c]);
    }
  };

  // Warm start: equality-constrained minimizer with the box ignored.
  bool started = false;
  {
    const std::vector<int> f = free_indices();
    Eigen::VectorXd rhs = b;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[i] == detail::kPinned) rhs -= a.col(i) * x(i);
    }
    Eigen::MatrixXd a_f(m, static_cast<Eigen::Index>(f.size()));
    for (std::size_t r = 0; r < f.size(); ++r) a_f.col(static_cast<Eigen::Index>(r)) = a.col(f[r]);
    Eigen::VectorXd xf = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.size()));
    if (m > 0 && !f.empty()) {
      xf = a_f.completeOrthogonalDecomposition().solve(rhs);
    }
    for (std::size_t r = 0; r < f.size(); ++r) x(f[r]) = xf(static_cast<Eigen::Index>(r));
    const bool eq_ok = m == 0 || (a_f * xf - rhs).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + rhs.cwiseAbs().maxCoeff());
    if (eq_ok && !f.empty()) {
      Eigen::MatrixXd h_f, a_ff;
      Eigen::VectorXd g_f;
      gather(f, h_f, g_f, a_ff);
      const auto step = detail::reduced_step(h_f, g_f, a_ff);
      if (!step.ray) {
        Eigen::VectorXd trial = x;
        for (std::size_t r = 0; r < f.size(); ++r) {
          trial(f[r]) += step.direction(static_cast<Eigen::Index>(r));
        }
        bool inside = true;
        for (Eigen::Index i = 0; i < n && inside; ++i) {
          inside = trial(i) >= p.lower(i) - bound_tol && trial(i) <= p.upper(i) + bound_tol;
        }
        if (inside) {
          x = trial.cwiseMax(p.lower).cwiseMin(p.upper);
          started = true;
        }
      }
    }
  }
  if (!started) {
    // Phase 1: any feasible vertex.
    LpProblem lp;
    for (Eigen::Index i = 0; i < n; ++i) lp.add_variable(0.0, p.lower(i), p.upper(i));
    for (Eigen::Index k = 0; k < a_all.rows(); ++k) {
      std::vector<std::pair<int, double>> terms;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (a_all(k, i) != 0.0) terms.emplace_back(static_cast<int>(i), a_all(k, i));
      }
      lp.add_row(terms, RowSense::Equal, p.b_eq(k));
    }
    const LpResult feas = solve_lp(lp);
    if (feas.status != LpStatus::Optimal) {
      res.status = feas.status == LpStatus::Infeasible ? QpStatus::Infeasible
                                                       : QpStatus::IterationLimit;
      return res;
    }
    x = feas.x;
  }
  if (a_all.rows() > 0) {
    const double viol = (a_all * x - p.b_eq).cwiseAbs().maxCoeff();
    if (viol > 1e-9 * (1.0 + p.b_eq.cwiseAbs().maxCoeff())) {
      res.status = QpStatus::Infeasible;
      return res;
    }
  }

  // Initial working set: variables sitting on a bound, then free enough of
  // them (lowest index first) that the free columns span the equality rows.
  for (Eigen::Index i = 0; i < n; ++i) {
    if (state[i] == detail::kPinned) continue;
    if (x(i) <= p.lower(i) + bound_tol) {
      state[i] = detail::kAtLower;
      x(i) = p.lower(i);
    } else if (x(i) >= p.upper(i) - bound_tol) {
      state[i] = detail::kAtUpper;
      x(i) = p.upper(i);
    }
  }
  if (m > 0) {
    auto rank_of = [&](const std::vector<int>& f) {
      if (f.empty()) return Eigen::Index{0};
      Eigen::MatrixXd a_f(m, static_cast<Eigen::Index>(f.size()));
      for (std::size_t r = 0; r < f.size(); ++r) a_f.col(static_cast<Eigen::Index>(r)) = a.col(f[r]);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a_f);
      qr.setThreshold(1e-12 * (1.0 + a_f.cwiseAbs().maxCoeff()));
      return qr.rank();
    };
    std::vector<int> f = free_indices();
    Eigen::Index rank = rank_of(f);
    for (Eigen::Index i = 0; i < n && rank < m; ++i) {
      if (state[i] != detail::kAtLower && state[i] != detail::kAtUpper) continue;
      std::vector<int> trial = f;
      trial.insert(std::upper_bound(trial.begin(), trial.end(), static_cast<int>(i)),
                   static_cast<int>(i));
      const Eigen::Index r2 = rank_of(trial);
      if (r2 > rank) {
        state[i] = detail::kFree;
        f = std::move(trial);
        rank = r2;
      }
    }
  }

  const int max_iter = 50 * static_cast<int>(n + m) + 200;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  bool converged = false;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const std::vector<int> f = free_indices();
    Eigen::MatrixXd h_f, a_f;
    Eigen::VectorXd g_f;
    gather(f, h_f, g_f, a_f);
    const auto step = detail::reduced_step(h_f, g_f, a_f);
    const double pnorm = step.direction.size() ? step.direction.cwiseAbs().maxCoeff() : 0.0;

    if (step.ray || pnorm > 1e-13 * (1.0 + x.cwiseAbs().maxCoeff())) {
      double alpha = step.ray ? kInf : 1.0;
      int block = -1;
      int block_state = detail::kFree;
      const double ptol = 1e-12 * pnorm;
      for (std::size_t r = 0; r < f.size(); ++r) {
        const int i = f[r];
        const double pi = step.direction(static_cast<Eigen::Index>(r));
        double ratio = kInf;
        int st = detail::kFree;
        if (pi < -ptol && std::isfinite(p.lower(i))) {
          ratio = std::max(0.0, x(i) - p.lower(i)) / -pi;
          st = detail::kAtLower;
        } else if (pi > ptol && std::isfinite(p.upper(i))) {
          ratio = std::max(0.0, p.upper(i) - x(i)) / pi;
          st = detail::kAtUpper;
        }
        if (ratio < alpha) {
          alpha = ratio;
          block = i;
          block_state = st;
        }
      }
      if (!std::isfinite(alpha)) {
        res.status = QpStatus::Unbounded;
        res.iterations = iter;
        return res;
      }
      for (std::size_t r = 0; r < f.size(); ++r) {
        x(f[r]) += alpha * step.direction(static_cast<Eigen::Index>(r));
      }
      if (block >= 0) {
        state[block] = block_state;
        x(block) = block_state == detail::kAtLower ? p.lower(block) : p.upper(block);
      }
      continue;
    }

    // Stationary on the working set: check bound multipliers.
    const Eigen::VectorXd g = hess * x + lin;
    if (m > 0 && !f.empty()) {
      lambda = a_f.transpose().completeOrthogonalDecomposition().solve(g_f);
    } else {
      lambda.setZero();
    }
    const double gscale = 1.0 + g.cwiseAbs().maxCoeff();
    const double mult_tol = 1e-12 * gscale;
    int release = -1;
    double worst = mult_tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[i] != detail::kAtLower && state[i] != detail::kAtUpper) continue;
      const double r = g(i) - a.col(i).dot(lambda);
      const double viol = state[i] == detail::kAtLower ? -r : r;
      if (viol > worst) {
        worst = viol;
        release = static_cast<int>(i);
      }
    }
    if (release < 0) {
      converged = true;
      break;
    }
    state[release] = detail::kFree;
  }
  res.iterations = iter;
  if (!converged) {
    res.status = QpStatus::IterationLimit;
    res.x = x;
    res.value = x.dot(p.q.dense() * x) + lin.dot(x);
    return res;
  }

  // KKT residual: stationarity on free variables, sign of bound multipliers,
  // primal feasibility.
  const Eigen::VectorXd g = hess * x + lin;
  double kkt = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = g(i) - (m > 0 ? a.col(i).dot(lambda) : 0.0);
    switch (state[i]) {
      case detail::kFree: kkt = std::max(kkt, std::abs(r)); break;
      case detail::kAtLower: kkt = std::max(kkt, std::max(0.0, -r)); break;
      case detail::kAtUpper: kkt = std::max(kkt, std::max(0.0, r)); break;
      default: break;
    }
    kkt = std::max(kkt, std::max(0.0, p.lower(i) - x(i)));
    kkt = std::max(kkt, std::max(0.0, x(i) - p.upper(i)));
  }
  if (m > 0) kkt = std::max(kkt, (a * x - b).cwiseAbs().maxCoeff());
  res.status = QpStatus::Optimal;
  res.x = x;
  res.value = x.dot(p.q.dense() * x) + lin.dot(x);
  res.eq_multipliers = lambda;
  res.kkt_residual = kkt;
  return res;
}

}  // namespace cardport
