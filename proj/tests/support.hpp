// Independent reference computations and random instance generators for tests.
// Nothing here calls the library's solvers.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "cardport/market_data.hpp"

namespace testsupport {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = nd(rng);
  }
  return m;
}

/// A'A / rows + delta I with A of shape (n + 2) x n: positive definite.
inline Eigen::MatrixXd random_pd(std::mt19937_64& rng, int n, double scale = 1.0, double delta = 1e-3) {
  const Eigen::MatrixXd a = random_matrix(rng, n + 2, n, scale);
  return a.transpose() * a / static_cast<double>(n + 2) + delta * scale * scale * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::VectorXd random_uniform(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

/// Uniform point on the simplex (normalized exponentials).
inline Eigen::VectorXd random_simplex(std::mt19937_64& rng, int n) {
  std::exponential_distribution<double> ex(1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = ex(rng);
  return v / v.sum();
}

/// Market model with scenario-backed moments (weekly-return scale).
inline cardport::MarketModel random_market(std::mt19937_64& rng, int n, int t) {
  Eigen::MatrixXd r = random_matrix(rng, t, n, 0.02);
  const Eigen::VectorXd drift = random_uniform(rng, n, -0.004, 0.008);
  const Eigen::MatrixXd common = random_matrix(rng, t, 1, 0.015);
  for (int i = 0; i < n; ++i) r.col(i) += drift(i) * Eigen::VectorXd::Ones(t) + 0.6 * common.col(0);
  cardport::ReturnScenarios s;
  s.returns = r;
  return cardport::estimate(s);
}

/// Moment-only model with a random PD covariance.
inline cardport::MarketModel random_moments(std::mt19937_64& rng, int n) {
  const Eigen::MatrixXd sigma = random_pd(rng, n, 0.03);
  const Eigen::VectorXd mu = random_uniform(rng, n, -0.002, 0.01);
  return cardport::MarketModel::from_moments(mu, cardport::SymMatrix(sigma));
}

// ---------------------------------------------------------------------------
// Convex QP by active-set enumeration: every variable is free, at its lower
// bound or at its upper bound. For each pattern the equality-constrained
// stationary point of the free variables is found from the KKT system; the
// best primal-feasible candidate is the optimum of a convex problem.
// ---------------------------------------------------------------------------
struct QpOracleResult {
  bool feasible = false;
  Eigen::VectorXd x;
  double value = kInf;
};

inline QpOracleResult qp_by_enumeration(const Eigen::MatrixXd& q, const Eigen::VectorXd& lin,
                                        const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                        const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int n = static_cast<int>(q.rows());
  const int m = static_cast<int>(a.rows());
  QpOracleResult best;
  std::vector<int> state(n, 0);  // 0 free, 1 lower, 2 upper
  long total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < n; ++i) {
      state[i] = static_cast<int>(c % 3);
      c /= 3;
    }
    bool skip = false;
    for (int i = 0; i < n && !skip; ++i) {
      if (state[i] == 2 && lo(i) == hi(i)) skip = true;
    }
    if (skip) continue;
    std::vector<int> freev;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (state[i] == 0) freev.push_back(i);
      if (state[i] == 1) x(i) = lo(i);
      if (state[i] == 2) x(i) = hi(i);
    }
    const int nf = static_cast<int>(freev.size());
    // [2Q_ff A_f'; A_f 0] [x_f; -lambda] = [-(lin_f + 2 Q_fb x_b); b - A_b x_b]
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + m, nf + m);
    Eigen::VectorXd rhs(nf + m);
    const Eigen::VectorXd qx = q * x;
    for (int r = 0; r < nf; ++r) {
      for (int s = 0; s < nf; ++s) kkt(r, s) = 2.0 * q(freev[r], freev[s]);
      for (int k = 0; k < m; ++k) {
        kkt(r, nf + k) = a(k, freev[r]);
        kkt(nf + k, r) = a(k, freev[r]);
      }
      rhs(r) = -(lin(freev[r]) + 2.0 * qx(freev[r]));
    }
    for (int k = 0; k < m; ++k) rhs(nf + k) = b(k) - a.row(k).dot(x);
    Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if ((kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff())) continue;
    for (int r = 0; r < nf; ++r) x(freev[r]) = sol(r);
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) ok = x(i) >= lo(i) - 1e-10 && x(i) <= hi(i) + 1e-10;
    if (m > 0 && ok) ok = (a * x - b).cwiseAbs().maxCoeff() <= 1e-10;
    if (!ok) continue;
    const double v = x.dot(q * x) + lin.dot(x);
    if (v < best.value) {
      best.value = v;
      best.x = x;
      best.feasible = true;
    }
  }
  return best;
}

inline std::vector<std::vector<int>> subsets_up_to(int n, int k) {
  std::vector<std::vector<int>> out;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) s.push_back(i);
    }
    if (static_cast<int>(s.size()) <= k) out.push_back(s);
  }
  return out;
}

inline Eigen::MatrixXd sub(const Eigen::MatrixXd& q, const std::vector<int>& s) {
  const auto k = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd r(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) r(a, b) = q(s[a], s[b]);
  }
  return r;
}

/// Limited-asset minimum variance: every support of size <= k containing
/// `must`, each bounded equality QP solved by qp_by_enumeration.
inline double miqp_by_enumeration(const cardport::MarketModel& m, double rho, int k, const Eigen::VectorXd& lower,
                                  const Eigen::VectorXd& upper, const std::vector<int>& must = {}) {
  const int n = static_cast<int>(m.assets());
  const Eigen::MatrixXd sigma = m.sigma.dense();
  double best = kInf;
  for (const auto& s : subsets_up_to(n, k)) {
    if (!std::includes(s.begin(), s.end(), must.begin(), must.end())) continue;
    const int c = static_cast<int>(s.size());
    Eigen::MatrixXd a(2, c);
    Eigen::VectorXd lo(c), hi(c);
    for (int i = 0; i < c; ++i) {
      a(0, i) = 1.0;
      a(1, i) = m.mu(s[i]);
      lo(i) = lower(s[i]);
      hi(i) = upper(s[i]);
    }
    const auto r = qp_by_enumeration(sub(sigma, s), Eigen::VectorXd::Zero(c), a, Eigen::Vector2d(1.0, rho), lo, hi);
    if (r.feasible) best = std::min(best, r.value);
  }
  return best;
}

// ---------------------------------------------------------------------------
// LP oracle for min c'x s.t. A x <= b, x >= 0: every choice of n tight
// constraints among the m rows and n sign bounds is a candidate vertex.
// ---------------------------------------------------------------------------
struct LpOracleResult {
  bool feasible = false;
  double value = kInf;
  Eigen::VectorXd x;
};

inline LpOracleResult lp_by_vertices(const Eigen::VectorXd& c, const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(a.rows());
  Eigen::MatrixXd all(m + n, n);
  Eigen::VectorXd rhs(m + n);
  all.topRows(m) = a;
  rhs.head(m) = b;
  all.bottomRows(n) = -Eigen::MatrixXd::Identity(n, n);
  rhs.tail(n).setZero();
  LpOracleResult best;
  std::vector<int> pick(n);
  for (int i = 0; i < n; ++i) pick[i] = i;
  const int total = m + n;
  while (true) {
    Eigen::MatrixXd sub(n, n);
    Eigen::VectorXd sr(n);
    for (int r = 0; r < n; ++r) {
      sub.row(r) = all.row(pick[r]);
      sr(r) = rhs(pick[r]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (lu.isInvertible()) {
      const Eigen::VectorXd x = lu.solve(sr);
      if (((all * x - rhs).array() <= 1e-9).all()) {
        const double v = c.dot(x);
        if (v < best.value) {
          best.value = v;
          best.x = x;
          best.feasible = true;
        }
      }
    }
    int pos = n - 1;
    while (pos >= 0 && pick[pos] == total - n + pos) --pos;
    if (pos < 0) break;
    ++pick[pos];
    for (int r = pos + 1; r < n; ++r) pick[r] = pick[r - 1] + 1;
  }
  return best;
}

/// w(I) from an explicit inverse.
inline double face_value_direct(const Eigen::MatrixXd& q_i) {
  const Eigen::MatrixXd inv = q_i.fullPivLu().inverse();
  return 1.0 / inv.sum();
}

/// Covariance by the textbook double loop, divisor T.
inline Eigen::MatrixXd covariance_two_pass(const Eigen::MatrixXd& r) {
  const int t = static_cast<int>(r.rows());
  const int n = static_cast<int>(r.cols());
  std::vector<double> mean(n, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int s = 0; s < t; ++s) mean[j] += r(s, j);
    mean[j] /= t;
  }
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int s = 0; s < t; ++s) acc += (r(s, i) - mean[i]) * (r(s, j) - mean[j]);
      c(i, j) = acc / t;
    }
  }
  return c;
}

/// Indices of non-dominated (rho, value) pairs by pairwise comparison.
inline std::vector<int> nondominated(const std::vector<double>& rho, const std::vector<double>& v) {
  std::vector<int> out;
  const int n = static_cast<int>(rho.size());
  for (int a = 0; a < n; ++a) {
    bool dominated = false;
    for (int b = 0; b < n && !dominated; ++b) {
      if (a == b) continue;
      const bool weakly = rho[b] >= rho[a] && v[b] <= v[a];
      const bool strictly = rho[b] > rho[a] || v[b] < v[a];
      dominated = weakly && strictly;
    }
    if (!dominated) out.push_back(a);
  }
  return out;
}

/// Minimum of x'Qx over {x >= lo, sum x = 1} in 2 or 3 dimensions by a grid
/// at `step` followed by successively finer local grids.
inline double simplex_grid_min(const Eigen::MatrixXd& q, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               double step = 1e-3) {
  const int n = static_cast<int>(q.rows());
  double best = kInf;
  Eigen::VectorXd arg;
  auto consider = [&](const Eigen::VectorXd& x) {
    for (int i = 0; i < n; ++i) {
      if (x(i) < lo(i) - 1e-15 || x(i) > hi(i) + 1e-15) return;
    }
    const double v = x.dot(q * x);
    if (v < best) {
      best = v;
      arg = x;
    }
  };
  auto scan = [&](const Eigen::VectorXd& center, double radius, double h) {
    const int steps = static_cast<int>(std::round(2 * radius / h));
    if (n == 2) {
      for (int a = 0; a <= steps; ++a) {
        Eigen::VectorXd x(2);
        x(0) = std::clamp(center(0) - radius + a * h, 0.0, 1.0);
        x(1) = 1.0 - x(0);
        consider(x);
      }
    } else {
      for (int a = 0; a <= steps; ++a) {
        for (int c = 0; c <= steps; ++c) {
          Eigen::VectorXd x(3);
          x(0) = center(0) - radius + a * h;
          x(1) = center(1) - radius + c * h;
          x(2) = 1.0 - x(0) - x(1);
          if (x(0) < 0 || x(1) < 0 || x(2) < 0) continue;
          consider(x);
        }
      }
    }
  };
  Eigen::VectorXd mid = Eigen::VectorXd::Constant(n, 0.5);
  scan(mid, 0.5, step);
  double radius = 2 * step;
  double h = step / 10;
  for (int round = 0; round < 6 && arg.size(); ++round) {
    scan(arg, radius, h);
    radius /= 10;
    h /= 10;
  }
  return best;
}

}  // namespace testsupport
