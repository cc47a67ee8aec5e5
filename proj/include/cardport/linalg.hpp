/**
 * @file linalg.hpp
 * @brief Dense kernels shared by every solver: symmetric storage, a
 *        thresholded Cholesky test for positive definiteness, the closed-form
 *        minimizer of a quadratic form on a simplex face, and a primal
 *        active-set solver for convex QPs with equalities and box bounds.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cardport/common.hpp"

namespace cardport {

/**
 * Dense symmetric matrix. Construction symmetrizes its argument, so
 * `(i, j)` and `(j, i)` are bitwise identical afterwards.
 */
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) {
      throw std::invalid_argument("SymMatrix: matrix is not square");
    }
    if (m.rows() < 1) {
      throw std::invalid_argument("SymMatrix: dimension must be at least 1");
    }
    m_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix identity(Eigen::Index n) {
    return SymMatrix(Eigen::MatrixXd::Identity(n, n));
  }

  static SymMatrix diagonal(const Eigen::VectorXd& d) {
    return SymMatrix(Eigen::MatrixXd(d.asDiagonal()));
  }

  Eigen::Index size() const { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const Eigen::MatrixXd& dense() const { return m_; }

  double max_diagonal() const { return m_.diagonal().maxCoeff(); }

  /// Principal submatrix on `idx` (in the order given).
  Eigen::MatrixXd principal(std::span<const int> idx) const {
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd out(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b <= a; ++b) {
        out(a, b) = out(b, a) = m_(idx[a], idx[b]);
      }
    }
    return out;
  }

  SymMatrix submatrix(std::span<const int> idx) const {
    return SymMatrix(principal(idx));
  }

  double quadratic_form(const Eigen::VectorXd& x) const {
    return x.dot(m_ * x);
  }

 private:
  Eigen::MatrixXd m_;
};

/// Lower-triangular Cholesky factor `L` with `A = L L'`.
struct CholeskyFactor {
  Eigen::MatrixXd lower;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd y = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
  }
};

namespace detail {

inline void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entry");
  }
}

// Cholesky that rejects as soon as a pivot falls to tol * max|diag| or below.
inline std::optional<CholeskyFactor> thresholded_cholesky(const Eigen::MatrixXd& a,
                                                          double tol) {
  const Eigen::Index n = a.rows();
  const double max_diag = n > 0 ? a.diagonal().maxCoeff() : 0.0;
  if (!(max_diag > 0.0)) return std::nullopt;
  const double threshold = tol * max_diag;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > threshold)) return std::nullopt;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return CholeskyFactor{std::move(l)};
}

}  // namespace detail

inline constexpr double kPdTolerance = 1e-12;
inline constexpr double kInteriorTolerance = 1e-9;

/**
 * Positive-definiteness test. Accepts iff every Cholesky pivot exceeds
 * `tol * max_i Q(i, i)`; the factor is returned for reuse.
 * Throws std::invalid_argument on non-finite input.
 */
inline std::optional<CholeskyFactor> pd_check(const SymMatrix& q,
                                              double tol = kPdTolerance) {
  if (!(tol > 0.0)) throw std::invalid_argument("pd_check: tol must be positive");
  detail::require_finite(q.dense(), "pd_check");
  return detail::thresholded_cholesky(q.dense(), tol);
}

/// Minimizer of x'Q_I x on the hyperplane sum(x_I) = 1.
struct FaceResult {
  IndexSet face;
  Eigen::VectorXd minimizer;  // |I| entries, ordered like `face`; empty if !pd
  double value = kInf;        // w(I) = 1 / (e' Q_I^{-1} e)
  bool interior = false;
  bool pd = false;
};

namespace detail {

inline FaceResult face_from_principal(const Eigen::MatrixXd& qi, IndexSet face,
                                      double interior_tol) {
  FaceResult out;
  out.face = std::move(face);
  auto chol = thresholded_cholesky(qi, kPdTolerance);
  if (!chol) return out;
  const Eigen::VectorXd z = chol->solve(Eigen::VectorXd::Ones(qi.rows()));
  const double s = z.sum();
  if (!(s > 0.0) || !std::isfinite(s)) return out;
  out.pd = true;
  out.minimizer = z / s;
  out.value = 1.0 / s;
  out.interior = (out.minimizer.array() > interior_tol).all();
  return out;
}

inline void check_index_set(std::span<const int> idx, Eigen::Index n) {
  if (idx.empty()) throw std::invalid_argument("index set is empty");
  for (std::size_t a = 0; a < idx.size(); ++a) {
    if (idx[a] < 0 || idx[a] >= n) {
      throw std::invalid_argument("index " + std::to_string(idx[a]) +
                                  " out of range");
    }
    if (a > 0 && idx[a] <= idx[a - 1]) {
      throw std::invalid_argument("index set must be sorted and unique");
    }
  }
}

}  // namespace detail

/**
 * Closed-form face minimizer: when Q_I is positive definite,
 * x_I* = Q_I^{-1} e / (e' Q_I^{-1} e) and w(I) = 1 / (e' Q_I^{-1} e).
 */
inline FaceResult face_minimizer(const SymMatrix& q, std::span<const int> face,
                                 double interior_tol = kInteriorTolerance) {
  detail::check_index_set(face, q.size());
  return detail::face_from_principal(q.principal(face),
                                     IndexSet(face.begin(), face.end()),
                                     interior_tol);
}

// ---------------------------------------------------------------------------
// Convex QP: min x'Qx + lin'x  s.t.  A x = b,  lo <= x <= hi.
// ---------------------------------------------------------------------------

enum class QpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct QpResult {
  QpStatus status = QpStatus::Infeasible;
  Eigen::VectorXd x;
  double value = kInf;
  Eigen::VectorXd eq_multipliers;  // for the independent subset of rows
  double kkt_residual = kInf;
  int iterations = 0;
};

struct QpProblem {
  SymMatrix q;
  Eigen::VectorXd lin;
  Eigen::MatrixXd a_eq;  // m x n, m may be 0
  Eigen::VectorXd b_eq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

inline QpResult constrained_qp(const QpProblem& p);

}  // namespace cardport

#include "cardport/detail/active_set_qp.hpp"
