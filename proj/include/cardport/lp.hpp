/**
 * @file lp.hpp
 * @brief Dense two-phase tableau simplex for bounded-variable LPs.
 *
 * Solves   min c'x  s.t.  a_i'x {<=,=,>=} b_i,  lo <= x <= hi
 * where either bound may be infinite. Variables are shifted, reflected or
 * split into nonnegative columns, finite upper bounds become extra rows, and
 * the resulting standard form is solved with Dantzig pricing. After 2n
 * consecutive degenerate pivots the solver switches permanently to Bland's
 * rule, which cannot cycle. The final basis is refactorized with LU to
 * recover an accurate primal point and row duals.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cardport/common.hpp"

namespace cardport {

enum class RowSense { LessEqual, Equal, GreaterEqual };

struct LpRow {
  Eigen::VectorXd coeffs;
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
};

/// Linear program in row form. Build with add_variable / add_row.
struct LpProblem {
  Eigen::VectorXd objective;
  std::vector<LpRow> rows;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_variables() const { return static_cast<int>(objective.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }

  int add_variable(double cost, double lo, double hi) {
    const Eigen::Index n = objective.size();
    objective.conservativeResize(n + 1);
    lower.conservativeResize(n + 1);
    upper.conservativeResize(n + 1);
    objective(n) = cost;
    lower(n) = lo;
    upper(n) = hi;
    for (auto& r : rows) {
      r.coeffs.conservativeResize(n + 1);
      r.coeffs(n) = 0.0;
    }
    return static_cast<int>(n);
  }

  /// Adds a row from (variable, coefficient) pairs; repeated indices accumulate.
  void add_row(const std::vector<std::pair<int, double>>& terms, RowSense sense,
               double rhs) {
    LpRow row{Eigen::VectorXd::Zero(objective.size()), sense, rhs};
    for (auto [j, a] : terms) {
      if (j < 0 || j >= objective.size()) {
        throw std::invalid_argument("LpProblem::add_row: variable index out of range");
      }
      row.coeffs(j) += a;
    }
    rows.push_back(std::move(row));
  }

  void validate() const {
    const Eigen::Index n = objective.size();
    if (lower.size() != n || upper.size() != n) {
      throw std::invalid_argument("LpProblem: bound vectors do not match variable count");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].coeffs.size() != n) {
        throw std::invalid_argument("LpProblem: row " + std::to_string(i) +
                                    " length does not match variable count");
      }
      if (!rows[i].coeffs.allFinite() || !std::isfinite(rows[i].rhs)) {
        throw std::invalid_argument("LpProblem: row " + std::to_string(i) +
                                    " has non-finite data");
      }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::isnan(lower(j)) || std::isnan(upper(j)) || lower(j) > upper(j) ||
          lower(j) == kInf || upper(j) == -kInf) {
        throw std::invalid_argument("LpProblem: invalid bounds for variable " +
                                    std::to_string(j));
      }
      if (!std::isfinite(objective(j))) {
        throw std::invalid_argument("LpProblem: non-finite objective coefficient");
      }
    }
  }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x;
  double value = kInf;
  Eigen::VectorXd duals;          // one per row; <=0 for <=, >=0 for >= rows
  Eigen::VectorXd reduced_costs;  // c - A'y, per variable
  int iterations = 0;
  bool used_bland = false;
};

struct LpOptions {
  int max_iterations = 0;  // 0 = automatic
  bool force_bland = false;
};

namespace detail {

enum class ColumnMap { Fixed, Shift, Reflect, Split };

struct VarMap {
  ColumnMap kind = ColumnMap::Shift;
  int col = -1;   // primary standard-form column
  int col2 = -1;  // negative part for Split
  double offset = 0.0;
};

class Tableau {
 public:
  Tableau(Eigen::MatrixXd t, std::vector<int> basis, int n_cols, LpOptions opt)
      : t_(std::move(t)), basis_(std::move(basis)), n_cols_(n_cols), opt_(opt) {
    allowed_.assign(n_cols_, true);
    if (opt_.max_iterations <= 0) {
      opt_.max_iterations = 100 * (rows() + n_cols_) + 1000;
    }
    bland_ = opt_.force_bland;
  }

  int rows() const { return static_cast<int>(t_.rows()) - 1; }
  double& at(int i, int j) { return t_(i, j); }
  double rhs(int i) const { return t_(i, n_cols_); }
  double objective_cell() const { return t_(rows(), n_cols_); }
  const std::vector<int>& basis() const { return basis_; }
  void forbid(int j) { allowed_[j] = false; }
  bool used_bland() const { return bland_; }
  int iterations() const { return iterations_; }

  void set_objective(const Eigen::VectorXd& cost) {
    const int m = rows();
    t_.row(m).setZero();
    t_.row(m).head(n_cols_) = cost.transpose();
    for (int i = 0; i < m; ++i) {
      const double cb = cost(basis_[i]);
      if (cb != 0.0) t_.row(m) -= cb * t_.row(i);
    }
  }

  void pivot(int r, int c) {
    t_.row(r) /= t_(r, c);
    for (int i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[r] = c;
  }

  void remove_row(int r) {
    const int last = static_cast<int>(t_.rows()) - 1;
    Eigen::MatrixXd nt(t_.rows() - 1, t_.cols());
    int k = 0;
    for (int i = 0; i <= last; ++i) {
      if (i != r) nt.row(k++) = t_.row(i);
    }
    t_ = std::move(nt);
    basis_.erase(basis_.begin() + r);
  }

  /// Runs simplex iterations on the current objective row.
  LpStatus optimize() {
    const Eigen::Index m = t_.rows() - 1;
    const double dtol = 1e-11 * (1.0 + t_.row(m).head(n_cols_).cwiseAbs().maxCoeff());
    int degenerate_run = 0;
    while (true) {
      if (iterations_ >= opt_.max_iterations) return LpStatus::IterationLimit;
      int enter = -1;
      double best = -dtol;
      for (int j = 0; j < n_cols_; ++j) {
        if (!allowed_[j]) continue;
        const double d = t_(m, j);
        if (bland_) {
          if (d < -dtol) { enter = j; break; }
        } else if (d < best) {
          best = d;
          enter = j;
        }
      }
      if (enter < 0) return LpStatus::Optimal;

      Eigen::Index leave = -1;
      double min_ratio = kInf;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double a = t_(i, enter);
        if (a <= 1e-11) continue;
        const double ratio = std::max(0.0, t_(i, n_cols_)) / a;
        if (leave < 0 || ratio < min_ratio - 1e-14) {
          min_ratio = ratio;
          leave = i;
        } else if (ratio <= min_ratio + 1e-14) {
          // Bland: smallest basic index; otherwise prefer the larger pivot.
          if (bland_ ? basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)] : a > t_(leave, enter)) leave = i;
        }
      }
      if (leave < 0) return LpStatus::Unbounded;

      degenerate_run = min_ratio <= 1e-12 ? degenerate_run + 1 : 0;
      if (!bland_ && degenerate_run > 2 * n_cols_) bland_ = true;
      pivot(static_cast<int>(leave), enter);
      ++iterations_;
    }
  }

 private:
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
  int n_cols_;
  LpOptions opt_;
  std::vector<bool> allowed_;
  bool bland_ = false;
  int iterations_ = 0;
};

}  // namespace detail

/// Solves `p` to an optimal basic solution, or reports infeasible/unbounded.
inline LpResult solve_lp(const LpProblem& p, const LpOptions& opt = {}) {
  p.validate();
  const int n = p.num_variables();
  const int m_orig = p.num_rows();
  LpResult result;

  // Map original variables to nonnegative standard-form columns.
  std::vector<detail::VarMap> vmap(n);
  int n_struct = 0;
  std::vector<std::pair<int, double>> bound_rows;  // (column, upper limit)
  for (int j = 0; j < n; ++j) {
    const double lo = p.lower(j);
    const double hi = p.upper(j);
    auto& v = vmap[j];
    if (std::isfinite(lo) && std::isfinite(hi) && lo == hi) {
      v.kind = detail::ColumnMap::Fixed;
      v.offset = lo;
    } else if (std::isfinite(lo)) {
      v.kind = detail::ColumnMap::Shift;
      v.offset = lo;
      v.col = n_struct++;
      if (std::isfinite(hi)) bound_rows.emplace_back(v.col, hi - lo);
    } else if (std::isfinite(hi)) {
      v.kind = detail::ColumnMap::Reflect;
      v.offset = hi;
      v.col = n_struct++;
    } else {
      v.kind = detail::ColumnMap::Split;
      v.col = n_struct++;
      v.col2 = n_struct++;
    }
  }

  const int m = m_orig + static_cast<int>(bound_rows.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, n_struct);
  Eigen::VectorXd b(m);
  std::vector<RowSense> sense(m);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n_struct);
  for (int j = 0; j < n; ++j) {
    const auto& v = vmap[j];
    const double cj = p.objective(j);
    switch (v.kind) {
      case detail::ColumnMap::Fixed: break;
      case detail::ColumnMap::Shift: c(v.col) = cj; break;
      case detail::ColumnMap::Reflect: c(v.col) = -cj; break;
      case detail::ColumnMap::Split: c(v.col) = cj; c(v.col2) = -cj; break;
    }
  }
  for (int i = 0; i < m_orig; ++i) {
    const auto& row = p.rows[i];
    double rhs = row.rhs;
    for (int j = 0; j < n; ++j) {
      const double aij = row.coeffs(j);
      if (aij == 0.0) continue;
      const auto& v = vmap[j];
      switch (v.kind) {
        case detail::ColumnMap::Fixed: rhs -= aij * v.offset; break;
        case detail::ColumnMap::Shift: a(i, v.col) = aij; rhs -= aij * v.offset; break;
        case detail::ColumnMap::Reflect: a(i, v.col) = -aij; rhs -= aij * v.offset; break;
        case detail::ColumnMap::Split: a(i, v.col) = aij; a(i, v.col2) = -aij; break;
      }
    }
    b(i) = rhs;
    sense[i] = row.sense;
  }
  for (std::size_t k = 0; k < bound_rows.size(); ++k) {
    const int i = m_orig + static_cast<int>(k);
    a(i, bound_rows[k].first) = 1.0;
    b(i) = bound_rows[k].second;
    sense[i] = RowSense::LessEqual;
  }

  // Slack/surplus columns, sign normalization, artificials.
  std::vector<int> slack_col(m, -1);
  int n_cols = n_struct;
  for (int i = 0; i < m; ++i) {
    if (sense[i] != RowSense::Equal) slack_col[i] = n_cols++;
  }
  std::vector<double> row_sign(m, 1.0);
  std::vector<int> basis(m, -1);
  int n_art = 0;
  for (int i = 0; i < m; ++i) {
    const double slack_coef = sense[i] == RowSense::LessEqual ? 1.0 : -1.0;
    if (b(i) < 0.0) row_sign[i] = -1.0;
    const bool slack_basic =
        slack_col[i] >= 0 && slack_coef * row_sign[i] > 0.0;
    if (!slack_basic) ++n_art;
  }
  const int first_art = n_cols;
  n_cols += n_art;

  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, n_cols + 1);
  Eigen::MatrixXd std_a = Eigen::MatrixXd::Zero(m, n_cols);  // for refactorization
  int art = first_art;
  for (int i = 0; i < m; ++i) {
    const double s = row_sign[i];
    std_a.row(i).head(n_struct) = s * a.row(i);
    if (slack_col[i] >= 0) {
      const double slack_coef = sense[i] == RowSense::LessEqual ? 1.0 : -1.0;
      std_a(i, slack_col[i]) = s * slack_coef;
      if (s * slack_coef > 0.0) basis[i] = slack_col[i];
    }
    if (basis[i] < 0) {
      std_a(i, art) = 1.0;
      basis[i] = art++;
    }
    t.row(i).head(n_cols) = std_a.row(i);
    t(i, n_cols) = s * b(i);
  }
  Eigen::VectorXd std_b(m);
  for (int i = 0; i < m; ++i) std_b(i) = row_sign[i] * b(i);

  detail::Tableau tab(std::move(t), basis, n_cols, opt);
  std::vector<int> kept_rows(m);
  for (int i = 0; i < m; ++i) kept_rows[i] = i;

  if (n_art > 0) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_cols);
    phase1.tail(n_art).setOnes();
    tab.set_objective(phase1);
    const LpStatus s1 = tab.optimize();
    result.iterations = tab.iterations();
    if (s1 == LpStatus::IterationLimit) {
      result.status = s1;
      return result;
    }
    if (-tab.objective_cell() > 1e-9 * (1.0 + std_b.cwiseAbs().maxCoeff())) {
      result.status = LpStatus::Infeasible;
      return result;
    }
    // Drive artificials out of the basis; rows where that is impossible are
    // redundant and dropped.
    for (int i = tab.rows() - 1; i >= 0; --i) {
      if (tab.basis()[i] < first_art) continue;
      int col = -1;
      double best = 1e-9;
      for (int j = 0; j < first_art; ++j) {
        if (std::abs(tab.at(i, j)) > best) {
          best = std::abs(tab.at(i, j));
          col = j;
        }
      }
      if (col >= 0) {
        tab.pivot(i, col);
      } else {
        tab.remove_row(i);
        kept_rows.erase(kept_rows.begin() + i);
      }
    }
    for (int j = first_art; j < n_cols; ++j) tab.forbid(j);
  }

  Eigen::VectorXd full_cost = Eigen::VectorXd::Zero(n_cols);
  full_cost.head(n_struct) = c;
  tab.set_objective(full_cost);
  const LpStatus s2 = tab.optimize();
  result.iterations = tab.iterations();
  result.used_bland = tab.used_bland();
  if (s2 != LpStatus::Optimal) {
    result.status = s2;
    return result;
  }

  // Refactorize the final basis for an accurate vertex and duals.
  const auto& fb = tab.basis();
  const int mk = static_cast<int>(fb.size());
  Eigen::VectorXd xs = Eigen::VectorXd::Zero(n_cols);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(mk);
  if (mk > 0) {
    Eigen::MatrixXd bmat(mk, mk);
    Eigen::VectorXd cb(mk);
    Eigen::VectorXd bk(mk);
    for (int k = 0; k < mk; ++k) {
      for (int i = 0; i < mk; ++i) bmat(i, k) = std_a(kept_rows[i], fb[k]);
      cb(k) = full_cost(fb[k]);
      bk(k) = std_b(kept_rows[k]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(bmat);
    const Eigen::VectorXd xb = lu.solve(bk);
    y = lu.transpose().solve(cb);
    const bool refined_ok = xb.allFinite() && (xb.array() >= -1e-9).all();
    for (int k = 0; k < mk; ++k) {
      xs(fb[k]) = std::max(0.0, refined_ok ? xb(k) : tab.rhs(k));
    }
  }

  result.status = LpStatus::Optimal;
  result.x.resize(n);
  for (int j = 0; j < n; ++j) {
    const auto& v = vmap[j];
    switch (v.kind) {
      case detail::ColumnMap::Fixed: result.x(j) = v.offset; break;
      case detail::ColumnMap::Shift: result.x(j) = v.offset + xs(v.col); break;
      case detail::ColumnMap::Reflect: result.x(j) = v.offset - xs(v.col); break;
      case detail::ColumnMap::Split: result.x(j) = xs(v.col) - xs(v.col2); break;
    }
  }
  result.value = p.objective.dot(result.x);
  // Duals per original row; redundant rows and bound rows are not reported.
  result.duals = Eigen::VectorXd::Zero(m_orig);
  for (int k = 0; k < mk; ++k) {
    const int r = kept_rows[k];
    if (r < m_orig) result.duals(r) = row_sign[r] * y(k);
  }
  result.reduced_costs = p.objective;
  for (int i = 0; i < m_orig; ++i) {
    result.reduced_costs -= result.duals(i) * p.rows[i].coeffs;
  }
  return result;
}

}  // namespace cardport
