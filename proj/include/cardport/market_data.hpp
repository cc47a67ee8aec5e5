/**
 * @file market_data.hpp
 * @brief Price ingestion, gap cleaning, log returns and moment estimation.
 *
 * Two input layouts are understood:
 *   - CSV: header `date,<asset>,...[,INDEX]`, one row per period, ISO-8601
 *     dates in the first column, `NA` or an empty cell for a missing price.
 *   - OR-Library index-tracking token stream (see load_prices).
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cardport/linalg.hpp"

namespace cardport {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what + " (line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ")"),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Prices per period (rows) and asset (columns); NaN marks a missing quote.
struct PriceSeries {
  std::vector<std::string> asset_names;
  std::vector<std::string> timestamps;
  Eigen::MatrixXd prices;
  std::optional<Eigen::VectorXd> index_prices;

  Eigen::Index periods() const { return prices.rows(); }
  Eigen::Index assets() const { return prices.cols(); }

  void validate() const {
    if (static_cast<Eigen::Index>(asset_names.size()) != prices.cols() ||
        static_cast<Eigen::Index>(timestamps.size()) != prices.rows()) {
      throw StructuralError("PriceSeries: names/timestamps do not match price matrix");
    }
    for (std::size_t t = 1; t < timestamps.size(); ++t) {
      if (!(timestamps[t - 1] < timestamps[t])) {
        throw StructuralError("PriceSeries: timestamps not strictly increasing at '" +
                              timestamps[t] + "'");
      }
    }
    if (index_prices && index_prices->size() != prices.rows()) {
      throw StructuralError("PriceSeries: index length does not match periods");
    }
  }

  PriceSeries rows_between(Eigen::Index first, Eigen::Index last) const {
    PriceSeries out;
    out.asset_names = asset_names;
    out.timestamps.assign(timestamps.begin() + first, timestamps.begin() + last + 1);
    out.prices = prices.middleRows(first, last - first + 1);
    if (index_prices) out.index_prices = index_prices->segment(first, last - first + 1);
    return out;
  }
};

/// Per-period log returns, T x n.
struct ReturnScenarios {
  Eigen::MatrixXd returns;
  Eigen::Index count() const { return returns.rows(); }
};

/// Estimated moments plus the scenarios they came from.
struct MarketModel {
  std::vector<std::string> asset_names;
  Eigen::VectorXd mu;
  SymMatrix sigma;
  ReturnScenarios scenarios;  // may be empty for moment-only models

  Eigen::Index assets() const { return mu.size(); }

  static MarketModel from_moments(Eigen::VectorXd mu, SymMatrix sigma) {
    if (mu.size() != sigma.size()) {
      throw std::invalid_argument("MarketModel: mu and sigma sizes differ");
    }
    MarketModel m;
    m.mu = std::move(mu);
    m.sigma = std::move(sigma);
    for (Eigen::Index i = 0; i < m.mu.size(); ++i) {
      m.asset_names.push_back("A" + std::to_string(i + 1));
    }
    return m;
  }
};

enum class PriceFormat { Csv, OrLibraryIndtrack };

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

inline double parse_number(const std::string& tok, std::size_t line, std::size_t col) {
  if (tok.empty() || tok == "NA") return kMissing;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ParseError("malformed number '" + tok + "'", line, col);
  }
  if (used != tok.size() || !std::isfinite(v)) {
    throw ParseError("malformed number '" + tok + "'", line, col);
  }
  return v;
}

inline PriceSeries load_csv(std::istream& in) {
  PriceSeries out;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.size() < 2) throw StructuralError("CSV: header needs a date column and at least one asset");
  bool has_index = header.back() == "INDEX";
  const std::size_t n_assets = header.size() - 1 - (has_index ? 1 : 0);
  if (n_assets == 0) throw StructuralError("CSV: no asset columns");
  out.asset_names.assign(header.begin() + 1, header.begin() + 1 + static_cast<long>(n_assets));

  std::vector<std::vector<double>> rows;
  std::vector<double> index;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw StructuralError("CSV: ragged row at line " + std::to_string(lineno) + " (" +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()) + ")");
    }
    out.timestamps.push_back(cells[0]);
    std::vector<double> row(n_assets);
    for (std::size_t j = 0; j < n_assets; ++j) row[j] = parse_number(cells[j + 1], lineno, j + 2);
    rows.push_back(std::move(row));
    if (has_index) index.push_back(parse_number(cells.back(), lineno, cells.size()));
  }
  out.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_assets));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t j = 0; j < n_assets; ++j) {
      out.prices(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rows[t][j];
    }
  }
  if (has_index) out.index_prices = Eigen::Map<Eigen::VectorXd>(index.data(), static_cast<Eigen::Index>(index.size()));
  out.validate();
  return out;
}

inline std::string period_label(std::size_t t, std::size_t total) {
  std::string digits = std::to_string(t);
  const std::size_t width = std::to_string(total > 0 ? total - 1 : 0).size();
  return "t" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

// OR-Library index-tracking files. Two layouts are accepted and told apart by
// exact token counts; anything else is rejected.
//   (a) "N T" header, then N+1 blocks of T+1 prices, the index block first;
//   (b) "N" header, then periods of N stock prices followed by the index price.
inline PriceSeries load_indtrack(std::istream& in) {
  std::vector<std::string> raw{std::istream_iterator<std::string>(in),
                               std::istream_iterator<std::string>()};
  if (raw.empty()) throw StructuralError("indtrack: empty stream");
  std::vector<double> tok(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    tok[k] = parse_number(raw[k], 1, k + 1);
    if (is_missing(tok[k])) throw ParseError("indtrack: missing value token", 1, k + 1);
  }
  auto as_count = [&](std::size_t k) -> long {
    const double v = tok[k];
    if (v < 1 || v != std::floor(v)) {
      throw ParseError("indtrack: expected a positive integer count", 1, k + 1);
    }
    return static_cast<long>(v);
  };
  const long n = as_count(0);
  PriceSeries out;
  for (long i = 0; i < n; ++i) out.asset_names.push_back("S" + std::to_string(i + 1));

  if (tok.size() >= 2 && tok[1] >= 1 && tok[1] == std::floor(tok[1])) {
    const long t = static_cast<long>(tok[1]);
    if (static_cast<long>(tok.size()) - 2 == (n + 1) * (t + 1)) {
      const long periods = t + 1;
      out.prices.resize(periods, n);
      Eigen::VectorXd index(periods);
      std::size_t k = 2;
      for (long p = 0; p < periods; ++p) index(p) = tok[k++];
      for (long i = 0; i < n; ++i) {
        for (long p = 0; p < periods; ++p) out.prices(p, i) = tok[k++];
      }
      out.index_prices = index;
      for (long p = 0; p < periods; ++p) {
        out.timestamps.push_back(period_label(static_cast<std::size_t>(p), static_cast<std::size_t>(periods)));
      }
      out.validate();
      return out;
    }
  }
  const std::size_t body = tok.size() - 1;
  if (body == 0 || body % static_cast<std::size_t>(n + 1) != 0) {
    throw StructuralError("indtrack: token count " + std::to_string(body) +
                          " after the asset count is not a multiple of " +
                          std::to_string(n + 1) + " (assets + index)");
  }
  const auto periods = static_cast<long>(body / static_cast<std::size_t>(n + 1));
  out.prices.resize(periods, n);
  Eigen::VectorXd index(periods);
  std::size_t k = 1;
  for (long p = 0; p < periods; ++p) {
    for (long i = 0; i < n; ++i) out.prices(p, i) = tok[k++];
    index(p) = tok[k++];
  }
  out.index_prices = index;
  for (long p = 0; p < periods; ++p) {
    out.timestamps.push_back(period_label(static_cast<std::size_t>(p), static_cast<std::size_t>(periods)));
  }
  out.validate();
  return out;
}

}  // namespace detail

/**
 * Parses a price stream. Malformed numbers raise ParseError with the line and
 * column; ragged rows or token counts that fit neither indtrack layout raise
 * StructuralError.
 */
inline PriceSeries load_prices(std::istream& in, PriceFormat format) {
  return format == PriceFormat::Csv ? detail::load_csv(in) : detail::load_indtrack(in);
}

struct CleanReport {
  struct Entry {
    std::string asset;
    std::string reason;
  };
  std::vector<Entry> dropped;
  std::vector<std::string> fills;  // one note per asset that had gaps filled

  /// `DROPPED <asset> <reason>` lines followed by fill notes.
  std::string to_text() const {
    std::ostringstream os;
    for (const auto& d : dropped) os << "DROPPED " << d.asset << ' ' << d.reason << '\n';
    for (const auto& f : fills) os << f << '\n';
    return os.str();
  }
};

struct CleanResult {
  PriceSeries series;
  CleanReport report;
};

namespace detail {

struct FillOutcome {
  bool keep = true;
  std::string reason;
  int interior_filled = 0;
  int edge_filled = 0;
};

// Fills gaps of length <= 2 in place: interior gaps linearly, leading and
// trailing gaps by copying the nearest observation.
inline FillOutcome fill_column(Eigen::Ref<Eigen::VectorXd> col) {
  FillOutcome out;
  const Eigen::Index t = col.size();
  Eigen::Index longest = 0;
  Eigen::Index run = 0;
  bool any_observed = false;
  for (Eigen::Index k = 0; k < t; ++k) {
    if (is_missing(col(k))) {
      longest = std::max(longest, ++run);
    } else {
      run = 0;
      any_observed = true;
    }
  }
  if (!any_observed) return {false, "all-missing", 0, 0};
  if (longest > 2) {
    return {false, "missing-run=" + std::to_string(longest), 0, 0};
  }
  Eigen::Index k = 0;
  while (k < t) {
    if (!is_missing(col(k))) {
      ++k;
      continue;
    }
    Eigen::Index e = k;
    while (e < t && is_missing(col(e))) ++e;  // gap is [k, e)
    if (k == 0) {
      for (Eigen::Index j = k; j < e; ++j) col(j) = col(e);
      out.edge_filled += static_cast<int>(e - k);
    } else if (e == t) {
      for (Eigen::Index j = k; j < e; ++j) col(j) = col(k - 1);
      out.edge_filled += static_cast<int>(e - k);
    } else {
      const double a = col(k - 1);
      const double b = col(e);
      const double span = static_cast<double>(e - k + 1);
      for (Eigen::Index j = k; j < e; ++j) {
        col(j) = a + (b - a) * static_cast<double>(j - k + 1) / span;
      }
      out.interior_filled += static_cast<int>(e - k);
    }
    k = e;
  }
  return out;
}

}  // namespace detail

/**
 * Drops assets with a run of more than two consecutive missing prices and
 * fills the remaining gaps. Idempotent.
 */
inline CleanResult clean_series(const PriceSeries& p) {
  CleanResult res;
  std::vector<Eigen::Index> keep;
  Eigen::MatrixXd work = p.prices;
  for (Eigen::Index j = 0; j < p.assets(); ++j) {
    const auto outcome = detail::fill_column(work.col(j));
    if (!outcome.keep) {
      res.report.dropped.push_back({p.asset_names[j], outcome.reason});
      continue;
    }
    keep.push_back(j);
    if (outcome.interior_filled + outcome.edge_filled > 0) {
      res.report.fills.push_back("FILLED " + p.asset_names[j] +
                                 " linear=" + std::to_string(outcome.interior_filled) +
                                 " edge=" + std::to_string(outcome.edge_filled));
    }
  }
  PriceSeries& s = res.series;
  s.timestamps = p.timestamps;
  s.prices.resize(p.periods(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    s.prices.col(static_cast<Eigen::Index>(k)) = work.col(keep[k]);
    s.asset_names.push_back(p.asset_names[keep[k]]);
  }
  if (p.index_prices) {
    Eigen::VectorXd idx = *p.index_prices;
    const auto outcome = detail::fill_column(idx);
    if (outcome.keep) {
      s.index_prices = idx;
      if (outcome.interior_filled + outcome.edge_filled > 0) {
        res.report.fills.push_back("FILLED INDEX linear=" + std::to_string(outcome.interior_filled) +
                                   " edge=" + std::to_string(outcome.edge_filled));
      }
    } else {
      res.report.dropped.push_back({"INDEX", outcome.reason});
    }
  }
  return res;
}

inline Eigen::VectorXd log_returns_of(const Eigen::VectorXd& prices, const std::string& label,
                                      const std::vector<std::string>& timestamps) {
  Eigen::VectorXd r(std::max<Eigen::Index>(0, prices.size() - 1));
  for (Eigen::Index t = 0; t < prices.size(); ++t) {
    if (is_missing(prices(t)) || !(prices(t) > 0.0)) {
      throw DomainError("nonpositive or missing price for " + label + " at period " +
                        (static_cast<std::size_t>(t) < timestamps.size() ? timestamps[t] : std::to_string(t)));
    }
    if (t > 0) r(t - 1) = std::log(prices(t) / prices(t - 1));
  }
  return r;
}

/// Natural-log price ratios; T = periods - 1.
inline ReturnScenarios log_returns(const PriceSeries& p) {
  ReturnScenarios s;
  s.returns.resize(std::max<Eigen::Index>(0, p.periods() - 1), p.assets());
  for (Eigen::Index j = 0; j < p.assets(); ++j) {
    s.returns.col(j) = log_returns_of(p.prices.col(j), p.asset_names[j], p.timestamps);
  }
  return s;
}

enum class CovarianceDivisor { Population, Sample };

/// Column means and covariance (divisor T by default, T-1 on request).
inline MarketModel estimate(const ReturnScenarios& s,
                            CovarianceDivisor divisor = CovarianceDivisor::Population,
                            std::vector<std::string> names = {}) {
  const Eigen::Index t = s.count();
  if (t < 2) throw InsufficientDataError("estimate: need at least 2 return scenarios");
  if (!s.returns.allFinite()) throw DomainError("estimate: non-finite return");
  MarketModel m;
  m.mu = s.returns.colwise().mean().transpose();
  const Eigen::MatrixXd centered = s.returns.rowwise() - m.mu.transpose();
  const double d = divisor == CovarianceDivisor::Population ? static_cast<double>(t)
                                                            : static_cast<double>(t - 1);
  m.sigma = SymMatrix(centered.transpose() * centered / d);
  m.scenarios = s;
  if (names.empty()) {
    for (Eigen::Index i = 0; i < m.mu.size(); ++i) names.push_back("A" + std::to_string(i + 1));
  }
  m.asset_names = std::move(names);
  return m;
}

/// In-sample is [start, boundary], out-of-sample [boundary, end].
inline std::pair<PriceSeries, PriceSeries> split(const PriceSeries& p, const std::string& boundary) {
  const auto it = std::find(p.timestamps.begin(), p.timestamps.end(), boundary);
  if (it == p.timestamps.end()) {
    throw std::invalid_argument("split: boundary '" + boundary + "' not found");
  }
  const auto b = static_cast<Eigen::Index>(it - p.timestamps.begin());
  return {p.rows_between(0, b), p.rows_between(b, p.periods() - 1)};
}

}  // namespace cardport
