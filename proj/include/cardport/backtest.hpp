#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cardport/market_data.hpp"
#include "cardport/mv.hpp"

namespace cardport {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cumulative value of a held portfolio, 1.0 at the first period.
struct PerformancePath {
  std::string label;
  std::vector<double> values;
  std::vector<std::string> periods;
};

/**
 * Buy-and-hold value: sum_i w_i P_i(t) / P_i(0). Weights are matched to
 * out-of-sample columns by asset name.
 */
inline PerformancePath expost_path(const Eigen::VectorXd& weights, const std::vector<std::string>& names,
                                   const PriceSeries& out, std::string label) {
  if (static_cast<Eigen::Index>(names.size()) != weights.size()) {
    throw std::invalid_argument("expost_path: weights and names differ in length");
  }
  if (out.periods() < 1) throw DataError("expost_path: no out-of-sample periods");
  PerformancePath p;
  p.label = std::move(label);
  p.periods = out.timestamps;
  p.values.assign(static_cast<std::size_t>(out.periods()), 0.0);
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights(i) == 0.0) continue;
    const auto it = std::find(out.asset_names.begin(), out.asset_names.end(), names[static_cast<std::size_t>(i)]);
    if (it == out.asset_names.end()) {
      throw DataError("expost_path: held asset '" + names[static_cast<std::size_t>(i)] + "' has no out-of-sample prices");
    }
    const Eigen::Index col = it - out.asset_names.begin();
    const double base = out.prices(0, col);
    for (Eigen::Index t = 0; t < out.periods(); ++t) {
      const double pt = out.prices(t, col);
      if (is_missing(pt) || !(pt > 0.0) || !(base > 0.0)) {
        throw DataError("expost_path: invalid price for '" + names[static_cast<std::size_t>(i)] + "' at " +
                        out.timestamps[static_cast<std::size_t>(t)]);
      }
      p.values[static_cast<std::size_t>(t)] += weights(i) * (pt / base);
    }
  }
  const double total = p.values[0];
  if (!(total > 0.0)) throw DataError("expost_path: weights hold nothing");
  for (double& v : p.values) v /= total;
  p.values[0] = 1.0;
  return p;
}

/// Weights aligned with the columns of `out`.
inline PerformancePath expost_path(const Eigen::VectorXd& weights, const PriceSeries& out, std::string label = "portfolio") {
  return expost_path(weights, out.asset_names, out, std::move(label));
}

inline PerformancePath index_path(const PriceSeries& out) {
  if (!out.index_prices) throw DataError("index_path: series has no index column");
  PerformancePath p;
  p.label = "INDEX";
  p.periods = out.timestamps;
  const Eigen::VectorXd& v = *out.index_prices;
  for (Eigen::Index t = 0; t < v.size(); ++t) {
    if (is_missing(v(t)) || !(v(t) > 0.0)) throw DataError("index_path: invalid index price");
    p.values.push_back(t == 0 ? 1.0 : v(t) / v(0));
  }
  return p;
}

struct PathSummary {
  std::string label;
  double total_return = 0.0;
  double mean_log_return = 0.0;
  double stdev_log_return = 0.0;  // population form
  double max_drawdown = 0.0;
};

inline PathSummary summarize(const PerformancePath& p) {
  PathSummary s;
  s.label = p.label;
  s.total_return = p.values.back() / p.values.front() - 1.0;
  const std::size_t t = p.values.size();
  if (t > 1) {
    std::vector<double> r(t - 1);
    for (std::size_t a = 1; a < t; ++a) r[a - 1] = std::log(p.values[a] / p.values[a - 1]);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(r.size());
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    s.mean_log_return = mean;
    s.stdev_log_return = std::sqrt(var / static_cast<double>(r.size()));
  }
  double peak = p.values.front();
  for (double v : p.values) {
    peak = std::max(peak, v);
    s.max_drawdown = std::max(s.max_drawdown, (peak - v) / peak);
  }
  return s;
}

struct ComparisonReport {
  std::vector<PerformancePath> paths;
  PerformancePath index;
  std::vector<PathSummary> summaries;  // one per path, input order
  PathSummary index_summary;

  /// `period,<label>...,INDEX`.
  void write_csv(std::ostream& os) const {
    os << std::setprecision(17) << "period";
    for (const auto& p : paths) os << ',' << p.label;
    os << ",INDEX\n";
    for (std::size_t t = 0; t < index.values.size(); ++t) {
      os << index.periods[t];
      for (const auto& p : paths) os << ',' << p.values[t];
      os << ',' << index.values[t] << '\n';
    }
  }

  /// One line per path; deltas are against the index.
  std::string summary_text() const {
    std::ostringstream os;
    os << std::setprecision(10);
    auto line = [&](const PathSummary& s) {
      os << s.label << " total_return=" << s.total_return << " mean_log=" << s.mean_log_return
         << " stdev_log=" << s.stdev_log_return << " max_drawdown=" << s.max_drawdown;
    };
    for (const auto& s : summaries) {
      line(s);
      os << " delta_total_return=" << s.total_return - index_summary.total_return
         << " delta_max_drawdown=" << s.max_drawdown - index_summary.max_drawdown << '\n';
    }
    line(index_summary);
    os << '\n';
    return os.str();
  }

  /// Static line chart of every path.
  void write_svg(std::ostream& os, int width = 800, int height = 400) const {
    double lo = kInf;
    double hi = -kInf;
    auto scan = [&](const PerformancePath& p) {
      for (double v : p.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    };
    for (const auto& p : paths) scan(p);
    scan(index);
    if (!(hi > lo)) {
      hi = lo + 1.0;
    }
    const int pad = 40;
    const std::size_t t = index.values.size();
    auto px = [&](std::size_t a) {
      return pad + (t > 1 ? static_cast<double>(a) / static_cast<double>(t - 1) : 0.0) * (width - 2 * pad);
    };
    auto py = [&](double v) { return height - pad - (v - lo) / (hi - lo) * (height - 2 * pad); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    auto poly = [&](const PerformancePath& p, const char* color, int slot) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t a = 0; a < p.values.size(); ++a) os << (a ? " " : "") << px(a) << ',' << py(p.values[a]);
      os << "\"/>\n";
      os << "<text x=\"" << pad + 5 << "\" y=\"" << pad + 14 * slot << "\" fill=\"" << color
         << "\" font-size=\"12\">" << p.label << "</text>\n";
    };
    for (std::size_t a = 0; a < paths.size(); ++a) poly(paths[a], colors[a % 6], static_cast<int>(a));
    poly(index, "#000000", static_cast<int>(paths.size()));
    os << "</svg>\n";
  }
};

inline ComparisonReport compare(std::vector<PerformancePath> paths, PerformancePath index) {
  for (const auto& p : paths) {
    if (p.periods != index.periods) {
      throw std::invalid_argument("compare: path '" + p.label + "' is not aligned with the index");
    }
  }
  ComparisonReport r;
  for (const auto& p : paths) r.summaries.push_back(summarize(p));
  r.index_summary = summarize(index);
  r.paths = std::move(paths);
  r.index = std::move(index);
  return r;
}

struct RiskPreset {
  std::string name;
  double rho = 0.0;
};

/// Low-risk (rho_min) and mid-risk (halfway to rho_max) targets.
inline std::vector<RiskPreset> backtest_presets(const ReturnRange& r) {
  return {{"low", r.rho_min}, {"mid", r.rho_min + 0.5 * (r.rho_max - r.rho_min)}};
}

}  // namespace cardport
