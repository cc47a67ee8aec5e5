#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cardport/market_data.hpp"
#include "support.hpp"

using namespace cardport;

namespace {

PriceSeries column(std::vector<double> v) {
  PriceSeries p;
  p.asset_names = {"A"};
  p.prices.resize(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t t = 0; t < v.size(); ++t) {
    p.prices(static_cast<Eigen::Index>(t), 0) = v[t];
    p.timestamps.push_back("2020-01-0" + std::to_string(t + 1));
  }
  return p;
}

PriceSeries parse(const std::string& text, PriceFormat f = PriceFormat::Csv) {
  std::istringstream in(text);
  return load_prices(in, f);
}

}  // namespace

TEST(LoadPrices, CsvShapeAndMissing) {
  const PriceSeries p = parse(
      "date,A,B,C\n"
      "2020-01-01,1,2,3\n"
      "2020-01-08,1.1,NA,3\n"
      "2020-01-15,1.2,2.2,\n"
      "2020-01-22,1.3,2.3,3.3\n"
      "2020-01-29,1.4,2.4,3.4\n");
  EXPECT_EQ(p.assets(), 3);
  EXPECT_EQ(p.periods(), 5);
  EXPECT_FALSE(p.index_prices);
  EXPECT_TRUE(is_missing(p.prices(1, 1)));
  EXPECT_TRUE(is_missing(p.prices(2, 2)));
  EXPECT_DOUBLE_EQ(p.prices(4, 0), 1.4);
}

TEST(LoadPrices, CsvIndexColumn) {
  const PriceSeries p = parse("date,A,INDEX\n2020-01-01,10,100\n2020-01-08,11,101\n");
  ASSERT_TRUE(p.index_prices);
  EXPECT_EQ(p.assets(), 1);
  EXPECT_DOUBLE_EQ((*p.index_prices)(1), 101.0);
}

TEST(LoadPrices, CsvErrors) {
  try {
    parse("date,A,B\n2020-01-01,1,2\n2020-01-08,1,x2\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), 3u);
  }
  EXPECT_THROW(parse("date,A,B\n2020-01-01,1\n"), StructuralError);
  EXPECT_THROW(parse("date,A\n2020-01-08,1\n2020-01-01,1\n"), StructuralError);
}

TEST(LoadPrices, IndtrackHeaderLayout) {
  // 2 stocks, T = 2: index block first, then one block per stock.
  const PriceSeries p = parse("2 2\n100 101 102\n10 11 12\n20 21 22\n", PriceFormat::OrLibraryIndtrack);
  EXPECT_EQ(p.assets(), 2);
  EXPECT_EQ(p.periods(), 3);
  EXPECT_DOUBLE_EQ(p.prices(2, 1), 22.0);
  EXPECT_DOUBLE_EQ((*p.index_prices)(1), 101.0);
}

TEST(LoadPrices, IndtrackRowLayout) {
  // 2 stocks: each period lists both stock prices then the index.
  const PriceSeries p = parse("2\n10 20 100\n11 21 101\n12 22 102\n13 23 103\n", PriceFormat::OrLibraryIndtrack);
  EXPECT_EQ(p.assets(), 2);
  EXPECT_EQ(p.periods(), 4);
  EXPECT_DOUBLE_EQ(p.prices(3, 0), 13.0);
  EXPECT_DOUBLE_EQ((*p.index_prices)(3), 103.0);
}

TEST(LoadPrices, IndtrackRejectsMismatchedCounts) {
  EXPECT_THROW(parse("2\n10 20 100\n11 21\n", PriceFormat::OrLibraryIndtrack), StructuralError);
  EXPECT_THROW(parse("2\n10 abc 100\n", PriceFormat::OrLibraryIndtrack), ParseError);
}

TEST(CleanSeries, Examples) {
  auto a = clean_series(column({100, kMissing, 104, 106}));
  ASSERT_EQ(a.series.assets(), 1);
  EXPECT_DOUBLE_EQ(a.series.prices(1, 0), 102.0);

  auto b = clean_series(column({100, kMissing, kMissing, kMissing, 110}));
  EXPECT_EQ(b.series.assets(), 0);
  ASSERT_EQ(b.report.dropped.size(), 1u);
  EXPECT_EQ(b.report.to_text().substr(0, 10), "DROPPED A ");

  auto c = clean_series(column({kMissing, 100, 102}));
  EXPECT_DOUBLE_EQ(c.series.prices(0, 0), 100.0);

  auto d = clean_series(column({kMissing, kMissing, kMissing}));
  EXPECT_EQ(d.series.assets(), 0);
  EXPECT_EQ(d.report.dropped[0].reason, "all-missing");
}

TEST(CleanSeries, TwoGapInterpolatesAndTrailingExtends) {
  auto a = clean_series(column({100, kMissing, kMissing, 106, kMissing, kMissing}));
  ASSERT_EQ(a.series.assets(), 1);
  EXPECT_DOUBLE_EQ(a.series.prices(1, 0), 102.0);
  EXPECT_DOUBLE_EQ(a.series.prices(2, 0), 104.0);
  EXPECT_DOUBLE_EQ(a.series.prices(5, 0), 106.0);
}

TEST(CleanSeries, Idempotent) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution miss(0.2);
  for (int trial = 0; trial < 30; ++trial) {
    PriceSeries p;
    const int n = 5;
    const int t = 12;
    p.prices.resize(t, n);
    for (int i = 0; i < n; ++i) {
      p.asset_names.push_back("S" + std::to_string(i));
      for (int s = 0; s < t; ++s) p.prices(s, i) = miss(rng) ? kMissing : 50.0 + s + i;
    }
    for (int s = 0; s < t; ++s) p.timestamps.push_back("t" + std::to_string(100 + s));
    const auto once = clean_series(p);
    const auto twice = clean_series(once.series);
    EXPECT_EQ(once.series.asset_names, twice.series.asset_names);
    EXPECT_TRUE(once.series.prices == twice.series.prices);
    EXPECT_TRUE(twice.report.dropped.empty());
    EXPECT_FALSE(once.series.prices.hasNaN());
  }
}

TEST(LogReturns, Examples) {
  EXPECT_NEAR(log_returns(column({100, 105})).returns(0, 0), 0.048790164169432, 1e-12);
  const auto flat = log_returns(column({50, 50, 50}));
  EXPECT_EQ(flat.count(), 2);
  EXPECT_EQ(flat.returns(1, 0), 0.0);
  EXPECT_NEAR(log_returns(column({100, 50})).returns(0, 0), -0.693147180559945, 1e-12);
  EXPECT_THROW(log_returns(column({100, 0.0})), DomainError);
}

TEST(Estimate, Examples) {
  ReturnScenarios s;
  s.returns.resize(2, 2);
  s.returns << 0.01, 0.01, 0.03, 0.03;
  const MarketModel m = estimate(s);
  EXPECT_NEAR(m.mu(0), 0.02, 1e-15);
  EXPECT_NEAR(m.sigma(0, 0), 0.0001, 1e-15);
  EXPECT_NEAR(m.sigma(0, 1), m.sigma(0, 0), 1e-18);
  const MarketModel sample = estimate(s, CovarianceDivisor::Sample);
  EXPECT_NEAR(sample.sigma(0, 0), 0.0002, 1e-15);
  ReturnScenarios one;
  one.returns = Eigen::MatrixXd::Ones(1, 2);
  EXPECT_THROW(estimate(one), InsufficientDataError);
}

TEST(Estimate, MatchesTwoPassCovariance) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    ReturnScenarios s;
    s.returns = testsupport::random_matrix(rng, 4, 3, 0.05);
    const MarketModel m = estimate(s);
    const Eigen::MatrixXd ref = testsupport::covariance_two_pass(s.returns);
    EXPECT_LE((m.sigma.dense() - ref).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((m.mu - s.returns.colwise().mean().transpose()).cwiseAbs().maxCoeff(), 1e-12);
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.sigma.dense()).eigenvalues().minCoeff();
    EXPECT_GE(lmin, -1e-10);
  }
}

TEST(Split, Examples) {
  PriceSeries p;
  p.asset_names = {"A"};
  p.prices.resize(10, 1);
  for (int t = 0; t < 10; ++t) {
    p.prices(t, 0) = 100.0 + t * t;
    p.timestamps.push_back("p" + std::to_string(t));
  }
  const auto [in, out] = split(p, "p6");
  EXPECT_EQ(in.periods(), 7);
  EXPECT_EQ(out.periods(), 4);
  const auto [in2, out2] = split(p, "p9");
  EXPECT_EQ(out2.periods(), 1);
  EXPECT_EQ(log_returns(out2).count(), 0);
  EXPECT_THROW(split(p, "nope"), std::invalid_argument);

  const auto all = log_returns(p).returns;
  const auto a = log_returns(in).returns;
  const auto b = log_returns(out).returns;
  Eigen::MatrixXd joined(a.rows() + b.rows(), 1);
  joined << a, b;
  EXPECT_TRUE(joined == all);
}
