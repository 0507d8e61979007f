#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "egocomm/error.hpp"
#include "egocomm/special.hpp"

namespace egocomm::stats {

inline double mean(std::span<const double> v) {
  if (v.empty()) fail(ErrorCode::TooFewObservations, "mean of empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// 1-based ranks; tied values share the average of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

inline bool is_constant(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

/// Product-moment correlation coefficient, clamped to [-1, 1].
inline double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::LengthMismatch, "pearson: unequal lengths");
  if (x.size() < 2) fail(ErrorCode::TooFewObservations, "pearson: need at least 2 points");
  if (is_constant(x) || is_constant(y)) fail(ErrorCode::ConstantInput, "pearson: constant input");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct CorrelationResult {
  double r = 0.0;
  double p = 1.0;  // two-sided, t test with n-2 df
  std::size_t n = 0;
};

inline CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::LengthMismatch, "pearson: unequal lengths");
  if (x.size() < 3) fail(ErrorCode::TooFewObservations, "pearson: need n >= 3");
  CorrelationResult out;
  out.n = x.size();
  out.r = pearson_r(x, y);
  const double df = static_cast<double>(out.n - 2);
  const double denom = 1.0 - out.r * out.r;
  if (denom <= 0.0) {
    out.p = 0.0;
  } else {
    const double t = out.r * std::sqrt(df / denom);
    out.p = special::student_t_two_sided_p(t, df);
  }
  return out;
}

/// Spearman's rho: Pearson correlation of average ranks.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson_r(rx, ry);
}

struct MeanCI {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
};

/// Mean with a two-sided t interval at `level`.
inline MeanCI mean_ci(std::span<const double> values, double level = 0.95) {
  if (values.size() < 2) fail(ErrorCode::TooFewObservations, "mean_ci: need n >= 2");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::DomainError, "mean_ci: level must be in (0,1)");
  MeanCI out;
  out.n = values.size();
  out.mean = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double sd = std::sqrt(ss / static_cast<double>(out.n - 1));
  const double half =
      sd == 0.0 ? 0.0
                : special::student_t_quantile(0.5 * (1.0 + level), static_cast<double>(out.n - 1)) * sd /
                      std::sqrt(static_cast<double>(out.n));
  out.lo = out.mean - half;
  out.hi = out.mean + half;
  return out;
}

/// Quantile by linear interpolation between order statistics:
/// h = (n-1)q, Q = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
inline double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) fail(ErrorCode::TooFewObservations, "quantile of empty vector");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorCode::DomainError, "quantile: q must be in [0,1]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

// ---------------------------------------------------------------------------
// Linear models

/// Column-major dense matrix for design matrices.
struct Design {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double& at(std::size_t r, std::size_t c) { return data[c * rows + r]; }
  double at(std::size_t r, std::size_t c) const { return data[c * rows + r]; }
};

/// Residual sum of squares of the least-squares fit of y on X, via
/// Householder QR. Throws RankDeficientDesign when X lacks full column rank.
inline double least_squares_rss(Design X, std::vector<double> y) {
  const std::size_t n = X.rows, p = X.cols;
  if (p > n) fail(ErrorCode::RankDeficientDesign, "more columns than rows");
  double scale = 0.0;
  for (std::size_t c = 0; c < p; ++c) {
    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) norm += X.at(r, c) * X.at(r, c);
    scale = std::max(scale, std::sqrt(norm));
  }
  const double tol = 1e-10 * std::max(scale, 1.0);
  for (std::size_t k = 0; k < p; ++k) {
    double norm = 0.0;
    for (std::size_t r = k; r < n; ++r) norm += X.at(r, k) * X.at(r, k);
    norm = std::sqrt(norm);
    if (norm <= tol) fail(ErrorCode::RankDeficientDesign, "design column " + std::to_string(k) + " is collinear");
    const double alpha = X.at(k, k) > 0 ? -norm : norm;
    // v = x - alpha e_k, stored in place of column k.
    X.at(k, k) -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t r = k; r < n; ++r) vnorm2 += X.at(r, k) * X.at(r, k);
    if (vnorm2 == 0.0) continue;
    auto reflect = [&](auto&& get) {
      double dot = 0.0;
      for (std::size_t r = k; r < n; ++r) dot += X.at(r, k) * get(r);
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t r = k; r < n; ++r) get(r) -= f * X.at(r, k);
    };
    for (std::size_t c = k + 1; c < p; ++c) reflect([&](std::size_t r) -> double& { return X.at(r, c); });
    reflect([&](std::size_t r) -> double& { return y[r]; });
  }
  double rss = 0.0;
  for (std::size_t r = p; r < n; ++r) rss += y[r] * y[r];
  return rss;
}

enum class SsType { TypeI, TypeII };

/// A categorical predictor: one level label per observation.
struct Factor {
  std::string name;
  std::vector<std::string> levels;
};

struct FactorTest {
  std::string factor;
  double F = 0.0;
  double p = 1.0;
  int df_num = 0;
  int df_den = 0;
  double ss = 0.0;
};

struct AnovaResult {
  std::vector<FactorTest> tests;  // in factor order
  int residual_df = 0;
  double residual_ss = 0.0;

  const FactorTest& test(const std::string& name) const {
    for (const auto& t : tests)
      if (t.factor == name) return t;
    fail(ErrorCode::DomainError, "no test for factor " + name);
  }
};

namespace detail {

struct DummyBlock {
  std::vector<std::vector<double>> columns;  // k-1 treatment-coded columns
};

inline DummyBlock dummy_code(const Factor& f) {
  std::map<std::string, std::size_t> index;
  for (const auto& l : f.levels) index.emplace(l, 0);
  std::size_t i = 0;
  for (auto& [level, slot] : index) slot = i++;
  DummyBlock block;
  if (index.empty()) return block;
  block.columns.assign(index.size() - 1, std::vector<double>(f.levels.size(), 0.0));
  for (std::size_t r = 0; r < f.levels.size(); ++r) {
    const auto level = index.at(f.levels[r]);
    if (level > 0) block.columns[level - 1][r] = 1.0;  // first sorted level is the reference
  }
  return block;
}

inline double rss_with(std::span<const double> y, const std::vector<DummyBlock>& blocks,
                       const std::vector<bool>& include) {
  std::size_t cols = 1;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (include[b]) cols += blocks[b].columns.size();
  Design X{y.size(), cols, std::vector<double>(y.size() * cols, 0.0)};
  for (std::size_t r = 0; r < y.size(); ++r) X.at(r, 0) = 1.0;
  std::size_t c = 1;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (!include[b]) continue;
    for (const auto& col : blocks[b].columns) {
      for (std::size_t r = 0; r < y.size(); ++r) X.at(r, c) = col[r];
      ++c;
    }
  }
  return least_squares_rss(std::move(X), std::vector<double>(y.begin(), y.end()));
}

}  // namespace detail

/// Main-effects fixed-effects ANOVA with treatment-coded dummies and an
/// intercept. Type II SS compares the full model with the model lacking each
/// factor; Type I adds factors sequentially in the given order. A factor
/// observed at a single level contributes no columns and reports df 0, F 0, p 1.
inline AnovaResult anova_main_effects(std::span<const double> y, std::span<const Factor> factors,
                                      SsType ss_type = SsType::TypeII) {
  const std::size_t n = y.size();
  std::vector<detail::DummyBlock> blocks;
  std::size_t params = 1;
  for (const auto& f : factors) {
    if (f.levels.size() != n) fail(ErrorCode::LengthMismatch, "factor " + f.name + " length differs from response");
    blocks.push_back(detail::dummy_code(f));
    params += blocks.back().columns.size();
  }
  if (n <= params)
    fail(ErrorCode::TooFewObservations, std::to_string(n) + " observations for " + std::to_string(params) +
                                            " parameters");
  AnovaResult out;
  out.residual_df = static_cast<int>(n - params);
  std::vector<bool> all(blocks.size(), true);
  out.residual_ss = detail::rss_with(y, blocks, all);

  const double ybar = mean(y);
  double tss = 0.0;
  for (double v : y) tss += (v - ybar) * (v - ybar);
  const double zero_tol = 1e-12 * tss;

  for (std::size_t k = 0; k < blocks.size(); ++k) {
    FactorTest t;
    t.factor = factors[k].name;
    t.df_num = static_cast<int>(blocks[k].columns.size());
    t.df_den = out.residual_df;
    if (t.df_num > 0) {
      std::vector<bool> without(blocks.size(), false), with(blocks.size(), false);
      if (ss_type == SsType::TypeII) {
        without = all;
        without[k] = false;
        t.ss = detail::rss_with(y, blocks, without) - out.residual_ss;
      } else {
        for (std::size_t j = 0; j < k; ++j) without[j] = with[j] = true;
        with[k] = true;
        t.ss = detail::rss_with(y, blocks, without) - detail::rss_with(y, blocks, with);
      }
      t.ss = std::max(t.ss, 0.0);
      if (t.ss <= zero_tol) {
        t.F = 0.0;
        t.p = 1.0;
      } else if (out.residual_ss <= zero_tol) {
        t.F = std::numeric_limits<double>::infinity();
        t.p = 0.0;
      } else {
        t.F = (t.ss / t.df_num) / (out.residual_ss / out.residual_df);
        t.p = special::f_survival(t.F, t.df_num, t.df_den);
      }
    }
    out.tests.push_back(std::move(t));
  }
  return out;
}

/// Group factor adjusted for sex and age. Test names: "factor", "sex", "age".
inline AnovaResult three_way_anova(std::span<const double> response, std::vector<std::string> factor,
                                   std::vector<std::string> sex, std::vector<std::string> age,
                                   SsType ss_type = SsType::TypeII) {
  const std::vector<Factor> factors{{"factor", std::move(factor)}, {"sex", std::move(sex)}, {"age", std::move(age)}};
  return anova_main_effects(response, factors, ss_type);
}

}  // namespace egocomm::stats
