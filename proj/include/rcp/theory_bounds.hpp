#pragma once

// Coverage and robustness bounds for split conformal prediction under Huber
// contamination, stochastic-dominance checks, and the binomial size-bias
// inequality used by the estimator bound.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcp/conformal.hpp"
#include "rcp/error.hpp"
#include "rcp/random.hpp"
#include "rcp/stats_core.hpp"

namespace rcp {

struct BoundReport {
  // Raw (unclipped) values.
  double lower_exact = 0.0;
  double upper_exact = 0.0;
  double lower_ks = 0.0;
  double upper_ks = 0.0;
  std::optional<double> lower_tv;  // needs a total-variation distance
  double C_ni = 0.0;
  double lemma2_bound = 0.0;

  // Supporting quantities.
  double expected_gap = 0.0;  // sample mean of F2(q~) - F1(q~)
  double d_ks = 0.0;
  double w1 = 0.0;
  std::size_t order_index = 0;
  std::size_t n_samples = 0;

  static double clip(double v) { return std::clamp(v, 0.0, 1.0); }
};

// ============================================================================
// Order-statistic robustness constant
// ============================================================================

// C(n, i) = sup_t t^(i-1) (1-t)^(n-i) / B(i, n-i+1), attained at t = (i-1)/(n-1); 0^0 = 1.
inline double lemma2_constant(std::size_t n, std::size_t i) {
  detail::require(n >= 1, "lemma2_constant needs n >= 1");
  detail::require(i >= 1 && i <= n, "order-statistic index outside 1..n");
  const double nd = static_cast<double>(n);
  const double id = static_cast<double>(i);
  double log_sup = 0.0;
  if (n >= 2) {
    if (i > 1) log_sup += (id - 1.0) * std::log((id - 1.0) / (nd - 1.0));
    if (i < n) log_sup += (nd - id) * std::log((nd - id) / (nd - 1.0));
  }
  return std::exp(log_sup - log_beta(id, nd - id + 1.0));
}

// eps * C(n, i) * W1(Pi1, Pi2): bound on |E[S~_(i)] - E[S_(i)]|.
inline double lemma2_bound(const Cdf& pi1, const Cdf& pi2, double epsilon, std::size_t n,
                           std::size_t i) {
  detail::require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0,1]");
  const double c = lemma2_constant(n, i);
  if (epsilon == 0.0) return 0.0;
  return epsilon * c * wasserstein_p(pi1, pi2, 1.0);
}

// ============================================================================
// Coverage bounds
// ============================================================================

// q_tilde_samples are independent realizations of the contaminated conformal
// quantile; the expectation terms are their sample means.
inline BoundReport lemma1_bounds(const Cdf& F1, const Cdf& F2, double epsilon, double alpha,
                                 std::size_t n, std::span<const double> q_tilde_samples,
                                 std::optional<double> d_tv = std::nullopt) {
  detail::require(!q_tilde_samples.empty(), "lemma1_bounds needs at least one q~ sample");
  detail::require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0,1]");
  detail::check_alpha(alpha);
  detail::require(n >= 1, "n must be >= 1");
  double gap = 0.0;
  for (double q : q_tilde_samples) {
    // Infinite q~ (rank above n) covers everything under both laws.
    if (std::isinf(q)) continue;
    gap += evaluate(F2, q) - evaluate(F1, q);
  }
  gap /= static_cast<double>(q_tilde_samples.size());

  BoundReport r;
  const double base = 1.0 - alpha;
  const double slack = 1.0 / static_cast<double>(n + 1);
  r.expected_gap = gap;
  r.n_samples = q_tilde_samples.size();
  r.lower_exact = base - epsilon * gap;
  r.upper_exact = base + slack - epsilon * gap;
  r.d_ks = ks_distance(F1, F2);
  r.lower_ks = base - epsilon * r.d_ks;
  r.upper_ks = base + slack + epsilon * r.d_ks;
  if (d_tv) r.lower_tv = base - 2.0 * epsilon * *d_tv;
  r.order_index = std::min(conformal_rank(alpha, n), n);
  r.C_ni = lemma2_constant(n, r.order_index);
  r.w1 = wasserstein_p(F1, F2, 1.0);
  r.lemma2_bound = epsilon * r.C_ni * r.w1;
  return r;
}

// 1 - alpha - 2 eps d_TV: the unit-weight non-exchangeable coverage bound.
inline double tv_lower_bound(double epsilon, double d_tv, double alpha) {
  return 1.0 - alpha - 2.0 * epsilon * d_tv;
}

struct QuantileSimulation {
  std::vector<double> q_tilde;         // contaminated conformal quantile, per repetition
  std::vector<double> clean_coverage;  // clean-test coverage of that quantile, per repetition
};

namespace detail {

inline std::function<double(Rng&)> sampler(const Cdf& c) {
  if (const auto* a = std::get_if<AnalyticCdf>(&c)) {
    if (a->sample) return a->sample;
    return [q = a->quantile](Rng& rng) { return q(uniform01(rng)); };
  }
  return [s = std::get<SteppedCdf>(c)](Rng& rng) { return s.quantile(uniform01(rng)); };
}

}  // namespace detail

// Repeatedly calibrates CP on n draws from (1-eps) clean + eps contaminant and
// measures coverage on n_test clean draws (n_test = 0 uses F1(q~) directly).
inline QuantileSimulation simulate_contaminated_quantiles(const Cdf& clean, const Cdf& contaminant,
                                                          double epsilon, double alpha,
                                                          std::size_t n, std::size_t repetitions,
                                                          std::size_t n_test, Rng& rng) {
  detail::require(repetitions >= 1 && n >= 1, "simulation needs n, repetitions >= 1");
  const auto draw_clean = detail::sampler(clean);
  const auto draw_contaminant = detail::sampler(contaminant);
  QuantileSimulation sim;
  sim.q_tilde.reserve(repetitions);
  sim.clean_coverage.reserve(repetitions);
  std::vector<double> scores(n);
  for (std::size_t r = 0; r < repetitions; ++r) {
    for (auto& s : scores) s = uniform01(rng) < epsilon ? draw_contaminant(rng) : draw_clean(rng);
    const auto t = conformal_quantile(scores, alpha);
    sim.q_tilde.push_back(t.q_hat);
    if (n_test == 0) {
      sim.clean_coverage.push_back(t.is_infinite() ? 1.0 : evaluate(clean, t.q_hat));
    } else {
      std::size_t covered = 0;
      for (std::size_t k = 0; k < n_test; ++k) covered += draw_clean(rng) <= t.q_hat ? 1 : 0;
      sim.clean_coverage.push_back(static_cast<double>(covered) / static_cast<double>(n_test));
    }
  }
  return sim;
}

// ============================================================================
// Stochastic dominance
// ============================================================================

// `F1_dominates`: F1 >= F2 everywhere on the grid (Pi2 is stochastically larger,
// the over-coverage regime). `F2_dominates`: F2 >= F1 everywhere.
enum class DominanceRelation { F1_dominates, F2_dominates, crossing, equal };

inline const char* to_string(DominanceRelation r) {
  switch (r) {
    case DominanceRelation::F1_dominates: return "F1_dominates";
    case DominanceRelation::F2_dominates: return "F2_dominates";
    case DominanceRelation::crossing: return "crossing";
    case DominanceRelation::equal: return "equal";
  }
  return "unknown";
}

struct DominanceVerdict {
  DominanceRelation relation = DominanceRelation::equal;
  bool margin_ok = false;  // F1 - F2 <= -1 / (eps (n + 1)) at every grid point
  std::vector<double> crossing_points;
  double max_difference = 0.0;  // max over grid of F1 - F2
  double min_difference = 0.0;
};

// Covers the 99.99% quantile range of both laws.
inline std::vector<double> default_dominance_grid(const Cdf& F1, const Cdf& F2,
                                                  std::size_t points = kDefaultGridPoints) {
  const double lo = std::min(quantile(F1, 1e-4), quantile(F2, 1e-4));
  const double hi = std::max(quantile(F1, 0.9999), quantile(F2, 0.9999));
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  return grid;
}

inline DominanceVerdict dominance_check(const Cdf& F1, const Cdf& F2, double epsilon,
                                        std::size_t n, std::span<const double> grid,
                                        double tolerance = 1e-12) {
  detail::require(!grid.empty(), "dominance check needs a non-empty grid");
  DominanceVerdict v;
  const double margin = epsilon > 0.0 ? -1.0 / (epsilon * static_cast<double>(n + 1))
                                      : -std::numeric_limits<double>::infinity();
  bool any_pos = false, any_neg = false;
  bool margin_ok = true;
  int last_sign = 0;
  double last_x = 0.0, last_d = 0.0;
  v.max_difference = -std::numeric_limits<double>::infinity();
  v.min_difference = std::numeric_limits<double>::infinity();
  for (double x : grid) {
    const double d = evaluate(F1, x) - evaluate(F2, x);
    v.max_difference = std::max(v.max_difference, d);
    v.min_difference = std::min(v.min_difference, d);
    if (!(d <= margin)) margin_ok = false;
    const int sign = d > tolerance ? 1 : (d < -tolerance ? -1 : 0);
    if (sign > 0) any_pos = true;
    if (sign < 0) any_neg = true;
    if (sign != 0) {
      if (last_sign != 0 && sign != last_sign) {
        // Linear interpolation of the root between the two grid points.
        v.crossing_points.push_back(last_x + (x - last_x) * last_d / (last_d - d));
      }
      last_sign = sign;
      last_x = x;
      last_d = d;
    }
  }
  if (any_pos && any_neg) {
    v.relation = DominanceRelation::crossing;
  } else if (any_pos) {
    v.relation = DominanceRelation::F1_dominates;
  } else if (any_neg) {
    v.relation = DominanceRelation::F2_dominates;
  } else {
    v.relation = DominanceRelation::equal;
  }
  v.margin_ok = margin_ok && v.relation != DominanceRelation::equal;
  return v;
}

struct UndercoverageMargin {
  double min_lhs = 0.0;
  double argmin = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// (sqrt(2) x / pi)(1/sigma2 - 1/sigma1) exp(-x^2 / (2 sigma1^2)) >= 1 / (eps (n + 1))
// for the half-normal pair of the contaminated regression model.
inline UndercoverageMargin regression_undercoverage_margin(double sigma1, double sigma2,
                                                           double epsilon, std::size_t n,
                                                           std::span<const double> x_grid) {
  detail::require(sigma2 > 0.0 && sigma1 >= sigma2,
                  "undercoverage margin needs sigma1 >= sigma2 > 0");
  detail::require(!x_grid.empty(), "undercoverage margin needs a non-empty grid");
  UndercoverageMargin m;
  m.rhs = epsilon > 0.0 ? 1.0 / (epsilon * static_cast<double>(n + 1))
                        : std::numeric_limits<double>::infinity();
  m.min_lhs = std::numeric_limits<double>::infinity();
  const double k = 1.0 / sigma2 - 1.0 / sigma1;
  for (double x : x_grid) {
    detail::require(x >= 0.0, "undercoverage grid must be non-negative");
    const double lhs =
        std::numbers::sqrt2 * x / std::numbers::pi * k * std::exp(-x * x / (2.0 * sigma1 * sigma1));
    if (lhs < m.min_lhs) {
      m.min_lhs = lhs;
      m.argmin = x;
    }
  }
  m.holds = m.min_lhs >= m.rhs;
  return m;
}

// ============================================================================
// Size-bias inequality
// ============================================================================

struct SizeBiasCheck {
  double exact = 0.0;
  double bound = 0.0;
  bool holds = false;
};

// E[(1 + B)^(-3/2)] for B ~ Bin(n - 1, p), summed exactly in log space,
// against sqrt(2) (n p)^(-3/2).
inline SizeBiasCheck size_bias_bound_check(std::size_t n, double p) {
  detail::require(n >= 1, "size-bias check needs n >= 1");
  detail::require(p > 0.0 && p <= 1.0, "size-bias check needs p in (0, 1]");
  const std::size_t m = n - 1;
  SizeBiasCheck c;
  if (p == 1.0) {
    c.exact = std::pow(static_cast<double>(n), -1.5);
  } else {
    const double lp = std::log(p), lq = std::log1p(-p);
    double total = 0.0;
    for (std::size_t k = 0; k <= m; ++k) {
      const double log_term = log_binomial_coefficient(m, k) + static_cast<double>(k) * lp +
                              static_cast<double>(m - k) * lq -
                              1.5 * std::log1p(static_cast<double>(k));
      total += std::exp(log_term);
    }
    c.exact = total;
  }
  c.bound = std::numbers::sqrt2 * std::pow(static_cast<double>(n) * p, -1.5);
  c.holds = c.exact <= c.bound;
  return c;
}

}  // namespace rcp
