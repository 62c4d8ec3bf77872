#pragma once

// Distribution primitives: empirical and analytic CDFs, order statistics,
// KS / Wasserstein / total-variation distances and a few special functions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rcp/error.hpp"
#include "rcp/random.hpp"

namespace rcp {

inline constexpr std::size_t kDefaultGridPoints = 10'001;

// ============================================================================
// Empirical samples
// ============================================================================

class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<double> values) : sorted_(std::move(values)) {
    detail::require(!sorted_.empty(), "empirical distribution needs at least one value");
    for (double v : sorted_) detail::require(!std::isnan(v), "empirical distribution contains NaN");
    std::sort(sorted_.begin(), sorted_.end());
  }

  std::size_t size() const noexcept { return sorted_.size(); }
  std::span<const double> sorted_values() const noexcept { return sorted_; }

  // 1-based: order_statistic(1) is the minimum.
  double order_statistic(std::size_t i) const {
    if (i < 1 || i > sorted_.size()) {
      throw InputError("order statistic index " + std::to_string(i) + " outside 1.." +
                       std::to_string(sorted_.size()));
    }
    return sorted_[i - 1];
  }

 private:
  std::vector<double> sorted_;
};

inline double order_statistic(const EmpiricalDistribution& d, std::size_t i) {
  return d.order_statistic(i);
}

// ============================================================================
// CDFs
// ============================================================================

// Right-continuous step function G(x) = cdf_values[k] for breakpoints[k] <= x < breakpoints[k+1].
class SteppedCdf {
 public:
  SteppedCdf(std::vector<double> breakpoints, std::vector<double> cdf_values)
      : x_(std::move(breakpoints)), f_(std::move(cdf_values)) {
    detail::require(!x_.empty(), "stepped cdf needs at least one breakpoint");
    detail::require(x_.size() == f_.size(), "breakpoints and cdf values differ in length");
    for (std::size_t k = 0; k < x_.size(); ++k) {
      detail::require(std::isfinite(x_[k]), "stepped cdf breakpoints must be finite");
      detail::require(f_[k] >= 0.0 && f_[k] <= 1.0 + 1e-12, "cdf values must lie in [0,1]");
      if (k > 0) {
        detail::require(x_[k] > x_[k - 1], "breakpoints must be strictly increasing");
        detail::require(f_[k] >= f_[k - 1], "cdf values must be non-decreasing");
      }
    }
    detail::require(std::abs(f_.back() - 1.0) <= 1e-9, "last cdf value must be 1");
    f_.back() = 1.0;
  }

  static SteppedCdf from_sample(const EmpiricalDistribution& d) {
    const auto v = d.sorted_values();
    const double n = static_cast<double>(v.size());
    std::vector<double> x, f;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k + 1 < v.size() && v[k + 1] == v[k]) continue;
      x.push_back(v[k]);
      f.push_back(static_cast<double>(k + 1) / n);
    }
    return SteppedCdf(std::move(x), std::move(f));
  }

  static SteppedCdf from_sample(std::vector<double> values) {
    return from_sample(EmpiricalDistribution(std::move(values)));
  }

  // Discrete law with the given atoms and probabilities (atoms need not be sorted).
  static SteppedCdf from_weighted(std::span<const double> atoms, std::span<const double> weights) {
    detail::require(atoms.size() == weights.size() && !atoms.empty(),
                    "atoms and weights must be non-empty and of equal length");
    std::vector<std::size_t> order(atoms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return atoms[a] < atoms[b]; });
    double total = 0.0;
    for (double w : weights) {
      detail::require(w >= 0.0, "weights must be non-negative");
      total += w;
    }
    detail::require(std::abs(total - 1.0) <= 1e-9, "weights must sum to 1");
    std::vector<double> x, f;
    double acc = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      acc += weights[order[k]];
      if (!x.empty() && atoms[order[k]] == x.back()) {
        f.back() = acc;
      } else {
        x.push_back(atoms[order[k]]);
        f.push_back(acc);
      }
    }
    f.back() = 1.0;
    return SteppedCdf(std::move(x), std::move(f));
  }

  static SteppedCdf point_mass(double at) { return SteppedCdf({at}, {1.0}); }

  double operator()(double x) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    if (it == x_.begin()) return 0.0;
    return f_[static_cast<std::size_t>(it - x_.begin()) - 1];
  }

  double left_limit(double x) const {
    const auto it = std::lower_bound(x_.begin(), x_.end(), x);
    if (it == x_.begin()) return 0.0;
    return f_[static_cast<std::size_t>(it - x_.begin()) - 1];
  }

  // Generalized (left-continuous) inverse inf{x : G(x) >= u}.
  double quantile(double u) const {
    if (u <= 0.0) return x_.front();
    const auto it = std::lower_bound(f_.begin(), f_.end(), u);
    if (it == f_.end()) return x_.back();
    return x_[static_cast<std::size_t>(it - f_.begin())];
  }

  std::span<const double> breakpoints() const noexcept { return x_; }
  std::span<const double> cdf_values() const noexcept { return f_; }

 private:
  std::vector<double> x_;
  std::vector<double> f_;
};

// Continuous law given by closures. `lo`/`hi` bracket essentially all of the
// mass and bound the evaluation grids.
struct AnalyticCdf {
  std::function<double(double)> cdf;
  std::function<double(double)> quantile;
  std::function<double(double)> density;
  std::function<double(Rng&)> sample;
  double lo = 0.0;
  double hi = 1.0;
  std::string name;

  double operator()(double x) const { return cdf(x); }
};

using Cdf = std::variant<SteppedCdf, AnalyticCdf>;

namespace detail {

inline double bisect_quantile(const std::function<double(double)>& cdf, double u, double lo,
                              double hi) {
  while (cdf(lo) > u) lo -= (hi - lo) + 1.0;
  while (cdf(hi) < u) hi += (hi - lo) + 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) >= u) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

inline void with_inverse_transform(AnalyticCdf& a) {
  a.sample = [q = a.quantile](Rng& rng) { return q(uniform01(rng)); };
}

}  // namespace detail

inline double normal_cdf(double x, double mu = 0.0, double sigma = 1.0) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
}

inline double half_normal_cdf(double x, double sigma) {
  detail::require(sigma > 0.0, "half-normal sigma must be positive");
  detail::require(x >= 0.0, "half-normal cdf is defined for x >= 0");
  return std::erf(x / (std::numbers::sqrt2 * sigma));
}

inline AnalyticCdf uniform_distribution(double a, double b) {
  detail::require(b > a, "uniform distribution needs a < b");
  AnalyticCdf d;
  d.cdf = [a, b](double x) { return std::clamp((x - a) / (b - a), 0.0, 1.0); };
  d.quantile = [a, b](double u) { return a + std::clamp(u, 0.0, 1.0) * (b - a); };
  d.density = [a, b](double x) { return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0; };
  detail::with_inverse_transform(d);
  d.lo = a;
  d.hi = b;
  d.name = "uniform";
  return d;
}

inline AnalyticCdf normal_distribution(double mu, double sigma) {
  detail::require(sigma > 0.0, "normal sigma must be positive");
  AnalyticCdf d;
  d.cdf = [mu, sigma](double x) { return normal_cdf(x, mu, sigma); };
  d.density = [mu, sigma](double x) {
    const double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
  };
  d.lo = mu - 8.0 * sigma;
  d.hi = mu + 8.0 * sigma;
  d.quantile = [cdf = d.cdf, lo = d.lo, hi = d.hi](double u) {
    return detail::bisect_quantile(cdf, u, lo, hi);
  };
  d.sample = [mu, sigma](Rng& rng) { return mu + sigma * standard_normal(rng); };
  d.name = "normal";
  return d;
}

// Law of |Z| for Z ~ N(0, sigma^2): the absolute-residual score of a Gaussian error.
inline AnalyticCdf half_normal_distribution(double sigma) {
  detail::require(sigma > 0.0, "half-normal sigma must be positive");
  AnalyticCdf d;
  d.cdf = [sigma](double x) { return x <= 0.0 ? 0.0 : std::erf(x / (std::numbers::sqrt2 * sigma)); };
  d.density = [sigma](double x) {
    if (x < 0.0) return 0.0;
    return std::numbers::sqrt2 / (sigma * std::sqrt(std::numbers::pi)) *
           std::exp(-x * x / (2.0 * sigma * sigma));
  };
  d.lo = 0.0;
  d.hi = 8.5 * sigma;
  d.quantile = [cdf = d.cdf, hi = d.hi](double u) {
    if (u <= 0.0) return 0.0;
    return detail::bisect_quantile(cdf, u, 0.0, hi);
  };
  d.sample = [sigma](Rng& rng) { return std::abs(sigma * standard_normal(rng)); };
  d.name = "half_normal";
  return d;
}

// (1 - eps) * clean + eps * contaminant.
inline AnalyticCdf mixture(const AnalyticCdf& clean, const AnalyticCdf& contaminant, double eps) {
  detail::require(eps >= 0.0 && eps <= 1.0, "mixing proportion must lie in [0,1]");
  AnalyticCdf d;
  d.cdf = [clean, contaminant, eps](double x) {
    return (1.0 - eps) * clean.cdf(x) + eps * contaminant.cdf(x);
  };
  if (clean.density && contaminant.density) {
    d.density = [f1 = clean.density, f2 = contaminant.density, eps](double x) {
      return (1.0 - eps) * f1(x) + eps * f2(x);
    };
  }
  d.lo = std::min(clean.lo, contaminant.lo);
  d.hi = std::max(clean.hi, contaminant.hi);
  d.quantile = [cdf = d.cdf, lo = d.lo, hi = d.hi](double u) {
    return detail::bisect_quantile(cdf, u, lo, hi);
  };
  d.sample = [s1 = clean.sample, s2 = contaminant.sample, eps](Rng& rng) {
    return uniform01(rng) < eps ? s2(rng) : s1(rng);
  };
  d.name = "mixture";
  return d;
}

inline SteppedCdf mixture(const SteppedCdf& clean, const SteppedCdf& contaminant, double eps) {
  detail::require(eps >= 0.0 && eps <= 1.0, "mixing proportion must lie in [0,1]");
  std::vector<double> x(clean.breakpoints().begin(), clean.breakpoints().end());
  x.insert(x.end(), contaminant.breakpoints().begin(), contaminant.breakpoints().end());
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  std::vector<double> f(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    f[k] = std::min(1.0, (1.0 - eps) * clean(x[k]) + eps * contaminant(x[k]));
  }
  f.back() = 1.0;
  return SteppedCdf(std::move(x), std::move(f));
}

inline double evaluate(const Cdf& c, double x) {
  return std::visit([x](const auto& g) { return g(x); }, c);
}

inline double quantile(const Cdf& c, double u) {
  return std::visit([u](const auto& g) { return g.quantile(u); }, c);
}

namespace detail {

inline std::pair<double, double> support(const Cdf& c) {
  if (const auto* s = std::get_if<SteppedCdf>(&c)) {
    return {s->breakpoints().front(), s->breakpoints().back()};
  }
  const auto& a = std::get<AnalyticCdf>(c);
  return {a.lo, a.hi};
}

inline double left_limit(const Cdf& c, double x) {
  if (const auto* s = std::get_if<SteppedCdf>(&c)) return s->left_limit(x);
  return std::get<AnalyticCdf>(c).cdf(x);
}

// Uniform grid over the joint support plus every breakpoint of stepped inputs.
inline std::vector<double> evaluation_grid(const Cdf& a, const Cdf& b, std::size_t grid_points) {
  const auto [alo, ahi] = support(a);
  const auto [blo, bhi] = support(b);
  const double lo = std::min(alo, blo);
  const double hi = std::max(ahi, bhi);
  std::vector<double> grid;
  const bool any_analytic =
      std::holds_alternative<AnalyticCdf>(a) || std::holds_alternative<AnalyticCdf>(b);
  if (any_analytic && grid_points >= 2 && hi > lo) {
    grid.reserve(grid_points);
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    for (std::size_t k = 0; k < grid_points; ++k) grid.push_back(lo + step * static_cast<double>(k));
    grid.back() = hi;
  }
  for (const Cdf* c : {&a, &b}) {
    if (const auto* s = std::get_if<SteppedCdf>(c)) {
      grid.insert(grid.end(), s->breakpoints().begin(), s->breakpoints().end());
    }
  }
  if (grid.empty()) grid.push_back(lo);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

}  // namespace detail

// ============================================================================
// Distances
// ============================================================================

// sup_x |G1(x) - G2(x)|, checked at grid points and their left limits.
inline double ks_distance(const Cdf& a, const Cdf& b, std::size_t grid_points = kDefaultGridPoints) {
  double sup = 0.0;
  for (double x : detail::evaluation_grid(a, b, grid_points)) {
    sup = std::max(sup, std::abs(evaluate(a, x) - evaluate(b, x)));
    sup = std::max(sup, std::abs(detail::left_limit(a, x) - detail::left_limit(b, x)));
  }
  return std::min(sup, 1.0);
}

// Exact for two step functions; on a uniform midpoint grid of quantile levels otherwise.
inline double wasserstein_quantile_axis(const Cdf& a, const Cdf& b, double p,
                                        std::size_t grid_points = kDefaultGridPoints) {
  detail::require(p >= 1.0, "Wasserstein order p must be >= 1");
  double total = 0.0;
  const auto* sa = std::get_if<SteppedCdf>(&a);
  const auto* sb = std::get_if<SteppedCdf>(&b);
  if (sa && sb) {
    // Both generalized inverses are constant on (u_k, u_{k+1}] between merged cdf levels.
    std::vector<double> levels(sa->cdf_values().begin(), sa->cdf_values().end());
    levels.insert(levels.end(), sb->cdf_values().begin(), sb->cdf_values().end());
    levels.push_back(0.0);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
      const double u = levels[k + 1];
      total += std::pow(std::abs(sa->quantile(u) - sb->quantile(u)), p) * (u - levels[k]);
    }
  } else {
    const double n = static_cast<double>(grid_points);
    for (std::size_t k = 0; k < grid_points; ++k) {
      const double u = (static_cast<double>(k) + 0.5) / n;
      total += std::pow(std::abs(quantile(a, u) - quantile(b, u)), p) / n;
    }
  }
  return std::pow(total, 1.0 / p);
}

// p = 1 integrates |G1 - G2| along the value axis (exact for two step
// functions, trapezoid rule otherwise); p > 1 uses the quantile axis.
inline double wasserstein_p(const Cdf& a, const Cdf& b, double p,
                            std::size_t grid_points = kDefaultGridPoints) {
  detail::require(p >= 1.0, "Wasserstein order p must be >= 1");
  if (p > 1.0) return wasserstein_quantile_axis(a, b, p, grid_points);
  const auto grid = detail::evaluation_grid(a, b, grid_points);
  const bool both_stepped =
      std::holds_alternative<SteppedCdf>(a) && std::holds_alternative<SteppedCdf>(b);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double width = grid[k + 1] - grid[k];
    const double left = std::abs(evaluate(a, grid[k]) - evaluate(b, grid[k]));
    if (both_stepped) {
      total += left * width;
    } else {
      const double right =
          std::abs(detail::left_limit(a, grid[k + 1]) - detail::left_limit(b, grid[k + 1]));
      total += 0.5 * (left + right) * width;
    }
  }
  return total;
}

inline double tv_distance_discrete(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size(), "probability vectors differ in length");
  detail::require(!a.empty(), "probability vectors must be non-empty");
  double sa = 0.0, sb = 0.0, l1 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    detail::require(a[k] >= 0.0 && b[k] >= 0.0, "probabilities must be non-negative");
    sa += a[k];
    sb += b[k];
    l1 += std::abs(a[k] - b[k]);
  }
  detail::require(std::abs(sa - 1.0) <= 1e-9 && std::abs(sb - 1.0) <= 1e-9,
                  "probability vectors must sum to 1");
  return 0.5 * l1;
}

// ============================================================================
// Special functions
// ============================================================================

inline double log_beta(double a, double b) {
  detail::require(a > 0.0 && b > 0.0, "beta function arguments must be positive");
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double beta_function(double a, double b) { return std::exp(log_beta(a, b)); }

inline double log_binomial_coefficient(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

// Sample mean and the standard error of the mean.
struct MeanAndError {
  double mean = 0.0;
  double stdev = 0.0;
  double standard_error = 0.0;
};

inline MeanAndError mean_and_error(std::span<const double> xs) {
  MeanAndError out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.stdev = std::sqrt(ss / (n - 1.0));
    out.standard_error = out.stdev / std::sqrt(n);
  }
  return out;
}

}  // namespace rcp
