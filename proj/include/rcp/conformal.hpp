#pragma once

// Split conformal calibration, prediction sets, and coverage evaluation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcp/error.hpp"
#include "rcp/random.hpp"

namespace rcp {

enum class Method { CP, CRCP };

inline const char* to_string(Method m) { return m == Method::CP ? "CP" : "CRCP"; }

struct ConformalThreshold {
  double alpha = 0.1;
  // 1-based order-statistic index; empty is the +infinity sentinel.
  std::optional<std::size_t> index;
  double q_hat = std::numeric_limits<double>::infinity();
  Method method = Method::CP;
  std::size_t n_calibration = 0;

  bool is_infinite() const noexcept { return !index.has_value(); }
};

// Smallest integer i >= 1 with i / (n + 1) >= 1 - alpha, i.e. ceil((1 - alpha)(n + 1)).
// The floating-point predicate is the same one the CRCP scan uses, so the two
// agree exactly when the correction terms vanish. May return n + 1.
inline bool rank_reaches_level(std::size_t i, std::size_t n, double level) {
  return static_cast<double>(i) / static_cast<double>(n + 1) >= level;
}

inline std::size_t conformal_rank(double alpha, std::size_t n) {
  const double level = 1.0 - alpha;
  auto i = static_cast<std::size_t>(
      std::max(1.0, std::ceil(level * static_cast<double>(n + 1))));
  while (i > 1 && rank_reaches_level(i - 1, n, level)) --i;
  while (!rank_reaches_level(i, n, level)) ++i;
  return i;
}

namespace detail {

inline void check_alpha(double alpha) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
}

}  // namespace detail

// Adds i.i.d. Uniform(0, relative_scale * range) noise; breaks exact ties while
// keeping the order of distinct scores (for any realistic spacing).
inline std::vector<double> jitter_scores(std::span<const double> scores, Rng& rng,
                                         double relative_scale = 1e-9) {
  std::vector<double> out(scores.begin(), scores.end());
  if (out.empty()) return out;
  const auto [mn, mx] = std::minmax_element(out.begin(), out.end());
  double range = *mx - *mn;
  if (!(range > 0.0) || !std::isfinite(range)) range = std::max(1.0, std::abs(*mx));
  std::uniform_real_distribution<double> u(0.0, relative_scale * range);
  for (double& s : out) s += u(rng);
  return out;
}

// q_hat = S_(i) with i = ceil((1 - alpha)(n + 1)), or the +infinity sentinel when i > n.
inline ConformalThreshold conformal_quantile(std::span<const double> scores, double alpha) {
  detail::require(!scores.empty(), "conformal calibration needs at least one score");
  detail::check_alpha(alpha);
  ConformalThreshold t;
  t.alpha = alpha;
  t.method = Method::CP;
  t.n_calibration = scores.size();
  const std::size_t i = conformal_rank(alpha, scores.size());
  if (i > scores.size()) return t;
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(i - 1),
                   sorted.end());
  t.index = i;
  t.q_hat = sorted[i - 1];
  return t;
}

// Tie-broken variant: scores are jittered with `rng` before ranking.
inline ConformalThreshold conformal_quantile(std::span<const double> scores, double alpha,
                                             Rng& rng, double relative_scale = 1e-9) {
  const auto jittered = jitter_scores(scores, rng, relative_scale);
  return conformal_quantile(jittered, alpha);
}

// ============================================================================
// Prediction sets
// ============================================================================

struct LabelSet {
  std::vector<std::size_t> labels;  // 0-based, ascending
  std::size_t K = 0;

  std::size_t size() const noexcept { return labels.size(); }
  bool contains(std::size_t y) const {
    return std::binary_search(labels.begin(), labels.end(), y);
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool is_infinite() const noexcept { return std::isinf(lo) || std::isinf(hi); }
  double width() const noexcept { return hi - lo; }
  bool contains(double y) const noexcept { return lo <= y && y <= hi; }
};

inline LabelSet predict_set_classification(std::span<const double> score_vector,
                                           const ConformalThreshold& threshold) {
  detail::require(score_vector.size() >= 2, "classification needs K >= 2 classes");
  LabelSet set;
  set.K = score_vector.size();
  set.labels.reserve(set.K);
  for (std::size_t y = 0; y < set.K; ++y) {
    if (threshold.is_infinite() || score_vector[y] <= threshold.q_hat) set.labels.push_back(y);
  }
  return set;
}

inline Interval predict_interval_regression(double point_prediction,
                                            const ConformalThreshold& threshold) {
  if (threshold.is_infinite()) {
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
  return {point_prediction - threshold.q_hat, point_prediction + threshold.q_hat};
}

struct EvaluationSummary {
  double coverage = 0.0;
  double mean_size = 0.0;
  std::size_t n_test = 0;
  // Regression only: infinite intervals, excluded from mean_size.
  std::size_t n_infinite = 0;
};

inline EvaluationSummary evaluate(std::span<const LabelSet> sets,
                                  std::span<const std::size_t> truths) {
  detail::require(sets.size() == truths.size(), "sets and truths differ in length");
  detail::require(!sets.empty(), "evaluation needs at least one test point");
  std::size_t covered = 0, total_size = 0;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    covered += sets[k].contains(truths[k]) ? 1 : 0;
    total_size += sets[k].size();
  }
  EvaluationSummary s;
  s.n_test = sets.size();
  s.coverage = static_cast<double>(covered) / static_cast<double>(s.n_test);
  s.mean_size = static_cast<double>(total_size) / static_cast<double>(s.n_test);
  return s;
}

inline EvaluationSummary evaluate(std::span<const Interval> sets, std::span<const double> truths) {
  detail::require(sets.size() == truths.size(), "sets and truths differ in length");
  detail::require(!sets.empty(), "evaluation needs at least one test point");
  std::size_t covered = 0;
  double width = 0.0;
  EvaluationSummary s;
  s.n_test = sets.size();
  for (std::size_t k = 0; k < sets.size(); ++k) {
    covered += sets[k].contains(truths[k]) ? 1 : 0;
    if (sets[k].is_infinite()) {
      ++s.n_infinite;
    } else {
      width += sets[k].width();
    }
  }
  s.coverage = static_cast<double>(covered) / static_cast<double>(s.n_test);
  const std::size_t finite = s.n_test - s.n_infinite;
  s.mean_size = finite > 0 ? width / static_cast<double>(finite)
                           : std::numeric_limits<double>::infinity();
  return s;
}

}  // namespace rcp
