#pragma once

// Contamination-robust threshold selection for classification under label noise.
//
// With Ftilde_n(q, i, j) the empirical cdf of class-i scores among calibration
// points whose observed label is j, the clean-minus-contaminated cdf gap
// g(q) = F1(q) - Ftilde(q) is estimated by
//
//   g_n(q) = sum_i sum_j P_i Pinv(j, i) Ftilde_n(q, i, j) - sum_i Ptilde_i Ftilde_n(q, i, i)
//
// and the chosen rank is the smallest i with i / (n + 1) >= 1 - alpha - g_n(S_(i)) + C.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcp/conformal.hpp"
#include "rcp/error.hpp"
#include "rcp/noise_model.hpp"

namespace rcp {

// n x K scores S(X_l, i) for every candidate class, plus observed (possibly noisy) labels.
class CalibrationMatrix {
 public:
  CalibrationMatrix(std::size_t K, std::vector<double> scores_row_major,
                    std::vector<std::size_t> labels)
      : K_(K), scores_(std::move(scores_row_major)), labels_(std::move(labels)) {
    detail::require(K_ >= 2, "calibration matrix needs K >= 2");
    detail::require(!labels_.empty(), "calibration matrix needs n >= 1");
    detail::require(scores_.size() == labels_.size() * K_, "score matrix must be n x K");
    for (double s : scores_) detail::require(std::isfinite(s), "calibration scores must be finite");
    for (std::size_t y : labels_) detail::require(y < K_, "calibration label outside [K]");
  }

  std::size_t n() const noexcept { return labels_.size(); }
  std::size_t K() const noexcept { return K_; }
  double score(std::size_t row, std::size_t cls) const { return scores_[row * K_ + cls]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(scores_).subspan(r * K_, K_);
  }
  std::size_t label(std::size_t row) const { return labels_[row]; }
  std::span<const std::size_t> labels() const noexcept { return labels_; }
  std::span<const double> scores() const noexcept { return scores_; }

  // S(X_l, y_l): the scores standard CP ranks.
  std::vector<double> observed_scores() const {
    std::vector<double> out(n());
    for (std::size_t r = 0; r < n(); ++r) out[r] = score(r, labels_[r]);
    return out;
  }

 private:
  std::size_t K_;
  std::vector<double> scores_;
  std::vector<std::size_t> labels_;
};

// Direct counting; 0/0 := 0 for an observed class with no calibration points.
inline double empirical_conditional_cdf(const CalibrationMatrix& cal, double q, std::size_t i,
                                        std::size_t j) {
  detail::require(i < cal.K() && j < cal.K(), "class index outside [K]");
  std::size_t hits = 0, members = 0;
  for (std::size_t r = 0; r < cal.n(); ++r) {
    if (cal.label(r) != j) continue;
    ++members;
    if (cal.score(r, i) <= q) ++hits;
  }
  return members == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(members);
}

// Per-(i, j) sorted columns so each Ftilde_n(q, i, j) is one binary search.
class ConditionalCdfTable {
 public:
  explicit ConditionalCdfTable(const CalibrationMatrix& cal)
      : K_(cal.K()), columns_(cal.K() * cal.K()), counts_(cal.K(), 0) {
    for (std::size_t r = 0; r < cal.n(); ++r) {
      const std::size_t j = cal.label(r);
      ++counts_[j];
      for (std::size_t i = 0; i < K_; ++i) columns_[i * K_ + j].push_back(cal.score(r, i));
    }
    for (auto& c : columns_) std::sort(c.begin(), c.end());
  }

  std::size_t K() const noexcept { return K_; }
  std::size_t count(std::size_t j) const { return counts_[j]; }

  double operator()(double q, std::size_t i, std::size_t j) const {
    const auto& col = columns_[i * K_ + j];
    if (col.empty()) return 0.0;
    const auto hits = std::upper_bound(col.begin(), col.end(), q) - col.begin();
    return static_cast<double>(hits) / static_cast<double>(col.size());
  }

 private:
  std::size_t K_;
  std::vector<std::vector<double>> columns_;
  std::vector<std::size_t> counts_;
};

namespace detail {

inline void check_matching_K(std::size_t cal_K, const NoiseModel& model) {
  require(cal_K == model.K(), "noise model K (" + std::to_string(model.K()) +
                                  ") does not match calibration K (" + std::to_string(cal_K) +
                                  ")");
}

}  // namespace detail

inline double g_hat(const ConditionalCdfTable& table, const NoiseModel& model, double q) {
  detail::check_matching_K(table.K(), model);
  const std::size_t K = model.K();
  const auto& P = model.clean_marginal();
  const auto& Pt = model.noisy_marginal();
  const auto& Pinv = model.posterior_inverse();
  double clean = 0.0, noisy = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < K; ++j) {
      clean += P(ii) * Pinv(static_cast<Eigen::Index>(j), ii) * table(q, i, j);
    }
    noisy += Pt(ii) * table(q, i, i);
  }
  return clean - noisy;
}

inline double g_hat(const CalibrationMatrix& cal, const NoiseModel& model, double q) {
  detail::check_matching_K(cal.K(), model);
  return g_hat(ConditionalCdfTable(cal), model, q);
}

struct CrcpBound {
  std::vector<double> w1;  // |Pinv(i,i) P_i - Ptilde_i|
  Eigen::MatrixXd w2;      // (i, j): |P_i Pinv(j, i)|, zero diagonal
  std::vector<double> b;   // (1 - Ptilde_j)^n + sqrt(pi / (n Ptilde_j))
  double B = 0.0;
  std::size_t n = 0;
};

inline CrcpBound crcp_bound(const NoiseModel& model, std::size_t n) {
  detail::require(n >= 1, "bound needs n >= 1");
  const std::size_t K = model.K();
  const auto& P = model.clean_marginal();
  const auto& Pt = model.noisy_marginal();
  const auto& Pinv = model.posterior_inverse();
  CrcpBound out;
  out.n = n;
  out.w1.resize(K);
  out.b.resize(K);
  out.w2 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  const double nd = static_cast<double>(n);
  for (std::size_t j = 0; j < K; ++j) {
    const double p = Pt(static_cast<Eigen::Index>(j));
    if (!(p > 0.0)) {
      throw ModelError("noisy marginal of class " + std::to_string(j + 1) +
                       " is zero; the estimator bound is undefined");
    }
    out.b[j] = std::pow(1.0 - p, nd) + std::sqrt(std::numbers::pi / (nd * p));
  }
  for (std::size_t i = 0; i < K; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out.w1[i] = std::abs(Pinv(ii, ii) * P(ii) - Pt(ii));
    double term = out.w1[i] * out.b[i];
    for (std::size_t j = 0; j < K; ++j) {
      if (j == i) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      out.w2(ii, jj) = std::abs(P(ii) * Pinv(jj, ii));
      term += out.w2(ii, jj) * out.b[j];
    }
    out.B += term;
  }
  return out;
}

enum class Correction { Theorem, Zero };

struct CrcpSelection {
  ConformalThreshold threshold;
  double correction = 0.0;              // C
  std::optional<double> g_at_threshold;  // g_n(q_hat) when a rank was found
};

// Scans i = 1..n over `order_scores` (the observed-label scores, possibly
// jittered) and returns the first rank satisfying the CRCP inequality.
inline CrcpSelection crcp_select(const CalibrationMatrix& cal, const NoiseModel& model,
                                 double alpha, std::span<const double> order_scores,
                                 double correction) {
  detail::check_matching_K(cal.K(), model);
  detail::check_alpha(alpha);
  detail::require(order_scores.size() == cal.n(), "order scores must have one entry per row");
  const ConditionalCdfTable table(cal);
  std::vector<double> sorted(order_scores.begin(), order_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = cal.n();
  CrcpSelection sel;
  sel.correction = correction;
  sel.threshold.alpha = alpha;
  sel.threshold.method = Method::CRCP;
  sel.threshold.n_calibration = n;
  for (std::size_t i = 1; i <= n; ++i) {
    const double q = sorted[i - 1];
    const double g = g_hat(table, model, q);
    if (rank_reaches_level(i, n, 1.0 - alpha - g + correction)) {
      sel.threshold.index = i;
      sel.threshold.q_hat = q;
      sel.g_at_threshold = g;
      break;
    }
  }
  return sel;
}

inline double correction_value(const NoiseModel& model, std::size_t n, Correction mode) {
  return mode == Correction::Theorem ? crcp_bound(model, n).B : 0.0;
}

inline ConformalThreshold crcp_threshold(const CalibrationMatrix& cal, const NoiseModel& model,
                                         double alpha, Correction mode = Correction::Theorem) {
  detail::check_matching_K(cal.K(), model);
  const auto observed = cal.observed_scores();
  return crcp_select(cal, model, alpha, observed, correction_value(model, cal.n(), mode))
      .threshold;
}

}  // namespace rcp
