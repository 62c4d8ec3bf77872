#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rcp/conformal.hpp"
#include "rcp/crcp.hpp"
#include "rcp/noise_model.hpp"
#include "rcp/random.hpp"
#include "rcp/stats_core.hpp"

using namespace rcp;

namespace {

// True-class score ~ U(0, 0.5), other classes ~ U(0, 1), independent of the
// features; labels uniform then passed through the uniform channel. The mixed
// score cdf then satisfies g(q) = eps (K - 1) / K * (min(2q, 1) - q).
struct ToyRun {
  CalibrationMatrix cal;
  std::vector<std::size_t> clean;
};

ToyRun toy_calibration(std::size_t n, std::size_t K, double eps, Rng& rng) {
  std::vector<std::size_t> labels(n);
  std::uniform_int_distribution<std::size_t> pick(0, K - 1);
  for (auto& y : labels) y = pick(rng);
  std::vector<double> scores(n * K);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < K; ++i) {
      scores[r * K + i] = (i == labels[r] ? 0.5 : 1.0) * uniform01(rng);
    }
  }
  const auto noisy = corrupt_labels(labels, uniform_noise_model(K, eps), rng);
  return {CalibrationMatrix(K, std::move(scores), noisy), labels};
}

double toy_g(double q, std::size_t K, double eps) {
  q = std::clamp(q, 0.0, 1.0);
  return eps * static_cast<double>(K - 1) / static_cast<double>(K) * (std::min(2 * q, 1.0) - q);
}

}  // namespace

TEST(CalibrationMatrix, RejectsInvalidShapes) {
  EXPECT_THROW(CalibrationMatrix(2, {0.1, 0.2, 0.3}, {0, 1}), InputError);
  EXPECT_THROW(CalibrationMatrix(2, {0.1, 0.2}, {2}), InputError);
  EXPECT_THROW(CalibrationMatrix(1, {0.1}, {0}), InputError);
}

TEST(EmpiricalConditionalCdf, SpecExamples) {
  // Class-0 scores among label-1 points are {0.2, 0.6, 0.9}.
  const CalibrationMatrix cal(3, {0.2, 0.1, 0.5, 0.6, 0.1, 0.5, 0.9, 0.1, 0.5, 0.4, 0.3, 0.2},
                              {1, 1, 1, 0});
  EXPECT_NEAR(empirical_conditional_cdf(cal, 0.5, 0, 1), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(empirical_conditional_cdf(cal, 0.5, 0, 2), 0.0);
  EXPECT_EQ(empirical_conditional_cdf(cal, 0.95, 0, 1), 1.0);
  const ConditionalCdfTable table(cal);
  for (double q : {0.0, 0.1, 0.2, 0.35, 0.5, 0.6, 0.9, 1.0}) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(table(q, i, j), empirical_conditional_cdf(cal, q, i, j));
      }
    }
  }
}

TEST(GHat, VanishesWithoutNoise) {
  Rng rng = make_rng(1, Stream::kData);
  const auto run = toy_calibration(300, 4, 0.0, rng);
  const auto m = uniform_noise_model(4, 0.0);
  for (double q = 0.0; q <= 1.0; q += 0.05) EXPECT_EQ(g_hat(run.cal, m, q), 0.0);
}

TEST(GHat, HandExpandedTwoClassSinglePoint) {
  // P^{-1} = 1.125 on the diagonal and -0.125 off it for K = 2, eps = 0.2.
  const CalibrationMatrix cal(2, {0.3, 0.6}, {0});
  const auto m = uniform_noise_model(2, 0.2);
  auto expanded = [](double q) {
    const double a = 0.3 <= q ? 1.0 : 0.0, b = 0.6 <= q ? 1.0 : 0.0;
    return 0.5 * (1.125 * a - 0.125 * b) - 0.5 * a;
  };
  for (double q : {0.1, 0.3, 0.45, 0.6, 0.9}) EXPECT_NEAR(g_hat(cal, m, q), expanded(q), 1e-15);
  EXPECT_NEAR(g_hat(cal, m, 0.3), 0.0625, 1e-15);
  EXPECT_NEAR(g_hat(cal, m, 0.6), 0.0, 1e-15);
}

TEST(GHat, ConvergesToOracle) {
  Rng rng = make_rng(2, Stream::kData);
  const std::size_t n = 20000, K = 5;
  const double eps = 0.2;
  const auto run = toy_calibration(n, K, eps, rng);
  const auto m = uniform_noise_model(K, eps);
  const double B = crcp_bound(m, n).B;
  for (double q = 0.05; q < 1.0; q += 0.05) {
    EXPECT_LE(std::abs(g_hat(run.cal, m, q) - toy_g(q, K, eps)), 2 * B) << q;
  }
}

TEST(GHat, RejectsMismatchedK) {
  const CalibrationMatrix cal(2, {0.3, 0.6}, {0});
  EXPECT_THROW(g_hat(cal, uniform_noise_model(3, 0.1), 0.5), InputError);
}

TEST(CrcpBound, UniformFiveClassExample) {
  const auto b = crcp_bound(uniform_noise_model(5, 0.2), 10000);
  for (double w : b.w1) EXPECT_NEAR(w, 0.04, 1e-12);
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(b.w2(i, j), i == j ? 0.0 : 0.01, 1e-12);
  }
  const double bj = std::pow(0.8, 10000) + std::sqrt(std::numbers::pi / 2000.0);
  for (double x : b.b) EXPECT_NEAR(x, bj, 1e-15);
  EXPECT_NEAR(bj, 0.039633, 1e-6);
  EXPECT_NEAR(b.B, (5 * 0.04 + 20 * 0.01) * bj, 1e-12);
  EXPECT_NEAR(b.B, 0.015853, 1e-5);
}

TEST(CrcpBound, ZeroWithoutNoise) {
  EXPECT_EQ(crcp_bound(uniform_noise_model(5, 0.0), 1000).B, 0.0);
}

TEST(CrcpBound, MonotoneInSampleSizeAndEpsilon) {
  for (std::size_t K : {2u, 5u, 10u}) {
    double prev_eps_B = -1.0;
    for (double eps = 0.0; eps <= 0.4 + 1e-12; eps += 0.02) {
      const auto m = uniform_noise_model(K, eps);
      const double B = crcp_bound(m, 1000).B;
      EXPECT_GE(B, prev_eps_B);
      prev_eps_B = B;
      double prev_n_B = std::numeric_limits<double>::infinity();
      for (std::size_t n = 100; n <= 100000; n = n * 3 / 2) {
        const double Bn = crcp_bound(m, n).B;
        EXPECT_LE(Bn, prev_n_B);
        prev_n_B = Bn;
      }
    }
  }
}

TEST(CrcpBound, ZeroNoisyMarginalIsModelError) {
  const std::vector<double> marginal{0.5, 0.5};
  Eigen::MatrixXd ch(2, 2);
  ch << 1.0, 1.0, 0.0, 0.0;
  EXPECT_THROW(general_noise_model(2, 0.4, marginal, ch), ModelError);
}

TEST(LemmaThree, ConditionalCdfDeviationRespectsBound) {
  // Independent U(0,1) scores give Ftilde(q, i, j) = q.
  const std::size_t n = 400, K = 3, reps = 300;
  Rng rng = make_rng(3, Stream::kData);
  std::vector<double> mean_sup(K * K, 0.0);
  for (std::size_t r = 0; r < reps; ++r) {
    std::vector<std::size_t> labels(n);
    std::vector<double> scores(n * K);
    for (auto& y : labels) y = static_cast<std::size_t>(uniform01(rng) * K);
    for (auto& s : scores) s = uniform01(rng);
    const CalibrationMatrix cal(K, scores, labels);
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < K; ++j) {
        std::vector<double> col;
        for (std::size_t row = 0; row < n; ++row) {
          if (labels[row] == j) col.push_back(scores[row * K + i]);
        }
        std::sort(col.begin(), col.end());
        double sup = 0.0;
        const double m = static_cast<double>(col.size());
        for (std::size_t k = 0; k < col.size(); ++k) {
          sup = std::max({sup, std::abs((k + 1) / m - col[k]), std::abs(k / m - col[k])});
        }
        if (col.empty()) sup = 1.0;
        mean_sup[i * K + j] += sup / reps;
      }
    }
  }
  const double p = 1.0 / K;
  const double bound = std::sqrt(std::numbers::pi / (n * p)) + std::pow(1 - p, n);
  for (double s : mean_sup) EXPECT_LE(s, bound);
}

TEST(CrcpThreshold, ReducesToConformalWithoutNoise) {
  Rng rng = make_rng(4, Stream::kData);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 20 + static_cast<std::size_t>(uniform01(rng) * 500);
    const std::size_t K = 2 + static_cast<std::size_t>(uniform01(rng) * 8);
    const double alpha = 0.02 + 0.5 * uniform01(rng);
    const auto run = toy_calibration(n, K, 0.0, rng);
    const auto cp = conformal_quantile(run.cal.observed_scores(), alpha);
    const auto crcp = crcp_threshold(run.cal, uniform_noise_model(K, 0.0), alpha);
    EXPECT_EQ(cp.index, crcp.index);
    EXPECT_EQ(cp.q_hat, crcp.q_hat);
  }
}

TEST(CrcpThreshold, LargeCorrectionGivesInfiniteSentinel) {
  Rng rng = make_rng(5, Stream::kData);
  const auto run = toy_calibration(200, 3, 0.2, rng);
  const auto m = uniform_noise_model(3, 0.2);
  const auto sel = crcp_select(run.cal, m, 0.1, run.cal.observed_scores(), 1.0);
  EXPECT_TRUE(sel.threshold.is_infinite());
  EXPECT_FALSE(sel.g_at_threshold);
}

TEST(CrcpThreshold, SmallerThanConformalUnderOverCoverage) {
  Rng rng = make_rng(6, Stream::kData);
  const std::size_t n = 10000, K = 5;
  const double eps = 0.2, alpha = 0.1;
  const auto run = toy_calibration(n, K, eps, rng);
  const auto m = uniform_noise_model(K, eps);
  const auto cp = conformal_quantile(run.cal.observed_scores(), alpha);
  const auto crcp = crcp_threshold(run.cal, m, alpha);
  ASSERT_GT(g_hat(run.cal, m, cp.q_hat), crcp_bound(m, n).B);
  ASSERT_TRUE(cp.index && crcp.index);
  EXPECT_LT(*crcp.index, *cp.index);
  EXPECT_EQ(crcp.method, Method::CRCP);
}

TEST(CrcpThreshold, ZeroCorrectionModeSkipsBound) {
  EXPECT_EQ(correction_value(uniform_noise_model(5, 0.2), 1000, Correction::Zero), 0.0);
  EXPECT_NEAR(correction_value(uniform_noise_model(5, 0.2), 10000, Correction::Theorem), 0.015853,
              1e-5);
}

TEST(CrcpThreshold, CleanCoverageOnToyData) {
  Rng rng = make_rng(7, Stream::kData);
  const std::size_t n = 2000, K = 5, reps = 40, n_test = 2000;
  const double eps = 0.2, alpha = 0.1;
  const auto m = uniform_noise_model(K, eps);
  std::vector<double> cover;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto run = toy_calibration(n, K, eps, rng);
    const auto t = crcp_threshold(run.cal, m, alpha);
    std::size_t hit = 0;
    for (std::size_t k = 0; k < n_test; ++k) hit += 0.5 * uniform01(rng) <= t.q_hat ? 1 : 0;
    cover.push_back(static_cast<double>(hit) / n_test);
  }
  const auto s = mean_and_error(cover);
  EXPECT_GE(s.mean, 1 - alpha - 3 * s.standard_error);
}
