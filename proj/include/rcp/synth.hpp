#pragma once

// Synthetic data generators, score functions and the two fitted model
// families used by the experiments (softmax regression, least squares).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rcp/error.hpp"
#include "rcp/random.hpp"

namespace rcp {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ClassificationData {
  Matrix X;                     // n x p
  std::vector<std::size_t> y;   // 0-based
};

struct RegressionData {
  Matrix X;
  std::vector<double> y;
  std::vector<bool> contaminated;  // which rows drew their error from the sigma2 component
};

namespace detail {

inline void fill_standard_normal(Matrix& m, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = standard_normal(rng);
  }
}

// Row-wise softmax, shifted by the row max.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

inline std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  return probs.size() - 1;
}

}  // namespace detail

// ============================================================================
// Logistic: X ~ N(0, I_p), P(Y = k | x) proportional to exp(-x^T w_k)
// ============================================================================

struct LogisticGenerator {
  std::size_t p = 10;
  std::size_t K = 5;
  Matrix W;  // K x p
  std::uint64_t seed = 0;
};

inline LogisticGenerator make_logistic_generator(std::uint64_t seed, std::size_t p = 10,
                                                 std::size_t K = 5) {
  detail::require(p >= 1 && K >= 2, "logistic generator needs p >= 1, K >= 2");
  LogisticGenerator g;
  g.p = p;
  g.K = K;
  g.seed = seed;
  g.W.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(p));
  Rng rng = make_rng(seed, Stream::kModel);
  detail::fill_standard_normal(g.W, rng);
  return g;
}

inline Matrix logistic_class_probabilities(const LogisticGenerator& gen, const Matrix& X) {
  return detail::softmax_rows(-(X * gen.W.transpose()));
}

inline ClassificationData sample_logistic(const LogisticGenerator& gen, std::size_t n, Rng& rng) {
  detail::require(n >= 1, "sample size must be >= 1");
  ClassificationData d;
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(gen.p));
  detail::fill_standard_normal(d.X, rng);
  const Matrix probs = logistic_class_probabilities(gen, d.X);
  d.y.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    d.y[r] = detail::sample_categorical(
        std::span<const double>(probs.row(static_cast<Eigen::Index>(r)).data(), gen.K), rng);
  }
  return d;
}

// ============================================================================
// Hypercube: standard Gaussian clusters at distinct vertices of {0, side}^cube_dim
// (clusters_per_class of them per class), followed by pure-noise N(0, 1) features
// ============================================================================

struct HypercubeGenerator {
  std::size_t cube_dim = 5;
  double side = 2.0;
  std::size_t K = 5;
  std::size_t noise_features = 5;
  std::size_t clusters_per_class = 1;
  Matrix vertices;  // (K * clusters_per_class) x cube_dim; class k owns rows k*c .. k*c + c - 1
  std::uint64_t seed = 0;

  std::size_t p() const noexcept { return cube_dim + noise_features; }
};

inline HypercubeGenerator make_hypercube_generator(std::uint64_t seed, std::size_t K = 5,
                                                   std::size_t cube_dim = 5, double side = 2.0,
                                                   std::size_t noise_features = 5,
                                                   std::size_t clusters_per_class = 1) {
  detail::require(K >= 2 && cube_dim >= 1 && cube_dim < 63, "invalid hypercube dimensions");
  detail::require(clusters_per_class >= 1, "clusters_per_class must be >= 1");
  const std::size_t clusters = K * clusters_per_class;
  detail::require(clusters <= (std::size_t{1} << cube_dim), "more clusters than hypercube vertices");
  HypercubeGenerator g;
  g.cube_dim = cube_dim;
  g.side = side;
  g.K = K;
  g.noise_features = noise_features;
  g.clusters_per_class = clusters_per_class;
  g.seed = seed;
  // Seeded choice of distinct vertices: a partial Fisher-Yates over vertex codes.
  std::vector<std::uint64_t> codes(std::size_t{1} << cube_dim);
  std::iota(codes.begin(), codes.end(), std::uint64_t{0});
  Rng rng = make_rng(seed, Stream::kModel);
  for (std::size_t k = 0; k < clusters; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, codes.size() - 1);
    std::swap(codes[k], codes[pick(rng)]);
  }
  g.vertices.resize(static_cast<Eigen::Index>(clusters), static_cast<Eigen::Index>(cube_dim));
  for (std::size_t k = 0; k < clusters; ++k) {
    for (std::size_t d = 0; d < cube_dim; ++d) {
      g.vertices(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)) =
          ((codes[k] >> d) & 1U) ? side : 0.0;
    }
  }
  return g;
}

// Balanced labels (counts differ by at most one) in shuffled order; with several
// clusters per class each point picks one of its class's vertices uniformly.
inline ClassificationData sample_hypercube(const HypercubeGenerator& gen, std::size_t n, Rng& rng) {
  detail::require(n >= 1, "sample size must be >= 1");
  ClassificationData d;
  d.y.resize(n);
  for (std::size_t r = 0; r < n; ++r) d.y[r] = r % gen.K;
  std::shuffle(d.y.begin(), d.y.end(), rng);
  std::vector<std::size_t> cluster(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t offset = 0;
    if (gen.clusters_per_class > 1) {
      offset = std::uniform_int_distribution<std::size_t>(0, gen.clusters_per_class - 1)(rng);
    }
    cluster[r] = d.y[r] * gen.clusters_per_class + offset;
  }
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(gen.p()));
  detail::fill_standard_normal(d.X, rng);
  for (std::size_t r = 0; r < n; ++r) {
    d.X.row(static_cast<Eigen::Index>(r)).head(static_cast<Eigen::Index>(gen.cube_dim)) +=
        gen.vertices.row(static_cast<Eigen::Index>(cluster[r]));
  }
  return d;
}

// ============================================================================
// Regression: Y = beta^T X + E, E ~ (1 - eps) N(0, sigma1^2) + eps N(0, sigma2^2)
// ============================================================================

struct RegressionGenerator {
  std::size_t p = 10;
  Eigen::VectorXd beta;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

inline RegressionGenerator make_regression_generator(std::uint64_t seed, std::size_t p,
                                                     double sigma1, double sigma2,
                                                     double epsilon) {
  detail::require(p >= 1, "regression generator needs p >= 1");
  detail::require(sigma1 >= 0.0 && sigma2 >= 0.0, "noise scales must be non-negative");
  detail::require(epsilon >= 0.0 && epsilon <= 1.0, "mixing proportion must lie in [0,1]");
  RegressionGenerator g;
  g.p = p;
  g.sigma1 = sigma1;
  g.sigma2 = sigma2;
  g.epsilon = epsilon;
  g.seed = seed;
  g.beta.resize(static_cast<Eigen::Index>(p));
  Rng rng = make_rng(seed, Stream::kModel);
  for (Eigen::Index k = 0; k < g.beta.size(); ++k) g.beta(k) = standard_normal(rng);
  return g;
}

// Every row consumes the same draws regardless of sigma2 / epsilon, so grids
// over those parameters share common random numbers under a fixed seed.
inline RegressionData sample_regression(const RegressionGenerator& gen, std::size_t n,
                                        bool clean_only, Rng& rng) {
  detail::require(n >= 1, "sample size must be >= 1");
  RegressionData d;
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(gen.p));
  detail::fill_standard_normal(d.X, rng);
  d.y.resize(n);
  d.contaminated.assign(n, false);
  const double eps = clean_only ? 0.0 : gen.epsilon;
  for (std::size_t r = 0; r < n; ++r) {
    const double u = uniform01(rng);
    const double z = standard_normal(rng);
    d.contaminated[r] = u < eps;
    const double sigma = d.contaminated[r] ? gen.sigma2 : gen.sigma1;
    d.y[r] = d.X.row(static_cast<Eigen::Index>(r)).dot(gen.beta) + sigma * z;
  }
  return d;
}

// ============================================================================
// Scores
// ============================================================================

inline void check_probability_vector(std::span<const double> probs, double tolerance = 1e-6) {
  detail::require(!probs.empty(), "probability vector must be non-empty");
  double sum = 0.0;
  for (double p : probs) {
    detail::require(p >= 0.0 && std::isfinite(p), "probabilities must be finite and >= 0");
    sum += p;
  }
  detail::require(std::abs(sum - 1.0) <= tolerance, "probabilities must sum to 1");
}

// APS scores of every class for one probability vector and one draw u:
// mass of classes ranked above y + u * p_y. Ranking is by descending
// probability with ties broken by ascending class index.
inline std::vector<double> aps_scores_all(std::span<const double> probs, double u) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  std::vector<double> out(probs.size());
  double above = 0.0;
  for (std::size_t c : order) {
    out[c] = above + u * probs[c];
    above += probs[c];
  }
  return out;
}

inline double aps_score(std::span<const double> probs, std::size_t label, double u) {
  check_probability_vector(probs);
  detail::require(label < probs.size(), "label outside [K]");
  return aps_scores_all(probs, u)[label];
}

// randomize = false uses u = 1 (the inclusive cumulative mass); rng is only drawn from when randomizing.
inline double aps_score(std::span<const double> probs, std::size_t label, bool randomize, Rng& rng) {
  const double u = randomize ? uniform01(rng) : 1.0;
  return aps_score(probs, label, u);
}

inline double abs_residual_score(double y, double y_hat) { return std::abs(y - y_hat); }

// ============================================================================
// Softmax (multinomial logistic) regression
// ============================================================================

struct TrainConfig {
  double step = 0.1;
  std::size_t iterations = 2000;
};

struct SoftmaxClassifier {
  Matrix W;           // K x p
  Eigen::VectorXd b;  // K
  std::size_t iterations = 0;
  double final_loss = 0.0;

  std::size_t K() const noexcept { return static_cast<std::size_t>(W.rows()); }

  Matrix predict_proba(const Matrix& X) const {
    Matrix logits = X * W.transpose();
    logits.rowwise() += b.transpose();
    return detail::softmax_rows(logits);
  }

  std::vector<std::size_t> predict(const Matrix& X) const {
    const Matrix probs = predict_proba(X);
    std::vector<std::size_t> out(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      Eigen::Index arg = 0;
      probs.row(r).maxCoeff(&arg);
      out[static_cast<std::size_t>(r)] = static_cast<std::size_t>(arg);
    }
    return out;
  }
};

struct LossAndGradient {
  double loss = 0.0;
  Matrix grad_W;
  Eigen::VectorXd grad_b;
};

// Mean multinomial cross-entropy and its gradient.
inline LossAndGradient softmax_loss_and_gradient(const Matrix& X, std::span<const std::size_t> y,
                                                 const Matrix& W, const Eigen::VectorXd& b) {
  const auto n = X.rows();
  Matrix logits = X * W.transpose();
  logits.rowwise() += b.transpose();
  Matrix probs = detail::softmax_rows(logits);
  LossAndGradient out;
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto c = static_cast<Eigen::Index>(y[static_cast<std::size_t>(r)]);
    loss -= std::log(std::max(probs(r, c), 1e-300));
    probs(r, c) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss = loss * inv_n;
  out.grad_W = (probs.transpose() * X) * inv_n;
  out.grad_b = probs.colwise().sum().transpose() * inv_n;
  return out;
}

// Full-batch gradient descent from zero weights.
inline SoftmaxClassifier train_multinomial_lr(const Matrix& X, std::span<const std::size_t> y,
                                              std::size_t K, const TrainConfig& config = {}) {
  const auto n = static_cast<std::size_t>(X.rows());
  detail::require(n == y.size(), "features and labels differ in length");
  detail::require(K >= 2 && n >= K, "training needs K >= 2 and n >= K");
  detail::require(X.allFinite(), "training features must be finite");
  for (std::size_t c : y) detail::require(c < K, "training label outside [K]");
  SoftmaxClassifier clf;
  clf.W = Matrix::Zero(static_cast<Eigen::Index>(K), X.cols());
  clf.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto lg = softmax_loss_and_gradient(X, y, clf.W, clf.b);
    if (!std::isfinite(lg.loss)) throw TrainingError("cross-entropy became non-finite");
    clf.W -= config.step * lg.grad_W;
    clf.b -= config.step * lg.grad_b;
  }
  clf.iterations = config.iterations;
  clf.final_loss = softmax_loss_and_gradient(X, y, clf.W, clf.b).loss;
  if (!std::isfinite(clf.final_loss)) throw TrainingError("cross-entropy became non-finite");
  return clf;
}

// ============================================================================
// Least squares with intercept (normal equations, tiny ridge)
// ============================================================================

struct LinearModel {
  Eigen::VectorXd coef;
  double intercept = 0.0;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return intercept + x.dot(coef);
  }
};

inline LinearModel fit_least_squares(const Matrix& X, std::span<const double> y,
                                     double ridge = 1e-10) {
  const auto n = X.rows();
  const auto p = X.cols();
  detail::require(static_cast<std::size_t>(n) == y.size(), "features and targets differ in length");
  Matrix A(n, p + 1);
  A.col(0).setOnes();
  A.rightCols(p) = X;
  const Eigen::Map<const Eigen::VectorXd> target(y.data(), n);
  Eigen::MatrixXd gram = A.transpose() * A;
  gram.diagonal().array() += ridge;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || !(pivots.minCoeff() > 1e-12 * pivots.maxCoeff())) {
    throw TrainingError("least-squares design matrix is singular");
  }
  const Eigen::VectorXd theta = ldlt.solve(A.transpose() * target);
  if (!theta.allFinite()) throw TrainingError("least-squares fit is non-finite");
  LinearModel m;
  m.intercept = theta(0);
  m.coef = theta.tail(p);
  return m;
}

}  // namespace rcp
