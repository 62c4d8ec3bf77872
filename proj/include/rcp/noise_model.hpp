#pragma once

// Label-noise channel: clean/noisy marginals, the forward channel
// Ptilde(i, j) = P(Ytilde = i | Y = j), the posterior P(j, i) = P(Y = j | Ytilde = i)
// and its inverse.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rcp/error.hpp"
#include "rcp/random.hpp"

namespace rcp {

enum class NoiseKind { Uniform, General };

class NoiseModel {
 public:
  std::size_t K() const noexcept { return K_; }
  double epsilon() const noexcept { return epsilon_; }
  NoiseKind kind() const noexcept { return kind_; }

  // P_i = P(Y = i)
  const Eigen::VectorXd& clean_marginal() const noexcept { return clean_marginal_; }
  // Ptilde_i = P(Ytilde = i)
  const Eigen::VectorXd& noisy_marginal() const noexcept { return noisy_marginal_; }
  // (j, i) entry: P(Y = j | Ytilde = i)
  const Eigen::MatrixXd& posterior() const noexcept { return posterior_; }
  // (i, j) entry: P(Ytilde = i | Y = j)
  const Eigen::MatrixXd& channel() const noexcept { return channel_; }
  const Eigen::MatrixXd& posterior_inverse() const noexcept { return posterior_inverse_; }

  friend NoiseModel uniform_noise_model(std::size_t K, double epsilon);
  friend NoiseModel general_noise_model(std::size_t K, double epsilon,
                                        std::span<const double> clean_marginal,
                                        const Eigen::MatrixXd& channel);

 private:
  NoiseModel() = default;
  void check_invariants() const;

  std::size_t K_ = 0;
  double epsilon_ = 0.0;
  NoiseKind kind_ = NoiseKind::General;
  Eigen::VectorXd clean_marginal_;
  Eigen::VectorXd noisy_marginal_;
  Eigen::MatrixXd posterior_;
  Eigen::MatrixXd channel_;
  Eigen::MatrixXd posterior_inverse_;
};

inline constexpr double kMaxConditionNumber = 1e12;

namespace detail {

inline void check_epsilon(double epsilon) {
  require(epsilon >= 0.0 && epsilon < 0.5, "epsilon must lie in [0, 0.5)");
}

inline double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

inline Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& m) {
  const double cond = condition_number(m);
  if (!(cond <= kMaxConditionNumber)) {
    throw ModelError("posterior matrix P is numerically singular (condition number " +
                     std::to_string(cond) + ")");
  }
  return Eigen::PartialPivLU<Eigen::MatrixXd>(m).inverse();
}

}  // namespace detail

inline void NoiseModel::check_invariants() const {
  const auto n = static_cast<Eigen::Index>(K_);
  for (Eigen::Index c = 0; c < n; ++c) {
    if (std::abs(posterior_.col(c).sum() - 1.0) > 1e-10 ||
        std::abs(channel_.col(c).sum() - 1.0) > 1e-10) {
      throw ModelError("noise model columns must be conditional distributions");
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(noisy_marginal_(i) - channel_.row(i).dot(clean_marginal_)) > 1e-10) {
      throw ModelError("noisy marginal inconsistent with channel and clean marginal");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(noisy_marginal_(i) * posterior_(j, i) - channel_(i, j) * clean_marginal_(j)) >
          1e-10) {
        throw ModelError("posterior and channel violate Bayes' rule");
      }
    }
  }
  const Eigen::MatrixXd id = posterior_inverse_ * posterior_;
  if ((id - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-8) {
    throw ModelError("posterior inverse does not invert P");
  }
}

// Corruption picks a label uniformly from [K] with probability epsilon and
// clean marginals are uniform; P = (1 - eps) I + (eps / K) 1 1^T.
inline NoiseModel uniform_noise_model(std::size_t K, double epsilon) {
  detail::require(K >= 2, "noise model needs K >= 2");
  detail::check_epsilon(epsilon);
  NoiseModel m;
  m.K_ = K;
  m.epsilon_ = epsilon;
  m.kind_ = NoiseKind::Uniform;
  const auto n = static_cast<Eigen::Index>(K);
  const double k = static_cast<double>(K);
  m.clean_marginal_ = Eigen::VectorXd::Constant(n, 1.0 / k);
  m.noisy_marginal_ = Eigen::VectorXd::Constant(n, 1.0 / k);
  m.posterior_ = Eigen::MatrixXd::Constant(n, n, epsilon / k);
  m.posterior_.diagonal().array() += 1.0 - epsilon;
  // Uniform marginals make the channel equal to the posterior.
  m.channel_ = m.posterior_;
  // Sherman-Morrison.
  m.posterior_inverse_ = Eigen::MatrixXd::Constant(n, n, -epsilon / (k * (1.0 - epsilon)));
  m.posterior_inverse_.diagonal().array() += 1.0 / (1.0 - epsilon);
  const Eigen::MatrixXd numeric = detail::checked_inverse(m.posterior_);
  if ((numeric - m.posterior_inverse_).cwiseAbs().maxCoeff() > 1e-10) {
    throw ModelError("closed-form inverse disagrees with numeric inversion");
  }
  m.check_invariants();
  return m;
}

// Builds the model from the forward channel (what a data generator specifies)
// and the clean marginal; the noisy marginal and P follow from Bayes' rule.
inline NoiseModel general_noise_model(std::size_t K, double epsilon,
                                      std::span<const double> clean_marginal,
                                      const Eigen::MatrixXd& channel) {
  detail::require(K >= 2, "noise model needs K >= 2");
  detail::check_epsilon(epsilon);
  const auto n = static_cast<Eigen::Index>(K);
  detail::require(clean_marginal.size() == K, "clean marginal must have K entries");
  detail::require(channel.rows() == n && channel.cols() == n, "channel must be K x K");
  double total = 0.0;
  for (double p : clean_marginal) {
    detail::require(p >= 0.0, "clean marginal entries must be non-negative");
    total += p;
  }
  detail::require(std::abs(total - 1.0) <= 1e-9, "clean marginal must sum to 1");
  for (Eigen::Index j = 0; j < n; ++j) {
    detail::require((channel.col(j).array() >= 0.0).all(), "channel entries must be non-negative");
    detail::require(std::abs(channel.col(j).sum() - 1.0) <= 1e-9,
                    "channel columns must sum to 1");
  }

  NoiseModel m;
  m.K_ = K;
  m.epsilon_ = epsilon;
  m.kind_ = NoiseKind::General;
  m.clean_marginal_ = Eigen::Map<const Eigen::VectorXd>(clean_marginal.data(), n);
  m.channel_ = channel;
  m.noisy_marginal_ = channel * m.clean_marginal_;
  m.posterior_ = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(m.noisy_marginal_(i) > 0.0)) {
      throw ModelError("noisy label " + std::to_string(i + 1) + " has zero probability");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      m.posterior_(j, i) = channel(i, j) * m.clean_marginal_(j) / m.noisy_marginal_(i);
    }
  }
  m.posterior_inverse_ = detail::checked_inverse(m.posterior_);
  m.check_invariants();
  return m;
}

// Each label passes through the channel independently. The uniform model uses
// the flip-then-draw mechanism directly (the draw may return the true label).
inline std::vector<std::size_t> corrupt_labels(std::span<const std::size_t> labels,
                                               const NoiseModel& model, Rng& rng) {
  std::vector<std::size_t> out(labels.begin(), labels.end());
  const std::size_t K = model.K();
  for (std::size_t y : labels) detail::require(y < K, "label outside [K]");
  if (model.kind() == NoiseKind::Uniform) {
    std::uniform_int_distribution<std::size_t> pick(0, K - 1);
    // Both draws happen for every label, so runs that differ only in epsilon
    // corrupt nested subsets of the same labels.
    for (auto& y : out) {
      const double u = uniform01(rng);
      const std::size_t replacement = pick(rng);
      if (u < model.epsilon()) y = replacement;
    }
    return out;
  }
  const auto& ch = model.channel();
  for (auto& y : out) {
    const double u = uniform01(rng);
    const auto col = static_cast<Eigen::Index>(y);
    double acc = 0.0;
    std::size_t drawn = K - 1;
    for (std::size_t i = 0; i < K; ++i) {
      acc += ch(static_cast<Eigen::Index>(i), col);
      if (u < acc) {
        drawn = i;
        break;
      }
    }
    y = drawn;
  }
  return out;
}

// ============================================================================
// JSON: {K, epsilon, P_marginal[], P_tilde_matrix[][]} or {K, epsilon, kind: "uniform"}
// ============================================================================

inline nlohmann::json to_json(const NoiseModel& m) {
  nlohmann::json j;
  j["K"] = m.K();
  j["epsilon"] = m.epsilon();
  if (m.kind() == NoiseKind::Uniform) {
    j["kind"] = "uniform";
    return j;
  }
  const auto n = static_cast<Eigen::Index>(m.K());
  j["P_marginal"] = std::vector<double>(m.clean_marginal().data(), m.clean_marginal().data() + n);
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> row(static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < n; ++c) row[static_cast<std::size_t>(c)] = m.channel()(i, c);
    rows.push_back(row);
  }
  j["P_tilde_matrix"] = rows;
  return j;
}

inline NoiseModel noise_model_from_json(const nlohmann::json& j) {
  try {
    const auto K = j.at("K").get<std::size_t>();
    const auto eps = j.at("epsilon").get<double>();
    if (j.value("kind", std::string("general")) == "uniform") return uniform_noise_model(K, eps);
    const auto marginal = j.at("P_marginal").get<std::vector<double>>();
    const auto rows = j.at("P_tilde_matrix").get<std::vector<std::vector<double>>>();
    detail::require(rows.size() == K, "P_tilde_matrix must have K rows");
    Eigen::MatrixXd ch(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    for (std::size_t i = 0; i < K; ++i) {
      detail::require(rows[i].size() == K, "P_tilde_matrix must have K columns");
      for (std::size_t c = 0; c < K; ++c) {
        ch(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
      }
    }
    return general_noise_model(K, eps, marginal, ch);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid noise model JSON: ") + e.what());
  }
}

inline NoiseModel load_noise_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open noise model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("cannot parse noise model file " + path + ": " + e.what());
  }
  return noise_model_from_json(j);
}

}  // namespace rcp
