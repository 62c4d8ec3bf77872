#pragma once

// Bound report: coverage sandwiches, order-statistic robustness, dominance
// verdicts and the CRCP estimator bound for one configured score-law pair.
//
// Spec keys (all optional):
//   clean / contaminant: {"kind": "half_normal", "sigma"} | {"kind": "normal", "mu", "sigma"}
//                        | {"kind": "uniform", "lo", "hi"} | {"kind": "empirical", "values": [...]}
//   epsilon, alpha, n, samples (q~ draws), n_test (0 = exact clean cdf), d_tv,
//   noise_model (noise JSON; default uniform with K = 5 when epsilon < 0.5), crcp_n

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rcp/crcp.hpp"
#include "rcp/error.hpp"
#include "rcp/harness/config.hpp"
#include "rcp/harness/results.hpp"
#include "rcp/noise_model.hpp"
#include "rcp/random.hpp"
#include "rcp/stats_core.hpp"
#include "rcp/theory_bounds.hpp"

namespace rcp::harness {

struct CdfSpec {
  std::string kind;
  Cdf cdf;
  std::optional<double> sigma;  // half-normal only
};

inline CdfSpec parse_cdf_spec(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "half_normal") {
      const double sigma = j.at("sigma").get<double>();
      return {kind, half_normal_distribution(sigma), sigma};
    }
    if (kind == "normal") {
      return {kind, normal_distribution(j.value("mu", 0.0), j.at("sigma").get<double>()), {}};
    }
    if (kind == "uniform") {
      return {kind, uniform_distribution(j.at("lo").get<double>(), j.at("hi").get<double>()), {}};
    }
    if (kind == "empirical") {
      return {kind, SteppedCdf::from_sample(j.at("values").get<std::vector<double>>()), {}};
    }
    throw InputError("unknown cdf kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid cdf spec: ") + e.what());
  }
}

struct BoundsOutcome {
  BoundReport report;
  std::optional<CrcpBound> crcp;
  DominanceVerdict dominance;
  std::optional<UndercoverageMargin> undercoverage;
  MeanAndError simulated_coverage;
  std::string regime;
  nlohmann::json json;
};

inline std::string coverage_regime(const DominanceVerdict& v) {
  switch (v.relation) {
    case DominanceRelation::F1_dominates: return "over_coverage";
    case DominanceRelation::F2_dominates: return v.margin_ok ? "under_coverage" : "indeterminate";
    case DominanceRelation::crossing: return "indeterminate";
    case DominanceRelation::equal: return "exchangeable";
  }
  return "indeterminate";
}

inline nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json raw;
  raw["lower_exact"] = r.lower_exact;
  raw["upper_exact"] = r.upper_exact;
  raw["lower_ks"] = r.lower_ks;
  raw["upper_ks"] = r.upper_ks;
  raw["lower_tv"] = r.lower_tv ? nlohmann::json(*r.lower_tv) : nlohmann::json();
  nlohmann::json clipped;
  clipped["lower_exact"] = BoundReport::clip(r.lower_exact);
  clipped["upper_exact"] = BoundReport::clip(r.upper_exact);
  clipped["lower_ks"] = BoundReport::clip(r.lower_ks);
  clipped["upper_ks"] = BoundReport::clip(r.upper_ks);
  clipped["lower_tv"] = r.lower_tv ? nlohmann::json(BoundReport::clip(*r.lower_tv)) : nlohmann::json();
  nlohmann::json j;
  j["raw"] = raw;
  j["clipped"] = clipped;
  j["C_ni"] = r.C_ni;
  j["order_index"] = r.order_index;
  j["lemma2_bound"] = r.lemma2_bound;
  j["expected_gap"] = r.expected_gap;
  j["d_ks"] = r.d_ks;
  j["w1"] = r.w1;
  j["n_samples"] = r.n_samples;
  return j;
}

inline nlohmann::json to_json(const CrcpBound& b) {
  nlohmann::json j;
  j["n"] = b.n;
  j["B"] = b.B;
  j["w1"] = b.w1;
  j["b"] = b.b;
  auto w2 = nlohmann::json::array();
  for (Eigen::Index i = 0; i < b.w2.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(b.w2.cols()));
    for (Eigen::Index c = 0; c < b.w2.cols(); ++c) row[static_cast<std::size_t>(c)] = b.w2(i, c);
    w2.push_back(row);
  }
  j["w2"] = w2;
  return j;
}

inline BoundsOutcome run_bounds_report(const ExperimentConfig& c) {
  const nlohmann::json& spec = c.bounds;
  if (!spec.is_object()) throw InputError("bounds spec must be a JSON object");
  nlohmann::json default_clean = {{"kind", "half_normal"}, {"sigma", 1.0}};
  nlohmann::json default_contaminant = {{"kind", "half_normal"}, {"sigma", 3.0}};
  const auto clean = parse_cdf_spec(spec.value("clean", default_clean));
  const auto contaminant = parse_cdf_spec(spec.value("contaminant", default_contaminant));
  double epsilon = 0.0, alpha = c.alpha;
  std::size_t n = 0, samples = 0, n_test = 0;
  std::optional<double> d_tv;
  try {
    epsilon = spec.value("epsilon", c.epsilon.empty() ? 0.2 : c.epsilon.front());
    alpha = spec.value("alpha", c.alpha);
    n = spec.value("n", c.n_calibration);
    samples = spec.value("samples", c.repetitions);
    n_test = spec.value("n_test", std::size_t{0});
    if (spec.contains("d_tv")) d_tv = spec.at("d_tv").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid bounds spec: ") + e.what());
  }
  rcp::detail::require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0,1]");
  rcp::detail::require(n >= 1 && samples >= 1, "n and samples must be >= 1");
  rcp::detail::check_alpha(alpha);

  // Total variation is computable exactly for two stepped laws.
  if (!d_tv) {
    const auto* a = std::get_if<SteppedCdf>(&clean.cdf);
    const auto* b = std::get_if<SteppedCdf>(&contaminant.cdf);
    if (a && b) {
      std::vector<double> atoms(a->breakpoints().begin(), a->breakpoints().end());
      atoms.insert(atoms.end(), b->breakpoints().begin(), b->breakpoints().end());
      std::sort(atoms.begin(), atoms.end());
      atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
      std::vector<double> pa(atoms.size()), pb(atoms.size());
      for (std::size_t k = 0; k < atoms.size(); ++k) {
        pa[k] = (*a)(atoms[k]) - a->left_limit(atoms[k]);
        pb[k] = (*b)(atoms[k]) - b->left_limit(atoms[k]);
      }
      d_tv = tv_distance_discrete(pa, pb);
    }
  }

  Rng rng = make_rng(c.master_seed, Stream::kData);
  const auto sim = simulate_contaminated_quantiles(clean.cdf, contaminant.cdf, epsilon, alpha, n,
                                                   samples, n_test, rng);
  BoundsOutcome out;
  out.report = lemma1_bounds(clean.cdf, contaminant.cdf, epsilon, alpha, n, sim.q_tilde, d_tv);
  out.simulated_coverage = mean_and_error(sim.clean_coverage);
  const auto grid = default_dominance_grid(clean.cdf, contaminant.cdf);
  out.dominance = dominance_check(clean.cdf, contaminant.cdf, epsilon, n, grid);
  out.regime = coverage_regime(out.dominance);
  if (clean.sigma && contaminant.sigma && *clean.sigma >= *contaminant.sigma) {
    std::vector<double> xs;
    for (double x : grid) {
      if (x >= 0.0) xs.push_back(x);
    }
    if (!xs.empty()) {
      out.undercoverage = regression_undercoverage_margin(*clean.sigma, *contaminant.sigma,
                                                          epsilon, n, xs);
    }
  }

  std::optional<NoiseModel> model;
  if (spec.contains("noise_model")) {
    model = noise_model_from_json(spec.at("noise_model"));
  } else if (epsilon < 0.5) {
    model = uniform_noise_model(c.K, epsilon);
  }
  const std::size_t crcp_n = spec.value("crcp_n", n);
  if (model) out.crcp = crcp_bound(*model, crcp_n);

  nlohmann::json j;
  j["epsilon"] = epsilon;
  j["alpha"] = alpha;
  j["n"] = n;
  j["seed"] = c.master_seed;
  j["clean"] = clean.kind;
  j["contaminant"] = contaminant.kind;
  j["bounds"] = to_json(out.report);
  j["simulated_clean_coverage"] = {{"mean", out.simulated_coverage.mean},
                                   {"stdev", out.simulated_coverage.stdev},
                                   {"standard_error", out.simulated_coverage.standard_error}};
  const double lo = out.report.lower_exact - 3.0 * out.simulated_coverage.standard_error;
  const double hi = out.report.upper_exact + 3.0 * out.simulated_coverage.standard_error;
  j["simulation_within_bounds"] =
      out.simulated_coverage.mean >= lo && out.simulated_coverage.mean <= hi;
  j["dominance"] = {{"relation", to_string(out.dominance.relation)},
                    {"margin_ok", out.dominance.margin_ok},
                    {"crossing_points", out.dominance.crossing_points},
                    {"max_difference", out.dominance.max_difference},
                    {"min_difference", out.dominance.min_difference}};
  j["regime"] = out.regime;
  if (out.undercoverage) {
    j["undercoverage_margin"] = {{"min_lhs", out.undercoverage->min_lhs},
                                 {"argmin", out.undercoverage->argmin},
                                 {"rhs", out.undercoverage->rhs},
                                 {"holds", out.undercoverage->holds}};
  }
  j["crcp_bound"] = out.crcp ? to_json(*out.crcp) : nlohmann::json();
  out.json = j;
  return out;
}

}  // namespace rcp::harness
