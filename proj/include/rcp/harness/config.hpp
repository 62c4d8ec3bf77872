#pragma once

// Experiment configuration: per-kind defaults, JSON overrides, validation.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rcp/crcp.hpp"
#include "rcp/error.hpp"
#include "rcp/synth.hpp"

namespace rcp::harness {

enum class ExperimentKind {
  regression_ablation,
  classification_table,
  epsilon_ablation,
  bounds_report,
  ingest_run
};

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::regression_ablation: return "regression_ablation";
    case ExperimentKind::classification_table: return "classification_table";
    case ExperimentKind::epsilon_ablation: return "epsilon_ablation";
    case ExperimentKind::bounds_report: return "bounds_report";
    case ExperimentKind::ingest_run: return "ingest_run";
  }
  return "unknown";
}

inline const char* to_string(Correction c) { return c == Correction::Theorem ? "theorem" : "zero"; }

inline Correction parse_correction(const std::string& s) {
  if (s == "theorem") return Correction::Theorem;
  if (s == "zero") return Correction::Zero;
  throw InputError("crcp correction must be 'theorem' or 'zero', got '" + s + "'");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::classification_table;
  std::size_t n_train = 2000;
  std::size_t n_calibration = 2000;
  std::size_t n_test = 2000;
  double alpha = 0.1;
  std::vector<double> epsilon{0.2};
  std::vector<double> sigma2{3.0};
  double sigma1 = 1.0;
  std::string sweep = "sigma2";  // regression: "sigma2" or "epsilon"
  std::size_t K = 5;
  std::size_t p = 10;
  std::size_t repetitions = 25;
  std::uint64_t master_seed = 0;
  bool aps_randomize = false;
  bool jitter = false;
  Correction crcp_correction = Correction::Theorem;
  std::size_t workers = 1;
  std::vector<std::string> datasets{"logistic", "hypercube"};
  std::size_t hypercube_clusters_per_class = 2;
  TrainConfig training;
  bool paper_scale = false;

  std::string out_dir;           // empty: nothing written
  std::string dump_scores_dir;   // classification: write per-repetition score files

  // ingest
  std::string calibration_file;
  std::string test_file;
  std::string noise_model_file;
  std::optional<std::size_t> subsample_calibration;
  std::optional<std::size_t> subsample_test;

  // bounds: the raw specification (see bounds.hpp)
  nlohmann::json bounds = nlohmann::json::object();
};

// Desk-scale defaults; `paper_scale` restores the full sample sizes and repetition counts.
inline ExperimentConfig default_config(ExperimentKind kind, bool paper_scale = false) {
  ExperimentConfig c;
  c.kind = kind;
  c.paper_scale = paper_scale;
  switch (kind) {
    case ExperimentKind::regression_ablation:
      c.n_train = c.n_calibration = c.n_test = 1000;
      c.repetitions = paper_scale ? 100 : 50;
      c.epsilon = {0.2};
      c.sigma2 = {0.0, 0.5, 1.0, 2.0, 3.0, 5.0};
      c.sweep = "sigma2";
      break;
    case ExperimentKind::classification_table:
      c.n_train = c.n_calibration = c.n_test = paper_scale ? 10000 : 2000;
      c.epsilon = {0.2};
      break;
    case ExperimentKind::epsilon_ablation:
      c.n_train = c.n_calibration = c.n_test = paper_scale ? 10000 : 2000;
      c.epsilon = {0.0, 0.1, 0.2, 0.3, 0.4};
      c.datasets = {"logistic"};
      break;
    case ExperimentKind::bounds_report:
      c.repetitions = 2000;
      c.n_calibration = 1000;
      break;
    case ExperimentKind::ingest_run:
      c.repetitions = 1;
      break;
  }
  return c;
}

inline void validate(const ExperimentConfig& c) {
  using rcp::detail::require;
  require(c.repetitions >= 1, "repetitions must be >= 1");
  require(c.n_train >= 1 && c.n_calibration >= 1 && c.n_test >= 1, "sample sizes must be >= 1");
  rcp::detail::check_alpha(c.alpha);
  require(c.workers >= 1, "workers must be >= 1");
  require(c.K >= 2, "K must be >= 2");
  require(c.p >= 1, "p must be >= 1");
  switch (c.kind) {
    case ExperimentKind::regression_ablation:
      require(c.sweep == "sigma2" || c.sweep == "epsilon", "sweep must be 'sigma2' or 'epsilon'");
      require(!c.epsilon.empty() && !c.sigma2.empty(), "grids must be non-empty");
      require(c.sweep == "epsilon" ? c.sigma2.size() == 1 : c.epsilon.size() == 1,
              "only the swept grid may hold more than one value");
      for (double e : c.epsilon) require(e >= 0.0 && e <= 1.0, "epsilon must lie in [0,1]");
      for (double s : c.sigma2) require(s >= 0.0, "sigma2 must be non-negative");
      require(c.sigma1 > 0.0, "sigma1 must be positive");
      break;
    case ExperimentKind::classification_table:
    case ExperimentKind::epsilon_ablation:
      require(!c.epsilon.empty(), "epsilon grid must be non-empty");
      require(!c.datasets.empty(), "dataset list must be non-empty");
      for (double e : c.epsilon) require(e >= 0.0 && e < 0.5, "epsilon must lie in [0, 0.5)");
      for (const auto& d : c.datasets) {
        require(d == "logistic" || d == "hypercube", "unknown dataset '" + d + "'");
      }
      require(c.hypercube_clusters_per_class >= 1 && c.hypercube_clusters_per_class * c.K <= 32,
              "hypercube needs 1 <= clusters_per_class and K * clusters_per_class <= 32");
      require(c.training.iterations >= 1 && c.training.step > 0.0, "invalid training settings");
      break;
    case ExperimentKind::ingest_run:
      require(!c.calibration_file.empty() && !c.test_file.empty() && !c.noise_model_file.empty(),
              "ingest needs calibration, test and noise model files");
      if (c.subsample_calibration) require(*c.subsample_calibration >= 1, "subsample must be >= 1");
      if (c.subsample_test) require(*c.subsample_test >= 1, "subsample must be >= 1");
      break;
    case ExperimentKind::bounds_report:
      break;
  }
}

namespace detail {

template <class T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

// Accepts a scalar or an array.
inline void read_grid(const nlohmann::json& j, const char* key, std::vector<double>& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  out = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
}

}  // namespace detail

// Keys present in `j` override `base`.
inline ExperimentConfig apply_json(ExperimentConfig c, const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw InputError("config must be a JSON object");
    detail::read_if(j, "n_train", c.n_train);
    detail::read_if(j, "n_calibration", c.n_calibration);
    detail::read_if(j, "n_test", c.n_test);
    if (j.contains("n")) c.n_train = c.n_calibration = c.n_test = j.at("n").get<std::size_t>();
    detail::read_if(j, "alpha", c.alpha);
    detail::read_grid(j, "epsilon", c.epsilon);
    detail::read_grid(j, "sigma2", c.sigma2);
    detail::read_if(j, "sigma1", c.sigma1);
    detail::read_if(j, "sweep", c.sweep);
    detail::read_if(j, "K", c.K);
    detail::read_if(j, "p", c.p);
    detail::read_if(j, "repetitions", c.repetitions);
    detail::read_if(j, "master_seed", c.master_seed);
    detail::read_if(j, "aps_randomize", c.aps_randomize);
    detail::read_if(j, "jitter", c.jitter);
    if (j.contains("crcp_correction")) {
      c.crcp_correction = parse_correction(j.at("crcp_correction").get<std::string>());
    }
    detail::read_if(j, "workers", c.workers);
    detail::read_if(j, "datasets", c.datasets);
    detail::read_if(j, "hypercube_clusters_per_class", c.hypercube_clusters_per_class);
    detail::read_if(j, "training_step", c.training.step);
    detail::read_if(j, "training_iterations", c.training.iterations);
    detail::read_if(j, "out_dir", c.out_dir);
    detail::read_if(j, "dump_scores_dir", c.dump_scores_dir);
    detail::read_if(j, "calibration_file", c.calibration_file);
    detail::read_if(j, "test_file", c.test_file);
    detail::read_if(j, "noise_model_file", c.noise_model_file);
    if (j.contains("subsample_calibration")) {
      c.subsample_calibration = j.at("subsample_calibration").get<std::size_t>();
    }
    if (j.contains("subsample_test")) c.subsample_test = j.at("subsample_test").get<std::size_t>();
    if (j.contains("bounds")) c.bounds = j.at("bounds");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid config: ") + e.what());
  }
  return c;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("cannot parse " + path + ": " + e.what());
  }
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = to_string(c.kind);
  j["n_train"] = c.n_train;
  j["n_calibration"] = c.n_calibration;
  j["n_test"] = c.n_test;
  j["alpha"] = c.alpha;
  j["epsilon"] = c.epsilon;
  j["K"] = c.K;
  j["repetitions"] = c.repetitions;
  j["master_seed"] = c.master_seed;
  j["aps_randomize"] = c.aps_randomize;
  j["jitter"] = c.jitter;
  j["crcp_correction"] = to_string(c.crcp_correction);
  j["workers"] = c.workers;
  j["paper_scale"] = c.paper_scale;
  switch (c.kind) {
    case ExperimentKind::regression_ablation:
      j["sigma1"] = c.sigma1;
      j["sigma2"] = c.sigma2;
      j["sweep"] = c.sweep;
      j["p"] = c.p;
      break;
    case ExperimentKind::classification_table:
    case ExperimentKind::epsilon_ablation:
      j["datasets"] = c.datasets;
      j["hypercube_clusters_per_class"] = c.hypercube_clusters_per_class;
      j["p"] = c.p;
      j["training_step"] = c.training.step;
      j["training_iterations"] = c.training.iterations;
      break;
    case ExperimentKind::ingest_run:
      j["calibration_file"] = c.calibration_file;
      j["test_file"] = c.test_file;
      j["noise_model_file"] = c.noise_model_file;
      j["subsample_calibration"] =
          c.subsample_calibration ? nlohmann::json(*c.subsample_calibration) : nlohmann::json();
      j["subsample_test"] = c.subsample_test ? nlohmann::json(*c.subsample_test) : nlohmann::json();
      break;
    case ExperimentKind::bounds_report:
      j["bounds"] = c.bounds;
      break;
  }
  return j;
}

}  // namespace rcp::harness
