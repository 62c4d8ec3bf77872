#pragma once

// Experiment runners and on-disk output.

#include <cstddef>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rcp/error.hpp"
#include "rcp/harness/bounds.hpp"
#include "rcp/harness/config.hpp"
#include "rcp/harness/parallel.hpp"
#include "rcp/harness/pipeline.hpp"
#include "rcp/harness/results.hpp"
#include "rcp/ingest.hpp"
#include "rcp/noise_model.hpp"

namespace rcp::harness {

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

inline nlohmann::json seed_metadata(const ExperimentConfig& c) {
  return {{"master_seed", c.master_seed},
          {"repetition_seed", "master_seed + repetition"},
          {"streams", {{"model", 1}, {"data", 2}, {"corruption", 3}, {"scoring", 4},
                       {"subsample", 5}}}};
}

// Runs `count` tasks; on failure throws RunAborted holding the finished prefix.
inline ExperimentResult collect(ExperimentKind kind, std::size_t count, std::size_t workers,
                                const std::function<std::vector<RepetitionRecord>(std::size_t)>& task,
                                nlohmann::json metadata) {
  auto outcome = parallel_map<std::vector<RepetitionRecord>>(count, workers, task);
  ExperimentResult r;
  r.kind = kind;
  r.metadata = std::move(metadata);
  for (auto& slot : outcome.results) {
    if (!slot) break;
    r.records.insert(r.records.end(), slot->begin(), slot->end());
  }
  r.aggregates = aggregate(r.records);
  if (outcome.first_error) {
    r.complete = false;
    int code = 2;
    try {
      std::rethrow_exception(outcome.first_error);
    } catch (const InputError& e) {
      r.error = e.what();
      code = 1;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    r.error = "task " + std::to_string(outcome.failed_index) + ": " + r.error;
    throw RunAborted(r.error, std::move(r), code);
  }
  return r;
}

}  // namespace detail

inline ExperimentResult run_regression_ablation(const ExperimentConfig& c) {
  validate(c);
  const bool sweep_sigma = c.sweep == "sigma2";
  const auto& grid = sweep_sigma ? c.sigma2 : c.epsilon;
  std::vector<RegressionGenerator> gens;
  for (double g : grid) {
    gens.push_back(make_regression_generator(c.master_seed, c.p, c.sigma1,
                                             sweep_sigma ? g : c.sigma2.front(),
                                             sweep_sigma ? c.epsilon.front() : g));
  }
  const std::size_t reps = c.repetitions;
  auto task = [&](std::size_t idx) {
    const std::size_t cell = idx / reps, rep = idx % reps;
    return std::vector<RepetitionRecord>{run_regression_repetition(gens[cell], grid[cell], rep, c)};
  };
  auto meta = detail::seed_metadata(c);
  meta["sweep"] = c.sweep;
  meta["beta"] = std::vector<double>(gens.front().beta.data(),
                                     gens.front().beta.data() + gens.front().beta.size());
  return detail::collect(c.kind, grid.size() * reps, c.workers, task, std::move(meta));
}

namespace detail {

inline ExperimentResult run_classification_grid(const ExperimentConfig& c) {
  validate(c);
  std::vector<ClassificationSource> sources;
  for (const auto& d : c.datasets) sources.push_back(make_source(d, c));
  const std::size_t reps = c.repetitions;
  const std::size_t cells = sources.size() * c.epsilon.size();
  auto task = [&](std::size_t idx) {
    const std::size_t cell = idx / reps, rep = idx % reps;
    const auto& src = sources[cell / c.epsilon.size()];
    return run_classification_repetition(src, c.epsilon[cell % c.epsilon.size()], rep, c);
  };
  auto meta = seed_metadata(c);
  for (const auto& s : sources) {
    if (!s.hypercube) continue;
    auto rows = nlohmann::json::array();
    for (Eigen::Index k = 0; k < s.hypercube->vertices.rows(); ++k) {
      std::vector<double> v(static_cast<std::size_t>(s.hypercube->vertices.cols()));
      for (Eigen::Index d = 0; d < s.hypercube->vertices.cols(); ++d) {
        v[static_cast<std::size_t>(d)] = s.hypercube->vertices(k, d);
      }
      rows.push_back(v);
    }
    meta["hypercube_vertices"] = rows;
  }
  meta["score"] = c.aps_randomize ? "aps_randomized" : "aps";
  meta["crcp_correction"] = to_string(c.crcp_correction);
  return collect(c.kind, cells * reps, c.workers, task, std::move(meta));
}

}  // namespace detail

inline ExperimentResult run_classification_table(const ExperimentConfig& c) {
  return detail::run_classification_grid(c);
}

inline ExperimentResult run_epsilon_ablation(const ExperimentConfig& c) {
  return detail::run_classification_grid(c);
}

inline ExperimentResult run_ingest(const ExperimentConfig& c) {
  validate(c);
  const auto model = load_noise_model(c.noise_model_file);
  const auto calibration = load_score_file(c.calibration_file);
  const auto test = load_score_file(c.test_file);
  rcp::detail::require(calibration.K == model.K() && test.K == model.K(),
                       "K mismatch: calibration K=" + std::to_string(calibration.K) +
                           ", test K=" + std::to_string(test.K) +
                           ", noise model K=" + std::to_string(model.K()));
  if (c.subsample_calibration) {
    rcp::detail::require(*c.subsample_calibration <= calibration.n(),
                         "calibration subsample exceeds the file's rows");
  }
  if (c.subsample_test) {
    rcp::detail::require(*c.subsample_test <= test.n(), "test subsample exceeds the file's rows");
  }
  auto task = [&](std::size_t rep) {
    return run_ingest_repetition(calibration, test, model, rep, c);
  };
  auto meta = detail::seed_metadata(c);
  meta["calibration_rows"] = calibration.n();
  meta["test_rows"] = test.n();
  meta["noise_model"] = to_json(model);
  return detail::collect(c.kind, c.repetitions, c.workers, task, std::move(meta));
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  switch (c.kind) {
    case ExperimentKind::regression_ablation: return run_regression_ablation(c);
    case ExperimentKind::classification_table: return run_classification_table(c);
    case ExperimentKind::epsilon_ablation: return run_epsilon_ablation(c);
    case ExperimentKind::ingest_run: return run_ingest(c);
    case ExperimentKind::bounds_report: break;
  }
  throw InputError("bounds reports are produced by run_bounds_report");
}

// ============================================================================
// Output files
// ============================================================================

inline nlohmann::json manifest(const ExperimentConfig& c) {
  nlohmann::json j;
  j["tool"] = "rcp";
  j["version"] = kVersion;
  j["compiler"] = __VERSION__;
  j["config"] = to_json(c);
  j["seeds"] = detail::seed_metadata(c);
  return j;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw InputError("cannot write " + p.string());
  return out;
}

}  // namespace detail

inline void write_outputs(const std::string& dir, const ExperimentConfig& c,
                          const ExperimentResult& r) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  detail::open_output(base / "manifest.json") << manifest(c).dump(2) << '\n';
  detail::open_output(base / "result.json") << to_json(r).dump(2) << '\n';
  {
    auto out = detail::open_output(base / "records.csv");
    write_records_csv(out, r.records);
  }
  {
    auto out = detail::open_output(base / "aggregates.csv");
    write_aggregates_csv(out, r.aggregates);
  }
  {
    auto out = detail::open_output(base / "plot_coverage.csv");
    write_plot_csv(out, r.aggregates, PlotMetric::coverage);
  }
  auto out = detail::open_output(base / "plot_size.csv");
  write_plot_csv(out, r.aggregates, PlotMetric::size);
}

inline void write_bounds_outputs(const std::string& dir, const ExperimentConfig& c,
                                 const BoundsOutcome& b) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  detail::open_output(base / "manifest.json") << manifest(c).dump(2) << '\n';
  detail::open_output(base / "bounds.json") << b.json.dump(2) << '\n';
}

}  // namespace rcp::harness
