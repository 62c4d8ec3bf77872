#pragma once

// Per-repetition pipelines and the result record types they produce.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rcp/conformal.hpp"
#include "rcp/crcp.hpp"
#include "rcp/error.hpp"
#include "rcp/harness/config.hpp"
#include "rcp/ingest.hpp"
#include "rcp/noise_model.hpp"
#include "rcp/random.hpp"
#include "rcp/synth.hpp"

namespace rcp::harness {

struct RepetitionRecord {
  std::string cell;         // dataset name, "regression" or "ingest"
  double grid_value = 0.0;  // epsilon or sigma2 of this cell
  Method method = Method::CP;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  double coverage = 0.0;
  double mean_size = 0.0;
  std::optional<std::size_t> threshold_index;  // empty: infinite threshold
  double q_hat = std::numeric_limits<double>::infinity();
  double correction = 0.0;
  std::size_t n_infinite = 0;
  bool resampled = false;
};

struct AggregateRecord {
  std::string cell;
  double grid_value = 0.0;
  Method method = Method::CP;
  std::size_t count = 0;
  double coverage_mean = 0.0;
  double coverage_stdev = 0.0;
  double size_mean = 0.0;
  double size_stdev = 0.0;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::classification_table;
  std::vector<RepetitionRecord> records;  // cell-major, then repetition, then method
  std::vector<AggregateRecord> aggregates;
  nlohmann::json metadata = nlohmann::json::object();
  bool complete = true;
  std::string error;
};

// Thrown when a repetition fails; carries every record finished before it.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(const std::string& what, ExperimentResult partial, int exit_code)
      : std::runtime_error(what), partial_(std::move(partial)), exit_code_(exit_code) {}
  const ExperimentResult& partial() const noexcept { return partial_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  ExperimentResult partial_;
  int exit_code_;
};

inline std::uint64_t repetition_seed(std::uint64_t master_seed, std::size_t repetition) {
  return master_seed + static_cast<std::uint64_t>(repetition);
}

// ============================================================================
// Shared classification scoring: probabilities (or scores) -> CP and CRCP records
// ============================================================================

struct ScoringOptions {
  double alpha = 0.1;
  bool aps_randomize = false;
  bool jitter = false;
  Correction correction = Correction::Theorem;
};

struct MethodOutcome {
  Method method = Method::CP;
  ConformalThreshold threshold;
  EvaluationSummary summary;
  double correction = 0.0;
};

inline EvaluationSummary evaluate_sets(const CalibrationMatrix& test, const ConformalThreshold& t) {
  std::vector<LabelSet> sets;
  sets.reserve(test.n());
  for (std::size_t r = 0; r < test.n(); ++r) sets.push_back(predict_set_classification(test.row(r), t));
  return evaluate(std::span<const LabelSet>(sets), test.labels());
}

// Draw order on `scoring`: calibration APS draws, test APS draws, then jitter.
// The in-memory pipeline and file ingestion both go through here.
inline std::pair<MethodOutcome, MethodOutcome> score_and_compare(const ScoreFile& calibration,
                                                                 const ScoreFile& test,
                                                                 const NoiseModel& model,
                                                                 const ScoringOptions& opts,
                                                                 Rng& scoring) {
  rcp::detail::require(calibration.K == model.K(),
                  "calibration file has K=" + std::to_string(calibration.K) +
                      " but the noise model has K=" + std::to_string(model.K()));
  rcp::detail::require(test.K == model.K(), "test file has K=" + std::to_string(test.K) +
                                           " but the noise model has K=" +
                                           std::to_string(model.K()));
  const auto cal = scores_from_probabilities(calibration, opts.aps_randomize, scoring);
  const auto tst = scores_from_probabilities(test, opts.aps_randomize, scoring);
  auto observed = cal.observed_scores();
  if (opts.jitter) observed = jitter_scores(observed, scoring);

  MethodOutcome cp;
  cp.method = Method::CP;
  cp.threshold = conformal_quantile(observed, opts.alpha);
  cp.summary = evaluate_sets(tst, cp.threshold);

  MethodOutcome crcp;
  crcp.method = Method::CRCP;
  crcp.correction = correction_value(model, cal.n(), opts.correction);
  crcp.threshold = crcp_select(cal, model, opts.alpha, observed, crcp.correction).threshold;
  crcp.summary = evaluate_sets(tst, crcp.threshold);
  return {cp, crcp};
}

inline RepetitionRecord make_record(const std::string& cell, double grid_value,
                                    std::size_t repetition, std::uint64_t seed,
                                    const MethodOutcome& m) {
  RepetitionRecord r;
  r.cell = cell;
  r.grid_value = grid_value;
  r.method = m.method;
  r.repetition = repetition;
  r.seed = seed;
  r.coverage = m.summary.coverage;
  r.mean_size = m.summary.mean_size;
  r.threshold_index = m.threshold.index;
  r.q_hat = m.threshold.q_hat;
  r.correction = m.correction;
  r.n_infinite = m.summary.n_infinite;
  return r;
}

// ============================================================================
// Classification repetition (Logistic / Hypercube, LR, uniform label noise)
// ============================================================================

struct ClassificationSource {
  std::string name;
  std::optional<LogisticGenerator> logistic;
  std::optional<HypercubeGenerator> hypercube;

  ClassificationData sample(std::size_t n, Rng& rng) const {
    return logistic ? sample_logistic(*logistic, n, rng) : sample_hypercube(*hypercube, n, rng);
  }
  std::size_t K() const { return logistic ? logistic->K : hypercube->K; }
};

inline ClassificationSource make_source(const std::string& name, const ExperimentConfig& c) {
  ClassificationSource s;
  s.name = name;
  if (name == "logistic") {
    s.logistic = make_logistic_generator(c.master_seed, c.p, c.K);
  } else if (name == "hypercube") {
    s.hypercube = make_hypercube_generator(c.master_seed, c.K, 5, 2.0, 5, c.hypercube_clusters_per_class);
  } else {
    throw InputError("unknown dataset '" + name + "'");
  }
  return s;
}

inline std::string format_grid_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// File stem used by --dump-scores for one (dataset, epsilon, repetition).
inline std::string dump_stem(const std::string& dataset, double epsilon, std::size_t rep) {
  return dataset + "_eps" + format_grid_value(epsilon) + "_rep" + std::to_string(rep);
}

inline void dump_repetition(const std::string& dir, const std::string& stem,
                            const ScoreFile& calibration, const ScoreFile& test,
                            const NoiseModel& model) {
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir);
  write_score_file((base / (stem + "_calibration.csv")).string(), calibration);
  write_score_file((base / (stem + "_test.csv")).string(), test);
  {
    std::ofstream out(base / (stem + "_noise.json"));
    out << to_json(model).dump(2) << '\n';
  }
  nlohmann::json sidecar;
  sidecar["calibration"] = stem + "_calibration.csv";
  sidecar["test"] = stem + "_test.csv";
  sidecar["noise_model"] = stem + "_noise.json";
  std::ofstream out(base / (stem + "_sidecar.json"));
  out << sidecar.dump(2) << '\n';
}

// One repetition: sample train/calibration/test, corrupt train and calibration
// labels, fit LR on noisy labels, score, calibrate CP and CRCP, evaluate on clean test.
inline std::vector<RepetitionRecord> run_classification_repetition(
    const ClassificationSource& source, double epsilon, std::size_t rep,
    const ExperimentConfig& c) {
  const std::uint64_t seed = repetition_seed(c.master_seed, rep);
  const auto model = uniform_noise_model(source.K(), epsilon);
  Rng data = make_rng(seed, Stream::kData);
  const auto train = source.sample(c.n_train, data);
  const auto cal = source.sample(c.n_calibration, data);
  const auto test = source.sample(c.n_test, data);

  Rng corruption = make_rng(seed, Stream::kCorruption);
  const auto noisy_train = corrupt_labels(train.y, model, corruption);
  const auto noisy_cal = corrupt_labels(cal.y, model, corruption);

  const auto clf = train_multinomial_lr(train.X, noisy_train, source.K(), c.training);
  const auto cal_file = score_file_from_probabilities(clf.predict_proba(cal.X), noisy_cal);
  const auto test_file = score_file_from_probabilities(clf.predict_proba(test.X), test.y);
  if (!c.dump_scores_dir.empty()) {
    dump_repetition(c.dump_scores_dir, dump_stem(source.name, epsilon, rep), cal_file, test_file,
                    model);
  }

  Rng scoring = make_rng(seed, Stream::kScoring);
  const ScoringOptions opts{c.alpha, c.aps_randomize, c.jitter, c.crcp_correction};
  const auto [cp, crcp] = score_and_compare(cal_file, test_file, model, opts, scoring);
  return {make_record(source.name, epsilon, rep, seed, cp),
          make_record(source.name, epsilon, rep, seed, crcp)};
}

// ============================================================================
// Regression repetition (contaminated Gaussian errors, least squares, CP)
// ============================================================================

inline RepetitionRecord run_regression_repetition(const RegressionGenerator& gen,
                                                  double grid_value, std::size_t rep,
                                                  const ExperimentConfig& c) {
  const std::uint64_t seed = repetition_seed(c.master_seed, rep);
  Rng data = make_rng(seed, Stream::kData);
  auto train = sample_regression(gen, c.n_train, false, data);
  const auto cal = sample_regression(gen, c.n_calibration, false, data);
  const auto test = sample_regression(gen, c.n_test, true, data);

  bool resampled = false;
  LinearModel fit;
  try {
    fit = fit_least_squares(train.X, train.y);
  } catch (const TrainingError&) {
    resampled = true;
    train = sample_regression(gen, c.n_train, false, data);
    fit = fit_least_squares(train.X, train.y);
  }

  std::vector<double> scores(c.n_calibration);
  for (std::size_t r = 0; r < c.n_calibration; ++r) {
    scores[r] = abs_residual_score(cal.y[r], fit.predict(cal.X.row(static_cast<Eigen::Index>(r))));
  }
  ConformalThreshold t;
  if (c.jitter) {
    Rng scoring = make_rng(seed, Stream::kScoring);
    t = conformal_quantile(scores, c.alpha, scoring);
  } else {
    t = conformal_quantile(scores, c.alpha);
  }
  std::vector<Interval> intervals;
  intervals.reserve(c.n_test);
  for (std::size_t r = 0; r < c.n_test; ++r) {
    intervals.push_back(
        predict_interval_regression(fit.predict(test.X.row(static_cast<Eigen::Index>(r))), t));
  }
  MethodOutcome m;
  m.method = Method::CP;
  m.threshold = t;
  m.summary = evaluate(std::span<const Interval>(intervals), test.y);
  auto record = make_record("regression", grid_value, rep, seed, m);
  record.resampled = resampled;
  return record;
}

// ============================================================================
// Ingest repetition (user-supplied score files)
// ============================================================================

inline ScoreFile subsample_rows(const ScoreFile& sf, std::size_t size, Rng& rng) {
  rcp::detail::require(size <= sf.n(), "subsample size " + std::to_string(size) + " exceeds the " +
                                      std::to_string(sf.n()) + " rows available");
  std::vector<std::size_t> idx(sf.n());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  for (std::size_t k = 0; k < size; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  ScoreFile out;
  out.kind = sf.kind;
  out.K = sf.K;
  out.values.reserve(size * sf.K);
  out.labels.reserve(size);
  for (std::size_t k = 0; k < size; ++k) {
    const auto row = sf.row(idx[k]);
    out.values.insert(out.values.end(), row.begin(), row.end());
    out.labels.push_back(sf.labels[idx[k]]);
  }
  return out;
}

inline std::vector<RepetitionRecord> run_ingest_repetition(const ScoreFile& calibration,
                                                           const ScoreFile& test,
                                                           const NoiseModel& model,
                                                           std::size_t rep,
                                                           const ExperimentConfig& c) {
  const std::uint64_t seed = repetition_seed(c.master_seed, rep);
  const ScoreFile* cal = &calibration;
  const ScoreFile* tst = &test;
  ScoreFile cal_sub, test_sub;
  if (c.subsample_calibration || c.subsample_test) {
    Rng sub = make_rng(seed, Stream::kSubsample);
    if (c.subsample_calibration) {
      cal_sub = subsample_rows(calibration, *c.subsample_calibration, sub);
      cal = &cal_sub;
    }
    if (c.subsample_test) {
      test_sub = subsample_rows(test, *c.subsample_test, sub);
      tst = &test_sub;
    }
  }
  Rng scoring = make_rng(seed, Stream::kScoring);
  const ScoringOptions opts{c.alpha, c.aps_randomize, c.jitter, c.crcp_correction};
  const auto [cp, crcp] = score_and_compare(*cal, *tst, model, opts, scoring);
  return {make_record("ingest", model.epsilon(), rep, seed, cp),
          make_record("ingest", model.epsilon(), rep, seed, crcp)};
}

}  // namespace rcp::harness
