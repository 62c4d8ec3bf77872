#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rcp/harness.hpp"

using namespace rcp;
using namespace rcp::harness;

namespace {

ExperimentConfig small_classification(ExperimentKind kind) {
  auto c = default_config(kind);
  c.n_train = c.n_calibration = c.n_test = 300;
  c.repetitions = 3;
  c.training.iterations = 200;
  c.aps_randomize = true;
  return c;
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("rcp_harness_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, DefaultsAndValidation) {
  const auto r = default_config(ExperimentKind::regression_ablation);
  EXPECT_EQ(r.sigma2.size(), 6u);
  EXPECT_EQ(r.repetitions, 50u);
  EXPECT_EQ(default_config(ExperimentKind::regression_ablation, true).repetitions, 100u);
  EXPECT_EQ(default_config(ExperimentKind::classification_table, true).n_calibration, 10000u);
  EXPECT_NO_THROW(validate(r));

  auto bad = default_config(ExperimentKind::classification_table);
  bad.epsilon = {0.5};
  EXPECT_THROW(validate(bad), InputError);
  bad = default_config(ExperimentKind::regression_ablation);
  bad.epsilon = {0.1, 0.2};
  EXPECT_THROW(validate(bad), InputError);
  bad = default_config(ExperimentKind::ingest_run);
  EXPECT_THROW(validate(bad), InputError);
  bad = default_config(ExperimentKind::classification_table);
  bad.datasets = {"mnist"};
  EXPECT_THROW(validate(bad), InputError);
}

TEST(Config, JsonOverridesAndRoundTrip) {
  const auto j = nlohmann::json::parse(
      R"({"n": 123, "alpha": 0.2, "epsilon": [0.1, 0.3], "repetitions": 4, "master_seed": 9,
          "crcp_correction": "zero", "datasets": ["logistic"]})");
  const auto c = apply_json(default_config(ExperimentKind::epsilon_ablation), j);
  EXPECT_EQ(c.n_train, 123u);
  EXPECT_EQ(c.n_test, 123u);
  EXPECT_EQ(c.alpha, 0.2);
  EXPECT_EQ(c.epsilon, (std::vector<double>{0.1, 0.3}));
  EXPECT_EQ(c.repetitions, 4u);
  EXPECT_EQ(c.master_seed, 9u);
  EXPECT_EQ(c.crcp_correction, Correction::Zero);
  const auto again = apply_json(default_config(ExperimentKind::epsilon_ablation), to_json(c));
  EXPECT_EQ(to_json(again), to_json(c));
  EXPECT_THROW(apply_json(c, nlohmann::json::parse(R"({"alpha": "x"})")), InputError);
  EXPECT_THROW(parse_correction("bogus"), InputError);
}

TEST(Aggregate, MatchesRecomputation) {
  auto c = small_classification(ExperimentKind::classification_table);
  const auto r = run_classification_table(c);
  ASSERT_EQ(r.aggregates.size(), 4u);
  for (const auto& a : r.aggregates) {
    std::vector<double> cov, size;
    for (const auto& rec : r.records) {
      if (rec.cell == a.cell && rec.grid_value == a.grid_value && rec.method == a.method) {
        cov.push_back(rec.coverage);
        size.push_back(rec.mean_size);
      }
    }
    ASSERT_EQ(cov.size(), a.count);
    double m = 0, s = 0;
    for (double x : cov) m += x / cov.size();
    for (double x : cov) s += (x - m) * (x - m) / (cov.size() - 1);
    EXPECT_NEAR(a.coverage_mean, m, 1e-12);
    EXPECT_NEAR(a.coverage_stdev, std::sqrt(s), 1e-12);
    double ms = 0;
    for (double x : size) ms += x / size.size();
    EXPECT_NEAR(a.size_mean, ms, 1e-12);
  }
}

TEST(Determinism, IdenticalConfigGivesIdenticalJson) {
  const auto c = small_classification(ExperimentKind::classification_table);
  const auto a = to_json(run_classification_table(c)).dump();
  const auto b = to_json(run_classification_table(c)).dump();
  EXPECT_EQ(a, b);
  auto threaded = c;
  threaded.workers = 3;
  EXPECT_EQ(to_json(run_classification_table(threaded)).dump(), a);
  auto other = c;
  other.master_seed = 1;
  EXPECT_NE(to_json(run_classification_table(other)).dump(), a);
}

TEST(Reduction, ZeroEpsilonMakesMethodsIdentical) {
  auto c = small_classification(ExperimentKind::epsilon_ablation);
  c.epsilon = {0.0};
  c.datasets = {"logistic", "hypercube"};
  const auto r = run_epsilon_ablation(c);
  ASSERT_EQ(r.records.size() % 2, 0u);
  for (std::size_t k = 0; k < r.records.size(); k += 2) {
    const auto& cp = r.records[k];
    const auto& crcp = r.records[k + 1];
    EXPECT_EQ(cp.method, Method::CP);
    EXPECT_EQ(crcp.method, Method::CRCP);
    EXPECT_EQ(cp.threshold_index, crcp.threshold_index);
    EXPECT_EQ(cp.q_hat, crcp.q_hat);
    EXPECT_EQ(cp.coverage, crcp.coverage);
    EXPECT_EQ(cp.mean_size, crcp.mean_size);
    EXPECT_EQ(crcp.correction, 0.0);
  }
}

TEST(Regression, SmallSweepProducesOneRecordPerCell) {
  auto c = default_config(ExperimentKind::regression_ablation);
  c.n_train = c.n_calibration = c.n_test = 200;
  c.repetitions = 4;
  c.sigma2 = {1.0, 3.0};
  const auto r = run_regression_ablation(c);
  EXPECT_EQ(r.records.size(), 8u);
  ASSERT_EQ(r.aggregates.size(), 2u);
  EXPECT_EQ(r.aggregates[0].cell, "regression");
  EXPECT_EQ(r.aggregates[1].grid_value, 3.0);
  EXPECT_TRUE(r.metadata.contains("beta"));
}

TEST(Ingest, ReproducesInMemoryRepetitions) {
  const auto dir = scratch("ingest_equivalence");
  auto c = small_classification(ExperimentKind::classification_table);
  c.dump_scores_dir = dir.string();
  const auto mem = run_classification_table(c);
  for (const auto& rec : mem.records) {
    auto ic = default_config(ExperimentKind::ingest_run);
    const auto stem = dump_stem(rec.cell, rec.grid_value, rec.repetition);
    const auto side = load_sidecar((dir / (stem + "_sidecar.json")).string());
    ic.calibration_file = side.calibration;
    ic.test_file = side.test;
    ic.noise_model_file = side.noise_model;
    ic.master_seed = rec.seed;
    ic.aps_randomize = c.aps_randomize;
    ic.alpha = c.alpha;
    const auto ing = run_ingest(ic);
    ASSERT_EQ(ing.records.size(), 2u);
    const auto& match = ing.records[rec.method == Method::CP ? 0 : 1];
    EXPECT_EQ(match.method, rec.method);
    EXPECT_EQ(match.coverage, rec.coverage);
    EXPECT_EQ(match.mean_size, rec.mean_size);
    EXPECT_EQ(match.threshold_index, rec.threshold_index);
    EXPECT_EQ(match.q_hat, rec.q_hat);
  }
  std::filesystem::remove_all(dir);
}

TEST(Ingest, SubsampleTooLargeAndKMismatch) {
  const auto dir = scratch("ingest_errors");
  {
    std::ofstream(dir / "cal.csv") << "p_1,p_2,label\n0.6,0.4,1\n0.3,0.7,2\n";
    std::ofstream(dir / "test.csv") << "p_1,p_2,label\n0.6,0.4,1\n";
    std::ofstream(dir / "noise.json") << R"({"K":2,"epsilon":0.1,"kind":"uniform"})";
    std::ofstream(dir / "noise3.json") << R"({"K":3,"epsilon":0.1,"kind":"uniform"})";
  }
  auto c = default_config(ExperimentKind::ingest_run);
  c.calibration_file = (dir / "cal.csv").string();
  c.test_file = (dir / "test.csv").string();
  c.noise_model_file = (dir / "noise.json").string();
  EXPECT_NO_THROW(run_ingest(c));
  auto big = c;
  big.subsample_calibration = 3;
  EXPECT_THROW(run_ingest(big), InputError);
  auto mismatch = c;
  mismatch.noise_model_file = (dir / "noise3.json").string();
  EXPECT_THROW(run_ingest(mismatch), InputError);
  auto sub = c;
  sub.subsample_calibration = 1;
  sub.repetitions = 5;
  EXPECT_EQ(run_ingest(sub).records.size(), 10u);
  std::filesystem::remove_all(dir);
}

TEST(Ingest, ZeroEpsilonNoiseModelGivesIdenticalMethods) {
  const auto dir = scratch("ingest_zero");
  {
    std::ofstream cal(dir / "cal.csv");
    cal << "p_1,p_2,p_3,label\n" << std::setprecision(17);
    Rng rng = make_rng(1, Stream::kData);
    for (int r = 0; r < 100; ++r) {
      const double a = uniform01(rng), b = (1 - a) * uniform01(rng);
      cal << a << ',' << b << ',' << 1 - a - b << ',' << (r % 3 + 1) << '\n';
    }
    cal.close();
    std::filesystem::copy_file(dir / "cal.csv", dir / "test.csv");
    std::ofstream(dir / "noise.json") << R"({"K":3,"epsilon":0,"kind":"uniform"})";
  }
  auto c = default_config(ExperimentKind::ingest_run);
  c.calibration_file = (dir / "cal.csv").string();
  c.test_file = (dir / "test.csv").string();
  c.noise_model_file = (dir / "noise.json").string();
  const auto r = run_ingest(c);
  EXPECT_EQ(r.records[0].threshold_index, r.records[1].threshold_index);
  EXPECT_EQ(r.records[0].coverage, r.records[1].coverage);
  std::filesystem::remove_all(dir);
}

TEST(PartialAbort, KeepsFinishedPrefix) {
  auto task = [](std::size_t idx) -> std::vector<RepetitionRecord> {
    if (idx == 3) throw TrainingError("diverged");
    RepetitionRecord r;
    r.cell = "x";
    r.repetition = idx;
    r.coverage = 0.5;
    return {r};
  };
  for (std::size_t workers : {1u, 4u}) {
    try {
      harness::detail::collect(ExperimentKind::classification_table, 8, workers, task, {});
      FAIL() << "expected RunAborted";
    } catch (const RunAborted& e) {
      EXPECT_EQ(e.exit_code(), 2);
      EXPECT_FALSE(e.partial().complete);
      ASSERT_EQ(e.partial().records.size(), 3u);
      for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(e.partial().records[k].repetition, k);
      EXPECT_NE(e.partial().error.find("task 3"), std::string::npos);
    }
  }
  auto input_task = [](std::size_t) -> std::vector<RepetitionRecord> {
    throw InputError("bad");
  };
  try {
    harness::detail::collect(ExperimentKind::classification_table, 2, 1, input_task, {});
  } catch (const RunAborted& e) {
    EXPECT_EQ(e.exit_code(), 1);
  }
}

TEST(Outputs, FilesAreWrittenWithExpectedHeaders) {
  const auto dir = scratch("outputs");
  auto c = small_classification(ExperimentKind::classification_table);
  c.repetitions = 2;
  const auto r = run_classification_table(c);
  write_outputs(dir.string(), c, r);
  for (const char* f : {"manifest.json", "result.json", "records.csv", "aggregates.csv",
                        "plot_coverage.csv", "plot_size.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream rec(dir / "records.csv");
  std::string header;
  std::getline(rec, header);
  EXPECT_EQ(header.rfind("cell,grid_value,method,repetition,seed,coverage", 0), 0u);
  std::ifstream plot(dir / "plot_coverage.csv");
  std::getline(plot, header);
  EXPECT_EQ(header, "grid_value,method,mean,stdev");
  std::string line;
  std::getline(plot, line);
  EXPECT_EQ(line.rfind("0.2,logistic:CP,", 0), 0u);
  const auto manifest = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
  EXPECT_EQ(manifest["tool"], "rcp");
  EXPECT_EQ(manifest["config"]["master_seed"], 0);
  std::filesystem::remove_all(dir);
}

TEST(Bounds, DefaultReport) {
  auto c = default_config(ExperimentKind::bounds_report);
  c.repetitions = 300;
  const auto b = run_bounds_report(c);
  EXPECT_GT(b.report.lower_exact, 0.9);
  EXPECT_EQ(b.regime, "over_coverage");
  ASSERT_TRUE(b.crcp);
  EXPECT_TRUE(b.json["simulation_within_bounds"].get<bool>());
  EXPECT_TRUE(b.json["bounds"]["raw"]["lower_tv"].is_null());
}

TEST(Bounds, TenThousandPointCrcpBoundAndEmpiricalTv) {
  auto c = default_config(ExperimentKind::bounds_report);
  c.repetitions = 50;
  c.bounds = nlohmann::json::parse(
      R"({"clean": {"kind": "empirical", "values": [0, 1, 2, 3]},
          "contaminant": {"kind": "empirical", "values": [2, 3, 4, 5]},
          "epsilon": 0.2, "crcp_n": 10000})");
  const auto b = run_bounds_report(c);
  ASSERT_TRUE(b.crcp);
  EXPECT_NEAR(b.crcp->B, 0.015853, 1e-5);
  ASSERT_TRUE(b.report.lower_tv);
  EXPECT_NEAR(*b.report.lower_tv, 0.9 - 2 * 0.2 * 0.5, 1e-12);
  c.bounds = nlohmann::json::parse(R"({"clean": {"kind": "cauchy"}})");
  EXPECT_THROW(run_bounds_report(c), InputError);
}

TEST(Bounds, ZeroEpsilonCollapsesToExchangeableSandwich) {
  auto c = default_config(ExperimentKind::bounds_report);
  c.repetitions = 20;
  c.bounds = nlohmann::json::parse(R"({"epsilon": 0.0, "n": 99})");
  const auto b = run_bounds_report(c);
  EXPECT_DOUBLE_EQ(b.report.lower_exact, 0.9);
  EXPECT_DOUBLE_EQ(b.report.upper_exact, 0.91);
  ASSERT_TRUE(b.crcp);
  EXPECT_EQ(b.crcp->B, 0.0);
}
