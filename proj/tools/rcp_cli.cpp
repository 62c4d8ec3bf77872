// rcp: experiment runner for conformal prediction under contamination.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rcp/harness.hpp"

namespace {

using rcp::harness::ExperimentConfig;
using rcp::harness::ExperimentKind;

struct SharedFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<double> alpha;
  std::string out;
  bool paper_scale = false;
  bool jitter = false;
  bool aps_randomize = false;
  std::optional<std::string> crcp_c;
  std::optional<std::size_t> workers;
  // kind-specific
  std::optional<std::size_t> n;
  std::string dump_scores;
  std::string calibration, test, noise_model, sidecar;
  std::optional<std::size_t> subsample_calibration, subsample_test;
  std::string bounds_spec;
  std::optional<std::string> sweep;
};

void add_shared(CLI::App* cmd, SharedFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--reps", f.reps, "number of repetitions");
  cmd->add_option("--alpha", f.alpha, "miscoverage level");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--paper-scale", f.paper_scale, "full sample sizes");
  cmd->add_flag("--jitter", f.jitter, "break score ties with tiny uniform noise");
  cmd->add_flag("--aps-randomize", f.aps_randomize, "randomized APS scores");
  cmd->add_option("--crcp-c", f.crcp_c, "CRCP correction: theorem or zero")
      ->check(CLI::IsMember({"theorem", "zero"}));
  cmd->add_option("--workers", f.workers, "worker threads");
}

ExperimentConfig build_config(ExperimentKind kind, const SharedFlags& f) {
  auto c = rcp::harness::default_config(kind, f.paper_scale);
  if (!f.config.empty()) c = rcp::harness::apply_json(c, rcp::harness::load_json_file(f.config));
  if (f.seed) c.master_seed = *f.seed;
  if (f.reps) c.repetitions = *f.reps;
  if (f.alpha) c.alpha = *f.alpha;
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.jitter) c.jitter = true;
  if (f.aps_randomize) c.aps_randomize = true;
  if (f.crcp_c) c.crcp_correction = rcp::harness::parse_correction(*f.crcp_c);
  if (f.workers) c.workers = *f.workers;
  if (f.n) c.n_train = c.n_calibration = c.n_test = *f.n;
  if (!f.dump_scores.empty()) c.dump_scores_dir = f.dump_scores;
  if (f.sweep) {
    c.sweep = *f.sweep;
    if (c.sweep == "epsilon" && f.config.empty()) {
      c.epsilon = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
      c.sigma2 = {3.0};
    }
  }
  if (!f.sidecar.empty()) {
    const auto s = rcp::load_sidecar(f.sidecar);
    c.calibration_file = s.calibration;
    c.test_file = s.test;
    c.noise_model_file = s.noise_model;
  }
  if (!f.calibration.empty()) c.calibration_file = f.calibration;
  if (!f.test.empty()) c.test_file = f.test;
  if (!f.noise_model.empty()) c.noise_model_file = f.noise_model;
  if (f.subsample_calibration) c.subsample_calibration = f.subsample_calibration;
  if (f.subsample_test) c.subsample_test = f.subsample_test;
  if (!f.bounds_spec.empty()) c.bounds = rcp::harness::load_json_file(f.bounds_spec);
  return c;
}

int run(ExperimentKind kind, const SharedFlags& f) {
  const auto c = build_config(kind, f);
  if (kind == ExperimentKind::bounds_report) {
    rcp::harness::validate(c);
    const auto b = rcp::harness::run_bounds_report(c);
    if (!c.out_dir.empty()) rcp::harness::write_bounds_outputs(c.out_dir, c, b);
    std::cout << b.json.dump(2) << '\n';
    return 0;
  }
  try {
    const auto r = rcp::harness::run_experiment(c);
    if (!c.out_dir.empty()) rcp::harness::write_outputs(c.out_dir, c, r);
    rcp::harness::write_aggregates_csv(std::cout, r.aggregates);
    return 0;
  } catch (const rcp::harness::RunAborted& e) {
    if (!c.out_dir.empty()) rcp::harness::write_outputs(c.out_dir, c, e.partial());
    std::cerr << "error: " << e.what() << " (" << e.partial().records.size()
              << " records saved)\n";
    return e.exit_code();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal prediction under contamination: experiments and bound reports"};
  app.require_subcommand(1);

  SharedFlags f;
  auto* regress = app.add_subcommand("regress-ablation", "coverage vs sigma2 or epsilon");
  add_shared(regress, f);
  regress->add_option("--n", f.n, "train = calibration = test size");
  regress->add_option("--sweep", f.sweep, "sigma2 or epsilon")
      ->check(CLI::IsMember({"sigma2", "epsilon"}));

  auto* table = app.add_subcommand("class-table", "CP vs CRCP on Logistic and Hypercube");
  add_shared(table, f);
  table->add_option("--n", f.n, "train = calibration = test size");
  table->add_option("--dump-scores", f.dump_scores, "write per-repetition score files here");

  auto* eps = app.add_subcommand("eps-ablation", "CP vs CRCP across epsilon");
  add_shared(eps, f);
  eps->add_option("--n", f.n, "train = calibration = test size");
  eps->add_option("--dump-scores", f.dump_scores, "write per-repetition score files here");

  auto* bounds = app.add_subcommand("bounds", "bound report for a pair of score laws");
  add_shared(bounds, f);
  bounds->add_option("--spec", f.bounds_spec, "JSON bounds spec");

  auto* ingest = app.add_subcommand("ingest", "CP vs CRCP on precomputed score files");
  add_shared(ingest, f);
  ingest->add_option("--calibration", f.calibration, "noisy-label calibration CSV");
  ingest->add_option("--test", f.test, "clean-label test CSV");
  ingest->add_option("--noise-model", f.noise_model, "noise model JSON");
  ingest->add_option("--sidecar", f.sidecar, "JSON naming the three files");
  ingest->add_option("--subsample-calibration", f.subsample_calibration, "calibration rows");
  ingest->add_option("--subsample-test", f.subsample_test, "test rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (regress->parsed()) return run(ExperimentKind::regression_ablation, f);
    if (table->parsed()) return run(ExperimentKind::classification_table, f);
    if (eps->parsed()) return run(ExperimentKind::epsilon_ablation, f);
    if (bounds->parsed()) return run(ExperimentKind::bounds_report, f);
    return run(ExperimentKind::ingest_run, f);
  } catch (const rcp::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
