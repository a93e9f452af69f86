#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "relaynet/harness.hpp"

using namespace relaynet;

int main(int argc, char** argv) {
  CLI::App app{"MIMO relay transceiver design and Monte-Carlo simulation"};
  app.require_subcommand(1);
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Run a source-power sweep and write a CSV");

  std::string config_path, experiment = "mse", mode_name, algorithms = "naf,simplified,iterative", ps = "0:5:20", out;
  int trials = 50, workers = 1;
  std::uint64_t seed = 1;
  long bits = 0;
  int max_iters = 30;
  double tol = 1e-3;
  bool dump = false;
  sim_cmd->add_option("--config", config_path, "System configuration file")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--experiment", experiment, "mse, ber or convergence")
      ->check(CLI::IsMember({"mse", "ber", "convergence"}));
  sim_cmd->add_option("--mode", mode_name, "oneway or twoway (overrides the config file)")
      ->check(CLI::IsMember({"oneway", "twoway"}));
  sim_cmd->add_option("--algorithms", algorithms, "Comma list of iterative, simplified, naf");
  sim_cmd->add_option("--ps-db", ps, "Source power axis start:step:stop in dB");
  sim_cmd->add_option("--trials", trials, "Channel realizations per point")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", seed, "Base seed");
  sim_cmd->add_option("--out", out, "Output CSV path")->required();
  sim_cmd->add_option("--workers", workers, "Concurrent trials")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--bits", bits, "Bits per transmitter and trial (ber)");
  sim_cmd->add_option("--max-iters", max_iters, "Pass limit of the iterative designs")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--tol", tol, "Convergence tolerance of the iterative designs");
  sim_cmd->add_flag("--dump-subproblems", dump, "Write every conic program next to the CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    SystemConfig cfg = load_config_file(config_path);
    if (!mode_name.empty()) {
      cfg.mode = parse_mode(mode_name);
      cfg.validate();
    }
    const sim::Experiment e = sim::parse_experiment(experiment);
    sim::HarnessOptions opt;
    opt.workers = workers;
    opt.bits_per_trial = bits;
    opt.iterate.max_iters = max_iters;
    opt.iterate.tol = tol;
    if (dump) opt.dump_dir = out + ".subproblems";
    const sim::SweepResult res = sim::run_experiment(e, cfg, sim::parse_algorithms(algorithms, cfg.mode),
                                                     sim::parse_range(ps), trials, seed, opt);
    sim::emit_csv(res, out);
    const int failures = res.total_failures();
    if (failures > 0) {
      std::fprintf(stderr, "%d of %zu designs failed\n", failures, res.records.size());
      for (const sim::TrialRecord& r : res.records)
        if (r.failed)
          std::fprintf(stderr, "  trial %d %s at %g dB: %s\n", r.trial, sim::to_string(r.algorithm), r.p_s_db,
                       r.error.c_str());
    }
    if (res.warning()) {
      std::fprintf(stderr, "warning: more than 5%% of the designs failed\n");
      return 2;
    }
    return 0;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
}
