#pragma once

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bnbp/commands.hpp"

namespace bnbp::cli {

inline void add_model_flags(CLI::App* sub, commands::ModelFlags& m) {
  sub->add_option("--r", m.r, "count parameter r")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--c", m.c, "concentration c")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--mass-T", m.T, "mass T")->capture_default_str()->check(CLI::PositiveNumber);
}

/// Parses argv and runs one subcommand. Returns the process exit status.
inline int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Beta negative binomial process toolkit", "bnbp"};
  app.require_subcommand(1);

  commands::SimulateConfig sim;
  auto* simulate = app.add_subcommand("simulate", "simulate feature arrays");
  add_model_flags(simulate, sim.model);
  simulate->add_option("--n", sim.n, "rows per array")->required();
  simulate->add_option("--reps", sim.reps, "number of arrays")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "random seed")->required();
  simulate->add_option("--method", sim.method, "sequential, truncated or finitary")
      ->capture_default_str()
      ->check(CLI::IsMember({"sequential", "truncated", "finitary"}));
  simulate->add_option("--epsilon", sim.epsilon, "weight cutoff of the truncated construction")
      ->capture_default_str();
  simulate->add_option("--out", sim.out, "output file (default stdout)");

  commands::PmfConfig pmf;
  auto* pmf_cmd = app.add_subcommand("pmf", "log p.m.f. of structure and array records");
  add_model_flags(pmf_cmd, pmf.model);
  pmf_cmd->add_option("--in", pmf.in, "JSON-lines records (default stdin)");
  pmf_cmd->add_option("--out", pmf.out, "output file (default stdout)");

  commands::SampleConfig smp;
  auto* sample = app.add_subcommand("sample", "i.i.d. draws from the count distributions");
  sample->add_option("--dist", smp.dist, "digamma, bnb or nb")
      ->capture_default_str()
      ->check(CLI::IsMember({"digamma", "bnb", "nb"}));
  sample->add_option("--r", smp.r, "r")->capture_default_str()->check(CLI::PositiveNumber);
  sample->add_option("--theta", smp.theta, "digamma theta")->capture_default_str()->check(CLI::PositiveNumber);
  sample->add_option("--alpha", smp.alpha, "BNB alpha")->capture_default_str()->check(CLI::PositiveNumber);
  sample->add_option("--beta", smp.beta, "BNB beta")->capture_default_str()->check(CLI::PositiveNumber);
  sample->add_option("--p", smp.p, "NB success probability")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sample->add_option("--reps", smp.reps, "number of draws")->capture_default_str();
  sample->add_option("--seed", smp.seed, "random seed")->required();
  sample->add_option("--out", smp.out, "output file (default stdout)");

  commands::InferConfig inf;
  auto* infer = app.add_subcommand("infer", "MCMC for the Poisson factor model");
  add_model_flags(infer, inf.model);
  infer->add_option("--in", inf.in, "count matrix, one whitespace-separated row per line");
  infer->add_flag("--synthetic", inf.synthetic, "generate (W, theta, y) forward instead of reading --in");
  infer->add_flag("--geweke", inf.geweke, "run the forward vs successive-conditional check");
  infer->add_option("--n", inf.n, "rows (synthetic and Geweke modes)");
  infer->add_option("--V", inf.V, "columns (synthetic and Geweke modes)");
  infer->add_option("--sweeps", inf.sweeps, "number of sweeps")->capture_default_str();
  infer->add_option("--thin", inf.thin, "keep every thin-th sweep")->capture_default_str()->check(CLI::PositiveNumber);
  infer->add_option("--seed", inf.seed, "random seed")->required();
  infer->add_option("--out", inf.out, "chain records (default stdout)");
  infer->add_option("--truth", inf.truth, "ground truth file in synthetic mode");
  infer->add_option("--c-prior", inf.c_prior, "fixed, gamma:a,b or lognormal:mu,sigma (default gamma:1,1)");
  infer->add_option("--r-prior", inf.r_prior, "fixed, gamma:a,b or lognormal:mu,sigma (default gamma:1,1)");
  infer->add_option("--T-alpha", inf.T_alpha, "gamma prior shape of T (default 1)");
  infer->add_option("--T-beta", inf.T_beta, "gamma prior rate of T (default 1)");
  infer->add_flag("--fix-T", inf.fix_T, "keep T at --mass-T");
  infer->add_option("--theta-shape", inf.theta_shape, "gamma prior shape of theta")->capture_default_str();
  infer->add_option("--theta-rate", inf.theta_rate, "gamma prior rate of theta")->capture_default_str();
  infer->add_flag("--keep-state", inf.keep_state, "attach W and theta to every record");

  commands::ValidateConfig val;
  auto* validate = app.add_subcommand("validate", "run verification suites");
  validate->add_option("--suite", val.suite, "all, none, or comma-separated suite names")->capture_default_str();
  validate->add_option("--seed", val.seed, "random seed")->required();
  validate->add_option("--out", val.out, "report file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*simulate) return commands::cmd_simulate(sim, out);
    if (*pmf_cmd) return commands::cmd_pmf(pmf, in, out);
    if (*sample) return commands::cmd_sample(smp, out);
    if (*infer) return commands::cmd_infer(inf, in, out);
    if (*validate) return commands::cmd_validate(val, out, err);
  } catch (const std::exception& e) {
    err << "bnbp: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace bnbp::cli
