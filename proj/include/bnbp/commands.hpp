#pragma once

// Subcommand implementations behind the `bnbp` executable. Each command
// validates its whole configuration first, builds its output in memory and
// writes it only on success, so a failed run leaves no partial files.

#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bnbp/distributions.hpp"
#include "bnbp/generative.hpp"
#include "bnbp/inference.hpp"
#include "bnbp/serialization.hpp"
#include "bnbp/structures.hpp"
#include "bnbp/validation.hpp"

namespace bnbp::commands {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelFlags {
  double r = 1.0;
  double c = 1.0;
  double T = 1.0;

  Hyperparams hyperparams() const { return Hyperparams(r, c, T); }
};

/// Where a command writes: a file path, or the fallback stream for "" and "-".
class Sink {
 public:
  Sink(std::string path, std::ostream& fallback) : path_(std::move(path)), fallback_(fallback) {}

  std::ostream& stream() { return buffer_; }

  void commit() {
    if (path_.empty() || path_ == "-") {
      fallback_ << buffer_.str();
      fallback_.flush();
      return;
    }
    std::ofstream f(path_, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path_ + "' for writing");
    f << buffer_.str();
    if (!f.flush()) throw std::runtime_error("write to '" + path_ + "' failed");
  }

 private:
  std::string path_;
  std::ostream& fallback_;
  std::ostringstream buffer_;
};

inline std::string read_input(const std::string& path, std::istream& fallback) {
  std::ostringstream ss;
  if (path.empty() || path == "-") {
    ss << fallback.rdbuf();
    return ss.str();
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for reading");
  ss << f.rdbuf();
  return ss.str();
}

//------------------------------------------------------------------------------
// simulate
//------------------------------------------------------------------------------

struct SimulateConfig {
  ModelFlags model;
  std::size_t n = 1;
  std::size_t reps = 1;
  std::uint64_t seed = 0;
  std::string method = "sequential";  // sequential | truncated | finitary
  double epsilon = 1e-4;
  std::string out;
};

inline void validate(const SimulateConfig& cfg) {
  (void)cfg.model.hyperparams();
  if (cfg.n == 0) throw UsageError("--n must be at least 1");
  if (cfg.method == "truncated") {
    if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw UsageError("--epsilon must lie in (0, 1)");
  } else if (cfg.method == "finitary") {
    if (cfg.n != 1) throw UsageError("the finitary draw is a single row; use --n 1");
  } else if (cfg.method != "sequential") {
    throw UsageError("unknown --method '" + cfg.method + "'");
  }
}

/// One replicate per line, then {"summary": {...}}. Replicate k uses
/// substream k of the seed, so output does not depend on evaluation order.
inline int cmd_simulate(const SimulateConfig& cfg, std::ostream& out) {
  validate(cfg);
  const Hyperparams hp = cfg.model.hyperparams();
  std::optional<TruncatedBetaProcess> oracle;
  if (cfg.method == "truncated") oracle.emplace(hp, cfg.epsilon);

  Sink sink(cfg.out, out);
  const RngStream root(cfg.seed);
  double kappa = 0.0, row_features = 0.0, mass = 0.0, nonzero = 0.0;
  for (std::size_t k = 0; k < cfg.reps; ++k) {
    RngStream rng = root.substream(k);
    FeatureArray w(cfg.n);
    if (cfg.method == "sequential") {
      w = nbibp_simulate(cfg.n, hp, rng);
    } else if (oracle) {
      w = oracle->simulate(cfg.n, hp.r, rng);
    } else {
      std::vector<History> cols;
      for (Count v : bnbp_sample_finitary(hp, rng).ordinary) cols.push_back(History{v});
      w = FeatureArray(1, std::move(cols));
    }
    sink.stream() << to_json(w).dump() << '\n';
    kappa += static_cast<double>(w.kappa());
    for (std::size_t i = 0; i < w.n(); ++i) row_features += static_cast<double>(w.row_features(i));
    for (const auto& h : w.columns()) {
      for (Count v : h.entries()) nonzero += v > 0 ? 1.0 : 0.0;
    }
    mass += static_cast<double>(w.total());
  }
  nlohmann::json summary = {{"reps", cfg.reps}, {"n", cfg.n}, {"method", cfg.method}};
  const auto reps = static_cast<double>(cfg.reps);
  summary["mean_kappa"] = cfg.reps ? nlohmann::json(kappa / reps) : nlohmann::json();
  summary["mean_row_features"] =
      cfg.reps ? nlohmann::json(row_features / (reps * static_cast<double>(cfg.n))) : nlohmann::json();
  summary["mean_multiplicity"] = nonzero > 0 ? nlohmann::json(mass / nonzero) : nlohmann::json();
  sink.stream() << nlohmann::json{{"summary", summary}}.dump() << '\n';
  sink.commit();
  return 0;
}

//------------------------------------------------------------------------------
// pmf
//------------------------------------------------------------------------------

struct PmfConfig {
  ModelFlags model;
  std::string in;
  std::string out;
};

/// One output line per non-blank input line: the log p.m.f. of a structure
/// ("counts") or labeled array ("columns") record, or the parse error.
inline int cmd_pmf(const PmfConfig& cfg, std::istream& in, std::ostream& out) {
  const Hyperparams hp = cfg.model.hyperparams();
  const std::string text = read_input(cfg.in, in);
  Sink sink(cfg.out, out);
  std::istringstream lines(text);
  std::string line;
  std::size_t number = 0;
  bool failed = false;
  while (std::getline(lines, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec = {{"line", number}};
    try {
      const nlohmann::json j = parse_record(line);
      if (j.contains("counts")) {
        rec["kind"] = "struct";
        rec["log_pmf"] = log_pmf_struct(struct_from_json(j), hp);
      } else {
        rec["kind"] = "array";
        rec["log_pmf"] = log_pmf_array(array_from_json(j), hp);
      }
    } catch (const std::exception& e) {
      rec["error"] = e.what();
      failed = true;
    }
    sink.stream() << rec.dump() << '\n';
  }
  sink.commit();
  return failed ? 1 : 0;
}

//------------------------------------------------------------------------------
// sample
//------------------------------------------------------------------------------

struct SampleConfig {
  std::string dist = "digamma";  // digamma | bnb | nb
  double r = 1.0;
  double theta = 1.0;  // digamma
  double alpha = 1.0;  // bnb
  double beta = 1.0;   // bnb
  double p = 0.5;      // nb
  std::size_t reps = 1;
  std::uint64_t seed = 0;
  std::string out;
};

/// i.i.d. draws, one integer per line.
inline int cmd_sample(const SampleConfig& cfg, std::ostream& out) {
  std::function<Count(RngStream&)> draw;
  if (cfg.dist == "digamma") {
    const DigammaParams d(cfg.r, cfg.theta);
    draw = [d](RngStream& rng) { return digamma_sample(d, rng); };
  } else if (cfg.dist == "bnb") {
    const BnbParams b(cfg.r, cfg.alpha, cfg.beta);
    draw = [b](RngStream& rng) { return bnb_sample(b, rng); };
  } else if (cfg.dist == "nb") {
    const NbParams nb(cfg.r, cfg.p);
    draw = [nb](RngStream& rng) { return nb_sample(nb, rng); };
  } else {
    throw UsageError("unknown --dist '" + cfg.dist + "'");
  }
  Sink sink(cfg.out, out);
  RngStream rng(cfg.seed);
  for (std::size_t k = 0; k < cfg.reps; ++k) sink.stream() << draw(rng) << '\n';
  sink.commit();
  return 0;
}

//------------------------------------------------------------------------------
// infer
//------------------------------------------------------------------------------

/// "gamma:a,b", "lognormal:mu,sigma" or "fixed".
inline Hyperprior parse_hyperprior(const std::string& text) {
  if (text == "fixed") return Hyperprior::point_mass();
  const auto colon = text.find(':');
  const auto comma = text.find(',', colon == std::string::npos ? 0 : colon);
  if (colon == std::string::npos || comma == std::string::npos) {
    throw UsageError("hyperprior must be 'fixed', 'gamma:a,b' or 'lognormal:mu,sigma', got '" + text + "'");
  }
  const std::string kind = text.substr(0, colon);
  double a = 0.0, b = 0.0;
  try {
    std::size_t used = 0;
    const std::string sa = text.substr(colon + 1, comma - colon - 1), sb = text.substr(comma + 1);
    a = std::stod(sa, &used);
    if (used != sa.size()) throw std::invalid_argument(sa);
    b = std::stod(sb, &used);
    if (used != sb.size()) throw std::invalid_argument(sb);
  } catch (const std::logic_error&) {
    throw UsageError("bad numbers in hyperprior '" + text + "'");
  }
  if (kind == "gamma") return Hyperprior::gamma(a, b);
  if (kind == "lognormal") return Hyperprior::log_normal(a, b);
  throw UsageError("unknown hyperprior kind '" + kind + "'");
}

/// Whitespace-separated count matrix, one row per line; '#' starts a comment.
inline CountMatrix parse_count_matrix(const std::string& text) {
  CountMatrix y;
  std::istringstream lines(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(lines, line)) {
    ++number;
    line = line.substr(0, line.find('#'));
    std::istringstream fields(line);
    std::vector<Count> row;
    std::string tok;
    while (fields >> tok) {
      std::size_t used = 0;
      long long v = -1;
      try {
        v = std::stoll(tok, &used);
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (used != tok.size() || v < 0) {
        throw FormatError("line " + std::to_string(number) + ": '" + tok + "' is not a non-negative count");
      }
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!y.empty() && row.size() != y.front().size()) {
      throw FormatError("line " + std::to_string(number) + ": expected " + std::to_string(y.front().size()) +
                        " counts, found " + std::to_string(row.size()));
    }
    y.push_back(std::move(row));
  }
  if (y.empty()) throw FormatError("count matrix is empty");
  return y;
}

struct InferConfig {
  ModelFlags model;  // initial r, c, T; also the generating values in synthetic mode
  std::string in;
  std::string out;
  std::string truth;  // synthetic ground truth; defaults to <out>.truth.json
  bool synthetic = false;
  bool geweke = false;
  std::size_t n = 0;  // synthetic and Geweke only
  std::size_t V = 0;
  std::size_t sweeps = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  // unset priors default to Gamma(1, 1), or to the GewekeSetup values in Geweke mode
  std::optional<std::string> c_prior;
  std::optional<std::string> r_prior;
  std::optional<double> T_alpha;
  std::optional<double> T_beta;
  bool fix_T = false;
  double theta_shape = 1.0;
  double theta_rate = 1.0;
  bool keep_state = false;
};

inline nlohmann::json record_json(const ChainRecord& r) {
  nlohmann::json j = {{"sweep", r.sweep}, {"kappa", r.kappa}, {"total", r.total}, {"T", r.T},
                      {"c", r.c},         {"r", r.r}};
  // -inf is not valid JSON; an impossible state is written as null
  j["log_joint"] = std::isfinite(r.log_joint) ? nlohmann::json(r.log_joint) : nlohmann::json();
  if (r.W) j["W"] = to_json(*r.W);
  if (r.theta) j["theta"] = *r.theta;
  return j;
}

inline int cmd_geweke(const InferConfig& cfg, std::ostream& out) {
  validation::GewekeSetup g;
  g.n = cfg.n ? cfg.n : g.n;
  g.V = cfg.V ? cfg.V : g.V;
  g.sweeps = cfg.sweeps;
  g.forward_draws = std::max<std::size_t>(cfg.sweeps, 1000);
  g.mass = {cfg.T_alpha.value_or(g.mass.alpha), cfg.T_beta.value_or(g.mass.beta)};
  if (cfg.c_prior) g.c_prior = parse_hyperprior(*cfg.c_prior);
  if (cfg.r_prior) g.r_prior = parse_hyperprior(*cfg.r_prior);
  if (g.c_prior.kind == Hyperprior::Kind::point_mass || g.r_prior.kind == Hyperprior::Kind::point_mass) {
    throw UsageError("Geweke mode needs proper priors for c and r");
  }
  if (cfg.sweeps < 100) throw UsageError("Geweke mode needs --sweeps >= 100");
  RngStream rng(cfg.seed);
  nlohmann::json m;
  const bool ok = validation::geweke(rng, m, g);
  Sink sink(cfg.out, out);
  for (const char* stat : {"kappa", "total_W", "total_y"}) {
    const auto& s = m[stat];
    sink.stream() << (s["z_mean"].get<double>() <= 3.0 ? "PASS " : "FAIL ") << stat
                  << " forward=" << s["forward_mean"].get<double>() << " chain=" << s["chain_mean"].get<double>()
                  << " z=" << s["z_mean"].get<double>() << '\n';
  }
  sink.commit();
  return ok ? 0 : 1;
}

/// Runs the sampler on a count matrix (from --in, or generated forward in
/// synthetic mode) and writes one chain record per line.
inline int cmd_infer(const InferConfig& cfg, std::istream& in, std::ostream& out) {
  if (cfg.thin == 0) throw UsageError("--thin must be at least 1");
  for (double x : {cfg.T_alpha.value_or(1.0), cfg.T_beta.value_or(1.0), cfg.theta_shape, cfg.theta_rate}) {
    if (!(x > 0.0) || !std::isfinite(x)) throw UsageError("prior parameters must be positive");
  }
  if (cfg.geweke) return cmd_geweke(cfg, out);
  const Hyperparams hp = cfg.model.hyperparams();
  const Hyperprior c_prior = parse_hyperprior(cfg.c_prior.value_or("gamma:1,1"));
  const Hyperprior r_prior = parse_hyperprior(cfg.r_prior.value_or("gamma:1,1"));
  const ThetaPrior theta_prior{cfg.theta_shape, cfg.theta_rate};
  if (cfg.synthetic == !cfg.in.empty()) throw UsageError("give exactly one of --in and --synthetic");
  std::string truth_path = cfg.truth;
  if (cfg.synthetic) {
    if (cfg.n == 0 || cfg.V == 0) throw UsageError("synthetic mode needs --n and --V");
    if (truth_path.empty()) {
      if (cfg.out.empty() || cfg.out == "-") throw UsageError("synthetic mode needs --truth when writing to stdout");
      truth_path = cfg.out + ".truth.json";
    }
  }

  const RngStream root(cfg.seed);
  CountMatrix y;
  std::optional<Sink> truth;
  if (cfg.synthetic) {
    ChainState gen{FeatureArray(cfg.n), {}, hp, {}, Hyperprior::point_mass(), Hyperprior::point_mass(),
                   root.substream(0)};
    const PoissonFactorModel prior_model(cfg.n, cfg.V, std::nullopt, theta_prior);
    sample_prior_state(gen, prior_model);
    y = prior_model.sample_data(gen.W, gen.theta, gen.rng);
    truth.emplace(truth_path, out);
    truth->stream() << nlohmann::json{{"r", hp.r}, {"c", hp.c}, {"T", hp.T}, {"W", to_json(gen.W)},
                                      {"theta", gen.theta}, {"y", y}}
                           .dump()
                    << '\n';
  } else {
    y = parse_count_matrix(read_input(cfg.in, in));
  }
  const PoissonFactorModel model(y.size(), y.front().size(), y, theta_prior);

  // one shared feature owned by every row keeps every Poisson rate positive
  ChainState s{FeatureArray(model.rows(), {History(std::vector<Count>(model.rows(), 1))}),
               {},
               hp,
               MassPrior{cfg.T_alpha.value_or(1.0), cfg.T_beta.value_or(1.0)},
               c_prior,
               r_prior,
               root.substream(1)};
  s.theta.push_back(model.sample_theta_row(s.rng));

  ChainConfig chain;
  chain.sweeps = cfg.sweeps;
  chain.thin = cfg.thin;
  chain.update_mass = !cfg.fix_T;
  chain.keep_state = cfg.keep_state;
  Sink sink(cfg.out, out);
  run_chain(model, s, chain, [&](const ChainRecord& r) { sink.stream() << record_json(r).dump() << '\n'; });
  if (truth) truth->commit();
  sink.commit();
  return 0;
}

//------------------------------------------------------------------------------
// validate
//------------------------------------------------------------------------------

struct ValidateConfig {
  std::string suite = "all";
  std::uint64_t seed = 0;
  std::string out;
};

/// Writes the JSON report; exit status 1 iff some selected suite failed.
inline int cmd_validate(const ValidateConfig& cfg, std::ostream& out, std::ostream& log) {
  const auto names = validation::select_suites(cfg.suite);
  const auto report = validation::run_validation(names, cfg.seed, [&](const validation::SuiteResult& s) {
    log << (s.passed ? "PASS " : "FAIL ") << s.name << " (" << s.seconds << " s)\n";
  });
  Sink sink(cfg.out, out);
  sink.stream() << validation::to_json(report).dump(2) << '\n';
  sink.commit();
  return report.passed() ? 0 : 1;
}

}  // namespace bnbp::commands
