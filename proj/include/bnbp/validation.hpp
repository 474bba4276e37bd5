#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <nlohmann/json.hpp>

#include "bnbp/distributions.hpp"
#include "bnbp/enumerate.hpp"
#include "bnbp/generative.hpp"
#include "bnbp/inference.hpp"
#include "bnbp/stats.hpp"
#include "bnbp/structures.hpp"

namespace bnbp::validation {

/// Outcome of one verification suite. `passed` requires both the
/// statistical checks and the runtime limit.
struct SuiteResult {
  std::string name;
  int criterion = 0;
  bool passed = false;
  double seconds = 0.0;
  double limit_seconds = 0.0;
  nlohmann::json metrics = nlohmann::json::object();
};

struct Report {
  std::uint64_t seed = 0;
  std::vector<SuiteResult> suites;

  bool passed() const {
    for (const auto& s : suites) {
      if (!s.passed) return false;
    }
    return true;
  }
};

// Report schema:
// {"seed": u64, "passed": bool,
//  "suites": [{"name": str, "criterion": int, "passed": bool, "seconds": real,
//              "limit_seconds": real, "metrics": {...}}, ...]}
inline nlohmann::json to_json(const SuiteResult& s) {
  return {{"name", s.name},       {"criterion", s.criterion},         {"passed", s.passed},
          {"seconds", s.seconds}, {"limit_seconds", s.limit_seconds}, {"metrics", s.metrics}};
}

inline nlohmann::json to_json(const Report& r) {
  nlohmann::json suites = nlohmann::json::array();
  for (const auto& s : r.suites) suites.push_back(to_json(s));
  return {{"seed", r.seed}, {"passed", r.passed()}, {"suites", suites}};
}

inline Report report_from_json(const nlohmann::json& j) {
  Report out;
  out.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& s : j.at("suites")) {
    out.suites.push_back({s.at("name").get<std::string>(), s.at("criterion").get<int>(), s.at("passed").get<bool>(),
                          s.at("seconds").get<double>(), s.at("limit_seconds").get<double>(), s.at("metrics")});
  }
  if (j.at("passed").get<bool>() != out.passed()) throw std::runtime_error("report pass flag is inconsistent");
  return out;
}

//------------------------------------------------------------------------------
// Shared helpers
//------------------------------------------------------------------------------

namespace detail {

/// Partition of the structure space at stage n: every enumerated structure
/// with probability at least min_prob gets a cell, the rest share the last.
struct CellTable {
  std::map<CombStruct, std::size_t> index;
  std::vector<double> probs;

  std::size_t cell(const CombStruct& m) const {
    const auto it = index.find(m);
    return it == index.end() ? probs.size() - 1 : it->second;
  }
};

inline CellTable structure_cells(std::size_t n, const Hyperparams& hp, double min_prob, Count max_total,
                                 Count max_kappa) {
  CellTable out;
  double covered = 0.0;
  for_each_structure(n, max_total, max_kappa, [&](const CombStruct& m) {
    const double p = std::exp(log_pmf_struct(m, hp));
    if (p >= min_prob) {
      out.index.emplace(m, out.probs.size());
      out.probs.push_back(p);
      covered += p;
    }
  });
  out.probs.push_back(std::max(0.0, 1.0 - covered));
  return out;
}

inline CombStruct permute_struct(const CombStruct& m, const std::vector<std::size_t>& perm) {
  CombStruct::Counts counts;
  for (const auto& [h, k] : m.counts()) {
    std::vector<Count> e(m.n());
    for (std::size_t i = 0; i < m.n(); ++i) e[i] = h[perm[i]];
    counts[History(std::move(e))] += k;
  }
  return CombStruct(m.n(), std::move(counts));
}

/// Mean of squared deviations, whose standard error compares variances.
inline std::vector<double> squared_deviations(const std::vector<double>& xs) {
  const double m = stats::mean_iid(xs).mean;
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back((x - m) * (x - m));
  return out;
}

inline double total_of(const CountMatrix& y) {
  double s = 0.0;
  for (const auto& row : y) {
    for (Count v : row) s += static_cast<double>(v);
  }
  return s;
}

}  // namespace detail

//------------------------------------------------------------------------------
// Suites
//------------------------------------------------------------------------------

/// Digamma p.m.f. against the BNB relation on a 5 x 5 (r, theta) grid, z <= 200.
inline bool digamma_identity(RngStream&, nlohmann::json& m) {
  double worst = 0.0;
  for (double r : {0.3, 1.0, 2.0, 4.5, 9.0}) {
    for (double theta : {0.4, 1.0, 2.5, 6.0, 15.0}) {
      const DigammaParams d(r, theta);
      const BnbParams b(r, 1.0, theta);
      const double scale = 1.0 / (theta * harmonic_gap(r, theta));
      for (Count z = 1; z <= 200; ++z) {
        const double rhs = scale * (static_cast<double>(z - 1) + r) / static_cast<double>(z) *
                           std::exp(bnb_log_pmf(b, z - 1));
        worst = std::max(worst, std::fabs(std::exp(digamma_log_pmf(d, z)) - rhs));
      }
    }
  }
  m["max_abs_error"] = worst;
  m["tolerance"] = 1e-10;
  return worst <= 1e-10;
}

/// Total masses of the digamma and BNB(r, 1, theta) p.m.f.s over the grid.
inline bool normalization(RngStream&, nlohmann::json& m) {
  double worst_digamma = 0.0, worst_bnb = 0.0;
  for (double r : {0.5, 1.0, 2.0, 5.0, 10.0}) {
    for (double theta : {0.5, 1.0, 2.0, 5.0, 10.0}) {
      worst_digamma = std::max(worst_digamma, std::fabs(digamma_total_mass(DigammaParams(r, theta)).value - 1.0));
      worst_bnb = std::max(worst_bnb, std::fabs(bnb_total_mass(BnbParams(r, 1.0, theta)).value - 1.0));
    }
  }
  m["digamma_max_abs_error"] = worst_digamma;
  m["bnb_max_abs_error"] = worst_bnb;
  m["tolerance"] = 1e-10;
  return worst_digamma <= 1e-10 && worst_bnb <= 1e-10;
}

inline bool rejection_sampler(RngStream& rng, nlohmann::json& m) {
  bool ok = true;
  m["cases"] = nlohmann::json::array();
  const std::vector<std::pair<double, double>> cases = {{1.0, 1.0}, {2.0, 1.0}, {0.5, 3.0}};
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const DigammaParams d(cases[k].first, cases[k].second);
    RngStream sub = rng.substream(k);
    std::vector<Count> draws;
    std::vector<double> rounds;
    for (int t = 0; t < 100000; ++t) {
      const DigammaDraw draw = digamma_sample_counted(d, sub);
      draws.push_back(draw.value);
      rounds.push_back(static_cast<double>(draw.rounds));
    }
    const auto gof = stats::discrete_gof(draws, [&](Count z) { return digamma_log_pmf(d, z); }, 1);
    const auto mean = stats::mean_iid(rounds);
    const double expected = digamma_expected_rounds(d);
    const double z = stats::z_score(mean, stats::MeanEstimate{expected, 0.0, 0.0});
    const bool pass = gof.p_value > 1e-3 && z <= 3.0;
    ok = ok && pass;
    m["cases"].push_back({{"r", d.r},
                          {"theta", d.theta},
                          {"chi_square_p", gof.p_value},
                          {"mean_rounds", mean.mean},
                          {"expected_rounds", expected},
                          {"z", z},
                          {"passed", pass}});
  }
  return ok;
}

inline constexpr std::size_t kStructureReps = 100000;

/// Settings shared by the simulator and two-construction suites.
inline Hyperparams small_structure_params() { return Hyperparams(1.0, 1.0, 0.5); }

inline bool simulator_pmf(RngStream& rng, nlohmann::json& m) {
  const Hyperparams hp = small_structure_params();
  const auto cells = detail::structure_cells(2, hp, 5.0 / kStructureReps, 6, 4);
  std::vector<double> observed(cells.probs.size(), 0.0);
  for (std::size_t t = 0; t < kStructureReps; ++t) {
    observed[cells.cell(from_array(nbibp_simulate(2, hp, rng)))] += 1.0;
  }
  const auto res = stats::chi_square_gof(observed, cells.probs, 5.0);
  m["replicates"] = kStructureReps;
  m["cells"] = res.cells;
  m["tail_probability"] = cells.probs.back();
  m["chi_square"] = res.statistic;
  m["chi_square_p"] = res.p_value;
  return res.p_value > 1e-3;
}

inline bool two_construction(RngStream& rng, nlohmann::json& m) {
  const Hyperparams hp = small_structure_params();
  const double epsilon = 1e-4;
  const auto cells = detail::structure_cells(2, hp, 5e-4, 6, 4);
  const TruncatedBetaProcess oracle(hp, epsilon);
  std::map<std::size_t, double> seq, hier;
  RngStream a = rng.substream(0), b = rng.substream(1);
  for (std::size_t t = 0; t < kStructureReps; ++t) {
    seq[cells.cell(from_array(nbibp_simulate(2, hp, a)))] += 1.0;
    hier[cells.cell(from_array(oracle.simulate(2, hp.r, b)))] += 1.0;
  }
  const double tv = stats::total_variation(stats::normalized(seq), stats::normalized(hier));
  m["replicates"] = kStructureReps;
  m["epsilon"] = epsilon;
  m["cells"] = cells.probs.size();
  m["tv_distance"] = tv;
  m["tolerance"] = 0.02;
  m["homogeneity_p"] = stats::chi_square_two_sample(seq, hier).p_value;
  return tv <= 0.02;
}

inline bool exchangeability(RngStream& rng, nlohmann::json& m) {
  const Hyperparams hp(1.0, 1.0, 1.0);
  const std::size_t n = 3;
  const std::vector<std::size_t> perm = {2, 0, 1};
  std::map<CombStruct, double> plain, permuted;
  RngStream a = rng.substream(0), b = rng.substream(1);
  for (std::size_t t = 0; t < kStructureReps; ++t) {
    plain[from_array(nbibp_simulate(n, hp, a))] += 1.0;
    permuted[from_array(nbibp_simulate(n, hp, b).permute_rows(perm))] += 1.0;
  }
  const auto res = stats::chi_square_two_sample(plain, permuted);

  double worst = 0.0;
  std::size_t checked = 0;
  const Hyperparams alt(2.5, 0.7, 1.3);
  std::vector<std::size_t> p(n);
  for_each_structure(n, 3, 3, [&](const CombStruct& s) {
    std::iota(p.begin(), p.end(), 0);
    do {
      for (const Hyperparams* h : {&hp, &alt}) {
        worst = std::max(worst, std::fabs(log_pmf_struct(detail::permute_struct(s, p), *h) - log_pmf_struct(s, *h)));
      }
      ++checked;
    } while (std::next_permutation(p.begin(), p.end()));
  });
  m["replicates"] = kStructureReps;
  m["cells"] = res.cells;
  m["chi_square_p"] = res.p_value;
  m["algebraic_cases"] = checked;
  m["algebraic_max_abs_error"] = worst;
  return res.p_value > 1e-3 && worst <= 1e-12;
}

inline bool projection(RngStream& rng, nlohmann::json& m) {
  const Hyperparams hp(1.5, 2.0, 1.0);
  std::map<CombStruct, double> projected, direct;
  RngStream a = rng.substream(0), b = rng.substream(1);
  for (std::size_t t = 0; t < kStructureReps; ++t) {
    projected[project(from_array(nbibp_simulate(3, hp, a)))] += 1.0;
    direct[from_array(nbibp_simulate(2, hp, b))] += 1.0;
  }
  const auto res = stats::chi_square_two_sample(projected, direct);

  // deterministic identities
  std::size_t failures = 0;
  const CombStruct hand(3, {{History{1, 0, 2}, 1}, {History{0, 0, 3}, 2}, {History{2, 1, 0}, 1}});
  const CombStruct hand_expected(2, {{History{1, 0}, 1}, {History{2, 1}, 1}});
  failures += project(hand) == hand_expected ? 0 : 1;
  RngStream c = rng.substream(2);
  for (int t = 0; t < 2000; ++t) {
    const FeatureArray w2 = nbibp_simulate(2, hp, c);
    const FeatureArray w3 = predictive_step(w2, hp, c);
    const CombStruct m3 = from_array(w3);
    // the first two rows of a stage-3 draw are the stage-2 draw
    failures += project(m3) == from_array(w2) ? 0 : 1;
    failures += project(from_array(left_order(w3))) == project(m3) ? 0 : 1;
    Count last_only = 0;
    for (const auto& [h, k] : m3.counts()) last_only += h.total() == h[2] ? k : 0;
    failures += project(m3).kappa() == m3.kappa() - last_only ? 0 : 1;
  }
  m["replicates"] = kStructureReps;
  m["cells"] = res.cells;
  m["chi_square_p"] = res.p_value;
  m["identity_failures"] = failures;
  return res.p_value > 1e-3 && failures == 0;
}

inline bool kappa_mean(RngStream& rng, nlohmann::json& m) {
  struct Case {
    std::size_t n;
    Hyperparams hp;
  };
  const std::vector<Case> cases = {{5, Hyperparams(1.0, 1.0, 2.0)},
                                   {4, Hyperparams(2.0, 0.5, 1.5)},
                                   {10, Hyperparams(0.5, 3.0, 1.0)}};
  bool ok = true;
  m["cases"] = nlohmann::json::array();
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& [n, hp] = cases[k];
    RngStream sub = rng.substream(k);
    std::vector<double> kappas;
    for (int t = 0; t < 20000; ++t) kappas.push_back(static_cast<double>(nbibp_simulate(n, hp, sub).kappa()));
    const auto est = stats::mean_iid(kappas);
    const double expected = expected_kappa(n, hp);
    const double z = std::fabs(est.mean - expected) / est.std_error;
    ok = ok && z <= 3.0;
    m["cases"].push_back({{"n", n},
                          {"r", hp.r},
                          {"c", hp.c},
                          {"T", hp.T},
                          {"mean", est.mean},
                          {"expected", expected},
                          {"z", z}});
  }
  return ok;
}

/// Moment comparison between forward draws and an MCMC trace.
inline bool compare_moments(const std::string& name, const std::vector<double>& forward,
                            const std::vector<double>& chain, bool variances, nlohmann::json& m) {
  const auto f = stats::mean_iid(forward);
  const auto c = stats::mean_batched(chain);
  const double z_mean = stats::z_score(f, c);
  nlohmann::json entry = {{"forward_mean", f.mean}, {"chain_mean", c.mean}, {"z_mean", z_mean}};
  bool ok = z_mean <= 3.0;
  if (variances) {
    const auto fv = stats::mean_iid(detail::squared_deviations(forward));
    const auto cv = stats::mean_batched(detail::squared_deviations(chain));
    const double z_var = stats::z_score(fv, cv);
    entry["forward_variance"] = fv.mean;
    entry["chain_variance"] = cv.mean;
    entry["z_variance"] = z_var;
    ok = ok && z_var <= 3.0;
  }
  m[name] = entry;
  return ok;
}

inline bool prior_restoration(RngStream& rng, nlohmann::json& m) {
  const Hyperparams hp(1.0, 1.0, 1.0);
  const std::size_t n = 3;
  const PoissonFactorModel flat(n, 1);

  std::vector<double> f_kappa, f_total;
  RngStream fwd = rng.substream(0);
  for (int t = 0; t < 100000; ++t) {
    const FeatureArray w = nbibp_simulate(n, hp, fwd);
    f_kappa.push_back(static_cast<double>(w.kappa()));
    f_total.push_back(std::log1p(static_cast<double>(w.total())));
  }

  ChainState s{FeatureArray(n), {}, hp, MassPrior{}, Hyperprior::point_mass(), Hyperprior::point_mass(),
               rng.substream(1)};
  sample_prior_state(s, flat);
  ChainConfig cfg;
  cfg.sweeps = 10000;
  cfg.update_mass = false;
  std::vector<double> c_kappa, c_total;
  run_chain(flat, s, cfg, [&](const ChainRecord& r) {
    if (r.sweep == 0) return;
    c_kappa.push_back(static_cast<double>(r.kappa));
    c_total.push_back(std::log1p(static_cast<double>(r.total)));
  });
  m["sweeps"] = cfg.sweeps;
  const bool a = compare_moments("kappa", f_kappa, c_kappa, true, m);
  const bool b = compare_moments("log1p_total", f_total, c_total, true, m);
  return a && b;
}

/// Priors of the Geweke test; c is kept well above 2 so that the multiplicity
/// totals have finite variance.
struct GewekeSetup {
  std::size_t n = 3;
  std::size_t V = 2;
  MassPrior mass{4.0, 4.0};
  Hyperprior c_prior = Hyperprior::gamma(40.0, 10.0);
  Hyperprior r_prior = Hyperprior::gamma(20.0, 20.0);
  std::size_t forward_draws = 200000;
  std::size_t sweeps = 500000;
};

inline bool geweke(RngStream& rng, nlohmann::json& m, const GewekeSetup& g = {}) {
  const PoissonFactorModel prior_model(g.n, g.V);
  auto forward = [&](RngStream& r) {
    const double T = sample_gamma(g.mass.alpha, g.mass.beta, r);
    const double c = g.c_prior.sample(r);
    const double rr = g.r_prior.sample(r);
    ChainState s{FeatureArray(g.n), {}, Hyperparams(rr, c, T), g.mass, g.c_prior, g.r_prior, r};
    sample_prior_state(s, prior_model);
    r = s.rng;
    return s;
  };

  std::vector<double> fk, fw, fy;
  RngStream fr = rng.substream(0);
  for (std::size_t t = 0; t < g.forward_draws; ++t) {
    const ChainState s = forward(fr);
    fk.push_back(static_cast<double>(s.W.kappa()));
    fw.push_back(static_cast<double>(s.W.total()));
    fy.push_back(detail::total_of(prior_model.sample_data(s.W, s.theta, fr)));
  }

  RngStream cr = rng.substream(1);
  ChainState s = forward(cr);
  s.rng = rng.substream(2);
  CountMatrix y = prior_model.sample_data(s.W, s.theta, s.rng);
  ChainConfig cfg;
  std::vector<double> ck, cw, cy;
  for (std::size_t t = 0; t < g.sweeps; ++t) {
    sweep(s, prior_model.with_data(y), cfg);
    y = prior_model.sample_data(s.W, s.theta, s.rng);
    ck.push_back(static_cast<double>(s.W.kappa()));
    cw.push_back(static_cast<double>(s.W.total()));
    cy.push_back(detail::total_of(y));
  }
  m["forward_draws"] = g.forward_draws;
  m["sweeps"] = g.sweeps;
  const bool a = compare_moments("kappa", fk, ck, false, m);
  const bool b = compare_moments("total_W", fw, cw, false, m);
  const bool c = compare_moments("total_y", fy, cy, false, m);
  return a && b && c;
}

/// Normalizes exp(log_pmf_array + log Gamma prior) over T by quadrature and
/// compares it pointwise with Gamma(alpha + kappa, beta + c xi).
inline bool t_update(RngStream&, nlohmann::json& m) {
  std::vector<FeatureArray> arrays;
  arrays.emplace_back(2);
  arrays.emplace_back(3, std::vector<History>{History{1, 0, 2}, History{0, 4, 0}});
  arrays.emplace_back(4, std::vector<History>{History{1, 0, 0, 0}, History{2, 1, 0, 3}, History{0, 0, 1, 0},
                                               History{5, 0, 0, 1}, History{0, 2, 2, 0}});
  const std::vector<std::pair<double, double>> rc = {{1.0, 1.0}, {0.5, 3.0}, {2.5, 0.7}};
  const std::vector<MassPrior> priors = {{1.0, 1.0}, {2.5, 0.3}, {0.5, 4.0}};
  boost::math::quadrature::tanh_sinh<double> integrator;
  double worst = 0.0;
  std::size_t cases = 0;
  for (const auto& w : arrays) {
    for (const auto& [r, c] : rc) {
      for (const auto& pr : priors) {
        const double shape = pr.alpha + static_cast<double>(w.kappa());
        const double rate = mass_posterior_rate(pr, Hyperparams(r, c, 1.0), w.n());
        const double mean = shape / rate;
        const double shift = log_pmf_array(w, Hyperparams(r, c, mean)) + gamma_log_density(mean, pr.alpha, pr.beta);
        auto f = [&](double T) {
          if (!(T > 0.0) || !std::isfinite(T)) return 0.0;
          return std::exp(log_pmf_array(w, Hyperparams(r, c, T)) + gamma_log_density(T, pr.alpha, pr.beta) - shift);
        };
        const double z = integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-14);
        for (double x : {0.05, 0.3, 1.0, 2.0, 4.0}) {
          const double T = x * mean;
          const double quad = f(T) / z;
          const double exact = std::exp(gamma_log_density(T, shape, rate));
          worst = std::max(worst, std::fabs(quad - exact) / exact);
        }
        ++cases;
      }
    }
  }
  m["cases"] = cases;
  m["max_rel_error"] = worst;
  m["tolerance"] = 1e-8;
  return worst <= 1e-8;
}

//------------------------------------------------------------------------------
// Registry and driver
//------------------------------------------------------------------------------

struct SuiteSpec {
  std::string name;
  int criterion;
  double limit_seconds;
  std::function<bool(RngStream&, nlohmann::json&)> run;
};

inline const std::vector<SuiteSpec>& suites() {
  static const std::vector<SuiteSpec> all = {
      {"digamma-identity", 1, 1.0, digamma_identity},
      {"normalization", 2, 1.0, normalization},
      {"rejection-sampler", 3, 10.0, rejection_sampler},
      {"simulator-pmf", 4, 60.0, simulator_pmf},
      {"two-construction", 5, 120.0, two_construction},
      {"exchangeability", 6, 60.0, exchangeability},
      {"projection", 7, 60.0, projection},
      {"kappa-mean", 8, 30.0, kappa_mean},
      {"prior-restoration", 9, 120.0, prior_restoration},
      {"geweke", 10, 180.0, [](RngStream& r, nlohmann::json& m) { return geweke(r, m); }},
      {"t-update", 11, 1.0, t_update},
  };
  return all;
}

/// "all", "none", or a comma-separated list of suite names.
inline std::vector<std::string> select_suites(const std::string& selection) {
  std::vector<std::string> out;
  if (selection == "none") return out;
  if (selection == "all") {
    for (const auto& s : suites()) out.push_back(s.name);
    return out;
  }
  std::size_t start = 0;
  while (start <= selection.size()) {
    const std::size_t end = std::min(selection.find(',', start), selection.size());
    const std::string name = selection.substr(start, end - start);
    bool known = false;
    for (const auto& s : suites()) known = known || s.name == name;
    if (!known) throw DomainError("unknown suite '" + name + "'");
    out.push_back(name);
    start = end + 1;
  }
  return out;
}

inline SuiteResult run_suite(const std::string& name, std::uint64_t seed) {
  for (std::size_t k = 0; k < suites().size(); ++k) {
    const auto& spec = suites()[k];
    if (spec.name != name) continue;
    SuiteResult out{spec.name, spec.criterion, false, 0.0, spec.limit_seconds, nlohmann::json::object()};
    RngStream rng = RngStream(seed).substream(static_cast<std::uint64_t>(spec.criterion));
    const auto start = std::chrono::steady_clock::now();
    const bool ok = spec.run(rng, out.metrics);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.passed = ok && out.seconds < spec.limit_seconds;
    return out;
  }
  throw DomainError("unknown suite '" + name + "'");
}

template <class OnResult>
Report run_validation(const std::vector<std::string>& names, std::uint64_t seed, OnResult&& on_result) {
  Report out{seed, {}};
  for (const auto& name : names) {
    out.suites.push_back(run_suite(name, seed));
    on_result(out.suites.back());
  }
  return out;
}

inline Report run_validation(const std::vector<std::string>& names, std::uint64_t seed) {
  return run_validation(names, seed, [](const SuiteResult&) {});
}

}  // namespace bnbp::validation
