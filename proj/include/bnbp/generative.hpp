#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "bnbp/distributions.hpp"
#include "bnbp/structures.hpp"

namespace bnbp {

enum class AtomSource { fixed, ordinary };

/// One atom of a beta-process draw or of a base measure. `log_complement`
/// holds log(1 - weight) at full precision, which matters near weight 1.
struct WeightedAtom {
  double weight;
  double log_complement;
  AtomSource source;

  double log_odds() const { return std::log(weight) - log_complement; }
};

struct WeightedAtomMeasure {
  std::vector<WeightedAtom> atoms;

  void add(double weight, double log_complement, AtomSource source) {
    if (!(weight > 0.0 && weight <= 1.0)) throw DomainError("atom weight must lie in (0, 1]");
    atoms.push_back({weight, log_complement, source});
  }
};

/// Beta parameters of one atom after n rows: B{s} ~ Beta(alpha, beta) with
/// alpha + beta = concentration.
struct AtomPosterior {
  AtomSource source;
  Count seen;
  double concentration;
  double alpha;
  double beta;
};

/// Posterior of the beta process after n rows: atoms carrying counts (and the
/// prior fixed atoms) plus the updated nonatomic part, whose concentration is
/// c + n r and whose base-measure mass is c T / (c + n r).
struct PosteriorHyper {
  double r;
  std::vector<AtomPosterior> atoms;
  double concentration;
  double mass;

  WeightedAtomMeasure base_measure() const {
    WeightedAtomMeasure out;
    for (const auto& a : atoms) {
      out.add(a.alpha / a.concentration, std::log(a.beta / a.concentration), a.source);
    }
    return out;
  }
};

/// `fixed_counts` are the totals observed at hp.fixed_atoms (empty means
/// all zero); `seen` are the totals of ordinary atoms that have appeared.
inline PosteriorHyper posterior_hyper(const Hyperparams& hp, std::span<const Count> seen, std::size_t n,
                                      std::span<const Count> fixed_counts = {}) {
  if (!fixed_counts.empty() && fixed_counts.size() != hp.fixed_atoms.size()) {
    throw DomainError("one count per fixed atom expected");
  }
  const double nr = static_cast<double>(n) * hp.r;
  PosteriorHyper out{hp.r, {}, hp.c + nr, hp.c * hp.T / (hp.c + nr)};
  out.atoms.reserve(hp.fixed_atoms.size() + seen.size());
  for (std::size_t k = 0; k < hp.fixed_atoms.size(); ++k) {
    const Count s = fixed_counts.empty() ? 0 : fixed_counts[k];
    if (s < 0) throw DomainError("atom counts must be non-negative");
    const double b = hp.fixed_atoms[k];
    const double alpha = hp.c * b + static_cast<double>(s);
    const double beta = hp.c * (1.0 - b) + nr;
    out.atoms.push_back({AtomSource::fixed, s, alpha + beta, alpha, beta});
  }
  for (Count s : seen) {
    if (s < 1) throw DomainError("ordinary atoms carry a positive count");
    const double alpha = static_cast<double>(s);
    out.atoms.push_back({AtomSource::ordinary, s, alpha + hp.c + nr, alpha, hp.c + nr});
  }
  return out;
}

struct FinitaryDraw {
  std::vector<Count> atoms;     // one mass per entry of PosteriorHyper::atoms
  std::vector<Count> ordinary;  // masses of newly created atoms, all >= 1
};

/// One negative binomial process draw given a beta-process posterior: every
/// listed atom gets a BNB(r, alpha, beta) mass, and a Poisson number of new
/// atoms with mean concentration * mass * xi receive Digamma masses.
inline FinitaryDraw finitary_draw(const PosteriorHyper& ph, RngStream& rng) {
  FinitaryDraw out;
  out.atoms.reserve(ph.atoms.size());
  for (const auto& a : ph.atoms) {
    if (!(a.beta > 0.0)) throw DomainError("atom of weight 1 gives a degenerate BNB (beta = 0)");
    out.atoms.push_back(bnb_sample(BnbParams(ph.r, a.alpha, a.beta), rng));
  }
  const DigammaParams masses(ph.r, ph.concentration);
  const Count k = sample_poisson(ph.concentration * ph.mass * harmonic_gap(ph.r, ph.concentration), rng);
  out.ordinary.reserve(static_cast<std::size_t>(k));
  for (Count j = 0; j < k; ++j) out.ordinary.push_back(digamma_sample(masses, rng));
  return out;
}

/// Prior draw with constant concentration: fixed atoms get
/// BNB(r, c b, c (1 - b)) masses, ordinary atoms Poisson(c T xi) Digamma masses.
inline FinitaryDraw bnbp_sample_finitary(const Hyperparams& hp, RngStream& rng) {
  for (double b : hp.fixed_atoms) {
    if (b >= 1.0) throw DomainError("fixed atom of weight 1 gives a degenerate BNB (beta = 0)");
  }
  return finitary_draw(posterior_hyper(hp, {}, 0), rng);
}

/// Appends row n + 1 to w using the posterior given its n rows.
inline FeatureArray predictive_step(const FeatureArray& w, const Hyperparams& hp, RngStream& rng) {
  detail::require_no_fixed_atoms(hp);
  const std::size_t n = w.n();
  std::vector<Count> sums;
  sums.reserve(w.kappa());
  for (const auto& h : w.columns()) sums.push_back(h.total());
  const FinitaryDraw draw = finitary_draw(posterior_hyper(hp, sums, n), rng);

  std::vector<History> cols;
  cols.reserve(w.kappa() + draw.ordinary.size());
  for (std::size_t j = 0; j < w.kappa(); ++j) {
    std::vector<Count> e = w.column(j).entries();
    e.push_back(draw.atoms[j]);
    cols.emplace_back(std::move(e));
  }
  for (Count v : draw.ordinary) {
    std::vector<Count> e(n + 1, 0);
    e[n] = v;
    cols.emplace_back(std::move(e));
  }
  return FeatureArray(n + 1, std::move(cols));
}

/// Sequential simulation of n rows, one predictive step at a time.
/// Columns appear in order of creation.
inline FeatureArray nbibp_simulate(std::size_t n, const Hyperparams& hp, RngStream& rng) {
  if (n == 0) throw DomainError("simulation needs n >= 1");
  FeatureArray w(0);
  for (std::size_t i = 0; i < n; ++i) w = predictive_step(w, hp, rng);
  return w;
}

/// Beta process restricted to atoms of weight above epsilon. The Levy
/// measure c T p^{-1} (1 - p)^{c - 1} dp is split at m = max(epsilon, 1/2):
/// weights below m are drawn log-uniformly and thinned by (1 - p)^{c - 1};
/// weights above m come from w = (1 - p)^c, which is uniform under the
/// measure's (1 - p)^{c - 1} factor, thinned by m / p.
class TruncatedBetaProcess {
 public:
  TruncatedBetaProcess(const Hyperparams& hp, double epsilon)
      : c_(hp.c), T_(hp.T), epsilon_(epsilon), split_(std::max(epsilon, 0.5)) {
    detail::require_no_fixed_atoms(hp);
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
    boost::math::quadrature::tanh_sinh<double> integrator;
    double error = 0.0, l1 = 0.0;
    if (epsilon_ < split_) {
      const double c = c_;
      lower_mass_ = c_ * T_ *
                    integrator.integrate([c](double u) { return std::exp((c - 1.0) * std::log1p(-std::exp(u))); },
                                         std::log(epsilon_), std::log(split_), 1e-13, &error, &l1);
      check(lower_mass_, error, l1);
    }
    const double top = std::pow(1.0 - split_, c_);
    const double q = 1.0 - split_;
    const double inv_c = 1.0 / c_;
    upper_mass_ = T_ * top *
                  integrator.integrate([q, inv_c](double v) { return 1.0 / (1.0 - q * std::pow(v, inv_c)); }, 0.0,
                                       1.0, 1e-13, &error, &l1);
    check(upper_mass_, error, l1);
    log_top_ = c_ * std::log(q);
  }

  /// Expected number of atoms, Lambda(epsilon).
  double total_mass() const { return lower_mass_ + upper_mass_; }
  double epsilon() const { return epsilon_; }

  WeightedAtomMeasure sample_atoms(RngStream& rng) const {
    WeightedAtomMeasure out;
    const Count lower = sample_poisson(lower_mass_, rng);
    const double lo = std::log(epsilon_), hi = std::log(split_);
    const double peak = c_ >= 1.0 ? std::log1p(-epsilon_) : std::log1p(-split_);
    for (Count k = 0; k < lower;) {
      const double p = std::exp(lo + (hi - lo) * rng.uniform());
      const double log_complement = std::log1p(-p);
      if (std::log(rng.uniform()) < (c_ - 1.0) * (log_complement - peak)) {
        out.add(p, log_complement, AtomSource::ordinary);
        ++k;
      }
    }
    const Count upper = sample_poisson(upper_mass_, rng);
    for (Count k = 0; k < upper;) {
      const double log_complement = (log_top_ + std::log(rng.uniform())) / c_;
      const double p = -std::expm1(log_complement);
      if (rng.uniform() * p < split_) {
        out.add(p, log_complement, AtomSource::ordinary);
        ++k;
      }
    }
    return out;
  }

  /// n i.i.d. NB(r, p_j) rows for every atom; all-zero columns are dropped.
  static FeatureArray draw_rows(const WeightedAtomMeasure& b, std::size_t n, double r, RngStream& rng) {
    std::vector<History> cols;
    for (const auto& atom : b.atoms) {
      std::vector<Count> e(n);
      Count total = 0;
      for (auto& v : e) {
        v = nb_sample_log_odds(r, atom.log_odds(), rng);
        total += v;
      }
      if (total > 0) cols.emplace_back(std::move(e));
    }
    return FeatureArray(n, std::move(cols));
  }

  FeatureArray simulate(std::size_t n, double r, RngStream& rng) const {
    if (n == 0) throw DomainError("simulation needs n >= 1");
    return draw_rows(sample_atoms(rng), n, r, rng);
  }

 private:
  static void check(double value, double error, double l1) {
    if (!std::isfinite(value) || error > 1e-10 * std::max(l1, 1e-300)) {
      throw QuadratureError("beta process mass quadrature did not converge");
    }
  }

  double c_, T_, epsilon_, split_;
  double lower_mass_ = 0.0;
  double upper_mass_ = 0.0;
  double log_top_ = 0.0;
};

inline FeatureArray truncated_oracle_simulate(std::size_t n, const Hyperparams& hp, double epsilon, RngStream& rng) {
  return TruncatedBetaProcess(hp, epsilon).simulate(n, hp.r, rng);
}

}  // namespace bnbp
