#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bnbp/distributions.hpp"
#include "bnbp/generative.hpp"
#include "bnbp/structures.hpp"

namespace bnbp {

using CountMatrix = std::vector<std::vector<Count>>;   // n x V
using ThetaMatrix = std::vector<std::vector<double>>;  // kappa x V, row j pairs with column j of W

class SliceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double gamma_log_density(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double poisson_log_pmf(Count k, double rate) {
  if (rate == 0.0) return k == 0 ? 0.0 : kNegInf;
  const double kd = static_cast<double>(k);
  return kd * std::log(rate) - rate - std::lgamma(kd + 1.0);
}

//------------------------------------------------------------------------------
// Likelihood
//------------------------------------------------------------------------------

/// What the samplers need from a likelihood: the log-likelihood contribution
/// of one row given that row's entries of W and the feature parameters.
template <class M>
concept Likelihood = requires(const M& m, std::size_t i, std::span<const Count> row, const ThetaMatrix& theta) {
  { m.rows() } -> std::convertible_to<std::size_t>;
  { m.log_likelihood_row(i, row, theta) } -> std::convertible_to<double>;
};

struct ThetaPrior {
  double shape = 1.0;
  double rate = 1.0;
};

/// y_{iv} ~ Poisson(sum_j W_{ij} theta_{jv}) with theta_{jv} ~ Gamma(shape, rate).
/// Without data the likelihood is constant, which turns every kernel into a
/// prior sampler.
class PoissonFactorModel {
 public:
  PoissonFactorModel(std::size_t n, std::size_t V, std::optional<CountMatrix> y = std::nullopt,
                     ThetaPrior prior = {})
      : n_(n), V_(V), y_(std::move(y)), prior_(prior) {
    if (n_ == 0 || V_ == 0) throw DomainError("model needs n >= 1 and V >= 1");
    detail::require_positive(prior_.shape, "theta prior shape");
    detail::require_positive(prior_.rate, "theta prior rate");
    if (y_) {
      if (y_->size() != n_) throw DomainError("data has the wrong number of rows");
      for (const auto& row : *y_) {
        if (row.size() != V_) throw DomainError("data row has the wrong number of columns");
        for (Count v : row) {
          if (v < 0) throw DomainError("counts must be non-negative");
        }
      }
    }
  }

  std::size_t rows() const { return n_; }
  std::size_t columns() const { return V_; }
  bool has_data() const { return y_.has_value(); }
  const CountMatrix& data() const { return *y_; }
  const ThetaPrior& theta_prior() const { return prior_; }

  double log_likelihood_row(std::size_t i, std::span<const Count> row, const ThetaMatrix& theta) const {
    if (!y_) return 0.0;
    double out = 0.0;
    for (std::size_t v = 0; v < V_; ++v) {
      double rate = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) rate += static_cast<double>(row[j]) * theta[j][v];
      out += poisson_log_pmf((*y_)[i][v], rate);
    }
    return out;
  }

  double log_theta_prior(const ThetaMatrix& theta) const {
    double out = 0.0;
    for (const auto& row : theta) {
      for (double t : row) out += gamma_log_density(t, prior_.shape, prior_.rate);
    }
    return out;
  }

  std::vector<double> sample_theta_row(RngStream& rng) const {
    std::vector<double> out(V_);
    for (auto& t : out) t = sample_gamma(prior_.shape, prior_.rate, rng);
    return out;
  }

  /// Fresh data from the likelihood given (W, theta).
  CountMatrix sample_data(const FeatureArray& w, const ThetaMatrix& theta, RngStream& rng) const {
    CountMatrix y(n_, std::vector<Count>(V_, 0));
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t v = 0; v < V_; ++v) {
        double rate = 0.0;
        for (std::size_t j = 0; j < w.kappa(); ++j) rate += static_cast<double>(w.at(i, j)) * theta[j][v];
        y[i][v] = sample_poisson(rate, rng);
      }
    }
    return y;
  }

  PoissonFactorModel with_data(CountMatrix y) const { return PoissonFactorModel(n_, V_, std::move(y), prior_); }

 private:
  std::size_t n_;
  std::size_t V_;
  std::optional<CountMatrix> y_;
  ThetaPrior prior_;
};

//------------------------------------------------------------------------------
// Chain state
//------------------------------------------------------------------------------

/// Prior for c or r. The slice sampler leaves a point-mass parameter alone.
struct Hyperprior {
  enum class Kind { gamma, log_normal, point_mass };
  Kind kind = Kind::gamma;
  double a = 1.0;  // gamma shape, or log-normal mu
  double b = 1.0;  // gamma rate, or log-normal sigma

  static Hyperprior gamma(double shape, double rate) {
    detail::require_positive(shape, "gamma hyperprior shape");
    detail::require_positive(rate, "gamma hyperprior rate");
    return {Kind::gamma, shape, rate};
  }
  static Hyperprior log_normal(double mu, double sigma) {
    detail::require_positive(sigma, "log-normal hyperprior sigma");
    return {Kind::log_normal, mu, sigma};
  }
  static Hyperprior point_mass() { return {Kind::point_mass, 0.0, 0.0}; }

  double log_density(double x) const {
    if (!(x > 0.0) || !std::isfinite(x)) return kNegInf;
    switch (kind) {
      case Kind::gamma:
        return gamma_log_density(x, a, b);
      case Kind::log_normal: {
        const double z = (std::log(x) - a) / b;
        return -0.5 * z * z - std::log(x * b) - 0.5 * std::log(2.0 * std::numbers::pi);
      }
      case Kind::point_mass:
        return 0.0;
    }
    return kNegInf;
  }

  double sample(RngStream& rng) const {
    switch (kind) {
      case Kind::gamma:
        return sample_gamma(a, b, rng);
      case Kind::log_normal:
        return std::exp(a + b * sample_normal(rng));
      case Kind::point_mass:
        break;
    }
    throw DomainError("a point-mass hyperprior has no value of its own");
  }
};

/// Gamma(alpha, beta) prior on the mass T.
struct MassPrior {
  double alpha = 1.0;
  double beta = 1.0;
};

struct ChainState {
  FeatureArray W;
  ThetaMatrix theta;
  Hyperparams hp;
  MassPrior mass_prior;
  Hyperprior c_prior;
  Hyperprior r_prior;
  RngStream rng;

  /// Throws unless theta has one positive row of length V per column of W.
  void check(std::size_t V) const {
    if (theta.size() != W.kappa()) throw std::logic_error("theta rows differ from the number of columns");
    for (const auto& row : theta) {
      if (row.size() != V) throw std::logic_error("theta row has the wrong length");
      for (double t : row) {
        if (!(t > 0.0)) throw std::logic_error("theta entries must be positive");
      }
    }
  }
};

namespace detail {

inline std::vector<Count> row_of(const FeatureArray& w, std::size_t i) {
  std::vector<Count> row(w.kappa());
  for (std::size_t j = 0; j < w.kappa(); ++j) row[j] = w.at(i, j);
  return row;
}

inline History with_entry(const History& h, std::size_t i, Count value) {
  std::vector<Count> e = h.entries();
  e[i] = value;
  return History(std::move(e));
}

}  // namespace detail

template <Likelihood Model>
double log_likelihood(const Model& model, const FeatureArray& w, const ThetaMatrix& theta) {
  double out = 0.0;
  for (std::size_t i = 0; i < w.n(); ++i) {
    out += model.log_likelihood_row(i, detail::row_of(w, i), theta);
    if (out == kNegInf) break;
  }
  return out;
}

/// log p(y | W, theta) + log p(W) + log p(theta); -inf when y is impossible.
inline double log_joint(const ChainState& s, const PoissonFactorModel& model) {
  const double ll = log_likelihood(model, s.W, s.theta);
  if (ll == kNegInf) return kNegInf;
  return log_pmf_array(s.W, s.hp) + model.log_theta_prior(s.theta) + ll;
}

//------------------------------------------------------------------------------
// Kernels
//------------------------------------------------------------------------------

/// Metropolis-Hastings update of W_{ij} whose proposal is the prior
/// conditional BNB(r, S_{-i}, c + (n - 1) r), so only the likelihood
/// ratio enters the acceptance probability. Needs S_{-i} > 0.
template <Likelihood Model>
void update_entry(ChainState& s, const Model& model, std::size_t i, std::size_t j) {
  const History& col = s.W.column(j);
  const Count current = col[i];
  const Count others = col.total() - current;
  if (others <= 0) throw DomainError("entry update needs another row sharing the feature");
  const double n = static_cast<double>(s.W.n());
  const Count proposal =
      bnb_sample(BnbParams(s.hp.r, static_cast<double>(others), s.hp.c + (n - 1.0) * s.hp.r), s.rng);
  if (proposal == current) return;
  std::vector<Count> row = detail::row_of(s.W, i);
  const double before = model.log_likelihood_row(i, row, s.theta);
  row[j] = proposal;
  const double after = model.log_likelihood_row(i, row, s.theta);
  if (after == kNegInf) return;
  if (before == kNegInf || std::log(s.rng.uniform()) < after - before) {
    s.W.set_column(j, detail::with_entry(col, i, proposal));
  }
}

/// Birth/death move on the features only row i has. All of them are removed
/// and replaced by J* ~ Poisson(c T [psi(c + n r) - psi(c + (n - 1) r)]) new
/// ones with Digamma(r, c + (n - 1) r) masses and prior theta rows, placed at
/// uniformly chosen positions. Acceptance is the likelihood ratio.
template <class Model>
void update_singletons(ChainState& s, const Model& model, std::size_t i) {
  const std::size_t n = s.W.n();
  const double prev = s.hp.c + static_cast<double>(n - 1) * s.hp.r;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < s.W.kappa(); ++j) {
    const History& h = s.W.column(j);
    if (!(h[i] > 0 && h[i] == h.total())) keep.push_back(j);
  }

  const Count births = sample_poisson(s.hp.c * s.hp.T * harmonic_gap(s.hp.r, prev), s.rng);
  const DigammaParams mass(s.hp.r, prev);
  std::vector<Count> values(static_cast<std::size_t>(births));
  std::vector<std::vector<double>> fresh_theta(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    values[k] = digamma_sample(mass, s.rng);
    fresh_theta[k] = model.sample_theta_row(s.rng);
  }

  // selection sampling: every subset of slots is equally likely to hold the new columns
  const std::size_t slots = keep.size() + values.size();
  std::vector<bool> is_new(slots, false);
  std::size_t left = values.size();
  for (std::size_t pos = 0; pos < slots && left > 0; ++pos) {
    if (s.rng.below(slots - pos) < left) {
      is_new[pos] = true;
      --left;
    }
  }

  std::vector<History> cols;
  ThetaMatrix theta;
  std::vector<Count> row;
  cols.reserve(slots);
  theta.reserve(slots);
  std::size_t next_old = 0, next_new = 0;
  for (std::size_t pos = 0; pos < slots; ++pos) {
    if (is_new[pos]) {
      std::vector<Count> e(n, 0);
      e[i] = values[next_new];
      cols.emplace_back(std::move(e));
      theta.push_back(std::move(fresh_theta[next_new]));
      row.push_back(values[next_new]);
      ++next_new;
    } else {
      const std::size_t j = keep[next_old++];
      cols.push_back(s.W.column(j));
      theta.push_back(s.theta[j]);
      row.push_back(s.W.at(i, j));
    }
  }

  const double before = model.log_likelihood_row(i, detail::row_of(s.W, i), s.theta);
  const double after = model.log_likelihood_row(i, row, theta);
  if (after == kNegInf) return;
  if (before == kNegInf || after >= before || std::log(s.rng.uniform()) < after - before) {
    s.W = FeatureArray(n, std::move(cols));
    s.theta = std::move(theta);
  }
}

/// Gibbs update of theta. Each y_{iv} is split among the features by a
/// multinomial draw with weights W_{ij} theta_{jv}; given the split the
/// gamma prior is conjugate. Without data this draws from the prior.
inline void update_theta(ChainState& s, const PoissonFactorModel& model) {
  const std::size_t kappa = s.W.kappa();
  if (kappa == 0) return;
  const std::size_t V = model.columns();
  const ThetaPrior& prior = model.theta_prior();
  if (!model.has_data()) {
    for (auto& row : s.theta) row = model.sample_theta_row(s.rng);
    return;
  }
  ThetaMatrix alloc(kappa, std::vector<double>(V, 0.0));
  std::vector<double> exposure(kappa, 0.0);
  std::vector<double> cumulative(kappa);
  for (std::size_t i = 0; i < s.W.n(); ++i) {
    for (std::size_t j = 0; j < kappa; ++j) exposure[j] += static_cast<double>(s.W.at(i, j));
    for (std::size_t v = 0; v < V; ++v) {
      const Count y = model.data()[i][v];
      if (y == 0) continue;
      double total = 0.0;
      for (std::size_t j = 0; j < kappa; ++j) {
        total += static_cast<double>(s.W.at(i, j)) * s.theta[j][v];
        cumulative[j] = total;
      }
      if (!(total > 0.0)) throw DomainError("positive count with zero Poisson rate");
      for (Count k = 0; k < y; ++k) {
        const double u = s.rng.uniform() * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const auto j = std::min(static_cast<std::size_t>(it - cumulative.begin()), kappa - 1);
        alloc[j][v] += 1.0;
      }
    }
  }
  for (std::size_t j = 0; j < kappa; ++j) {
    for (std::size_t v = 0; v < V; ++v) {
      s.theta[j][v] = sample_gamma(prior.shape + alloc[j][v], prior.rate + exposure[j], s.rng);
    }
  }
}

/// Rate of the gamma full conditional of T: beta + c [psi(c + n r) - psi(c)].
inline double mass_posterior_rate(const MassPrior& prior, const Hyperparams& hp, std::size_t n) {
  return prior.beta + hp.c * harmonic_gap(static_cast<double>(n) * hp.r, hp.c);
}

inline void update_mass_T(ChainState& s) {
  const double shape = s.mass_prior.alpha + static_cast<double>(s.W.kappa());
  s.hp.T = sample_gamma(shape, mass_posterior_rate(s.mass_prior, s.hp, s.W.n()), s.rng);
}

/// Univariate slice sampler with stepping out and shrinkage.
template <class LogDensity>
double slice_sample(double x0, LogDensity&& log_density, double width, RngStream& rng,
                    int max_expansions = 1000) {
  const double f0 = log_density(x0);
  if (!std::isfinite(f0)) throw SliceError("slice sampler started outside the support");
  const double level = f0 + std::log(rng.uniform());
  double lo = x0 - width * rng.uniform();
  double hi = lo + width;
  int steps = 0;
  while (log_density(lo) > level) {
    lo -= width;
    if (++steps > max_expansions) throw SliceError("slice bracket did not close");
  }
  while (log_density(hi) > level) {
    hi += width;
    if (++steps > max_expansions) throw SliceError("slice bracket did not close");
  }
  for (int shrink = 0; shrink < 100000; ++shrink) {
    const double x1 = lo + (hi - lo) * rng.uniform();
    if (log_density(x1) > level) return x1;
    (x1 < x0 ? lo : hi) = x1;
  }
  throw SliceError("slice shrinkage did not terminate");
}

/// Slice updates of c and then r targeting log p(W | r, c, T) plus their priors.
inline void update_c_r(ChainState& s, double width = 1.0) {
  if (s.c_prior.kind != Hyperprior::Kind::point_mass) {
    s.hp.c = slice_sample(
        s.hp.c,
        [&](double c) {
          const double prior = s.c_prior.log_density(c);
          if (prior == kNegInf) return kNegInf;
          return prior + log_pmf_array(s.W, Hyperparams(s.hp.r, c, s.hp.T));
        },
        width, s.rng);
  }
  if (s.r_prior.kind != Hyperprior::Kind::point_mass) {
    s.hp.r = slice_sample(
        s.hp.r,
        [&](double r) {
          const double prior = s.r_prior.log_density(r);
          if (prior == kNegInf) return kNegInf;
          return prior + log_pmf_array(s.W, Hyperparams(r, s.hp.c, s.hp.T));
        },
        width, s.rng);
  }
}

/// Uniformly random relabeling of the features, moving theta rows along.
inline void shuffle_columns(ChainState& s) {
  std::vector<std::size_t> order(s.W.kappa());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  for (std::size_t j = order.size(); j > 1; --j) std::swap(order[j - 1], order[s.rng.below(j)]);
  s.W.permute_columns(order);
  ThetaMatrix theta;
  theta.reserve(order.size());
  for (std::size_t j : order) theta.push_back(std::move(s.theta[j]));
  s.theta = std::move(theta);
}

//------------------------------------------------------------------------------
// Driver
//------------------------------------------------------------------------------

struct ChainConfig {
  std::size_t sweeps = 0;
  std::size_t thin = 1;
  bool update_w = true;
  bool update_singletons = true;
  bool update_theta = true;
  bool update_mass = true;
  bool update_hyper = true;  // c and r, skipped for point-mass priors
  bool shuffle = true;
  double slice_width = 1.0;
  bool keep_state = false;  // attach W and theta to every record
};

struct ChainRecord {
  std::size_t sweep = 0;
  std::size_t kappa = 0;
  Count total = 0;
  double T = 0.0;
  double c = 0.0;
  double r = 0.0;
  double log_joint = 0.0;
  std::optional<FeatureArray> W;
  std::optional<ThetaMatrix> theta;
};

inline ChainRecord make_record(const ChainState& s, const PoissonFactorModel& model, std::size_t sweep,
                               bool keep_state) {
  ChainRecord out;
  out.sweep = sweep;
  out.kappa = s.W.kappa();
  out.total = s.W.total();
  out.T = s.hp.T;
  out.c = s.hp.c;
  out.r = s.hp.r;
  out.log_joint = log_joint(s, model);
  if (keep_state) {
    out.W = s.W;
    out.theta = s.theta;
  }
  return out;
}

/// One sweep: shared entries, singleton moves per row, theta, T, c and r,
/// then a column relabeling.
inline void sweep(ChainState& s, const PoissonFactorModel& model, const ChainConfig& cfg) {
  const std::size_t n = s.W.n();
  if (cfg.update_w) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < s.W.kappa(); ++j) {
        if (s.W.column(j).total() > s.W.at(i, j)) update_entry(s, model, i, j);
      }
    }
  }
  if (cfg.update_singletons) {
    for (std::size_t i = 0; i < n; ++i) update_singletons(s, model, i);
  }
  if (cfg.update_theta) update_theta(s, model);
  if (cfg.update_mass) update_mass_T(s);
  if (cfg.update_hyper) update_c_r(s, cfg.slice_width);
  if (cfg.shuffle) shuffle_columns(s);
}

/// Runs cfg.sweeps sweeps, emitting the initial state and then every
/// cfg.thin-th state.
template <class Emit>
void run_chain(const PoissonFactorModel& model, ChainState& s, const ChainConfig& cfg, Emit&& emit) {
  if (cfg.thin == 0) throw DomainError("thin must be at least 1");
  if (s.W.n() != model.rows()) throw DomainError("state and model disagree on n");
  s.check(model.columns());
  emit(make_record(s, model, 0, cfg.keep_state));
  for (std::size_t t = 1; t <= cfg.sweeps; ++t) {
    sweep(s, model, cfg);
    if (t % cfg.thin == 0) emit(make_record(s, model, t, cfg.keep_state));
  }
}

/// Forward draw of (W, theta) from the prior, with W uniformly labeled.
inline void sample_prior_state(ChainState& s, const PoissonFactorModel& model) {
  s.W = uniform_label(from_array(nbibp_simulate(model.rows(), s.hp, s.rng)), s.rng);
  s.theta.clear();
  for (std::size_t j = 0; j < s.W.kappa(); ++j) s.theta.push_back(model.sample_theta_row(s.rng));
}

}  // namespace bnbp
