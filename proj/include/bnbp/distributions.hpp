#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "bnbp/numerics.hpp"
#include "bnbp/rng.hpp"

namespace bnbp {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

//------------------------------------------------------------------------------
// Parameter types
//------------------------------------------------------------------------------

/// Digamma(r, theta) on {1, 2, ...}.
struct DigammaParams {
  double r;
  double theta;

  DigammaParams(double r_, double theta_) : r(r_), theta(theta_) {
    detail::require_positive(r, "digamma r");
    detail::require_positive(theta, "digamma theta");
  }
};

/// Beta negative binomial BNB(r, alpha, beta): p ~ Beta(alpha, beta), Z | p ~ NB(r, p).
struct BnbParams {
  double r;
  double alpha;
  double beta;

  BnbParams(double r_, double alpha_, double beta_) : r(r_), alpha(alpha_), beta(beta_) {
    detail::require_positive(r, "BNB r");
    detail::require_positive(alpha, "BNB alpha");
    detail::require_positive(beta, "BNB beta");
  }
};

/// Negative binomial NB(r, p) with p.m.f. (r)_z / z! p^z (1-p)^r. The value
/// p = 1 is a legal parameter (it appears in measure-level statements) but
/// has no proper p.m.f.
struct NbParams {
  double r;
  double p;

  NbParams(double r_, double p_) : r(r_), p(p_) {
    detail::require_positive(r, "NB r");
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("NB p must lie in (0, 1]");
  }
};

//------------------------------------------------------------------------------
// Base samplers. All of them are exact and consume the stream deterministically.
//------------------------------------------------------------------------------

/// Largest count a sampler returns; larger draws saturate here.
inline constexpr Count kMaxCount = Count{1} << 62;

inline double sample_normal(RngStream& rng) {
  // Marsaglia polar method; the second variate is discarded.
  for (;;) {
    const double u = 2.0 * rng.uniform() - 1.0;
    const double v = 2.0 * rng.uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

/// Log of a Gamma(shape, 1) variate. Working on the log scale keeps tiny
/// shapes from underflowing to zero.
inline double sample_log_gamma(double shape, RngStream& rng) {
  detail::require_positive(shape, "gamma shape");
  if (shape < 1.0) {
    const double boosted = sample_log_gamma(shape + 1.0, rng);
    return boosted + std::log(rng.uniform()) / shape;
  }
  // Marsaglia and Tsang (2000).
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = sample_normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return std::log(d * v);
  }
}

/// Gamma(shape, rate) variate.
inline double sample_gamma(double shape, double rate, RngStream& rng) {
  detail::require_positive(rate, "gamma rate");
  return std::exp(sample_log_gamma(shape, rng)) / rate;
}

inline double sample_beta(double a, double b, RngStream& rng) {
  const double la = sample_log_gamma(a, rng);
  const double lb = sample_log_gamma(b, rng);
  // a / (a + b) evaluated on the log scale
  return 1.0 / (1.0 + std::exp(lb - la));
}

/// Poisson(mean) variate. Inversion below 10, Hormann's PTRS transformed
/// rejection above. Means beyond 2^52 cannot be resolved to unit precision in
/// a double, so those fall back to a rounded normal draw and saturate at
/// kMaxCount.
inline Count sample_poisson(double mean, RngStream& rng) {
  if (!(mean >= 0.0) || std::isnan(mean)) throw DomainError("Poisson mean must be non-negative");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    Count k = 0;
    double p = std::exp(-mean);
    double cdf = p;
    const double u = rng.uniform();
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      const double next = cdf + p;
      if (next == cdf) break;  // remaining mass below double resolution
      cdf = next;
    }
    return k;
  }
  if (mean > 0x1.0p52) {
    if (!std::isfinite(mean) || mean >= static_cast<double>(kMaxCount)) return kMaxCount;
    const double draw = std::round(mean + std::sqrt(mean) * sample_normal(rng));
    return std::clamp(static_cast<Count>(std::max(draw, 0.0)), Count{0}, kMaxCount);
  }
  const double log_mean = std::log(mean);
  const double smu = std::sqrt(mean);
  const double b = 0.931 + 2.53 * smu;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<Count>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * log_mean - std::lgamma(k + 1.0)) {
      return static_cast<Count>(k);
    }
  }
}

/// Poisson draw whose mean is exp(log_mean); saturates instead of overflowing.
inline Count sample_poisson_log_mean(double log_mean, RngStream& rng) {
  if (log_mean > 43.0) return sample_poisson(std::numeric_limits<double>::infinity(), rng);
  return sample_poisson(std::exp(log_mean), rng);
}

/// NB(r, p) as a gamma mixture of Poissons: lambda ~ Gamma(r) * p / (1 - p).
/// Takes log(p / (1 - p)) so that p too close to 1 to store is still usable.
inline Count nb_sample_log_odds(double r, double log_odds, RngStream& rng) {
  return sample_poisson_log_mean(sample_log_gamma(r, rng) + log_odds, rng);
}

inline Count nb_sample(const NbParams& params, RngStream& rng) {
  if (params.p >= 1.0) throw DomainError("NB sampling requires p < 1");
  return nb_sample_log_odds(params.r, std::log(params.p) - std::log1p(-params.p), rng);
}

/// Compositional BNB draw. With p = X / (X + Y), X ~ Gamma(alpha), Y ~ Gamma(beta),
/// the odds p / (1 - p) are X / Y, so no intermediate probability is rounded to 1.
inline Count bnb_sample(const BnbParams& params, RngStream& rng) {
  const double log_x = sample_log_gamma(params.alpha, rng);
  const double log_y = sample_log_gamma(params.beta, rng);
  const double log_rate = sample_log_gamma(params.r, rng) + log_x - log_y;
  return sample_poisson_log_mean(log_rate, rng);
}

//------------------------------------------------------------------------------
// Log p.m.f.s. Each has a real-argument form used for tail integrals.
//------------------------------------------------------------------------------

namespace detail {

inline double digamma_log_pmf_real(const DigammaParams& d, double log_norm, double z) {
  return -log_norm + log_gamma_ratio(z, d.r, d.r + d.theta) - std::lgamma(d.r) +
         std::lgamma(d.r + d.theta) - std::log(z);
}

inline double bnb_log_pmf_real(const BnbParams& b, double log_norm, double z) {
  return log_gamma_ratio(z, b.r, 1.0) - std::lgamma(b.r) +
         log_gamma_ratio(z, b.alpha, b.alpha + b.r + b.beta) + std::lgamma(b.r + b.beta) - log_norm;
}

}  // namespace detail

inline double digamma_log_pmf(const DigammaParams& params, Count z) {
  if (z < 1) throw DomainError("digamma support starts at 1, got " + std::to_string(z));
  return -std::log(harmonic_gap(params.r, params.theta)) + log_rising_factorial(params.r, z) -
         log_rising_factorial(params.r + params.theta, z) - std::log(static_cast<double>(z));
}

inline double bnb_log_pmf(const BnbParams& params, Count z) {
  if (z < 0) throw DomainError("BNB support starts at 0, got " + std::to_string(z));
  return log_rising_factorial(params.r, z) - log_factorial(z) +
         log_beta_fn(static_cast<double>(z) + params.alpha, params.r + params.beta) -
         log_beta_fn(params.alpha, params.beta);
}

inline double nb_log_pmf(const NbParams& params, Count z) {
  if (z < 0) throw DomainError("NB support starts at 0, got " + std::to_string(z));
  if (params.p >= 1.0) throw DomainError("NB p.m.f. is improper at p = 1");
  return log_rising_factorial(params.r, z) - log_factorial(z) +
         static_cast<double>(z) * std::log(params.p) + params.r * std::log1p(-params.p);
}

//------------------------------------------------------------------------------
// Adaptive series summation
//------------------------------------------------------------------------------

struct SeriesSum {
  double value = 0.0;  // direct partial sum plus tail estimate
  double tail = 0.0;   // the tail part of value
  Count terms = 0;     // number of terms summed directly
};

/// Sums exp(log_term(z)) over z >= start when consecutive term ratios are
/// eventually bounded by ratio_limit < 1. Stops once the geometric tail bound
/// t_z * rho / (1 - rho), rho = max(current ratio, ratio_limit), drops below tol.
template <class LogTerm>
SeriesSum sum_geometric_tail(LogTerm&& log_term, Count start, double ratio_limit,
                             double tol = 1e-14, Count max_terms = 100'000'000) {
  SeriesSum out;
  double prev = log_term(start);
  out.value = std::exp(prev);
  out.terms = 1;
  for (Count z = start + 1; out.terms < max_terms; ++z) {
    const double cur = log_term(z);
    out.value += std::exp(cur);
    ++out.terms;
    const double rho = std::max(std::exp(cur - prev), ratio_limit);
    if (rho < 1.0) {
      const double bound = std::exp(cur) * rho / (1.0 - rho);
      if (bound < tol) {
        out.tail = bound;
        return out;
      }
    }
    prev = cur;
  }
  throw std::runtime_error("series did not converge within the term budget");
}

/// Sums exp(log_term(z)) over z >= start for terms with polynomial tails.
/// The first `direct` terms are added directly; the rest is estimated by
/// Euler-Maclaurin, integral plus f(Z)/2 - f'(Z)/12, with the integral over
/// [Z, inf) evaluated by tanh-sinh quadrature. `log_slope` is d/dz log_term.
template <class LogTerm, class LogSlope>
SeriesSum sum_polynomial_tail(LogTerm&& log_term, LogSlope&& log_slope, Count start,
                              Count direct = 4000) {
  SeriesSum out;
  for (Count z = start; z < start + direct; ++z) out.value += std::exp(log_term(static_cast<double>(z)));
  out.terms = direct;
  const double edge = static_cast<double>(start + direct);
  const double f_edge = std::exp(log_term(edge));
  if (f_edge < 1e-300) return out;
  // x = edge / s maps [edge, inf) onto (0, 1]; a power-law tail becomes an
  // integrable endpoint singularity, which tanh-sinh handles well.
  boost::math::quadrature::tanh_sinh<double> integrator;
  double error = 0.0;
  double l1 = 0.0;
  const double integral = integrator.integrate(
      [&](double s) {
        if (s <= 0.0) return 0.0;
        const double v = std::exp(log_term(edge / s)) * edge / (s * s);
        return std::isfinite(v) ? v : 0.0;
      },
      0.0, 1.0, 1e-13, &error, &l1);
  if (!(error <= 1e-9 * std::max(l1, 1e-300) + 1e-15)) {
    throw QuadratureError("tail integral did not converge");
  }
  out.tail = integral + 0.5 * f_edge - f_edge * log_slope(edge) / 12.0;
  out.value += out.tail;
  return out;
}

/// Total mass of the digamma p.m.f. (should be 1), with its tail estimate.
inline SeriesSum digamma_total_mass(const DigammaParams& params) {
  const double log_norm = std::log(harmonic_gap(params.r, params.theta));
  return sum_polynomial_tail(
      [&](double z) { return detail::digamma_log_pmf_real(params, log_norm, z); },
      [&](double z) {
        return digamma_fn(params.r + z) - digamma_fn(params.r + params.theta + z) - 1.0 / z;
      },
      1);
}

/// Total mass of the BNB p.m.f. (should be 1), with its tail estimate.
inline SeriesSum bnb_total_mass(const BnbParams& params) {
  const double log_norm = log_beta_fn(params.alpha, params.beta);
  return sum_polynomial_tail(
      [&](double z) { return detail::bnb_log_pmf_real(params, log_norm, z); },
      [&](double z) {
        return digamma_fn(params.r + z) - digamma_fn(z + 1.0) + digamma_fn(z + params.alpha) -
               digamma_fn(z + params.alpha + params.r + params.beta);
      },
      0);
}

/// Total mass of the NB p.m.f. (should be 1); geometric tail with ratio p.
inline SeriesSum nb_total_mass(const NbParams& params) {
  return sum_geometric_tail([&](Count z) { return nb_log_pmf(params, z); }, 0, params.p);
}

//------------------------------------------------------------------------------
// Digamma distribution: sampler, Laplace transform, mean
//------------------------------------------------------------------------------

struct DigammaDraw {
  Count value;
  std::uint64_t rounds;  // proposals consumed, including the accepted one
};

inline constexpr std::uint64_t kDigammaRoundCap = 10'000'000;

/// Rejection sampler built on the BNB(r, 1, theta) representation of
/// Digamma(r, theta) - 1: propose Y, accept when max(r, 1) U < (Y + r) / (Y + 1).
inline DigammaDraw digamma_sample_counted(const DigammaParams& params, RngStream& rng) {
  const BnbParams proposal(params.r, 1.0, params.theta);
  const double bound = std::max(params.r, 1.0);
  for (std::uint64_t round = 1; round <= kDigammaRoundCap; ++round) {
    const Count y = bnb_sample(proposal, rng);
    const double u = rng.uniform();
    const double yd = static_cast<double>(y);
    if (bound * u < (yd + params.r) / (yd + 1.0)) {
      return {y >= kMaxCount ? kMaxCount : y + 1, round};
    }
  }
  throw SamplerError("digamma rejection sampler exceeded its round cap");
}

inline Count digamma_sample(const DigammaParams& params, RngStream& rng) {
  return digamma_sample_counted(params, rng).value;
}

/// Mean number of proposal rounds of the rejection sampler.
inline double digamma_expected_rounds(const DigammaParams& params) {
  return std::max(params.r, 1.0) / (params.theta * harmonic_gap(params.r, params.theta));
}

/// Mean of Digamma(r, theta); exists only for theta > 1.
inline double digamma_mean(const DigammaParams& params) {
  if (!(params.theta > 1.0)) throw DomainError("digamma mean requires theta > 1");
  return params.r / ((params.theta - 1.0) * harmonic_gap(params.r, params.theta));
}

/// Mean of BNB(r, alpha, beta); exists only for beta > 1.
inline double bnb_mean(const BnbParams& params) {
  if (!(params.beta > 1.0)) throw DomainError("BNB mean requires beta > 1");
  return params.r * params.alpha / (params.beta - 1.0);
}

struct LaplaceRoutes {
  double series;      // truncated p.m.f. sum of exp(-t z) pmf(z)
  double quadrature;  // integral representation
  double quadrature_error;
};

inline LaplaceRoutes digamma_laplace_routes(const DigammaParams& params, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("Laplace argument must be >= 0");
  LaplaceRoutes out{1.0, 1.0, 0.0};
  if (t == 0.0) return out;

  out.series =
      sum_geometric_tail([&](Count z) { return digamma_log_pmf(params, z) - t * static_cast<double>(z); },
                         1, std::exp(-t), 1e-16)
          .value;

  const double gap = harmonic_gap(params.r, params.theta);
  const double log_decay = -t;
  auto integrand = [&](double p, double pc) {
    // pc is the signed distance to the nearer endpoint, which gives 1 - p
    // to full precision near p = 1.
    const double one_minus_p = p >= 0.5 ? pc : 1.0 - p;
    if (p <= 0.0 || one_minus_p <= 0.0) return 0.0;
    const double log_ratio = std::log(one_minus_p) - std::log1p(-p * std::exp(log_decay));
    const double bracket = -std::expm1(params.r * log_ratio);
    return bracket / p * std::exp((params.theta - 1.0) * std::log(one_minus_p));
  };
  boost::math::quadrature::tanh_sinh<double> integrator;
  double error = 0.0;
  double l1 = 0.0;
  const double integral = integrator.integrate(integrand, 0.0, 1.0, 1e-14, &error, &l1);
  if (!std::isfinite(integral) || error > 1e-10 * std::max(1.0, l1)) {
    throw QuadratureError("digamma Laplace quadrature did not converge");
  }
  out.quadrature = 1.0 - integral / gap;
  out.quadrature_error = error / gap;
  return out;
}

/// Laplace transform E[exp(-t Z)] of Z ~ Digamma(r, theta). Both the series
/// and the integral form are evaluated; the series value is returned and a
/// failed quadrature is reported as QuadratureError.
inline double digamma_laplace(const DigammaParams& params, double t) {
  return digamma_laplace_routes(params, t).series;
}

}  // namespace bnbp
