#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "bnbp/distributions.hpp"
#include "bnbp/stats.hpp"

namespace bnbp {
namespace {

constexpr double kSignificance = 1e-3;

using stats::continuous_gof;
using stats::discrete_gof;

//------------------------------------------------------------------------------
// Parameter validation
//------------------------------------------------------------------------------

TEST(Params, Validation) {
  EXPECT_THROW(DigammaParams(0.0, 1.0), DomainError);
  EXPECT_THROW(DigammaParams(1.0, -2.0), DomainError);
  EXPECT_THROW(BnbParams(1.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(NbParams(1.0, 0.0), DomainError);
  EXPECT_THROW(NbParams(1.0, 1.5), DomainError);
  EXPECT_NO_THROW(NbParams(1.0, 1.0));
}

//------------------------------------------------------------------------------
// Digamma p.m.f.
//------------------------------------------------------------------------------

TEST(DigammaPmf, ClosedForms) {
  const DigammaParams d11(1.0, 1.0), d12(1.0, 2.0);
  EXPECT_NEAR(digamma_log_pmf(d11, 1), std::log(0.5), 1e-14);
  EXPECT_NEAR(digamma_log_pmf(d12, 1), std::log(2.0 / 3.0), 1e-14);
  for (Count z = 1; z < 500; z += 7) {
    const double zd = static_cast<double>(z);
    EXPECT_NEAR(digamma_log_pmf(d11, z), -std::log(zd * (zd + 1.0)), 1e-10);
    EXPECT_NEAR(digamma_log_pmf(d12, z), std::log(4.0 / (zd * (zd + 1.0) * (zd + 2.0))), 1e-10);
  }
  EXPECT_THROW(digamma_log_pmf(d11, 0), DomainError);
}

TEST(DigammaPmf, Normalization) {
  for (double r : {0.5, 1.0, 2.0, 5.0, 10.0}) {
    for (double theta : {0.5, 1.0, 2.0, 5.0, 10.0}) {
      EXPECT_NEAR(digamma_total_mass(DigammaParams(r, theta)).value, 1.0, 1e-10)
          << "r=" << r << " theta=" << theta;
    }
  }
}

TEST(DigammaPmf, RelationToBnb) {
  for (double r : {0.3, 1.0, 2.0, 4.5, 9.0}) {
    for (double theta : {0.4, 1.0, 2.5, 6.0, 15.0}) {
      const DigammaParams d(r, theta);
      const BnbParams b(r, 1.0, theta);
      const double scale = 1.0 / (theta * harmonic_gap(r, theta));
      for (Count z = 1; z <= 200; ++z) {
        const double w = static_cast<double>(z - 1);
        const double rhs = scale * (w + r) / (w + 1.0) * std::exp(bnb_log_pmf(b, z - 1));
        EXPECT_NEAR(std::exp(digamma_log_pmf(d, z)), rhs, 1e-10);
      }
    }
  }
}

TEST(DigammaPmf, FiniteForLargeArguments) {
  for (double r : {1e-3, 1.0, 1e3}) {
    for (double theta : {1e-3, 1.0, 1e3}) {
      EXPECT_TRUE(std::isfinite(digamma_log_pmf(DigammaParams(r, theta), 1'000'000)));
      EXPECT_TRUE(std::isfinite(bnb_log_pmf(BnbParams(r, theta, 1e3), 1'000'000)));
      EXPECT_TRUE(std::isfinite(nb_log_pmf(NbParams(r, 0.999), 1'000'000)));
    }
  }
}

TEST(DigammaMean, Values) {
  EXPECT_NEAR(digamma_mean(DigammaParams(1.0, 2.0)), 2.0, 1e-12);
  EXPECT_NEAR(digamma_mean(DigammaParams(1.0, 3.0)), 1.5, 1e-12);
  EXPECT_THROW(digamma_mean(DigammaParams(1.0, 1.0)), DomainError);
  EXPECT_THROW(digamma_mean(DigammaParams(1.0, 0.5)), DomainError);
}

TEST(DigammaMean, MatchesSeries) {
  for (const auto& [r, theta] : std::vector<std::pair<double, double>>{{2.5, 4.0}, {0.7, 3.0}, {6.0, 2.5}}) {
    const DigammaParams d(r, theta);
    const double log_norm = std::log(harmonic_gap(r, theta));
    const auto series = sum_polynomial_tail(
        [&](double z) { return std::log(z) + detail::digamma_log_pmf_real(d, log_norm, z); },
        [&](double z) {
          return digamma_fn(r + z) - digamma_fn(r + theta + z);
        },
        1);
    EXPECT_NEAR(digamma_mean(d), series.value, 1e-8);
  }
}

//------------------------------------------------------------------------------
// BNB and NB p.m.f.s
//------------------------------------------------------------------------------

TEST(BnbPmf, ClosedForms) {
  const BnbParams b(1.0, 1.0, 1.0);
  EXPECT_NEAR(bnb_log_pmf(b, 0), std::log(0.5), 1e-14);
  for (Count z = 0; z < 300; z += 11) {
    const double zd = static_cast<double>(z);
    EXPECT_NEAR(bnb_log_pmf(b, z), -std::log((zd + 1.0) * (zd + 2.0)), 1e-10);
  }
  const BnbParams g(2.5, 0.7, 1.9);
  EXPECT_NEAR(bnb_log_pmf(g, 0), log_beta_fn(0.7, 2.5 + 1.9) - log_beta_fn(0.7, 1.9), 1e-14);
  EXPECT_THROW(bnb_log_pmf(b, -1), DomainError);
}

TEST(BnbPmf, Normalization) {
  for (double r : {0.5, 1.0, 3.0}) {
    for (double alpha : {0.5, 1.0, 4.0}) {
      for (double beta : {0.5, 1.0, 2.5, 8.0}) {
        EXPECT_NEAR(bnb_total_mass(BnbParams(r, alpha, beta)).value, 1.0, 1e-10)
            << r << " " << alpha << " " << beta;
      }
    }
  }
}

// The BNB marginal of a Beta-mixed NB, integrated over p by quadrature.
TEST(BnbPmf, BetaMixtureOfNegativeBinomials) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (const auto& [r, a, b] : std::vector<std::tuple<double, double, double>>{
           {1.0, 1.0, 1.0}, {2.0, 0.7, 3.0}, {0.5, 2.0, 1.5}, {3.0, 4.0, 6.0}}) {
    for (Count z : {0, 1, 2, 5, 13}) {
      const double integral = integrator.integrate(
          [&](double p) {
            if (p <= 0.0 || p >= 1.0) return 0.0;
            const double log_nb = log_rising_factorial(r, z) - log_factorial(z) +
                                  static_cast<double>(z) * std::log(p) + r * std::log1p(-p);
            const double log_beta_pdf =
                (a - 1.0) * std::log(p) + (b - 1.0) * std::log1p(-p) - log_beta_fn(a, b);
            return std::exp(log_nb + log_beta_pdf);
          },
          0.0, 1.0);
      EXPECT_NEAR(std::exp(bnb_log_pmf(BnbParams(r, a, b), z)), integral, 1e-8);
    }
  }
}

TEST(NbPmf, Values) {
  const NbParams geo(1.0, 0.5);
  EXPECT_NEAR(std::exp(nb_log_pmf(geo, 2)), 0.125, 1e-15);
  for (Count z = 0; z < 40; ++z) {
    EXPECT_NEAR(nb_log_pmf(geo, z), (static_cast<double>(z) + 1.0) * std::log(0.5), 1e-12);
  }
  const NbParams g(3.7, 0.25);
  EXPECT_NEAR(nb_log_pmf(g, 0), 3.7 * std::log(0.75), 1e-15);
  EXPECT_THROW(nb_log_pmf(NbParams(1.0, 1.0), 0), DomainError);
  for (double p : {0.01, 0.3, 0.9, 0.99}) {
    for (double r : {0.2, 1.0, 7.0}) {
      EXPECT_NEAR(nb_total_mass(NbParams(r, p)).value, 1.0, 1e-10);
    }
  }
}

//------------------------------------------------------------------------------
// Laplace transform
//------------------------------------------------------------------------------

TEST(DigammaLaplace, Values) {
  EXPECT_EQ(digamma_laplace(DigammaParams(2.0, 3.0), 0.0), 1.0);
  // sum_z e^{-z} / (z (z+1)) = 1 - log(1 - x) + log(1 - x) / x at x = e^{-1}
  const double x = std::exp(-1.0);
  const double closed = 1.0 - std::log1p(-x) + std::log1p(-x) / x;
  EXPECT_NEAR(digamma_laplace(DigammaParams(1.0, 1.0), 1.0), closed, 1e-13);
  EXPECT_NEAR(closed, 0.21186683251556652, 1e-15);
  // mpmath series at 30 digits
  EXPECT_NEAR(digamma_laplace(DigammaParams(2.0, 0.5), 0.3), 0.36093240179563528, 1e-12);
  EXPECT_THROW(digamma_laplace(DigammaParams(1.0, 1.0), -1.0), DomainError);
}

TEST(DigammaLaplace, SeriesAndIntegralAgree) {
  for (double r : {0.4, 1.0, 3.0}) {
    for (double theta : {0.5, 1.0, 4.0}) {
      for (double t : {0.01, 0.2, 1.0, 3.0}) {
        const auto routes = digamma_laplace_routes(DigammaParams(r, theta), t);
        EXPECT_NEAR(routes.series, routes.quadrature, 1e-8) << r << " " << theta << " " << t;
        EXPECT_GT(routes.series, 0.0);
        EXPECT_LE(routes.series, 1.0);
      }
    }
  }
}

//------------------------------------------------------------------------------
// Samplers
//------------------------------------------------------------------------------

TEST(BaseSamplers, Poisson) {
  for (double mean : {0.3, 4.0, 9.99, 10.0, 37.5, 1200.0}) {
    RngStream rng(101, static_cast<std::uint64_t>(mean * 100));
    std::vector<Count> draws(100000);
    for (auto& d : draws) d = sample_poisson(mean, rng);
    const auto gof = discrete_gof(
        draws, [&](Count k) { return -mean + k * std::log(mean) - log_factorial(k); }, 0);
    EXPECT_GT(gof.p_value, kSignificance) << "mean=" << mean;
  }
  RngStream rng(1);
  EXPECT_EQ(sample_poisson(0.0, rng), 0);
  EXPECT_THROW(sample_poisson(-1.0, rng), DomainError);
}

TEST(BaseSamplers, GammaAndBeta) {
  for (double shape : {0.2, 1.0, 3.5}) {
    RngStream rng(7, static_cast<std::uint64_t>(shape * 10));
    std::vector<double> draws(100000);
    for (auto& x : draws) x = sample_gamma(shape, 2.0, rng);
    const auto gof = continuous_gof(draws, [&](double x) { return boost::math::gamma_p(shape, 2.0 * x); });
    EXPECT_GT(gof.p_value, kSignificance) << "shape=" << shape;
  }
  for (const auto& [a, b] : std::vector<std::pair<double, double>>{{1.0, 1.0}, {0.5, 3.0}, {4.0, 0.7}}) {
    RngStream rng(8, static_cast<std::uint64_t>(a * 100 + b));
    std::vector<double> draws(100000);
    for (auto& x : draws) x = sample_beta(a, b, rng);
    const auto gof = continuous_gof(draws, [&](double x) { return boost::math::ibeta(a, b, x); });
    EXPECT_GT(gof.p_value, kSignificance) << a << " " << b;
  }
}

TEST(NbSampler, MatchesPmf) {
  for (const auto& [r, p] : std::vector<std::pair<double, double>>{{1.0, 0.5}, {0.4, 0.8}, {6.0, 0.3}}) {
    const NbParams params(r, p);
    RngStream rng(21);
    std::vector<Count> draws(100000);
    for (auto& d : draws) d = nb_sample(params, rng);
    EXPECT_GT(discrete_gof(draws, [&](Count z) { return nb_log_pmf(params, z); }, 0).p_value, kSignificance);
  }
}

TEST(BnbSampler, MatchesPmf) {
  for (const auto& [r, a, b] : std::vector<std::tuple<double, double, double>>{
           {1.0, 1.0, 1.0}, {2.0, 1.0, 3.0}, {0.5, 0.3, 0.8}, {4.0, 5.0, 2.0}}) {
    const BnbParams params(r, a, b);
    RngStream rng(33);
    std::vector<Count> draws(100000);
    for (auto& d : draws) {
      d = bnb_sample(params, rng);
      ASSERT_GE(d, 0);
    }
    EXPECT_GT(discrete_gof(draws, [&](Count z) { return bnb_log_pmf(params, z); }, 0).p_value, kSignificance);
  }
}

TEST(BnbSampler, Mean) {
  const BnbParams params(2.0, 1.0, 3.0);
  EXPECT_NEAR(bnb_mean(params), 1.0, 1e-15);
  // mean identity against the p.m.f. series
  const double log_norm = log_beta_fn(1.0, 3.0);
  const auto series = sum_polynomial_tail(
      [&](double z) { return std::log(z) + detail::bnb_log_pmf_real(params, log_norm, z); },
      [&](double z) {
        return digamma_fn(2.0 + z) - digamma_fn(z) + digamma_fn(z + 1.0) - digamma_fn(z + 6.0);
      },
      1);
  EXPECT_NEAR(series.value, 1.0, 1e-8);

  RngStream rng(5);
  std::vector<double> xs(100000);
  for (auto& x : xs) x = static_cast<double>(bnb_sample(params, rng));
  const auto est = stats::mean_iid(xs);
  EXPECT_LT(std::fabs(est.mean - 1.0), 3.0 * est.std_error);
}

TEST(DigammaSampler, MatchesPmf) {
  for (const auto& [r, theta] : std::vector<std::pair<double, double>>{{1.0, 1.0}, {2.0, 1.0}, {0.5, 3.0}, {3.0, 0.6}}) {
    const DigammaParams params(r, theta);
    RngStream rng(77, static_cast<std::uint64_t>(r * 10 + theta));
    std::vector<Count> draws(100000);
    for (auto& d : draws) {
      d = digamma_sample(params, rng);
      ASSERT_GE(d, 1);
    }
    EXPECT_GT(discrete_gof(draws, [&](Count z) { return digamma_log_pmf(params, z); }, 1).p_value,
              kSignificance)
        << r << " " << theta;
  }
}

TEST(DigammaSampler, ExpectedRounds) {
  const DigammaParams params(2.0, 1.0);
  EXPECT_NEAR(digamma_expected_rounds(params), 4.0 / 3.0, 1e-14);
  RngStream rng(3);
  std::vector<double> rounds(100000);
  for (auto& x : rounds) x = static_cast<double>(digamma_sample_counted(params, rng).rounds);
  const auto est = stats::mean_iid(rounds);
  EXPECT_LT(std::fabs(est.mean - 4.0 / 3.0), 3.0 * est.std_error);
  // expected rounds are bounded by max(r, 1/r)
  for (double r : {0.2, 0.9, 1.0, 3.0, 12.0}) {
    for (double theta : {0.1, 1.0, 10.0}) {
      EXPECT_LT(digamma_expected_rounds(DigammaParams(r, theta)), std::max(r, 1.0 / r) + 1e-12);
    }
  }
}

TEST(Samplers, Deterministic) {
  RngStream a(99), b(99);
  const DigammaParams d(1.3, 0.8);
  const BnbParams bb(0.7, 2.0, 1.1);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(digamma_sample(d, a), digamma_sample(d, b));
    ASSERT_EQ(bnb_sample(bb, a), bnb_sample(bb, b));
    ASSERT_EQ(sample_gamma(0.3, 1.0, a), sample_gamma(0.3, 1.0, b));
  }
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace bnbp
