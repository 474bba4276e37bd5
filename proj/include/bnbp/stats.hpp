#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace bnbp::stats {

/// Upper tail P(X >= statistic) of a chi-square variable with `dof` degrees.
inline double chi_square_sf(double statistic, double dof) {
  if (dof <= 0.0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  std::size_t cells = 0;
};

/// Pearson goodness of fit. `observed[k]` and `probability[k]` describe
/// cells whose probabilities sum to one; cells with expected count below
/// `min_expected` are pooled into one remainder cell before testing.
inline ChiSquareResult chi_square_gof(std::span<const double> observed,
                                      std::span<const double> probability,
                                      double min_expected = 5.0) {
  if (observed.size() != probability.size()) throw std::invalid_argument("cell count mismatch");
  double total = 0.0;
  for (double o : observed) total += o;
  ChiSquareResult out;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double expected = total * probability[k];
    if (expected < min_expected) {
      pooled_obs += observed[k];
      pooled_exp += expected;
      continue;
    }
    out.statistic += (observed[k] - expected) * (observed[k] - expected) / expected;
    ++out.cells;
  }
  if (pooled_exp > 0.0) {
    out.statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++out.cells;
  } else if (pooled_obs > 0.0) {
    out.statistic = INFINITY;
  }
  out.dof = static_cast<double>(out.cells) - 1.0;
  out.p_value = std::isfinite(out.statistic) ? chi_square_sf(out.statistic, out.dof) : 0.0;
  return out;
}

/// Two-sample chi-square homogeneity test between frequency tables keyed
/// by arbitrary ordered keys. Keys whose pooled count is below `min_pooled`
/// are merged into one remainder cell.
template <class Key>
ChiSquareResult chi_square_two_sample(const std::map<Key, double>& a, const std::map<Key, double>& b,
                                      double min_pooled = 10.0) {
  double na = 0.0, nb = 0.0;
  for (const auto& [k, v] : a) na += v;
  for (const auto& [k, v] : b) nb += v;
  std::map<Key, std::pair<double, double>> cells;
  for (const auto& [k, v] : a) cells[k].first += v;
  for (const auto& [k, v] : b) cells[k].second += v;

  std::vector<std::pair<double, double>> kept;
  std::pair<double, double> rest{0.0, 0.0};
  for (const auto& [k, ab] : cells) {
    if (ab.first + ab.second < min_pooled) {
      rest.first += ab.first;
      rest.second += ab.second;
    } else {
      kept.push_back(ab);
    }
  }
  if (rest.first + rest.second > 0.0) kept.push_back(rest);

  ChiSquareResult out;
  const double n = na + nb;
  for (const auto& [x, y] : kept) {
    const double pooled = x + y;
    const double ea = na * pooled / n;
    const double eb = nb * pooled / n;
    out.statistic += (x - ea) * (x - ea) / ea + (y - eb) * (y - eb) / eb;
  }
  out.cells = kept.size();
  out.dof = static_cast<double>(kept.size()) - 1.0;
  out.p_value = chi_square_sf(out.statistic, out.dof);
  return out;
}

/// Chi-square GOF of integer draws against a unimodal log p.m.f. on
/// {start, start + 1, ...}. Values with expected count >= 5 get their own
/// cell; everything else, in either tail, shares one remainder cell.
template <class LogPmf>
ChiSquareResult discrete_gof(std::span<const std::int64_t> draws, LogPmf&& log_pmf, std::int64_t start) {
  const double n = static_cast<double>(draws.size());
  std::map<std::int64_t, std::size_t> index;
  std::vector<double> probs;
  double covered = 0.0;
  for (std::int64_t z = start; z < start + 10'000'000; ++z) {
    const double p = std::exp(log_pmf(z));
    if (n * p >= 5.0) {
      index[z] = probs.size();
      probs.push_back(p);
      covered += p;
    } else if (!probs.empty()) {
      break;
    }
  }
  std::vector<double> observed(probs.size() + 1, 0.0);
  bool impossible = false;
  for (std::int64_t d : draws) {
    impossible = impossible || d < start;
    const auto it = index.find(d);
    observed[it == index.end() ? probs.size() : it->second] += 1.0;
  }
  probs.push_back(std::max(0.0, 1.0 - covered));
  ChiSquareResult out = chi_square_gof(observed, probs, 0.0);
  if (impossible) out = {INFINITY, out.dof, 0.0, out.cells};
  return out;
}

/// Equiprobable-bin chi-square GOF of continuous draws given their CDF.
template <class Cdf>
ChiSquareResult continuous_gof(std::span<const double> draws, Cdf&& cdf, int bins = 50) {
  std::vector<double> observed(static_cast<std::size_t>(bins), 0.0);
  for (double x : draws) {
    const int b = std::clamp(static_cast<int>(cdf(x) * bins), 0, bins - 1);
    observed[static_cast<std::size_t>(b)] += 1.0;
  }
  std::vector<double> probs(static_cast<std::size_t>(bins), 1.0 / bins);
  return chi_square_gof(observed, probs, 0.0);
}

/// Total variation distance between two normalized tables.
template <class Key>
double total_variation(const std::map<Key, double>& p, const std::map<Key, double>& q) {
  std::map<Key, double> diff = p;
  for (const auto& [k, v] : q) diff[k] -= v;
  double tv = 0.0;
  for (const auto& [k, v] : diff) tv += std::fabs(v);
  return 0.5 * tv;
}

template <class Key>
std::map<Key, double> normalized(const std::map<Key, double>& counts) {
  double total = 0.0;
  for (const auto& [k, v] : counts) total += v;
  std::map<Key, double> out;
  for (const auto& [k, v] : counts) out[k] = v / total;
  return out;
}

struct MeanEstimate {
  double mean = 0.0;
  double variance = 0.0;   // sample variance of the observations
  double std_error = 0.0;  // standard error of the mean
};

/// Mean and its standard error for independent observations.
inline MeanEstimate mean_iid(std::span<const double> xs) {
  MeanEstimate out;
  const auto n = static_cast<double>(xs.size());
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= n;
  for (double x : xs) out.variance += (x - out.mean) * (x - out.mean);
  out.variance = xs.size() > 1 ? out.variance / (n - 1.0) : 0.0;
  out.std_error = std::sqrt(out.variance / n);
  return out;
}

/// Mean with a batch-means standard error, for autocorrelated MCMC output.
inline MeanEstimate mean_batched(std::span<const double> xs, std::size_t batches = 50) {
  MeanEstimate out = mean_iid(xs);
  const std::size_t size = xs.size() / batches;
  if (size < 2) return out;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * size; i < (b + 1) * size; ++i) s += xs[i];
    means.push_back(s / static_cast<double>(size));
  }
  const MeanEstimate over_batches = mean_iid(means);
  out.std_error = over_batches.std_error;
  return out;
}

/// |a - b| measured in combined standard errors.
inline double z_score(const MeanEstimate& a, const MeanEstimate& b) {
  const double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  if (se == 0.0) return a.mean == b.mean ? 0.0 : INFINITY;
  return std::fabs(a.mean - b.mean) / se;
}

}  // namespace bnbp::stats
