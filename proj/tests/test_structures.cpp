#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <gtest/gtest.h>

#include "bnbp/distributions.hpp"
#include "bnbp/enumerate.hpp"
#include "bnbp/serialization.hpp"
#include "bnbp/structures.hpp"

namespace bnbp {
namespace {

FeatureArray make_array(std::size_t n, std::vector<std::vector<Count>> cols) {
  std::vector<History> hs;
  for (auto& c : cols) hs.emplace_back(std::move(c));
  return FeatureArray(n, std::move(hs));
}

TEST(History, Validation) {
  EXPECT_THROW(History({0, 0}), DomainError);
  EXPECT_THROW(History(std::vector<Count>{}), DomainError);
  EXPECT_THROW(History({1, -1}), DomainError);
  EXPECT_EQ(History({2, 0, 3}).total(), 5);
}

TEST(History, OrderIsLexicographic) {
  EXPECT_LT(History({0, 1}), History({1, 0}));
  EXPECT_LT(History({1, 0}), History({1, 2}));
  EXPECT_LT(History({1, 2, 0}), History({2, 0, 0}));
}

TEST(FromArray, Counts) {
  const auto w = make_array(2, {{1, 0}, {1, 0}, {0, 2}});
  const CombStruct m = from_array(w);
  EXPECT_EQ(m.count(History({1, 0})), 2);
  EXPECT_EQ(m.count(History({0, 2})), 1);
  EXPECT_EQ(m.kappa(), 3);
  EXPECT_EQ(from_array(FeatureArray(2)).kappa(), 0);
  EXPECT_EQ(from_array(make_array(2, {{0, 2}, {1, 0}, {1, 0}})), m);
}

TEST(LeftOrder, SortsAscendingAndIsIdempotent) {
  const auto w = make_array(2, {{1, 0}, {0, 1}});
  EXPECT_EQ(left_order(w), make_array(2, {{0, 1}, {1, 0}}));
  const auto single = make_array(3, {{4, 0, 1}});
  EXPECT_EQ(left_order(single), single);
  const auto big = make_array(3, {{2, 0, 1}, {0, 0, 1}, {1, 1, 1}, {0, 3, 0}, {1, 1, 1}});
  EXPECT_EQ(left_order(left_order(big)), left_order(big));
  EXPECT_EQ(left_order(make_array(3, {{1, 1, 1}, {0, 3, 0}, {1, 1, 1}, {2, 0, 1}, {0, 0, 1}})),
            left_order(big));
}

TEST(UniformLabel, SingleOrderAndRoundTrip) {
  RngStream rng(3);
  const CombStruct m(2, {{History({1, 0}), 2}});
  EXPECT_EQ(uniform_label(m, rng), make_array(2, {{1, 0}, {1, 0}}));
  const CombStruct mixed(2, {{History({1, 0}), 2}, {History({0, 4}), 1}, {History({3, 3}), 3}});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(from_array(uniform_label(mixed, rng)), mixed);
}

TEST(UniformLabel, OrdersAreEquallyLikely) {
  RngStream rng(17);
  const CombStruct m(2, {{History({1, 0}), 1}, {History({0, 1}), 1}});
  const int n = 10000;
  int first = 0;
  for (int i = 0; i < n; ++i) first += uniform_label(m, rng).column(0) == History({0, 1}) ? 1 : 0;
  EXPECT_NEAR(first, n / 2.0, 3.0 * std::sqrt(n * 0.25));

  // three distinguishable orders of {a, a, b}
  const CombStruct three(1, {{History({1}), 2}, {History({2}), 1}});
  std::map<std::size_t, int> where;
  for (int i = 0; i < 3 * n; ++i) {
    const auto w = uniform_label(three, rng);
    for (std::size_t j = 0; j < 3; ++j) {
      if (w.at(0, j) == 2) ++where[j];
    }
  }
  for (const auto& [j, k] : where) EXPECT_NEAR(k, n, 3.0 * std::sqrt(3.0 * n * 2.0 / 9.0));
}

TEST(OrderingCount, Values) {
  EXPECT_NEAR(ordering_count(CombStruct(1, {{History({1}), 2}, {History({2}), 1}})), std::log(3.0), 1e-14);
  EXPECT_EQ(ordering_count(CombStruct(2)), 0.0);
  CombStruct::Counts ones;
  for (Count s = 1; s <= 5; ++s) ones[History({s})] = 1;
  EXPECT_NEAR(ordering_count(CombStruct(1, ones)), std::log(120.0), 1e-13);
}

TEST(Project, Identities) {
  EXPECT_EQ(project(CombStruct(2, {{History({1, 0}), 1}, {History({1, 2}), 1}})),
            CombStruct(1, {{History({1}), 2}}));
  EXPECT_EQ(project(CombStruct(2, {{History({0, 3}), 1}})), CombStruct(1));
  EXPECT_THROW(project(CombStruct(1)), DomainError);
  for_each_structure(3, 3, 3, [](const CombStruct& m) { EXPECT_LE(project(m).kappa(), m.kappa()); });
}

TEST(LogPmf, HandValues) {
  const Hyperparams one(1.0, 1.0, 1.0);
  EXPECT_NEAR(log_pmf_struct(CombStruct(1, {{History({1}), 1}}), one), -1.0 - std::log(2.0), 1e-14);
  const Hyperparams hp(1.0, 2.0, 1.0);
  const auto w = make_array(1, {{2}});
  EXPECT_NEAR(log_pmf_array(w, hp), std::log(2.0 * std::exp(-1.0) / 12.0), 1e-14);
}

TEST(LogPmf, EmptyStructure) {
  for (double r : {0.5, 1.0, 3.0}) {
    for (double c : {0.3, 1.0, 4.0}) {
      for (std::size_t n : {1u, 2u, 7u}) {
        const Hyperparams hp(r, c, 2.5);
        const double expect = -c * 2.5 * (boost::math::digamma(c + static_cast<double>(n) * r) - boost::math::digamma(c));
        EXPECT_NEAR(log_pmf_struct(CombStruct(n), hp), expect, 1e-12);
        EXPECT_NEAR(log_pmf_array(FeatureArray(n), hp), expect, 1e-12);
      }
    }
  }
}

TEST(LogPmf, ArrayDiffersByOrderingCount) {
  const Hyperparams hp(1.5, 0.7, 1.3);
  RngStream rng(5);
  for_each_structure(2, 3, 3, [&](const CombStruct& m) {
    const FeatureArray w = uniform_label(m, rng);
    EXPECT_NEAR(log_pmf_array(w, hp), log_pmf_struct(m, hp) - ordering_count(m), 1e-12);
  });
}

TEST(LogPmf, RejectsFixedAtoms) {
  const Hyperparams hp(1.0, 1.0, 1.0, {0.5});
  EXPECT_THROW(log_pmf_struct(CombStruct(1), hp), DomainError);
  EXPECT_THROW(log_pmf_array(FeatureArray(1), hp), DomainError);
}

// Columns form a Poisson process over histories with intensity
// mu(h) = cT exp(log_column_factor(h)), so the mass of all structures with
// kappa <= K and every history inside a set A is sum_{k<=K} e^{-L} mu(A)^k / k!.
double truncated_mass(double total_intensity, double set_intensity, Count max_kappa) {
  double out = 0.0;
  for (Count k = 0; k <= max_kappa; ++k) {
    out += std::exp(-total_intensity + static_cast<double>(k) * std::log(set_intensity) -
                    std::lgamma(static_cast<double>(k) + 1.0));
  }
  return out;
}

TEST(LogPmf, NormalizesByEnumeration) {
  struct Case {
    std::size_t n;
    Count max_total;
    Count max_kappa;
    Hyperparams hp;
  };
  for (const Case& cs : {Case{1, 60, 4, Hyperparams(1.0, 3.0, 0.2)}, Case{2, 6, 4, Hyperparams(0.5, 4.0, 0.3)},
                         Case{1, 30, 3, Hyperparams(2.0, 0.5, 1.0)}}) {
    double total = 0.0;
    for_each_structure(cs.n, cs.max_total, cs.max_kappa,
                       [&](const CombStruct& m) { total += std::exp(log_pmf_struct(m, cs.hp)); });
    double mu = 0.0;
    for (const auto& h : enumerate_histories(cs.n, cs.max_total)) {
      mu += cs.hp.c * cs.hp.T * std::exp(log_column_factor(h, cs.hp.r, cs.hp.c));
    }
    EXPECT_NEAR(total, truncated_mass(expected_kappa(cs.n, cs.hp), mu, cs.max_kappa), 1e-12);
  }
}

// The column intensity integrates to the Poisson mean of kappa.
TEST(LogPmf, ColumnIntensitySumsToExpectedKappa) {
  const Hyperparams hp(0.5, 4.0, 0.3);
  double mu = 0.0;
  for (const auto& h : enumerate_histories(2, 300)) mu += hp.c * hp.T * std::exp(log_column_factor(h, hp.r, hp.c));
  // remaining column-total tail decays like s^{-c-1}
  EXPECT_NEAR(mu, expected_kappa(2, hp), 1e-8);
  // n = 1 columns are Digamma(r, c) masses scaled by cT xi
  const Hyperparams one(1.3, 2.2, 1.0);
  for (Count z = 1; z < 50; ++z) {
    EXPECT_NEAR(std::log(one.c * one.T) + log_column_factor(History({z}), one.r, one.c),
                std::log(expected_kappa(1, one)) + digamma_log_pmf(DigammaParams(one.r, one.c), z), 1e-12);
  }
}

TEST(LogPmf, RowExchangeableExactly) {
  const Hyperparams hp(0.8, 1.7, 2.0);
  const std::vector<std::vector<std::size_t>> perms = {{1, 0, 2}, {2, 1, 0}, {1, 2, 0}, {2, 0, 1}};
  RngStream rng(8);
  for_each_structure(3, 4, 2, [&](const CombStruct& m) {
    const FeatureArray w = uniform_label(m, rng);
    for (const auto& p : perms) {
      const FeatureArray pw = w.permute_rows(p);
      EXPECT_NEAR(log_pmf_struct(from_array(pw), hp), log_pmf_struct(m, hp), 1e-12);
      EXPECT_NEAR(log_pmf_array(pw, hp), log_pmf_array(w, hp), 1e-12);
    }
  });
}

// Sums the stage-2 p.m.f. over every extension of a stage-1 structure with
// distinct histories: each existing column gains a second entry in 0..zmax
// and up to max_new columns of the form (0, v) appear.
double extension_mass(const CombStruct& m, const Hyperparams& hp, Count zmax, Count max_new) {
  std::vector<History> base;
  for (const auto& [h, k] : m.counts()) {
    EXPECT_EQ(k, 1);
    base.push_back(h);
  }
  std::vector<Count> ext(base.size(), 0);
  double total = 0.0;
  std::function<void(std::size_t)> over_existing = [&](std::size_t j) {
    if (j == base.size()) {
      CombStruct::Counts fixed;
      for (std::size_t k = 0; k < base.size(); ++k) fixed[History({base[k][0], ext[k]})] = 1;
      CombStruct::Counts fresh;
      std::function<void(Count, Count)> over_new = [&](Count first, Count left) {
        CombStruct::Counts all = fixed;
        for (const auto& [h, k] : fresh) all[h] += k;
        total += std::exp(log_pmf_struct(CombStruct(2, all), hp));
        if (left == 0) return;
        for (Count v = first; v <= zmax; ++v) {
          ++fresh[History({0, v})];
          over_new(v, left - 1);
          if (--fresh[History({0, v})] == 0) fresh.erase(History({0, v}));
        }
      };
      over_new(1, max_new);
      return;
    }
    for (Count v = 0; v <= zmax; ++v) {
      ext[j] = v;
      over_existing(j + 1);
    }
  };
  over_existing(0);
  return total;
}

// Given stage 1, each old column gains BNB(r, s, c + r) servings and a
// Poisson(cT [psi(c + 2r) - psi(c + r)]) number of Digamma(r, c + r) columns
// appears, so the truncated extension mass is known in closed form.
TEST(LogPmf, ProjectionConsistency) {
  const Hyperparams hp(1.0, 3.0, 0.2);
  const Count zmax = 20;
  const Count max_new = 3;
  const double cn = hp.c + hp.r;
  const DigammaParams fresh(hp.r, cn);
  double fresh_cdf = 0.0;
  for (Count v = 1; v <= zmax; ++v) fresh_cdf += std::exp(digamma_log_pmf(fresh, v));
  const double lambda = hp.c * hp.T * harmonic_gap(hp.r, cn);
  for (const CombStruct& m : {CombStruct(1), CombStruct(1, {{History({2}), 1}}),
                              CombStruct(1, {{History({1}), 1}, {History({3}), 1}})}) {
    double expect = std::exp(log_pmf_struct(m, hp)) * truncated_mass(lambda, lambda * fresh_cdf, max_new);
    for (const auto& [h, k] : m.counts()) {
      double cdf = 0.0;
      for (Count v = 0; v <= zmax; ++v) cdf += std::exp(bnb_log_pmf(BnbParams(hp.r, static_cast<double>(h[0]), cn), v));
      expect *= cdf;
    }
    const double mass = extension_mass(m, hp, zmax, max_new);
    EXPECT_NEAR(mass / expect, 1.0, 1e-11);
  }
}

TEST(Serialization, RoundTrip) {
  const auto w = make_array(2, {{1, 0}, {0, 2}, {1, 0}});
  EXPECT_EQ(to_json(w).dump(), R"({"columns":[[1,0],[0,2],[1,0]],"n":2})");
  EXPECT_EQ(array_from_json(parse_record(to_json(w).dump())), w);
  const CombStruct m = from_array(w);
  EXPECT_EQ(to_json(m).dump(), R"({"counts":[[[0,2],1],[[1,0],2]],"n":2})");
  EXPECT_EQ(struct_from_json(parse_record(to_json(m).dump())), m);
  EXPECT_EQ(array_from_json(parse_record(R"({"n":3,"columns":[]})")), FeatureArray(3));
}

TEST(Serialization, RejectsMalformed) {
  EXPECT_THROW(parse_record("{not json"), FormatError);
  EXPECT_THROW(array_from_json(parse_record(R"({"columns":[[1]]})")), FormatError);
  EXPECT_THROW(array_from_json(parse_record(R"({"n":2,"columns":[[0,0]]})")), FormatError);
  EXPECT_THROW(array_from_json(parse_record(R"({"n":2,"columns":[[1]]})")), FormatError);
  EXPECT_THROW(struct_from_json(parse_record(R"({"n":1,"counts":[[[1],0]]})")), FormatError);
  EXPECT_THROW(struct_from_json(parse_record(R"({"n":1,"counts":[[[1],1],[[1],2]]})")), FormatError);
}

}  // namespace
}  // namespace bnbp
