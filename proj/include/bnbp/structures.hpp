#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bnbp/numerics.hpp"
#include "bnbp/rng.hpp"

namespace bnbp {

/// Multiplicities one feature exhibits across n rows; never all zero.
///
/// Comparison is lexicographic on the raw entries, which is the
/// left-ordering relation: h < h' when the first differing entry of h is
/// the smaller one.
class History {
 public:
  explicit History(std::vector<Count> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw DomainError("history must have at least one entry");
    for (Count v : entries_) {
      if (v < 0) throw DomainError("history entries must be non-negative");
      total_ += v;
    }
    if (total_ == 0) throw DomainError("history must not be all zero");
  }
  History(std::initializer_list<Count> entries) : History(std::vector<Count>(entries)) {}

  std::size_t size() const { return entries_.size(); }
  Count operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<Count>& entries() const { return entries_; }
  /// s(h), the total multiplicity.
  Count total() const { return total_; }

  friend bool operator==(const History& a, const History& b) { return a.entries_ == b.entries_; }
  friend std::strong_ordering operator<=>(const History& a, const History& b) {
    return a.entries_ <=> b.entries_;
  }

 private:
  std::vector<Count> entries_;
  Count total_ = 0;
};

/// Counts M_h of features per history at stage n.
class CombStruct {
 public:
  using Counts = std::map<History, Count>;

  explicit CombStruct(std::size_t n, Counts counts = {}) : n_(n), counts_(std::move(counts)) {
    if (n_ == 0) throw DomainError("structure needs n >= 1");
    for (const auto& [h, m] : counts_) {
      if (h.size() != n_) throw DomainError("history length differs from n");
      if (m < 1) throw DomainError("stored multiplicities must be positive");
      kappa_ += m;
    }
  }

  std::size_t n() const { return n_; }
  const Counts& counts() const { return counts_; }
  Count kappa() const { return kappa_; }
  Count count(const History& h) const {
    const auto it = counts_.find(h);
    return it == counts_.end() ? 0 : it->second;
  }

  friend bool operator==(const CombStruct&, const CombStruct&) = default;
  friend auto operator<=>(const CombStruct& a, const CombStruct& b) {
    if (auto cmp = a.n_ <=> b.n_; cmp != 0) return cmp;
    return a.counts_ <=> b.counts_;
  }

 private:
  std::size_t n_;
  Counts counts_;
  Count kappa_ = 0;
};

/// Labeled n x kappa array stored column by column. n = 0 is allowed only
/// with no columns; it is the starting point of the sequential process.
class FeatureArray {
 public:
  explicit FeatureArray(std::size_t n, std::vector<History> columns = {})
      : n_(n), columns_(std::move(columns)) {
    if (n_ == 0 && !columns_.empty()) throw DomainError("array with n = 0 cannot have columns");
    for (const auto& h : columns_) {
      if (h.size() != n_) throw DomainError("column length differs from n");
    }
  }

  std::size_t n() const { return n_; }
  std::size_t kappa() const { return columns_.size(); }
  const std::vector<History>& columns() const { return columns_; }
  const History& column(std::size_t j) const { return columns_.at(j); }
  Count at(std::size_t i, std::size_t j) const { return columns_.at(j)[i]; }

  Count total() const {
    Count s = 0;
    for (const auto& h : columns_) s += h.total();
    return s;
  }
  /// Number of nonzero entries in row i.
  std::size_t row_features(std::size_t i) const {
    std::size_t k = 0;
    for (const auto& h : columns_) k += h[i] > 0 ? 1 : 0;
    return k;
  }

  /// Same columns with rows reordered: row i of the result is row perm[i].
  FeatureArray permute_rows(const std::vector<std::size_t>& perm) const {
    if (perm.size() != n_) throw DomainError("row permutation has the wrong length");
    std::vector<History> out;
    out.reserve(columns_.size());
    for (const auto& h : columns_) {
      std::vector<Count> e(n_);
      for (std::size_t i = 0; i < n_; ++i) e[i] = h[perm[i]];
      out.emplace_back(std::move(e));
    }
    return FeatureArray(n_, std::move(out));
  }

  // In-place edits used by the samplers; each keeps the column-length invariant.
  void set_column(std::size_t j, History h) {
    if (h.size() != n_) throw DomainError("column length differs from n");
    columns_.at(j) = std::move(h);
  }
  void insert_column(std::size_t pos, History h) {
    if (h.size() != n_) throw DomainError("column length differs from n");
    if (pos > columns_.size()) throw DomainError("column position out of range");
    columns_.insert(columns_.begin() + static_cast<std::ptrdiff_t>(pos), std::move(h));
  }
  void erase_column(std::size_t j) { columns_.erase(columns_.begin() + static_cast<std::ptrdiff_t>(j)); }
  void permute_columns(const std::vector<std::size_t>& order) {
    if (order.size() != columns_.size()) throw DomainError("column permutation has the wrong length");
    std::vector<History> out;
    out.reserve(order.size());
    for (std::size_t j : order) out.push_back(columns_.at(j));
    columns_ = std::move(out);
  }

  friend bool operator==(const FeatureArray&, const FeatureArray&) = default;

 private:
  std::size_t n_;
  std::vector<History> columns_;
};

struct Hyperparams {
  double r;
  double c;
  double T;
  std::vector<double> fixed_atoms;  // weights b_s in (0, 1]

  Hyperparams(double r_, double c_, double T_, std::vector<double> atoms = {})
      : r(r_), c(c_), T(T_), fixed_atoms(std::move(atoms)) {
    detail::require_positive(r, "r");
    detail::require_positive(c, "c");
    detail::require_positive(T, "T");
    for (double b : fixed_atoms) {
      if (!(b > 0.0 && b <= 1.0)) throw DomainError("fixed atom weights must lie in (0, 1]");
    }
  }
};

//------------------------------------------------------------------------------

inline CombStruct from_array(const FeatureArray& w) {
  if (w.n() == 0) throw DomainError("array has no rows");
  CombStruct::Counts counts;
  for (const auto& h : w.columns()) ++counts[h];
  return CombStruct(w.n(), std::move(counts));
}

/// Columns sorted ascending under the lexicographic order.
inline FeatureArray left_order(const FeatureArray& w) {
  std::vector<History> cols = w.columns();
  std::sort(cols.begin(), cols.end());
  return FeatureArray(w.n(), std::move(cols));
}

/// Places the columns of m in a uniformly random order.
inline FeatureArray uniform_label(const CombStruct& m, RngStream& rng) {
  std::vector<History> cols;
  cols.reserve(static_cast<std::size_t>(m.kappa()));
  for (const auto& [h, k] : m.counts()) cols.insert(cols.end(), static_cast<std::size_t>(k), h);
  for (std::size_t i = cols.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(cols[i - 1], cols[j]);
  }
  return FeatureArray(m.n(), std::move(cols));
}

/// log(kappa! / prod_h M_h!), the number of distinguishable column orders.
inline double ordering_count(const CombStruct& m) {
  double out = log_factorial(m.kappa());
  for (const auto& [h, k] : m.counts()) out -= log_factorial(k);
  return out;
}

/// Drops the last row. Histories that become all zero have no ancestor and vanish.
inline CombStruct project(const CombStruct& m) {
  if (m.n() < 2) throw DomainError("projection needs n >= 2");
  CombStruct::Counts counts;
  for (const auto& [h, k] : m.counts()) {
    std::vector<Count> head(h.entries().begin(), h.entries().end() - 1);
    bool any = false;
    for (Count v : head) any = any || v > 0;
    if (any) counts[History(std::move(head))] += k;
  }
  return CombStruct(m.n() - 1, std::move(counts));
}

namespace detail {

inline void require_no_fixed_atoms(const Hyperparams& hp) {
  if (!hp.fixed_atoms.empty()) {
    throw DomainError("exact p.m.f.s assume a base measure without fixed atoms");
  }
}

}  // namespace detail

/// log of the per-column factor shared by both p.m.f.s:
/// Gamma(s) Gamma(c + nr) / Gamma(c + nr + s) * prod_i (r)_{h_i} / h_i!.
inline double log_column_factor(const History& h, double r, double c) {
  const double cn = c + static_cast<double>(h.size()) * r;
  const double s = static_cast<double>(h.total());
  double out = std::lgamma(s) - log_gamma_ratio(cn, s, 0.0);
  for (Count v : h.entries()) out += log_rising_factorial(r, v) - log_factorial(v);
  return out;
}

/// Expected feature count c T (psi(c + nr) - psi(c)) after n rows.
inline double expected_kappa(std::size_t n, const Hyperparams& hp) {
  if (n == 0) return 0.0;
  return hp.c * hp.T * harmonic_gap(static_cast<double>(n) * hp.r, hp.c);
}

/// Exact log p.m.f. of a combinatorial structure.
inline double log_pmf_struct(const CombStruct& m, const Hyperparams& hp) {
  detail::require_no_fixed_atoms(hp);
  const double log_ct = std::log(hp.c * hp.T);
  double out = -expected_kappa(m.n(), hp);
  for (const auto& [h, k] : m.counts()) {
    out += static_cast<double>(k) * (log_ct + log_column_factor(h, hp.r, hp.c)) - log_factorial(k);
  }
  return out;
}

/// Exact log p.m.f. of a uniformly labeled array.
inline double log_pmf_array(const FeatureArray& w, const Hyperparams& hp) {
  detail::require_no_fixed_atoms(hp);
  if (w.n() == 0) return 0.0;
  const auto kappa = static_cast<Count>(w.kappa());
  double out = static_cast<double>(kappa) * std::log(hp.c * hp.T) - log_factorial(kappa) -
               expected_kappa(w.n(), hp);
  for (const auto& h : w.columns()) out += log_column_factor(h, hp.r, hp.c);
  return out;
}

}  // namespace bnbp
