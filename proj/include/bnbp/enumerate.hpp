#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "bnbp/structures.hpp"

namespace bnbp {

/// All histories of length n with 1 <= s(h) <= max_total, ascending.
inline std::vector<History> enumerate_histories(std::size_t n, Count max_total) {
  std::vector<History> out;
  std::vector<Count> cur(n, 0);
  std::function<void(std::size_t, Count)> rec = [&](std::size_t i, Count left) {
    if (i == n) {
      if (left < max_total) out.emplace_back(cur);
      return;
    }
    for (Count v = 0; v <= left; ++v) {
      cur[i] = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, max_total);
  return out;
}

/// Calls visit(m) for every structure at stage n whose histories satisfy
/// s(h) <= max_total and whose kappa is at most max_kappa (including the
/// empty structure).
template <class Visit>
void for_each_structure(std::size_t n, Count max_total, Count max_kappa, Visit&& visit) {
  const std::vector<History> hs = enumerate_histories(n, max_total);
  CombStruct::Counts counts;
  std::function<void(std::size_t, Count)> rec = [&](std::size_t first, Count left) {
    visit(CombStruct(n, counts));
    if (left == 0) return;
    for (std::size_t i = first; i < hs.size(); ++i) {
      ++counts[hs[i]];
      rec(i, left - 1);
      if (--counts[hs[i]] == 0) counts.erase(hs[i]);
    }
  };
  rec(0, max_kappa);
}

}  // namespace bnbp
