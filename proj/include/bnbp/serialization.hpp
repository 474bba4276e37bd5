#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bnbp/structures.hpp"

namespace bnbp {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One JSON object per record:
//   array:     {"n": 2, "columns": [[1, 0], [0, 2]]}
//   structure: {"n": 2, "counts": [[[1, 0], 2], [[0, 2], 1]]}
// Columns keep their order; structure entries are written in ascending
// history order.

inline nlohmann::json to_json(const FeatureArray& w) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& h : w.columns()) cols.push_back(h.entries());
  return {{"n", w.n()}, {"columns", std::move(cols)}};
}

inline nlohmann::json to_json(const CombStruct& m) {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& [h, k] : m.counts()) counts.push_back({h.entries(), k});
  return {{"n", m.n()}, {"counts", std::move(counts)}};
}

namespace detail {

inline std::size_t read_n(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("n") || !j["n"].is_number_unsigned()) {
    throw FormatError("record needs a non-negative integer field \"n\"");
  }
  return j["n"].get<std::size_t>();
}

inline History read_history(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("history must be an array of integers");
  std::vector<Count> e;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw FormatError("history entries must be integers");
    e.push_back(v.get<Count>());
  }
  try {
    return History(std::move(e));
  } catch (const DomainError& err) {
    throw FormatError(err.what());
  }
}

}  // namespace detail

inline FeatureArray array_from_json(const nlohmann::json& j) {
  const std::size_t n = detail::read_n(j);
  if (!j.contains("columns") || !j["columns"].is_array()) throw FormatError("missing \"columns\" array");
  std::vector<History> cols;
  for (const auto& c : j["columns"]) cols.push_back(detail::read_history(c));
  try {
    return FeatureArray(n, std::move(cols));
  } catch (const DomainError& err) {
    throw FormatError(err.what());
  }
}

inline CombStruct struct_from_json(const nlohmann::json& j) {
  const std::size_t n = detail::read_n(j);
  if (!j.contains("counts") || !j["counts"].is_array()) throw FormatError("missing \"counts\" array");
  CombStruct::Counts counts;
  for (const auto& pair : j["counts"]) {
    if (!pair.is_array() || pair.size() != 2 || !pair[1].is_number_integer()) {
      throw FormatError("structure entries are [history, count] pairs");
    }
    auto [it, fresh] = counts.emplace(detail::read_history(pair[0]), pair[1].get<Count>());
    if (!fresh) throw FormatError("history listed twice");
  }
  try {
    return CombStruct(n, std::move(counts));
  } catch (const DomainError& err) {
    throw FormatError(err.what());
  }
}

inline nlohmann::json parse_record(const std::string& line) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& err) {
    throw FormatError(std::string("malformed JSON: ") + err.what());
  }
}

}  // namespace bnbp
