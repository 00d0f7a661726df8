#pragma once

// Strict JSON object reading: every key must be consumed or the read fails.

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "seqpi/error.hpp"

namespace seqpi {

class StrictObject {
 public:
  StrictObject(const nlohmann::json& obj, std::string context);

  bool has(const std::string& key) const { return obj_.contains(key); }

  // Reads obj[key] into `out` when present; leaves `out` untouched otherwise.
  template <typename T>
  bool read(const std::string& key, T& out) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return false;
    seen_.insert(key);
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(context_ + "." + key + ": " + e.what());
    }
    return true;
  }

  template <typename T>
  T require(const std::string& key) {
    T out{};
    if (!read(key, out)) throw UsageError(context_ + ": missing required key '" + key + "'");
    return out;
  }

  const nlohmann::json& child(const std::string& key);

  // Throws UsageError naming the first unconsumed key.
  void finish() const;

  const std::string& context() const { return context_; }

 private:
  const nlohmann::json& obj_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace seqpi
