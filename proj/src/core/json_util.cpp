#include "seqpi/json_util.hpp"

namespace seqpi {

StrictObject::StrictObject(const nlohmann::json& obj, std::string context)
    : obj_(obj), context_(std::move(context)) {
  if (!obj_.is_object()) throw UsageError(context_ + ": expected a JSON object");
}

const nlohmann::json& StrictObject::child(const std::string& key) {
  auto it = obj_.find(key);
  if (it == obj_.end()) throw UsageError(context_ + ": missing required key '" + key + "'");
  seen_.insert(key);
  return *it;
}

void StrictObject::finish() const {
  for (auto it = obj_.begin(); it != obj_.end(); ++it) {
    if (!seen_.count(it.key())) {
      throw UsageError(context_ + ": unknown key '" + it.key() + "'");
    }
  }
}

}  // namespace seqpi
