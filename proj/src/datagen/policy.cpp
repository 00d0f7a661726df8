#include <algorithm>

#include "seqpi/datagen.hpp"
#include "seqpi/json_util.hpp"
#include "seqpi/math.hpp"

namespace seqpi {

bool UsualCarePolicy::stalled_flag(const PatientState& state) const noexcept {
  return state.k >= stall_min_hour &&
         dilatation_cm(state.tv) < stall_base + stall_rate * static_cast<double>(state.k);
}

double UsualCarePolicy::probability(const PatientState& state) const {
  if (!state.at_risk()) return 0.0;
  if (state.a == Action::cesarean) return 1.0;
  return logistic(intercept + abnormal_fhr * (seqpi::abnormal_fhr(state.tv) ? 1.0 : 0.0) +
                  stalled * (stalled_flag(state) ? 1.0 : 0.0) +
                  duration * static_cast<double>(std::min(state.k, duration_cap)));
}

UsualCarePolicy UsualCarePolicy::never_cesarean() {
  UsualCarePolicy p;
  p.intercept = -1e9;
  p.abnormal_fhr = 0.0;
  p.stalled = 0.0;
  p.duration = 0.0;
  return p;
}

nlohmann::json to_json(const UsualCarePolicy& p) {
  return {{"intercept", p.intercept},     {"abnormal_fhr", p.abnormal_fhr},
          {"stalled", p.stalled},         {"duration", p.duration},
          {"duration_cap", p.duration_cap}, {"stall_min_hour", p.stall_min_hour},
          {"stall_base", p.stall_base},   {"stall_rate", p.stall_rate}};
}

UsualCarePolicy usual_care_from_json(const nlohmann::json& doc) {
  StrictObject o(doc, "policy");
  UsualCarePolicy p;
  o.read("intercept", p.intercept);
  o.read("abnormal_fhr", p.abnormal_fhr);
  o.read("stalled", p.stalled);
  o.read("duration", p.duration);
  o.read("duration_cap", p.duration_cap);
  o.read("stall_min_hour", p.stall_min_hour);
  o.read("stall_base", p.stall_base);
  o.read("stall_rate", p.stall_rate);
  o.finish();
  if (p.duration_cap < 0) throw UsageError("policy.duration_cap must be >= 0");
  return p;
}

}  // namespace seqpi
