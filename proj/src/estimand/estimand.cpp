#include <algorithm>
#include <optional>

#include <fmt/format.h>

#include "seqpi/error.hpp"
#include "seqpi/estimand.hpp"
#include "seqpi/json_util.hpp"

namespace seqpi {

const std::vector<std::string>& available_predictors() {
  static const std::vector<std::string> names{"maternal_age", "parity", "history_preterm",
                                              "fhr",          "brady_persist", "dilatation",
                                              "sbp",          "dbp"};
  return names;
}

void EstimandSpec::validate() const {
  if (moment_of_use < 0) throw UsageError("estimand: moment_of_use must be >= 0");
  if (horizon.kind == Horizon::Kind::absolute && horizon.hours <= moment_of_use) {
    throw UsageError(fmt::format("estimand: absolute horizon {} is not after moment of use {}",
                                 horizon.hours, moment_of_use));
  }
  if (horizon.kind == Horizon::Kind::relative && horizon.hours < 1) {
    throw UsageError("estimand: relative horizon must be >= 1 hour");
  }
  const auto& avail = available_predictors();
  for (const auto& p : predictors) {
    if (std::find(avail.begin(), avail.end(), p) == avail.end()) {
      throw UsageError("estimand: predictor '" + p + "' is not available at the moment of use");
    }
  }
  seqpi::validate(regime);
}

EstimandSpec builtin_estimand(int id, int k, int final_hour) {
  if (id < 1 || id > 7) throw UsageError(fmt::format("unknown estimand id {} (expected 1-7)", id));
  if (id <= 4 && k != 0) {
    throw UsageError(fmt::format("estimand {} is single-stage: moment of use must be 0, got {}",
                                 id, k));
  }
  EstimandSpec spec;
  spec.moment_of_use = k;
  spec.predictors = available_predictors();
  spec.horizon = Horizon::absolute(final_hour);
  switch (id) {
    case 1: spec.regime = ImmediateCesarean{}; break;
    case 2:
    case 5: spec.regime = VaginalOnly{}; break;
    case 3:
    case 6: spec.regime = FixThenNatural{Action::vaginal, 1}; break;
    case 4: spec.regime = DynamicFhr{}; break;
    case 7:
      spec.regime = FixThenNatural{Action::vaginal, 1};
      spec.horizon = Horizon::relative(1);
      break;
  }
  spec.validate();
  return spec;
}

std::string builtin_estimand_label(int id) {
  switch (id) {
    case 1: return "immediate cesarean";
    case 2: return "vaginal delivery only";
    case 3: return "vaginal now, then usual care";
    case 4: return "cesarean at first abnormal FHR";
    case 5: return "vaginal delivery only (updated)";
    case 6: return "vaginal for the next hour, then usual care (updated)";
    case 7: return "vaginal for the next hour, one-hour horizon";
  }
  throw UsageError(fmt::format("unknown estimand id {}", id));
}

nlohmann::json to_json(const EstimandSpec& spec) {
  nlohmann::json horizon;
  if (spec.horizon.kind == Horizon::Kind::absolute) {
    horizon = {{"type", "absolute"}, {"hour", spec.horizon.hours}};
  } else {
    horizon = {{"type", "relative"}, {"hours", spec.horizon.hours}};
  }
  return {{"population", {{"at_risk_only", spec.population.at_risk_only}}},
          {"moment_of_use", spec.moment_of_use},
          {"intervention_option", to_json(spec.regime)},
          {"outcome", "composite_adverse"},
          {"horizon", horizon},
          {"predictors", spec.predictors}};
}

EstimandSpec estimand_from_json(const nlohmann::json& doc) {
  StrictObject o(doc, "estimand");
  EstimandSpec spec;
  if (o.has("population")) {
    StrictObject p(o.child("population"), "estimand.population");
    p.read("at_risk_only", spec.population.at_risk_only);
    p.finish();
  }
  spec.moment_of_use = o.require<int>("moment_of_use");
  spec.regime = regime_from_json(o.child("intervention_option"));
  std::string outcome = "composite_adverse";
  o.read("outcome", outcome);
  if (outcome != "composite_adverse") {
    throw UsageError("estimand: unsupported outcome '" + outcome + "'");
  }
  {
    StrictObject h(o.child("horizon"), "estimand.horizon");
    const auto type = h.require<std::string>("type");
    if (type == "absolute") {
      spec.horizon = Horizon::absolute(h.require<int>("hour"));
    } else if (type == "relative") {
      spec.horizon = Horizon::relative(h.require<int>("hours"));
    } else {
      throw UsageError("estimand.horizon: unknown type '" + type + "'");
    }
    h.finish();
  }
  spec.predictors = available_predictors();
  o.read("predictors", spec.predictors);
  o.finish();
  spec.validate();
  return spec;
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::oracle_exact: return "oracle_exact";
    case Method::naive: return "naive";
    case Method::gcomp: return "gcomp";
    case Method::ice: return "ice";
    case Method::oracle_mc: break;
  }
  return "oracle_mc";
}

void check_query(const EstimandSpec& spec, const PatientState& condition, int scm_horizon,
                 const CesareanPropensity* usual_care) {
  spec.validate();
  if (!condition.at_risk()) {
    throw NotAtRiskError(fmt::format("condition at hour {} is not at risk (z = 0)", condition.k));
  }
  if (!spec.population.admits(condition)) {
    throw UsageError("condition is outside the estimand population");
  }
  if (condition.k != spec.moment_of_use) {
    throw UsageError(fmt::format("condition hour {} differs from the moment of use {}",
                                 condition.k, spec.moment_of_use));
  }
  const int h = spec.horizon_hour();
  if (h <= condition.k) {
    throw UsageError(fmt::format("horizon {} is before the moment of use {}", h, condition.k));
  }
  if (h > scm_horizon) {
    throw UsageError(fmt::format("horizon {} exceeds the SCM horizon {}", h, scm_horizon));
  }
  if (has_natural_segment(spec.regime) && usual_care == nullptr) {
    throw UsageError("regime '" + regime_label(spec.regime) + "' needs a usual-care policy");
  }
}

std::vector<RiskEstimate> risk_profile(const std::vector<int>& estimand_ids,
                                       const PatientState& condition, const ScmConfig& scm,
                                       const CesareanPropensity* usual_care, EngineMode mode,
                                       const McOptions& options) {
  std::vector<RiskEstimate> out;
  out.reserve(estimand_ids.size());
  if (estimand_ids.empty()) return out;
  std::optional<CoarseExactOracle> exact;
  if (mode == EngineMode::exact) exact.emplace(scm);
  for (int id : estimand_ids) {
    const EstimandSpec spec = builtin_estimand(id, condition.k, scm.horizon);
    if (exact) {
      out.push_back(exact->evaluate(spec, condition, usual_care));
    } else {
      out.push_back(oracle_mc(spec, condition, scm, usual_care, options));
    }
  }
  return out;
}

}  // namespace seqpi
