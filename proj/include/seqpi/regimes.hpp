#pragma once

// Intervention options ("regimes") and the decisions they imply.
//
// A regime is anchored at the hour it is adopted; its clock is relative to
// that anchor. Decisions are monotone: once a cesarean is decided within
// the anchored window every later decision is a cesarean.

#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqpi/scm.hpp"

namespace seqpi {

struct StaticSequence {
  std::vector<Action> actions;  // one per hour from the anchor
  bool operator==(const StaticSequence&) const = default;
};

struct ImmediateCesarean {
  bool operator==(const ImmediateCesarean&) const = default;
};

struct VaginalOnly {
  bool operator==(const VaginalOnly&) const = default;
};

// fix_action for fix_hours hours, then the usual-care policy.
struct FixThenNatural {
  Action fix_action = Action::vaginal;
  int fix_hours = 1;
  bool operator==(const FixThenNatural&) const = default;
};

// Cesarean from the first hour with abnormal FHR onward.
struct DynamicFhr {
  double lower = kFhrLower;
  double upper = kFhrUpper;
  bool operator==(const DynamicFhr&) const = default;
};

struct NaturalCourse {
  bool operator==(const NaturalCourse&) const = default;
};

using Regime = std::variant<StaticSequence, ImmediateCesarean, VaginalOnly, FixThenNatural,
                            DynamicFhr, NaturalCourse>;

// Throws UsageError when a regime breaks its invariants.
void validate(const Regime& regime);

std::string regime_label(const Regime& regime);

nlohmann::json to_json(const Regime& regime);
Regime regime_from_json(const nlohmann::json& doc);

// 1 iff (fhr < lower AND persistent bradycardia) OR fhr > upper.
int fhr_abnormal_flag(double fhr, bool brady_persist, double lower = kFhrLower,
                      double upper = kFhrUpper) noexcept;
int fhr_abnormal_flag(FhrCategory category) noexcept;
int fhr_abnormal_flag(const DynamicFhr& rule, const Vitals& tv) noexcept;

// True when the regime leaves the decision at `relative_hour` to usual care.
bool is_natural_at(const Regime& regime, int relative_hour) noexcept;
bool has_natural_segment(const Regime& regime) noexcept;

// Decision at the current (last) hour of `history` for a regime anchored at
// `anchor_hour`. `usual_care` is consulted only on natural segments and
// must then be non-null. A negative anchor means the first recorded hour.
Action decide(const Regime& regime, const History& history, const DecisionFn* usual_care,
              int anchor_hour = -1);

// True iff every observed action from `from_hour` until absorption matches
// the regime anchored at `from_hour`. Natural segments match any action.
bool is_regime_consistent(const Trajectory& trajectory, const Regime& regime, int from_hour);

// Incremental form of the consistency check for one person: feed states
// and observed actions in order.
class ConsistencyTracker {
 public:
  ConsistencyTracker(const Regime& regime, int anchor_hour);

  // Observed action at the last pushed state; returns consistency so far.
  bool observe(const PatientState& state, Action action);
  bool consistent() const noexcept { return consistent_; }

 private:
  const Regime* regime_;
  int anchor_;
  bool consistent_ = true;
  bool flagged_ = false;
  bool cesarean_seen_ = false;
};

}  // namespace seqpi

namespace seqpi {

// Usual-care behaviour: probability of initiating a cesarean this hour for
// an at-risk state. Natural-course segments of a regime draw from it.
class CesareanPropensity {
 public:
  virtual ~CesareanPropensity() = default;
  virtual double probability(const PatientState& state) const = 0;
};

// Decision function drawing from `propensity` with `rng`. Both must outlive
// the returned function.
DecisionFn stochastic_policy(const CesareanPropensity& propensity, Rng& rng);

}  // namespace seqpi
