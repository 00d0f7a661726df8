#include "seqpi/regimes.hpp"

#include <fmt/format.h>

#include "seqpi/error.hpp"
#include "seqpi/json_util.hpp"

namespace seqpi {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Action action_from_int(int v, const std::string& context) {
  if (v == 0) return Action::vaginal;
  if (v == 1) return Action::cesarean;
  throw UsageError(context + ": action must be 0 or 1, got " + std::to_string(v));
}

}  // namespace

void validate(const Regime& regime) {
  std::visit(overloaded{
                 [](const StaticSequence& s) {
                   for (std::size_t i = 1; i < s.actions.size(); ++i) {
                     if (s.actions[i - 1] == Action::cesarean && s.actions[i] == Action::vaginal) {
                       throw UsageError(fmt::format(
                           "static sequence: vaginal at position {} after cesarean", i));
                     }
                   }
                 },
                 [](const FixThenNatural& f) {
                   if (f.fix_hours < 1) throw UsageError("fix_then_natural: fix_hours must be >= 1");
                 },
                 [](const DynamicFhr& d) {
                   if (!(d.lower < d.upper)) throw UsageError("dynamic_fhr: lower must be < upper");
                 },
                 [](const auto&) {},
             },
             regime);
}

std::string regime_label(const Regime& regime) {
  return std::visit(
      overloaded{
          [](const StaticSequence& s) {
            std::string seq;
            for (Action a : s.actions) seq += a == Action::cesarean ? '1' : '0';
            return "static(" + seq + ")";
          },
          [](const ImmediateCesarean&) { return std::string("immediate cesarean"); },
          [](const VaginalOnly&) { return std::string("vaginal only"); },
          [](const FixThenNatural& f) {
            return fmt::format("{} for {} h, then usual care",
                               f.fix_action == Action::cesarean ? "cesarean" : "vaginal",
                               f.fix_hours);
          },
          [](const DynamicFhr& d) {
            return fmt::format("cesarean at first abnormal FHR (<{:g} persistent or >{:g})",
                               d.lower, d.upper);
          },
          [](const NaturalCourse&) { return std::string("usual care"); },
      },
      regime);
}

nlohmann::json to_json(const Regime& regime) {
  using nlohmann::json;
  return std::visit(
      overloaded{
          [](const StaticSequence& s) {
            json actions = json::array();
            for (Action a : s.actions) actions.push_back(to_int(a));
            return json{{"type", "static_sequence"}, {"actions", actions}};
          },
          [](const ImmediateCesarean&) { return json{{"type", "immediate_cesarean"}}; },
          [](const VaginalOnly&) { return json{{"type", "vaginal_only"}}; },
          [](const FixThenNatural& f) {
            return json{{"type", "fix_then_natural"},
                        {"fix_action", to_int(f.fix_action)},
                        {"fix_hours", f.fix_hours}};
          },
          [](const DynamicFhr& d) {
            return json{{"type", "dynamic_fhr"}, {"lower", d.lower}, {"upper", d.upper}};
          },
          [](const NaturalCourse&) { return json{{"type", "natural_course"}}; },
      },
      regime);
}

Regime regime_from_json(const nlohmann::json& doc) {
  StrictObject o(doc, "regime");
  const auto type = o.require<std::string>("type");
  Regime out;
  if (type == "static_sequence") {
    StaticSequence s;
    for (int v : o.require<std::vector<int>>("actions")) {
      s.actions.push_back(action_from_int(v, "regime.actions"));
    }
    out = s;
  } else if (type == "immediate_cesarean") {
    out = ImmediateCesarean{};
  } else if (type == "vaginal_only") {
    out = VaginalOnly{};
  } else if (type == "fix_then_natural") {
    FixThenNatural f;
    f.fix_action = action_from_int(o.require<int>("fix_action"), "regime.fix_action");
    f.fix_hours = o.require<int>("fix_hours");
    out = f;
  } else if (type == "dynamic_fhr") {
    DynamicFhr d;
    o.read("lower", d.lower);
    o.read("upper", d.upper);
    out = d;
  } else if (type == "natural_course") {
    out = NaturalCourse{};
  } else {
    throw UsageError("regime: unknown type '" + type + "'");
  }
  o.finish();
  validate(out);
  return out;
}

int fhr_abnormal_flag(double fhr, bool brady_persist, double lower, double upper) noexcept {
  return ((fhr < lower && brady_persist) || fhr > upper) ? 1 : 0;
}

int fhr_abnormal_flag(FhrCategory category) noexcept {
  return (category == FhrCategory::bradycardia_persistent ||
          category == FhrCategory::tachycardia)
             ? 1
             : 0;
}

int fhr_abnormal_flag(const DynamicFhr& rule, const Vitals& tv) noexcept {
  if (const auto* c = std::get_if<CoarseVitals>(&tv)) return fhr_abnormal_flag(c->fhr);
  const auto& v = std::get<ContinuousVitals>(tv);
  return fhr_abnormal_flag(v.fhr, v.brady_persist, rule.lower, rule.upper);
}

bool is_natural_at(const Regime& regime, int relative_hour) noexcept {
  if (std::holds_alternative<NaturalCourse>(regime)) return true;
  if (const auto* f = std::get_if<FixThenNatural>(&regime)) return relative_hour >= f->fix_hours;
  return false;
}

bool has_natural_segment(const Regime& regime) noexcept {
  return std::holds_alternative<NaturalCourse>(regime) ||
         std::holds_alternative<FixThenNatural>(regime);
}

Action decide(const Regime& regime, const History& history, const DecisionFn* usual_care,
              int anchor_hour) {
  if (history.states.empty()) throw UsageError("decide: empty history");
  const PatientState& cur = history.current();
  if (!cur.at_risk()) {
    throw NotAtRiskError(fmt::format("decide at hour {}: state is not at risk", cur.k));
  }
  const int anchor = anchor_hour < 0 ? history.states.front().k : anchor_hour;
  const int rel = cur.k - anchor;
  if (rel < 0) throw UsageError(fmt::format("decide: hour {} precedes anchor {}", cur.k, anchor));

  if (cur.a == Action::cesarean) return Action::cesarean;
  for (std::size_t i = 0; i < history.actions.size() && i + 1 < history.states.size(); ++i) {
    if (history.states[i].k >= anchor && history.actions[i] == Action::cesarean) {
      return Action::cesarean;
    }
  }

  auto natural = [&]() {
    if (usual_care == nullptr || !*usual_care) {
      throw UsageError("decide: regime '" + regime_label(regime) +
                       "' needs a usual-care policy");
    }
    return (*usual_care)(history);
  };

  return std::visit(
      overloaded{
          [&](const StaticSequence& s) {
            if (rel >= static_cast<int>(s.actions.size())) {
              throw UsageError(fmt::format(
                  "decide: static sequence of length {} exhausted at relative hour {}",
                  s.actions.size(), rel));
            }
            return s.actions[rel];
          },
          [](const ImmediateCesarean&) { return Action::cesarean; },
          [](const VaginalOnly&) { return Action::vaginal; },
          [&](const FixThenNatural& f) { return rel < f.fix_hours ? f.fix_action : natural(); },
          [&](const DynamicFhr& d) {
            for (const auto& s : history.states) {
              if (s.k >= anchor && fhr_abnormal_flag(d, s.tv)) return Action::cesarean;
            }
            return Action::vaginal;
          },
          [&](const NaturalCourse&) { return natural(); },
      },
      regime);
}

ConsistencyTracker::ConsistencyTracker(const Regime& regime, int anchor_hour)
    : regime_(&regime), anchor_(anchor_hour) {}

bool ConsistencyTracker::observe(const PatientState& state, Action action) {
  if (!consistent_ || state.k < anchor_) return consistent_;
  const int rel = state.k - anchor_;
  if (const auto* d = std::get_if<DynamicFhr>(regime_)) {
    flagged_ = flagged_ || fhr_abnormal_flag(*d, state.tv) == 1;
  }
  if (!is_natural_at(*regime_, rel)) {
    Action expected = Action::vaginal;
    if (cesarean_seen_ || state.a == Action::cesarean) {
      expected = Action::cesarean;
    } else {
      expected = std::visit(
          overloaded{
              [&](const StaticSequence& s) {
                return rel < static_cast<int>(s.actions.size()) ? s.actions[rel]
                                                                : Action::vaginal;
              },
              [](const ImmediateCesarean&) { return Action::cesarean; },
              [](const VaginalOnly&) { return Action::vaginal; },
              [](const FixThenNatural& f) { return f.fix_action; },
              [&](const DynamicFhr&) { return flagged_ ? Action::cesarean : Action::vaginal; },
              [](const NaturalCourse&) { return Action::vaginal; },
          },
          *regime_);
      if (const auto* s = std::get_if<StaticSequence>(regime_);
          s && rel >= static_cast<int>(s->actions.size())) {
        consistent_ = false;  // sequence does not cover this hour
        return consistent_;
      }
    }
    consistent_ = expected == action;
  }
  cesarean_seen_ = cesarean_seen_ || action == Action::cesarean;
  return consistent_;
}

bool is_regime_consistent(const Trajectory& trajectory, const Regime& regime, int from_hour) {
  ConsistencyTracker tracker(regime, from_hour);
  for (std::size_t i = 0; i < trajectory.actions.size() && i < trajectory.states.size(); ++i) {
    const auto& s = trajectory.states[i];
    if (!s.at_risk()) break;
    if (!tracker.observe(s, trajectory.actions[i])) return false;
  }
  return true;
}

}  // namespace seqpi

namespace seqpi {

DecisionFn stochastic_policy(const CesareanPropensity& propensity, Rng& rng) {
  return [&propensity, &rng](const History& h) {
    return bernoulli(rng, propensity.probability(h.current())) ? Action::cesarean
                                                               : Action::vaginal;
  };
}

}  // namespace seqpi
