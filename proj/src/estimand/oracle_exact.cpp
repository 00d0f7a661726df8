#include <fmt/format.h>

#include "seqpi/error.hpp"
#include "seqpi/estimand.hpp"
#include "seqpi/kernels.hpp"

namespace seqpi {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double bp_prob(double p_high, BpLevel level) {
  return level == BpLevel::high ? p_high : 1.0 - p_high;
}

}  // namespace

CoarseExactOracle::CoarseExactOracle(const ScmConfig& scm) : scm_(scm) {
  if (scm.mode != Mode::coarse) throw ModeError("the exact oracle requires coarse mode");
  scm_.validate();
  const auto& t = scm_.coarse;

  for (int late = 0; late < 2; ++late) {
    auto& m = next_[late];
    m.assign(static_cast<std::size_t>(kCoarseCells) * kCoarseCells, 0.0);
    for (int from = 0; from < kCoarseCells; ++from) {
      const CoarseVitals v = coarse_vitals_from_cell(from);
      if (v.dilatation >= 10) continue;
      const auto& fhr_row = t.fhr_next[late][static_cast<int>(v.fhr)];
      for (int f = 0; f < kFhrCategories; ++f) {
        for (int inc = 0; inc < 3; ++inc) {
          for (int s = 0; s < 2; ++s) {
            for (int d = 0; d < 2; ++d) {
              const CoarseVitals nv{static_cast<FhrCategory>(f), std::min(10, v.dilatation + inc),
                                    static_cast<BpLevel>(s), static_cast<BpLevel>(d)};
              const double p = fhr_row[f] * t.dilatation_increment[inc] *
                               bp_prob(t.sbp_high_next[static_cast<int>(v.sbp)], nv.sbp) *
                               bp_prob(t.dbp_high_next[static_cast<int>(v.dbp)], nv.dbp);
              m[static_cast<std::size_t>(from) * kCoarseCells + coarse_cell(nv)] += p;
            }
          }
        }
      }
    }
  }

  at_risk_cells_.assign(kCoarseCells, false);
  for (const auto& s : enumerate_states(scm_)) {
    if (s.at_risk()) at_risk_cells_[coarse_cell(s.vitals)] = true;
  }
}

std::vector<double> CoarseExactOracle::values(const Regime& regime, int anchor_hour,
                                              int horizon_hour,
                                              const CesareanPropensity* usual_care,
                                              const BaselineCovariates& baseline) const {
  validate(regime);
  if (horizon_hour <= anchor_hour) {
    throw UsageError(fmt::format("horizon {} is before the moment of use {}", horizon_hour,
                                 anchor_hour));
  }
  if (horizon_hour > scm_.horizon) {
    throw UsageError(fmt::format("horizon {} exceeds the SCM horizon {}", horizon_hour,
                                 scm_.horizon));
  }
  if (has_natural_segment(regime) && usual_care == nullptr) {
    throw UsageError("regime '" + regime_label(regime) + "' needs a usual-care policy");
  }
  if (const auto* s = std::get_if<StaticSequence>(&regime);
      s && static_cast<int>(s->actions.size()) < horizon_hour - anchor_hour) {
    throw UsageError(fmt::format("static sequence of length {} is shorter than the {} h window",
                                 s->actions.size(), horizon_hour - anchor_hour));
  }

  const auto& t = scm_.coarse;
  // Value at the horizon is the outcome indicator: 0 for every at-risk cell.
  std::vector<double> value_next(kCoarseCells, 0.0);
  std::vector<double> value(kCoarseCells, 0.0);
  PatientState probe;
  probe.baseline = baseline;

  for (int hour = horizon_hour - 1; hour >= anchor_hour; --hour) {
    const int late = is_late(hour, t) ? 1 : 0;
    const int rel = hour - anchor_hour;
    const std::span<const double> cont(value_next);
    for (int cell = 0; cell < kCoarseCells; ++cell) {
      const CoarseVitals v = coarse_vitals_from_cell(cell);
      if (v.dilatation >= 10) {
        value[cell] = 0.0;
        continue;
      }
      const double haz = t.hazard[late][static_cast<int>(v.fhr)][static_cast<int>(v.sbp)];
      const std::span<const double> row(next_[late].data() + static_cast<std::size_t>(cell) * kCoarseCells,
                                        kCoarseCells);
      const double vaginal = haz + (1.0 - haz) * kernels::dot(row, cont);
      const double cesarean = t.surgical[static_cast<int>(v.sbp)];

      auto from_usual_care = [&] {
        probe.k = hour;
        probe.tv = v;
        return usual_care->probability(probe);
      };
      const double p_cesarean = std::visit(
          overloaded{
              [&](const StaticSequence& s) {
                return s.actions[rel] == Action::cesarean ? 1.0 : 0.0;
              },
              [](const ImmediateCesarean&) { return 1.0; },
              [](const VaginalOnly&) { return 0.0; },
              [&](const FixThenNatural& f) {
                if (rel < f.fix_hours) return f.fix_action == Action::cesarean ? 1.0 : 0.0;
                return from_usual_care();
              },
              // Reaching this hour at risk means no earlier flag since the anchor.
              [&](const DynamicFhr& d) {
                return static_cast<double>(fhr_abnormal_flag(d, Vitals{v}));
              },
              [&](const NaturalCourse&) { return from_usual_care(); },
          },
          regime);
      value[cell] = p_cesarean * cesarean + (1.0 - p_cesarean) * vaginal;
    }
    value.swap(value_next);
  }
  for (int cell = 0; cell < kCoarseCells; ++cell) {
    if (!at_risk_cells_[cell]) value_next[cell] = 0.0;
  }
  return value_next;
}

RiskEstimate CoarseExactOracle::evaluate(const EstimandSpec& spec, const PatientState& condition,
                                         const CesareanPropensity* usual_care) const {
  check_query(spec, condition, scm_.horizon, usual_care);
  const auto* v = std::get_if<CoarseVitals>(&condition.tv);
  if (v == nullptr) throw ModeError("the exact oracle requires a coarse condition");
  if (v->dilatation < 0 || v->dilatation > 10 || !at_risk_cells_[coarse_cell(*v)]) {
    throw UsageError("condition is not a reachable at-risk coarse state");
  }
  const auto vals =
      values(spec.regime, spec.moment_of_use, spec.horizon_hour(), usual_care, condition.baseline);
  RiskEstimate out;
  out.p = vals[coarse_cell(*v)];
  out.se = 0.0;
  out.n = 0;
  out.method = Method::oracle_exact;
  return out;
}

RiskEstimate oracle_exact(const EstimandSpec& spec, const PatientState& condition,
                          const ScmConfig& scm, const CesareanPropensity* usual_care) {
  return CoarseExactOracle(scm).evaluate(spec, condition, usual_care);
}

}  // namespace seqpi
