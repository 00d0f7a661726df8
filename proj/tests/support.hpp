#pragma once

// Test-side oracles. forward_risk propagates probability mass forward over
// the coarse tables; it shares no code with the engine's backward
// induction. Frozen values come from tests/oracle/coarse_forward.py.

#include <functional>
#include <map>
#include <tuple>

#include "seqpi/datagen.hpp"
#include "seqpi/estimand.hpp"

namespace seqpi::testing {

enum class Rule { immediate, vaginal, fix_then_natural, dynamic, natural };

struct ForwardResult {
  double outcome = 0.0;
  double cesarean = 0.0;
};

using PolicyFn = std::function<double(const CoarseVitals&, int k)>;

inline PolicyFn policy_fn(const UsualCarePolicy& p) {
  return [p](const CoarseVitals& v, int k) {
    PatientState s;
    s.k = k;
    s.tv = v;
    return p.probability(s);
  };
}

inline ForwardResult forward_risk(const ScmConfig& cfg, const PolicyFn& usual, CoarseVitals start,
                                  int k0, Rule rule, int horizon, int fix_hours = 1) {
  const auto& t = cfg.coarse;
  using Key = std::tuple<int, int, int, int>;
  std::map<Key, double> mass{{{static_cast<int>(start.fhr), start.dilatation,
                               static_cast<int>(start.sbp), static_cast<int>(start.dbp)},
                              1.0}};
  ForwardResult r;
  for (int k = k0; k < horizon; ++k) {
    const int late = k >= t.late_hour ? 1 : 0;
    std::map<Key, double> next;
    for (const auto& [key, m] : mass) {
      const auto [f, d, s, b] = key;
      const CoarseVitals v{static_cast<FhrCategory>(f), d, static_cast<BpLevel>(s),
                           static_cast<BpLevel>(b)};
      double pc = 0.0;
      switch (rule) {
        case Rule::immediate: pc = 1.0; break;
        case Rule::vaginal: pc = 0.0; break;
        case Rule::fix_then_natural: pc = k - k0 < fix_hours ? 0.0 : usual(v, k); break;
        case Rule::dynamic: pc = (f == 1 || f == 3) ? 1.0 : 0.0; break;
        case Rule::natural: pc = usual(v, k); break;
      }
      r.outcome += m * pc * t.surgical[s];
      r.cesarean += m * pc;
      const double mv = m * (1.0 - pc);
      const double h = t.hazard[late][f][s];
      r.outcome += mv * h;
      for (int f2 = 0; f2 < 4; ++f2) {
        for (int inc = 0; inc < 3; ++inc) {
          const int d2 = std::min(10, d + inc);
          if (d2 >= 10) continue;
          for (int s2 = 0; s2 < 2; ++s2) {
            for (int b2 = 0; b2 < 2; ++b2) {
              const double ps = s2 ? t.sbp_high_next[s] : 1.0 - t.sbp_high_next[s];
              const double pb = b2 ? t.dbp_high_next[b] : 1.0 - t.dbp_high_next[b];
              next[{f2, d2, s2, b2}] +=
                  mv * (1.0 - h) * t.fhr_next[late][f][f2] * t.dilatation_increment[inc] * ps * pb;
            }
          }
        }
      }
    }
    mass = std::move(next);
  }
  return r;
}

inline Rule rule_for(int estimand_id) {
  switch (estimand_id) {
    case 1: return Rule::immediate;
    case 2:
    case 5: return Rule::vaginal;
    case 4: return Rule::dynamic;
    default: return Rule::fix_then_natural;
  }
}

inline double forward_estimand(const ScmConfig& cfg, const UsualCarePolicy& p, int id,
                               const CoarseVitals& v, int k) {
  const int h = id == 7 ? k + 1 : cfg.horizon;
  return forward_risk(cfg, policy_fn(p), v, k, rule_for(id), h).outcome;
}

// Population marginal under a rule, summed over the initial distribution.
inline ForwardResult forward_marginal(const ScmConfig& cfg, const UsualCarePolicy& p, Rule rule) {
  const auto& t = cfg.coarse;
  ForwardResult total;
  for (int f = 0; f < 4; ++f) {
    for (int d = 0; d < 11; ++d) {
      for (int s = 0; s < 2; ++s) {
        for (int b = 0; b < 2; ++b) {
          const double w = t.init_fhr[f] * t.init_dilatation[d] *
                           (s ? t.init_sbp_high : 1 - t.init_sbp_high) *
                           (b ? t.init_dbp_high : 1 - t.init_dbp_high);
          if (w == 0.0) continue;
          const auto r = forward_risk(cfg, policy_fn(p),
                                      {static_cast<FhrCategory>(f), d, static_cast<BpLevel>(s),
                                       static_cast<BpLevel>(b)},
                                      0, rule, cfg.horizon);
          total.outcome += w * r.outcome;
          total.cesarean += w * r.cesarean;
        }
      }
    }
  }
  return total;
}

inline PatientState coarse_state(FhrCategory f, int dil, BpLevel sbp, BpLevel dbp, int k = 0) {
  PatientState s;
  s.k = k;
  s.tv = CoarseVitals{f, dil, sbp, dbp};
  return s;
}

// The designated high-distress profile: tachycardia, 3 cm, normal blood
// pressure, start of labor.
inline PatientState distress_profile() {
  return coarse_state(FhrCategory::tachycardia, 3, BpLevel::normal, BpLevel::normal);
}

// Values frozen from tests/oracle/coarse_forward.py (default coarse config,
// default usual-care policy, K = 12).
namespace frozen {
inline constexpr double kDistress[8] = {0.0, 0.0293, 0.28127316681785425, 0.21714849122123286,
                                        0.0293, 0.28127316681785425, 0.21714849122123286, 0.0759};
inline constexpr double kNormal[8] = {0.0, 0.0293, 0.12982178806199318, 0.10290372267411808,
                                      0.058999911429969916, 0.12982178806199318,
                                      0.10290372267411808, 0.0067};
inline constexpr double kBradyHighBp[8] = {0.0, 0.0759, 0.5137644876026517, 0.44651473082969934,
                                           0.0759, 0.5137644876026517, 0.44651473082969934,
                                           0.2689};
// Hour 7, normal FHR, 6 cm, sbp normal, dbp high: estimands 5, 6, 7.
inline constexpr double kLateNormal[3] = {0.12095525165363638, 0.09411934322261087, 0.011};
// Hour 3, tachycardia, 5 cm, sbp high, dbp normal: estimands 5, 6, 7.
inline constexpr double kMidTachy[3] = {0.3636095324295271, 0.3036075280861167, 0.1545};
inline constexpr double kUsualCareCesareanIncidence = 0.25742265379261764;
inline constexpr double kUsualCareOutcomeIncidence = 0.1421231005853097;
inline constexpr double kNeverCesareanOutcomeIncidence = 0.19310548677914102;
}  // namespace frozen

}  // namespace seqpi::testing
