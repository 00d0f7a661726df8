#include <set>

#include "seqpi/error.hpp"
#include "seqpi/scm.hpp"

namespace seqpi {
namespace {

std::vector<BpLevel> bp_support(double p_high) {
  std::vector<BpLevel> out;
  if (p_high < 1.0) out.push_back(BpLevel::normal);
  if (p_high > 0.0) out.push_back(BpLevel::high);
  return out;
}

// Successors of an at-risk state at hour k with positive probability.
void successors(const CoarseState& s, int k, const CoarseTables& t, std::set<CoarseState>& out) {
  const int late = is_late(k, t) ? 1 : 0;
  const auto& v = s.vitals;
  const double surg = t.surgical[static_cast<int>(v.sbp)];
  if (surg > 0.0) out.insert({v, Action::cesarean, true, true});
  if (surg < 1.0) out.insert({v, Action::cesarean, true, false});

  const double haz = t.hazard[late][static_cast<int>(v.fhr)][static_cast<int>(v.sbp)];
  if (haz > 0.0) out.insert({v, Action::vaginal, false, true});
  if (haz >= 1.0) return;
  const auto& fhr_row = t.fhr_next[late][static_cast<int>(v.fhr)];
  for (int f = 0; f < kFhrCategories; ++f) {
    if (fhr_row[f] <= 0.0) continue;
    for (int inc = 0; inc < 3; ++inc) {
      if (t.dilatation_increment[inc] <= 0.0) continue;
      for (BpLevel sbp : bp_support(t.sbp_high_next[static_cast<int>(v.sbp)])) {
        for (BpLevel dbp : bp_support(t.dbp_high_next[static_cast<int>(v.dbp)])) {
          CoarseVitals nv{static_cast<FhrCategory>(f), std::min(10, v.dilatation + inc), sbp, dbp};
          out.insert({nv, Action::vaginal, nv.dilatation >= 10, false});
        }
      }
    }
  }
}

}  // namespace

std::vector<CoarseState> enumerate_states(const ScmConfig& cfg) {
  if (cfg.mode != Mode::coarse) throw ModeError("enumerate_states requires coarse mode");
  const auto& t = cfg.coarse;

  std::set<CoarseState> layer;
  for (int f = 0; f < kFhrCategories; ++f) {
    if (t.init_fhr[f] <= 0.0) continue;
    for (int d = 0; d < kDilatationLevels; ++d) {
      if (t.init_dilatation[d] <= 0.0) continue;
      for (BpLevel sbp : bp_support(t.init_sbp_high)) {
        for (BpLevel dbp : bp_support(t.init_dbp_high)) {
          layer.insert({{static_cast<FhrCategory>(f), d, sbp, dbp}, Action::vaginal, false, false});
        }
      }
    }
  }

  std::set<CoarseState> all(layer.begin(), layer.end());
  for (int k = 0; k < cfg.horizon && !layer.empty(); ++k) {
    std::set<CoarseState> next;
    for (const auto& s : layer) {
      if (s.at_risk()) successors(s, k, t, next);
    }
    layer.clear();
    for (const auto& s : next) {
      if (all.insert(s).second || s.at_risk()) layer.insert(s);
    }
  }
  return {all.begin(), all.end()};
}

}  // namespace seqpi
