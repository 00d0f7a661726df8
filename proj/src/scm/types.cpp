#include <cmath>

#include "seqpi/error.hpp"
#include "seqpi/scm.hpp"

namespace seqpi {

std::string_view to_string(Mode mode) noexcept {
  return mode == Mode::coarse ? "coarse" : "continuous";
}

Mode parse_mode(std::string_view text) {
  if (text == "coarse") return Mode::coarse;
  if (text == "continuous") return Mode::continuous;
  throw UsageError("unknown mode '" + std::string(text) + "' (expected coarse|continuous)");
}

std::string_view to_string(FhrCategory c) noexcept {
  switch (c) {
    case FhrCategory::bradycardia_transient: return "bradycardia_transient";
    case FhrCategory::bradycardia_persistent: return "bradycardia_persistent";
    case FhrCategory::tachycardia: return "tachycardia";
    case FhrCategory::normal: break;
  }
  return "normal";
}

FhrCategory parse_fhr_category(std::string_view text) {
  for (int i = 0; i < kFhrCategories; ++i) {
    auto c = static_cast<FhrCategory>(i);
    if (to_string(c) == text) return c;
  }
  throw DataError("unknown fhr category '" + std::string(text) + "'");
}

std::string_view to_string(BpLevel level) noexcept {
  return level == BpLevel::high ? "high" : "normal";
}

BpLevel parse_bp_level(std::string_view text) {
  if (text == "normal") return BpLevel::normal;
  if (text == "high") return BpLevel::high;
  throw DataError("unknown blood-pressure level '" + std::string(text) + "'");
}

FhrCategory fhr_category(const Vitals& tv) noexcept {
  if (const auto* c = std::get_if<CoarseVitals>(&tv)) return c->fhr;
  const auto& v = std::get<ContinuousVitals>(tv);
  if (v.fhr > kFhrUpper) return FhrCategory::tachycardia;
  if (v.fhr < kFhrLower) {
    return v.brady_persist ? FhrCategory::bradycardia_persistent
                           : FhrCategory::bradycardia_transient;
  }
  return FhrCategory::normal;
}

bool brady_persist(const Vitals& tv) noexcept {
  if (const auto* c = std::get_if<CoarseVitals>(&tv)) {
    return c->fhr == FhrCategory::bradycardia_persistent;
  }
  return std::get<ContinuousVitals>(tv).brady_persist;
}

double dilatation_cm(const Vitals& tv) noexcept {
  if (const auto* c = std::get_if<CoarseVitals>(&tv)) return c->dilatation;
  return std::get<ContinuousVitals>(tv).dilatation;
}

bool abnormal_fhr(const Vitals& tv) noexcept {
  const FhrCategory c = fhr_category(tv);
  return c == FhrCategory::bradycardia_persistent || c == FhrCategory::tachycardia;
}

int coarse_cell(const CoarseVitals& v) noexcept {
  return ((static_cast<int>(v.fhr) * kDilatationLevels + v.dilatation) * 2 +
          static_cast<int>(v.sbp)) * 2 + static_cast<int>(v.dbp);
}

CoarseVitals coarse_vitals_from_cell(int cell) noexcept {
  CoarseVitals v;
  v.dbp = static_cast<BpLevel>(cell % 2);
  cell /= 2;
  v.sbp = static_cast<BpLevel>(cell % 2);
  cell /= 2;
  v.dilatation = cell % kDilatationLevels;
  v.fhr = static_cast<FhrCategory>(cell / kDilatationLevels);
  return v;
}

bool is_late(int k, const CoarseTables& t) noexcept { return k >= t.late_hour; }

}  // namespace seqpi
