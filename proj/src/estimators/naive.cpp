#include <cmath>

#include <fmt/format.h>

#include "seqpi/error.hpp"
#include "seqpi/estimators.hpp"

namespace seqpi {

const std::vector<std::string>& naive_features() {
  static const std::vector<std::string> names{
      "intercept", "maternal_age", "parity", "history_preterm", "fhr",
      "brady_persist", "dilatation", "sbp", "dbp", "abnormal_fhr"};
  return names;
}

std::vector<double> naive_feature_row(const PatientState& s) {
  const auto& v = std::get<ContinuousVitals>(s.tv);
  const auto& b = s.baseline;
  return {1.0,
          b.maternal_age,
          static_cast<double>(b.parity),
          b.history_preterm ? 1.0 : 0.0,
          v.fhr,
          v.brady_persist ? 1.0 : 0.0,
          v.dilatation,
          v.sbp,
          v.dbp,
          abnormal_fhr(s.tv) ? 1.0 : 0.0};
}

bool outcome_by(const Trajectory& t, int horizon_hour) {
  bool y = false;
  for (const auto& s : t.states) {
    if (s.k > horizon_hour) break;
    y = s.y;
  }
  return y;
}

NaiveModel fit_naive(const Dataset& ds, int k, int horizon_hour) {
  if (horizon_hour <= k) {
    throw UsageError(fmt::format("naive: horizon {} is not after hour {}", horizon_hour, k));
  }
  NaiveModel m;
  m.mode = ds.mode;
  m.k = k;
  m.horizon_hour = horizon_hour;

  const auto people = trajectories(ds);
  std::int64_t n = 0;
  double total_events = 0.0;
  if (ds.mode == Mode::coarse) {
    m.events.assign(kCoarseCells, 0.0);
    m.counts.assign(kCoarseCells, 0.0);
  }
  DesignMatrix design(naive_features());
  for (const auto& person : people) {
    const auto& t = person.trajectory;
    if (static_cast<std::size_t>(k) >= t.states.size()) continue;
    const auto& s = t.states[static_cast<std::size_t>(k)];
    if (!s.at_risk()) continue;
    const double y = outcome_by(t, horizon_hour) ? 1.0 : 0.0;
    ++n;
    total_events += y;
    if (ds.mode == Mode::coarse) {
      const int cell = coarse_cell(std::get<CoarseVitals>(s.tv));
      m.events[cell] += y;
      m.counts[cell] += 1.0;
    } else {
      design.add_row(naive_feature_row(s), y);
    }
  }
  if (n == 0) throw UsageError(fmt::format("naive: empty risk set at hour {}", k));
  m.pooled = total_events / static_cast<double>(n);
  if (ds.mode == Mode::continuous) {
    if (total_events == 0.0 || total_events == static_cast<double>(n)) {
      m.constant = true;
      m.constant_p = m.pooled;
    } else {
      m.logistic = fit_logistic(design);
    }
  }
  return m;
}

RiskEstimate NaiveModel::predict(const PatientState& condition) const {
  if (condition.mode() != mode) throw ModeError("naive: condition mode differs from the model");
  RiskEstimate out;
  out.method = Method::naive;
  if (mode == Mode::coarse) {
    const int cell = coarse_cell(std::get<CoarseVitals>(condition.tv));
    const double c = counts[cell];
    out.p = c > 0.0 ? events[cell] / c : pooled;
    out.n = static_cast<std::int64_t>(c);
    out.se = c > 0.0 ? std::sqrt(out.p * (1.0 - out.p) / c) : 0.0;
    return out;
  }
  out.p = constant ? constant_p : logistic.predict(naive_feature_row(condition));
  out.n = logistic.n;
  return out;
}

}  // namespace seqpi
