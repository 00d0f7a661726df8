#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "seqpi/error.hpp"
#include "seqpi/estimators.hpp"

namespace seqpi {
namespace {

// Regime action at `hour` for a static regime anchored at k; nullopt
// when the regime is not static.
std::optional<Action> static_action(const Regime& regime, int rel) {
  if (std::holds_alternative<VaginalOnly>(regime)) return Action::vaginal;
  if (std::holds_alternative<ImmediateCesarean>(regime)) return Action::cesarean;
  if (const auto* s = std::get_if<StaticSequence>(&regime)) {
    if (rel < static_cast<int>(s->actions.size())) return s->actions[static_cast<std::size_t>(rel)];
    throw UsageError(fmt::format("ice: static sequence does not cover relative hour {}", rel));
  }
  return std::nullopt;
}

struct Sample {
  PatientState state;
  double q = 0.0;
};

IceStage fit_stage(Mode mode, int hour, Action action, const std::vector<Sample>& samples) {
  IceStage st;
  st.hour = hour;
  st.action = action;
  st.n = static_cast<std::int64_t>(samples.size());
  double total = 0.0;
  for (const auto& s : samples) total += s.q;
  st.pooled = total / static_cast<double>(samples.size());
  if (mode == Mode::coarse) {
    std::vector<double> sum(kCoarseCells, 0.0), fb_sum(kFhrCategories * 2, 0.0),
        fb_n(kFhrCategories * 2, 0.0);
    st.cell_count.assign(kCoarseCells, 0.0);
    for (const auto& s : samples) {
      const auto& v = std::get<CoarseVitals>(s.state.tv);
      const int cell = coarse_cell(v);
      sum[cell] += s.q;
      st.cell_count[cell] += 1.0;
      const int f = static_cast<int>(v.fhr) * 2 + static_cast<int>(v.sbp);
      fb_sum[f] += s.q;
      fb_n[f] += 1.0;
    }
    st.cell_mean.assign(kCoarseCells, std::numeric_limits<double>::quiet_NaN());
    for (int c = 0; c < kCoarseCells; ++c) {
      if (st.cell_count[c] > 0.0) st.cell_mean[c] = sum[c] / st.cell_count[c];
    }
    st.fallback.assign(kFhrCategories * 2, st.pooled);
    for (int f = 0; f < kFhrCategories * 2; ++f) {
      if (fb_n[f] > 0.0) st.fallback[f] = fb_sum[f] / fb_n[f];
    }
    return st;
  }
  if (total > 0.0 && total < static_cast<double>(samples.size())) {
    DesignMatrix d(naive_features());
    for (const auto& s : samples) d.add_row(naive_feature_row(s.state), s.q);
    try {
      st.logistic = fit_logistic(d);
    } catch (const SeparationError&) {
      st.logistic = {};
    }
  }
  return st;
}

}  // namespace

double IceModel::stage_value(std::size_t stage, const PatientState& s) const {
  const auto& st = stages.at(stage);
  if (mode == Mode::coarse) {
    const auto& v = std::get<CoarseVitals>(s.tv);
    const int cell = coarse_cell(v);
    if (st.cell_count[cell] > 0.0) return st.cell_mean[cell];
    return st.fallback[static_cast<int>(v.fhr) * 2 + static_cast<int>(v.sbp)];
  }
  if (!st.logistic.fitted) return st.pooled;
  return st.logistic.predict(naive_feature_row(s));
}

RiskEstimate IceModel::predict(const PatientState& condition) const {
  check_query(spec, condition, std::numeric_limits<int>::max(), nullptr);
  if (condition.mode() != mode) throw ModeError("ice: condition mode differs from the model");
  RiskEstimate out;
  out.method = Method::ice;
  out.p = stage_value(0, condition);
  const auto& st = stages.front();
  if (mode == Mode::coarse) {
    const int cell = coarse_cell(std::get<CoarseVitals>(condition.tv));
    const double n = st.cell_count[cell];
    out.n = static_cast<std::int64_t>(n);
    // Bernoulli bound on the variance of a [0, 1] pseudo-outcome mean.
    if (n > 0.0) out.se = std::sqrt(out.p * (1.0 - out.p) / n);
  } else {
    out.n = st.n;
  }
  return out;
}

IceModel ice_estimate(const Dataset& ds, const EstimandSpec& spec) {
  spec.validate();
  const int k = spec.moment_of_use;
  const int h = spec.horizon_hour();
  if (!static_action(spec.regime, 0)) {
    throw UsageError("ice: regime '" + regime_label(spec.regime) + "' is not static");
  }
  // Once the regime operates nobody stays at risk, so later stages are void.
  int last = h - 1;
  for (int t = k; t < h; ++t) {
    if (*static_action(spec.regime, t - k) == Action::cesarean) {
      last = t;
      break;
    }
  }

  // Hours after every observed labor has ended are never reached by the
  // recursion; only hours with someone at risk need regime-consistent data.
  const auto people = trajectories(ds);
  int observed = -1;
  for (const auto& person : people) {
    const auto& tr = person.trajectory;
    for (std::size_t i = 0; i < tr.actions.size(); ++i) {
      if (tr.states[i].at_risk()) observed = std::max(observed, tr.states[i].k);
    }
  }
  if (observed < k) {
    throw PositivityError(fmt::format("ice: nobody in the data is at risk at hour {}", k));
  }
  last = std::min(last, observed);

  IceModel model;
  model.mode = ds.mode;
  model.spec = spec;
  model.stages.resize(static_cast<std::size_t>(last - k + 1));

  for (int t = last; t >= k; --t) {
    const Action action = *static_action(spec.regime, t - k);
    std::vector<Sample> samples;
    for (const auto& person : people) {
      const auto& tr = person.trajectory;
      const auto i = static_cast<std::size_t>(t);
      if (i >= tr.actions.size()) continue;
      const auto& s = tr.states[i];
      if (!s.at_risk() || tr.actions[i] != action) continue;
      const auto& nx = tr.states[i + 1];
      double q = nx.y ? 1.0 : 0.0;
      if (nx.at_risk() && t + 1 < h && t + 1 <= last) {
        q = model.stage_value(static_cast<std::size_t>(t + 1 - k), nx);
      }
      samples.push_back({s, q});
    }
    if (samples.empty()) {
      throw PositivityError(fmt::format(
          "ice: no regime-consistent at-risk person-hours at hour {} (action {}); see the "
          "positivity report",
          t, to_int(action)));
    }
    model.stages[static_cast<std::size_t>(t - k)] = fit_stage(ds.mode, t, action, samples);
  }
  return model;
}

}  // namespace seqpi
