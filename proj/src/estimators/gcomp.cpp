#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "seqpi/error.hpp"
#include "seqpi/estimators.hpp"
#include "seqpi/math.hpp"

namespace seqpi {
namespace {

// Rethrows a component failure with the component named.
template <typename F>
auto fit_component(const std::string& name, F&& fit) {
  try {
    return fit();
  } catch (const SeparationError& e) {
    throw SeparationError("gcomp component '" + name + "': " + e.what());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError("gcomp component '" + name + "': " + e.what());
  } catch (const UsageError& e) {
    throw DataError("gcomp component '" + name + "': " + e.what());
  }
}

struct Tally {
  double events = 0.0;
  double n = 0.0;
  void add(bool e) {
    events += e ? 1.0 : 0.0;
    n += 1.0;
  }
  double rate() const { return events / n; }
};

double quantile(std::vector<double>& v, double q) {
  const auto idx = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

struct Moments {
  double sum = 0.0, sum2 = 0.0, n = 0.0;
  void add(double x) {
    sum += x;
    sum2 += x * x;
    n += 1.0;
  }
  double mean() const { return sum / n; }
  double sd() const { return std::sqrt(std::max(0.0, (sum2 - sum * sum / n) / (n - 1.0))); }
};

bool regime_may_operate(const Regime& regime) {
  if (std::holds_alternative<VaginalOnly>(regime)) return false;
  if (const auto* s = std::get_if<StaticSequence>(&regime)) {
    return std::find(s->actions.begin(), s->actions.end(), Action::cesarean) != s->actions.end();
  }
  if (const auto* f = std::get_if<FixThenNatural>(&regime)) return f->fix_action == Action::cesarean;
  // Natural segments operate only as often as the fitted policy does.
  return !std::holds_alternative<NaturalCourse>(regime);
}

void check_hours(const std::vector<double>& rows_per_hour, int horizon) {
  for (int h = 0; h < horizon; ++h) {
    if (rows_per_hour[static_cast<std::size_t>(h)] == 0.0) {
      throw DataError(fmt::format("gcomp: no at-risk person-hours with a decision at hour {}", h));
    }
  }
}

// Pooled continuous models need no data at every hour: once every observed
// labor has ended they extrapolate in duration. Gaps inside the observed
// range still mean the data are broken. Returns the number of covered hours.
int check_support(const std::vector<double>& rows_per_hour) {
  int last = -1;
  for (std::size_t h = 0; h < rows_per_hour.size(); ++h) {
    if (rows_per_hour[h] > 0.0) last = static_cast<int>(h);
  }
  if (last < 0) throw DataError("gcomp: no at-risk person-hours with a decision at hour 0");
  check_hours(rows_per_hour, last + 1);
  return last + 1;
}

TransitionModels fit_coarse(const std::vector<PersonTrajectory>& people, int horizon) {
  TransitionModels m;
  m.dynamics = ScmConfig::defaults(Mode::coarse);
  m.dynamics.horizon = horizon;
  auto& t = m.dynamics.coarse;
  const int late_hour = t.late_hour;

  Tally hazard[2][kFhrCategories][2], surgical[2];
  double fhr_next[2][kFhrCategories][kFhrCategories] = {};
  double dil_inc[3] = {};
  Tally sbp_next[2], dbp_next[2];
  double init_fhr[kFhrCategories] = {}, init_dil[kDilatationLevels] = {};
  Tally init_sbp, init_dbp;
  // Propensity cells: [hour][abnormal][stalled].
  std::vector<Tally> prop(static_cast<std::size_t>(horizon) * 4);
  std::vector<double> rows_per_hour(static_cast<std::size_t>(horizon), 0.0);
  std::int64_t n_vaginal = 0, n_cesarean = 0, n_vitals = 0;
  const UsualCarePolicy form;

  for (const auto& person : people) {
    const auto& tr = person.trajectory;
    const auto& s0 = std::get<CoarseVitals>(tr.states.front().tv);
    init_fhr[static_cast<int>(s0.fhr)] += 1.0;
    init_dil[s0.dilatation] += 1.0;
    init_sbp.add(s0.sbp == BpLevel::high);
    init_dbp.add(s0.dbp == BpLevel::high);
    for (std::size_t i = 0; i < tr.actions.size(); ++i) {
      const auto& s = tr.states[i];
      const auto& nx = tr.states[i + 1];
      const auto& v = std::get<CoarseVitals>(s.tv);
      if (s.k < horizon) {
        rows_per_hour[static_cast<std::size_t>(s.k)] += 1.0;
        const int abn = abnormal_fhr(s.tv) ? 1 : 0;
        const int stalled = form.stalled_flag(s) ? 1 : 0;
        prop[static_cast<std::size_t>(s.k) * 4 + abn * 2 + stalled].add(tr.actions[i] ==
                                                                         Action::cesarean);
      }
      const int sbp = static_cast<int>(v.sbp);
      if (tr.actions[i] == Action::cesarean) {
        surgical[sbp].add(nx.y);
        ++n_cesarean;
        continue;
      }
      const int late = s.k >= late_hour ? 1 : 0;
      hazard[late][static_cast<int>(v.fhr)][sbp].add(nx.y);
      ++n_vaginal;
      if (nx.y) continue;
      const auto& nv = std::get<CoarseVitals>(nx.tv);
      ++n_vitals;
      fhr_next[late][static_cast<int>(v.fhr)][static_cast<int>(nv.fhr)] += 1.0;
      if (v.dilatation <= 8) dil_inc[nv.dilatation - v.dilatation] += 1.0;
      sbp_next[sbp].add(nv.sbp == BpLevel::high);
      dbp_next[static_cast<int>(v.dbp)].add(nv.dbp == BpLevel::high);
    }
  }
  check_hours(rows_per_hour, horizon);

  // Initial distributions.
  const double n0 = static_cast<double>(people.size());
  for (int c = 0; c < kFhrCategories; ++c) t.init_fhr[c] = init_fhr[c] / n0;
  for (int d = 0; d < kDilatationLevels; ++d) t.init_dilatation[d] = init_dil[d] / n0;
  t.init_sbp_high = init_sbp.rate();
  t.init_dbp_high = init_dbp.rate();

  // Hazard: saturated in (late, fhr, sbp); empty cells fall back to the
  // (late, fhr) pool, then the late stratum.
  for (int late = 0; late < 2; ++late) {
    Tally stratum;
    for (int f = 0; f < kFhrCategories; ++f) {
      for (int b = 0; b < 2; ++b) {
        stratum.events += hazard[late][f][b].events;
        stratum.n += hazard[late][f][b].n;
      }
    }
    if (stratum.n == 0.0) {
      if (late == 0 || horizon > late_hour) {
        throw DataError(fmt::format(
            "gcomp component 'hazard': no vaginal person-hours at {} hours",
            late ? "late" : "early"));
      }
      t.hazard[1] = t.hazard[0];
      t.fhr_next[1] = t.fhr_next[0];
      continue;
    }
    for (int f = 0; f < kFhrCategories; ++f) {
      const Tally pool{hazard[late][f][0].events + hazard[late][f][1].events,
                       hazard[late][f][0].n + hazard[late][f][1].n};
      for (int b = 0; b < 2; ++b) {
        const Tally& cell = hazard[late][f][b];
        t.hazard[late][f][b] =
            cell.n > 0 ? cell.rate() : (pool.n > 0 ? pool.rate() : stratum.rate());
      }
      // FHR transitions: empty rows fall back to the other period, then stay.
      double row_total = 0.0;
      for (int to = 0; to < kFhrCategories; ++to) row_total += fhr_next[late][f][to];
      const int src_late = row_total > 0.0 ? late : 1 - late;
      double src_total = 0.0;
      for (int to = 0; to < kFhrCategories; ++to) src_total += fhr_next[src_late][f][to];
      for (int to = 0; to < kFhrCategories; ++to) {
        t.fhr_next[late][f][to] =
            src_total > 0.0 ? fhr_next[src_late][f][to] / src_total : (to == f ? 1.0 : 0.0);
      }
    }
  }
  m.diagnostics.push_back({"hazard", n_vaginal, 0, 0.0});

  const Tally surgical_pool{surgical[0].events + surgical[1].events, surgical[0].n + surgical[1].n};
  for (int b = 0; b < 2; ++b) {
    t.surgical[b] = surgical[b].n > 0 ? surgical[b].rate()
                                      : (surgical_pool.n > 0 ? surgical_pool.rate() : 0.0);
  }
  m.surgical_identified = surgical_pool.n > 0;
  m.diagnostics.push_back({"surgical", n_cesarean, 0, 0.0});

  const double inc_total = dil_inc[0] + dil_inc[1] + dil_inc[2];
  if (inc_total == 0.0) throw DataError("gcomp component 'dilatation': no rows");
  for (int i = 0; i < 3; ++i) t.dilatation_increment[i] = dil_inc[i] / inc_total;
  for (int b = 0; b < 2; ++b) {
    const Tally sp{sbp_next[0].events + sbp_next[1].events, sbp_next[0].n + sbp_next[1].n};
    const Tally dp{dbp_next[0].events + dbp_next[1].events, dbp_next[0].n + dbp_next[1].n};
    t.sbp_high_next[b] = sbp_next[b].n > 0 ? sbp_next[b].rate() : sp.rate();
    t.dbp_high_next[b] = dbp_next[b].n > 0 ? dbp_next[b].rate() : dp.rate();
  }
  m.diagnostics.push_back({"vitals", n_vitals, 0, 0.0});

  // Propensity: saturated in (hour, abnormal, stalled); empty cells fall
  // back to the hour, then to the pooled rate.
  auto& p = m.propensity;
  p.mode = Mode::coarse;
  p.table.assign(prop.size(), 0.0);
  Tally all;
  for (const auto& c : prop) {
    all.events += c.events;
    all.n += c.n;
  }
  for (int h = 0; h < horizon; ++h) {
    Tally hour;
    for (int j = 0; j < 4; ++j) {
      hour.events += prop[static_cast<std::size_t>(h) * 4 + j].events;
      hour.n += prop[static_cast<std::size_t>(h) * 4 + j].n;
    }
    for (int j = 0; j < 4; ++j) {
      const auto& c = prop[static_cast<std::size_t>(h) * 4 + j];
      p.table[static_cast<std::size_t>(h) * 4 + j] =
          c.n > 0 ? c.rate() : (hour.n > 0 ? hour.rate() : all.rate());
    }
  }
  m.diagnostics.push_back({"propensity", static_cast<std::int64_t>(all.n), 0, 0.0});
  m.dynamics.validate();
  return m;
}

TransitionModels fit_continuous(const std::vector<PersonTrajectory>& people, int horizon) {
  TransitionModels m;
  m.dynamics = ScmConfig::defaults(Mode::continuous);
  m.dynamics.horizon = horizon;
  auto& c = m.dynamics.continuous;
  auto& bp = m.dynamics.baseline;
  const UsualCarePolicy form;

  DesignMatrix hazard({"intercept", "abnormal_fhr", "brady_persist", "duration", "sbp_high"});
  DesignMatrix surgical({"intercept", "sbp_high"});
  DesignMatrix excursion({"intercept", "out_of_band", "duration"});
  DesignMatrix fhr_ar({"intercept", "fhr"});
  DesignMatrix sbp_ar({"intercept", "sbp"});
  DesignMatrix dbp_ar({"intercept", "dbp"});
  DesignMatrix propensity({"intercept", "abnormal_fhr", "stalled", "duration"});
  Tally low_given_exc, persist_given_low;
  Moments low, high, age, parity, init_dil, init_fhr, init_sbp, init_dbp;
  Tally preterm, init_low, init_high;
  std::vector<double> inc[2];
  std::vector<double> rows_per_hour(static_cast<std::size_t>(horizon), 0.0);
  const double thr = c.sbp_high_threshold;

  for (const auto& person : people) {
    const auto& tr = person.trajectory;
    const auto& s0 = tr.states.front();
    const auto& v0 = std::get<ContinuousVitals>(s0.tv);
    age.add(s0.baseline.maternal_age);
    parity.add(s0.baseline.parity);
    preterm.add(s0.baseline.history_preterm);
    init_dil.add(v0.dilatation);
    init_sbp.add(v0.sbp);
    init_dbp.add(v0.dbp);
    init_low.add(v0.fhr < kFhrLower);
    init_high.add(v0.fhr > kFhrUpper);
    if (v0.fhr < kFhrLower) persist_given_low.add(v0.brady_persist);
    if (v0.fhr >= kFhrLower && v0.fhr <= kFhrUpper) init_fhr.add(v0.fhr);

    for (std::size_t i = 0; i < tr.actions.size(); ++i) {
      const auto& s = tr.states[i];
      const auto& nx = tr.states[i + 1];
      const auto& v = std::get<ContinuousVitals>(s.tv);
      const double k = static_cast<double>(s.k);
      const double sbp_high = v.sbp >= thr ? 1.0 : 0.0;
      if (s.k < horizon) {
        rows_per_hour[static_cast<std::size_t>(s.k)] += 1.0;
        const double x[] = {1.0, abnormal_fhr(s.tv) ? 1.0 : 0.0,
                            form.stalled_flag(s) ? 1.0 : 0.0,
                            static_cast<double>(std::min(s.k, form.duration_cap))};
        propensity.add_row(x, tr.actions[i] == Action::cesarean ? 1.0 : 0.0);
      }
      if (tr.actions[i] == Action::cesarean) {
        const double x[] = {1.0, sbp_high};
        surgical.add_row(x, nx.y ? 1.0 : 0.0);
        continue;
      }
      {
        const double x[] = {1.0, abnormal_fhr(s.tv) ? 1.0 : 0.0, v.brady_persist ? 1.0 : 0.0, k,
                            sbp_high};
        hazard.add_row(x, nx.y ? 1.0 : 0.0);
      }
      if (nx.y) continue;
      const auto& nv = std::get<ContinuousVitals>(nx.tv);
      const bool oob = v.fhr < kFhrLower || v.fhr > kFhrUpper;
      const bool next_oob = nv.fhr < kFhrLower || nv.fhr > kFhrUpper;
      {
        const double x[] = {1.0, oob ? 1.0 : 0.0, k};
        excursion.add_row(x, next_oob ? 1.0 : 0.0);
      }
      if (next_oob) {
        low_given_exc.add(nv.fhr < kFhrLower);
        if (nv.fhr < kFhrLower) {
          low.add(nv.fhr);
          persist_given_low.add(nv.brady_persist);
        } else {
          high.add(nv.fhr);
        }
      } else if (!oob) {
        const double x[] = {1.0, v.fhr};
        fhr_ar.add_row(x, nv.fhr);
      }
      if (v.dilatation <= 7.0) inc[s.baseline.parity >= 1 ? 1 : 0].push_back(nv.dilatation - v.dilatation);
      {
        const double x[] = {1.0, v.sbp};
        sbp_ar.add_row(x, nv.sbp);
      }
      {
        const double x[] = {1.0, v.dbp};
        dbp_ar.add_row(x, nv.dbp);
      }
    }
  }
  const int supported = check_support(rows_per_hour);

  bp.age_mean = age.mean();
  bp.age_sd = age.sd();
  bp.parity_mean = parity.mean();
  bp.preterm_prob = preterm.rate();
  c.init_dilatation_mean = init_dil.mean();
  c.init_dilatation_sd = init_dil.sd();
  c.init_p_low = init_low.rate();
  c.init_p_high = init_high.rate();
  c.init_fhr_sd = init_fhr.sd();
  c.sbp_init_sd = init_sbp.sd();
  c.dbp_init_sd = init_dbp.sd();

  const auto hz = fit_component("hazard", [&] { return fit_logistic(hazard); });
  c.hazard = {hz.coef[0], hz.coef[1], hz.coef[2], hz.coef[3], hz.coef[4]};
  m.diagnostics.push_back({"hazard", hz.n, hz.iterations, hz.grad_norm});
  m.diagnostics.push_back({"supported_hours", supported, 0, 0.0});

  m.surgical_identified = surgical.rows() > 0;
  if (m.surgical_identified) {
    const auto sg = fit_component("surgical", [&] { return fit_logistic(surgical); });
    c.surgical = {sg.coef[0], sg.coef[1]};
    m.diagnostics.push_back({"surgical", sg.n, sg.iterations, sg.grad_norm});
  } else {
    m.diagnostics.push_back({"surgical", 0, 0, 0.0});
  }

  const auto ex = fit_component("excursion", [&] { return fit_logistic(excursion); });
  c.excursion_intercept = ex.coef[0];
  c.excursion_out_of_band = ex.coef[1];
  c.excursion_duration = ex.coef[2];
  m.diagnostics.push_back({"excursion", ex.n, ex.iterations, ex.grad_norm});
  if (low_given_exc.n == 0 || low.n < 2 || high.n < 2 || persist_given_low.n == 0) {
    throw DataError("gcomp component 'fhr_bands': too few out-of-band observations");
  }
  c.p_low_given_excursion = low_given_exc.rate();
  c.p_persist_given_low = persist_given_low.rate();
  c.low_mean = low.mean();
  c.low_sd = low.sd();
  c.high_mean = high.mean();
  c.high_sd = high.sd();

  auto set_ar = [](const LinearModel& lm, double& mean, double& reversion, double& sd) {
    reversion = lm.coef[1];
    mean = lm.coef[0] / (1.0 - lm.coef[1]);
    sd = lm.sigma;
  };
  const auto fa = fit_component("fhr", [&] { return fit_linear(fhr_ar); });
  set_ar(fa, c.fhr_mean, c.fhr_reversion, c.fhr_sd);
  m.diagnostics.push_back({"fhr", fa.n, 0, 0.0});
  const auto sa = fit_component("sbp", [&] { return fit_linear(sbp_ar); });
  set_ar(sa, c.sbp_mean, c.sbp_reversion, c.sbp_sd);
  m.diagnostics.push_back({"sbp", sa.n, 0, 0.0});
  const auto da = fit_component("dbp", [&] { return fit_linear(dbp_ar); });
  set_ar(da, c.dbp_mean, c.dbp_reversion, c.dbp_sd);
  m.diagnostics.push_back({"dbp", da.n, 0, 0.0});

  // Dilatation: median and normalised IQR per parity group are unaffected
  // by the truncation at zero while fewer than a quarter of draws are cut.
  if (inc[0].size() < 4 || inc[1].size() < 4) {
    throw DataError("gcomp component 'dilatation': too few rows per parity group");
  }
  const double median0 = quantile(inc[0], 0.5);
  const double iqr0 = quantile(inc[0], 0.75) - quantile(inc[0], 0.25);
  const double median1 = quantile(inc[1], 0.5);
  if (!(median0 > 0.0) || !(iqr0 > 0.0)) {
    throw DataError("gcomp component 'dilatation': degenerate increments");
  }
  c.dilatation_increment_mean = median0;
  c.dilatation_increment_sd = iqr0 / 1.349;
  c.parous_factor = median1 / median0;
  m.diagnostics.push_back(
      {"dilatation", static_cast<std::int64_t>(inc[0].size() + inc[1].size()), 0, 0.0});

  auto& p = m.propensity;
  p.mode = Mode::continuous;
  if (m.surgical_identified) {
    const auto pr = fit_component("propensity", [&] { return fit_logistic(propensity); });
    p.form.intercept = pr.coef[0];
    p.form.abnormal_fhr = pr.coef[1];
    p.form.stalled = pr.coef[2];
    p.form.duration = pr.coef[3];
    m.diagnostics.push_back({"propensity", pr.n, pr.iterations, pr.grad_norm});
  } else {
    // No cesarean was ever observed: the fitted policy never operates.
    p.form = UsualCarePolicy::never_cesarean();
    m.diagnostics.push_back({"propensity", static_cast<std::int64_t>(propensity.rows()), 0, 0.0});
  }
  m.dynamics.validate();
  return m;
}

}  // namespace

double PropensityModel::probability(const PatientState& state) const {
  if (!state.at_risk()) return 0.0;
  if (state.a == Action::cesarean) return 1.0;
  if (mode == Mode::continuous) return form.probability(state);
  const int hours = static_cast<int>(table.size() / 4);
  if (hours == 0) throw UsageError("propensity model is empty");
  const int h = std::clamp(state.k, 0, hours - 1);
  const int abn = abnormal_fhr(state.tv) ? 1 : 0;
  const int stalled = form.stalled_flag(state) ? 1 : 0;
  return table[static_cast<std::size_t>(h) * 4 + abn * 2 + stalled];
}

TransitionModels fit_gcomp(const Dataset& ds, int horizon) {
  if (ds.rows.empty()) throw DataError("gcomp: empty dataset");
  if (horizon < 1) throw UsageError("gcomp: horizon must be >= 1");
  const auto people = trajectories(ds);
  return ds.mode == Mode::coarse ? fit_coarse(people, horizon) : fit_continuous(people, horizon);
}

RiskEstimate gcomp_predict(const TransitionModels& models, const PatientState& condition,
                           const EstimandSpec& spec, const McOptions& options,
                           GcompEngine engine) {
  if (!models.surgical_identified && regime_may_operate(spec.regime)) {
    throw PositivityError("gcomp: no cesarean person-hours in the data, so the surgical-risk "
                          "component is not identified for '" +
                          regime_label(spec.regime) + "'");
  }
  if (models.dynamics.mode == Mode::coarse && engine == GcompEngine::exact) {
    RiskEstimate out =
        CoarseExactOracle(models.dynamics).evaluate(spec, condition, &models.propensity);
    out.method = Method::gcomp;
    return out;
  }
  return simulate_risk(spec, condition, models.dynamics, &models.propensity, options,
                       Method::gcomp);
}

}  // namespace seqpi
