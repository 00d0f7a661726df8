#include "seqpi/error.hpp"
#include "seqpi/math.hpp"
#include "seqpi/scm.hpp"

namespace seqpi {
namespace {

constexpr double kLowBandTop = 109.99;
constexpr double kHighBandBottom = 160.01;

ContinuousVitals initial_continuous(Rng& rng, const ContinuousParams& c) {
  ContinuousVitals v;
  const double u = uniform01(rng);
  if (u < c.init_p_low) {
    v.fhr = clamp_quantize(normal(rng, c.low_mean, c.low_sd), 50.0, kLowBandTop);
    v.brady_persist = bernoulli(rng, c.p_persist_given_low);
  } else if (u < c.init_p_low + c.init_p_high) {
    v.fhr = clamp_quantize(normal(rng, c.high_mean, c.high_sd), kHighBandBottom, 220.0);
  } else {
    v.fhr = clamp_quantize(normal(rng, c.fhr_mean, c.init_fhr_sd), kFhrLower, kFhrUpper);
  }
  v.dilatation = clamp_quantize(normal(rng, c.init_dilatation_mean, c.init_dilatation_sd), 0.0,
                                c.init_dilatation_max);
  v.sbp = clamp_quantize(normal(rng, c.sbp_mean, c.sbp_init_sd), 70.0, 220.0);
  v.dbp = clamp_quantize(normal(rng, c.dbp_mean, c.dbp_init_sd), 40.0, 130.0);
  return v;
}

CoarseVitals initial_coarse(Rng& rng, const CoarseTables& t) {
  CoarseVitals v;
  v.fhr = static_cast<FhrCategory>(categorical(rng, t.init_fhr));
  v.dilatation = categorical(rng, t.init_dilatation);
  v.sbp = bernoulli(rng, t.init_sbp_high) ? BpLevel::high : BpLevel::normal;
  v.dbp = bernoulli(rng, t.init_dbp_high) ? BpLevel::high : BpLevel::normal;
  return v;
}

// Vitals one hour later on the vaginal path, given no outcome this hour.
ContinuousVitals evolve_continuous(const ContinuousVitals& v, int parity, int k,
                                   Rng& rng, const ContinuousParams& c) {
  ContinuousVitals next = v;
  const bool out_of_band = v.fhr < kFhrLower || v.fhr > kFhrUpper;
  const double p_exc = logistic(c.excursion_intercept +
                                c.excursion_out_of_band * (out_of_band ? 1.0 : 0.0) +
                                c.excursion_duration * k);
  next.brady_persist = false;
  if (bernoulli(rng, p_exc)) {
    if (bernoulli(rng, c.p_low_given_excursion)) {
      next.fhr = clamp_quantize(normal(rng, c.low_mean, c.low_sd), 50.0, kLowBandTop);
      next.brady_persist = bernoulli(rng, c.p_persist_given_low);
    } else {
      next.fhr = clamp_quantize(normal(rng, c.high_mean, c.high_sd), kHighBandBottom, 220.0);
    }
  } else {
    const double prev = out_of_band ? c.fhr_mean : v.fhr;
    next.fhr = clamp_quantize(
        c.fhr_mean + c.fhr_reversion * (prev - c.fhr_mean) + normal(rng, 0.0, c.fhr_sd),
        kFhrLower, kFhrUpper);
  }

  double inc = std::max(0.0, normal(rng, c.dilatation_increment_mean, c.dilatation_increment_sd));
  if (parity >= 1) inc *= c.parous_factor;
  next.dilatation = clamp_quantize(v.dilatation + inc, 0.0, 10.0);

  next.sbp = clamp_quantize(
      c.sbp_mean + c.sbp_reversion * (v.sbp - c.sbp_mean) + normal(rng, 0.0, c.sbp_sd), 70.0,
      220.0);
  next.dbp = clamp_quantize(
      c.dbp_mean + c.dbp_reversion * (v.dbp - c.dbp_mean) + normal(rng, 0.0, c.dbp_sd), 40.0,
      130.0);
  return next;
}

CoarseVitals evolve_coarse(const CoarseVitals& v, int k, Rng& rng, const CoarseTables& t) {
  const int late = is_late(k, t) ? 1 : 0;
  CoarseVitals next;
  next.fhr = static_cast<FhrCategory>(
      categorical(rng, t.fhr_next[late][static_cast<int>(v.fhr)]));
  next.dilatation = std::min(10, v.dilatation + categorical(rng, t.dilatation_increment));
  next.sbp = bernoulli(rng, t.sbp_high_next[static_cast<int>(v.sbp)]) ? BpLevel::high
                                                                      : BpLevel::normal;
  next.dbp = bernoulli(rng, t.dbp_high_next[static_cast<int>(v.dbp)]) ? BpLevel::high
                                                                      : BpLevel::normal;
  return next;
}

bool sbp_is_high(const PatientState& s, const ScmConfig& cfg) {
  if (const auto* c = std::get_if<CoarseVitals>(&s.tv)) return c->sbp == BpLevel::high;
  return std::get<ContinuousVitals>(s.tv).sbp >= cfg.continuous.sbp_high_threshold;
}

void check_mode(const PatientState& s, const ScmConfig& cfg) {
  if (s.mode() != cfg.mode) {
    throw ModeError("state is " + std::string(to_string(s.mode())) + " but the SCM is " +
                    std::string(to_string(cfg.mode)));
  }
}

}  // namespace

BaselineCovariates sample_baseline(Rng& rng, const ScmConfig& cfg) {
  const auto& b = cfg.baseline;
  BaselineCovariates out;
  out.maternal_age = clamp_quantize(normal(rng, b.age_mean, b.age_sd), b.age_min, b.age_max);
  out.parity = std::min(poisson(rng, b.parity_mean), b.parity_max);
  out.history_preterm = bernoulli(rng, b.preterm_prob);
  return out;
}

PatientState initial_state(const BaselineCovariates& baseline, Rng& rng, const ScmConfig& cfg) {
  PatientState s;
  s.k = 0;
  s.baseline = baseline;
  if (cfg.mode == Mode::coarse) {
    s.tv = initial_coarse(rng, cfg.coarse);
  } else {
    s.tv = initial_continuous(rng, cfg.continuous);
  }
  return s;
}

double labor_hazard(const PatientState& state, const ScmConfig& cfg) {
  if (!state.at_risk()) return 0.0;
  if (const auto* v = std::get_if<CoarseVitals>(&state.tv)) {
    const auto& t = cfg.coarse;
    return t.hazard[is_late(state.k, t) ? 1 : 0][static_cast<int>(v->fhr)]
                   [static_cast<int>(v->sbp)];
  }
  const auto& h = cfg.continuous.hazard;
  return logistic(h.intercept + h.abnormal_fhr * (abnormal_fhr(state.tv) ? 1.0 : 0.0) +
                  h.brady_persist * (brady_persist(state.tv) ? 1.0 : 0.0) +
                  h.duration * state.k + h.sbp_high * (sbp_is_high(state, cfg) ? 1.0 : 0.0));
}

double surgical_risk(const PatientState& state, const ScmConfig& cfg) {
  if (const auto* v = std::get_if<CoarseVitals>(&state.tv)) {
    return cfg.coarse.surgical[static_cast<int>(v->sbp)];
  }
  const auto& s = cfg.continuous.surgical;
  return logistic(s.intercept + s.sbp_high * (sbp_is_high(state, cfg) ? 1.0 : 0.0));
}

PatientState transition(const PatientState& state, Action action, Rng& rng,
                        const ScmConfig& cfg) {
  if (!state.at_risk()) {
    throw NotAtRiskError("transition from hour " + std::to_string(state.k) +
                         ": state is not at risk (z = 0)");
  }
  if (state.a == Action::cesarean && action == Action::vaginal) {
    throw IrreversibilityError("transition at hour " + std::to_string(state.k) +
                               ": vaginal decision after cesarean");
  }
  check_mode(state, cfg);

  PatientState next = state;
  next.k = state.k + 1;
  if (action == Action::cesarean) {
    next.a = Action::cesarean;
    next.born = true;
    next.y = bernoulli(rng, surgical_risk(state, cfg));
    return next;
  }

  if (bernoulli(rng, labor_hazard(state, cfg))) {
    next.y = true;
    return next;
  }
  if (const auto* v = std::get_if<CoarseVitals>(&state.tv)) {
    const CoarseVitals nv = evolve_coarse(*v, state.k, rng, cfg.coarse);
    next.born = nv.dilatation >= 10;
    next.tv = nv;
  } else {
    const ContinuousVitals nv = evolve_continuous(std::get<ContinuousVitals>(state.tv),
                                                  state.baseline.parity, state.k, rng,
                                                  cfg.continuous);
    next.born = nv.dilatation >= 10.0;
    next.tv = nv;
  }
  return next;
}

void simulate_forward(History& history, const DecisionFn& policy, Rng& rng,
                      const ScmConfig& cfg, int stop_hour) {
  while (history.current().at_risk() && history.current().k < stop_hour) {
    const Action action = policy(history);
    PatientState next = transition(history.current(), action, rng, cfg);
    history.actions.push_back(action);
    history.states.push_back(std::move(next));
  }
}

Trajectory simulate_trajectory(const BaselineCovariates& baseline, const DecisionFn& policy,
                               Rng& rng, const ScmConfig& cfg) {
  Trajectory traj;
  traj.states.push_back(initial_state(baseline, rng, cfg));
  simulate_forward(traj, policy, rng, cfg, cfg.horizon);
  return traj;
}

}  // namespace seqpi
