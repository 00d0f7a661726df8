#include <cmath>
#include <string>

#include "seqpi/error.hpp"
#include "seqpi/json_util.hpp"
#include "seqpi/scm.hpp"

namespace seqpi {
namespace {

using nlohmann::json;

void check_prob(double p, const std::string& name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw UsageError("scm config: " + name + " = " + std::to_string(p) + " is not in [0,1]");
  }
}

template <std::size_t N>
void check_distribution(const std::array<double, N>& probs, const std::string& name) {
  double total = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    check_prob(probs[i], name + "[" + std::to_string(i) + "]");
    total += probs[i];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw UsageError("scm config: " + name + " sums to " + std::to_string(total));
  }
}

void check_positive(double v, const std::string& name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw UsageError("scm config: " + name + " must be positive");
  }
}

json hazard_json(const HazardCoefficients& h) {
  return {{"intercept", h.intercept},         {"abnormal_fhr", h.abnormal_fhr},
          {"brady_persist", h.brady_persist}, {"duration", h.duration},
          {"sbp_high", h.sbp_high}};
}

void read_hazard(StrictObject o, HazardCoefficients& h) {
  o.read("intercept", h.intercept);
  o.read("abnormal_fhr", h.abnormal_fhr);
  o.read("brady_persist", h.brady_persist);
  o.read("duration", h.duration);
  o.read("sbp_high", h.sbp_high);
  o.finish();
}

void read_surgical(StrictObject o, SurgicalCoefficients& s) {
  o.read("intercept", s.intercept);
  o.read("sbp_high", s.sbp_high);
  o.finish();
}

// Field table for the flat continuous parameters, shared by read and write.
template <typename F>
void for_each_continuous_field(ContinuousParams& c, F&& f) {
  f("init_dilatation_mean", c.init_dilatation_mean);
  f("init_dilatation_sd", c.init_dilatation_sd);
  f("init_dilatation_max", c.init_dilatation_max);
  f("init_p_low", c.init_p_low);
  f("init_p_high", c.init_p_high);
  f("init_fhr_sd", c.init_fhr_sd);
  f("fhr_mean", c.fhr_mean);
  f("fhr_reversion", c.fhr_reversion);
  f("fhr_sd", c.fhr_sd);
  f("excursion_intercept", c.excursion_intercept);
  f("excursion_out_of_band", c.excursion_out_of_band);
  f("excursion_duration", c.excursion_duration);
  f("p_low_given_excursion", c.p_low_given_excursion);
  f("low_mean", c.low_mean);
  f("low_sd", c.low_sd);
  f("high_mean", c.high_mean);
  f("high_sd", c.high_sd);
  f("p_persist_given_low", c.p_persist_given_low);
  f("dilatation_increment_mean", c.dilatation_increment_mean);
  f("dilatation_increment_sd", c.dilatation_increment_sd);
  f("parous_factor", c.parous_factor);
  f("sbp_mean", c.sbp_mean);
  f("sbp_init_sd", c.sbp_init_sd);
  f("sbp_reversion", c.sbp_reversion);
  f("sbp_sd", c.sbp_sd);
  f("dbp_mean", c.dbp_mean);
  f("dbp_init_sd", c.dbp_init_sd);
  f("dbp_reversion", c.dbp_reversion);
  f("dbp_sd", c.dbp_sd);
  f("sbp_high_threshold", c.sbp_high_threshold);
}

}  // namespace

ScmConfig ScmConfig::defaults(Mode mode) {
  ScmConfig cfg;
  cfg.mode = mode;
  cfg.horizon = mode == Mode::coarse ? 12 : 72;
  return cfg;
}

void ScmConfig::validate() const {
  if (horizon < 1) throw UsageError("scm config: horizon must be >= 1");
  const auto& b = baseline;
  check_positive(b.age_sd, "baseline.age_sd");
  if (b.age_min > b.age_max) throw UsageError("scm config: baseline.age_min > age_max");
  if (b.parity_mean < 0.0 || b.parity_max < 0) {
    throw UsageError("scm config: parity parameters must be non-negative");
  }
  check_prob(b.preterm_prob, "baseline.preterm_prob");

  if (mode == Mode::continuous) {
    const auto& c = continuous;
    check_prob(c.init_p_low, "continuous.init_p_low");
    check_prob(c.init_p_high, "continuous.init_p_high");
    check_prob(c.init_p_low + c.init_p_high, "continuous.init_p_low + init_p_high");
    check_prob(c.p_low_given_excursion, "continuous.p_low_given_excursion");
    check_prob(c.p_persist_given_low, "continuous.p_persist_given_low");
    check_positive(c.init_dilatation_sd, "continuous.init_dilatation_sd");
    check_positive(c.init_fhr_sd, "continuous.init_fhr_sd");
    check_positive(c.fhr_sd, "continuous.fhr_sd");
    check_positive(c.low_sd, "continuous.low_sd");
    check_positive(c.high_sd, "continuous.high_sd");
    check_positive(c.dilatation_increment_sd, "continuous.dilatation_increment_sd");
    check_positive(c.parous_factor, "continuous.parous_factor");
    check_positive(c.sbp_sd, "continuous.sbp_sd");
    check_positive(c.dbp_sd, "continuous.dbp_sd");
    check_positive(c.sbp_init_sd, "continuous.sbp_init_sd");
    check_positive(c.dbp_init_sd, "continuous.dbp_init_sd");
  } else {
    const auto& t = coarse;
    check_distribution(t.init_fhr, "coarse.init_fhr");
    check_distribution(t.init_dilatation, "coarse.init_dilatation");
    if (t.init_dilatation[10] > 0.0) {
      throw UsageError("scm config: coarse.init_dilatation[10] must be 0 (fully dilated is born)");
    }
    check_prob(t.init_sbp_high, "coarse.init_sbp_high");
    check_prob(t.init_dbp_high, "coarse.init_dbp_high");
    for (int late = 0; late < 2; ++late) {
      for (int from = 0; from < kFhrCategories; ++from) {
        check_distribution(t.fhr_next[late][from],
                           "coarse.fhr_next[" + std::to_string(late) + "][" +
                               std::to_string(from) + "]");
        for (int s = 0; s < 2; ++s) check_prob(t.hazard[late][from][s], "coarse.hazard");
      }
    }
    check_distribution(t.dilatation_increment, "coarse.dilatation_increment");
    for (int s = 0; s < 2; ++s) {
      check_prob(t.sbp_high_next[s], "coarse.sbp_high_next");
      check_prob(t.dbp_high_next[s], "coarse.dbp_high_next");
      check_prob(t.surgical[s], "coarse.surgical");
    }
    if (t.late_hour < 0) throw UsageError("scm config: coarse.late_hour must be >= 0");
  }
}

json to_json(const ScmConfig& cfg) {
  json doc;
  doc["mode"] = std::string(to_string(cfg.mode));
  doc["horizon"] = cfg.horizon;
  doc["seed"] = cfg.seed;
  const auto& b = cfg.baseline;
  doc["baseline"] = {{"age_mean", b.age_mean},       {"age_sd", b.age_sd},
                     {"age_min", b.age_min},         {"age_max", b.age_max},
                     {"parity_mean", b.parity_mean}, {"parity_max", b.parity_max},
                     {"preterm_prob", b.preterm_prob}};
  if (cfg.mode == Mode::continuous) {
    json c = json::object();
    auto copy = cfg.continuous;
    for_each_continuous_field(copy, [&](const char* name, double& v) { c[name] = v; });
    c["hazard"] = hazard_json(cfg.continuous.hazard);
    c["surgical"] = {{"intercept", cfg.continuous.surgical.intercept},
                     {"sbp_high", cfg.continuous.surgical.sbp_high}};
    doc["continuous"] = c;
  } else {
    const auto& t = cfg.coarse;
    doc["coarse"] = {{"init_fhr", t.init_fhr},
                     {"init_dilatation", t.init_dilatation},
                     {"init_sbp_high", t.init_sbp_high},
                     {"init_dbp_high", t.init_dbp_high},
                     {"fhr_next", t.fhr_next},
                     {"dilatation_increment", t.dilatation_increment},
                     {"sbp_high_next", t.sbp_high_next},
                     {"dbp_high_next", t.dbp_high_next},
                     {"hazard", t.hazard},
                     {"surgical", t.surgical},
                     {"late_hour", t.late_hour}};
  }
  return doc;
}

ScmConfig scm_config_from_json(const json& doc) {
  StrictObject top(doc, "scm");
  std::string mode_text = "continuous";
  top.read("mode", mode_text);
  ScmConfig cfg = ScmConfig::defaults(parse_mode(mode_text));
  top.read("horizon", cfg.horizon);
  top.read("seed", cfg.seed);
  if (top.has("baseline")) {
    StrictObject o(top.child("baseline"), "scm.baseline");
    auto& b = cfg.baseline;
    o.read("age_mean", b.age_mean);
    o.read("age_sd", b.age_sd);
    o.read("age_min", b.age_min);
    o.read("age_max", b.age_max);
    o.read("parity_mean", b.parity_mean);
    o.read("parity_max", b.parity_max);
    o.read("preterm_prob", b.preterm_prob);
    o.finish();
  }
  if (top.has("continuous")) {
    if (cfg.mode != Mode::continuous) {
      throw UsageError("scm: 'continuous' section given for coarse mode");
    }
    StrictObject o(top.child("continuous"), "scm.continuous");
    for_each_continuous_field(cfg.continuous,
                              [&](const char* name, double& v) { o.read(name, v); });
    if (o.has("hazard")) {
      read_hazard(StrictObject(o.child("hazard"), "scm.continuous.hazard"),
                  cfg.continuous.hazard);
    }
    if (o.has("surgical")) {
      read_surgical(StrictObject(o.child("surgical"), "scm.continuous.surgical"),
                    cfg.continuous.surgical);
    }
    o.finish();
  }
  if (top.has("coarse")) {
    if (cfg.mode != Mode::coarse) {
      throw UsageError("scm: 'coarse' section given for continuous mode");
    }
    StrictObject o(top.child("coarse"), "scm.coarse");
    auto& t = cfg.coarse;
    o.read("init_fhr", t.init_fhr);
    o.read("init_dilatation", t.init_dilatation);
    o.read("init_sbp_high", t.init_sbp_high);
    o.read("init_dbp_high", t.init_dbp_high);
    o.read("fhr_next", t.fhr_next);
    o.read("dilatation_increment", t.dilatation_increment);
    o.read("sbp_high_next", t.sbp_high_next);
    o.read("dbp_high_next", t.dbp_high_next);
    o.read("hazard", t.hazard);
    o.read("surgical", t.surgical);
    o.read("late_hour", t.late_hour);
    o.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

}  // namespace seqpi
