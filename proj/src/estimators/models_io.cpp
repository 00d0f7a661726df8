#include "seqpi/error.hpp"
#include "seqpi/estimators.hpp"
#include "seqpi/json_util.hpp"

namespace seqpi {

using nlohmann::json;

json to_json(const LogisticModel& m) {
  return {{"features", m.features}, {"coefficients", m.coef},   {"fitted", m.fitted},
          {"iterations", m.iterations}, {"grad_norm", m.grad_norm}, {"n", m.n}};
}

LogisticModel logistic_model_from_json(const json& doc) {
  StrictObject o(doc, "logistic_model");
  LogisticModel m;
  o.read("features", m.features);
  o.read("coefficients", m.coef);
  o.read("fitted", m.fitted);
  o.read("iterations", m.iterations);
  o.read("grad_norm", m.grad_norm);
  o.read("n", m.n);
  o.finish();
  if (m.features.size() != m.coef.size()) {
    throw UsageError("logistic_model: features and coefficients differ in length");
  }
  return m;
}

json to_json(const TransitionModels& m) {
  json diag = json::array();
  for (const auto& d : m.diagnostics) {
    diag.push_back({{"component", d.name}, {"n", d.n}, {"iterations", d.iterations},
                    {"grad_norm", d.grad_norm}});
  }
  json prop = {{"mode", to_string(m.propensity.mode)}, {"form", to_json(m.propensity.form)}};
  if (m.propensity.mode == Mode::coarse) prop["table"] = m.propensity.table;
  return {{"kind", "gcomp"},
          {"dynamics", to_json(m.dynamics)},
          {"propensity", prop},
          {"surgical_identified", m.surgical_identified},
          {"diagnostics", diag}};
}

TransitionModels transition_models_from_json(const json& doc) {
  StrictObject o(doc, "gcomp_model");
  if (o.require<std::string>("kind") != "gcomp") throw UsageError("gcomp_model: kind must be 'gcomp'");
  TransitionModels m;
  m.dynamics = scm_config_from_json(o.child("dynamics"));
  {
    StrictObject p(o.child("propensity"), "gcomp_model.propensity");
    m.propensity.mode = parse_mode(p.require<std::string>("mode"));
    m.propensity.form = usual_care_from_json(p.child("form"));
    p.read("table", m.propensity.table);
    p.finish();
    if (m.propensity.mode == Mode::coarse &&
        (m.propensity.table.empty() || m.propensity.table.size() % 4 != 0)) {
      throw UsageError("gcomp_model.propensity.table must hold 4 entries per hour");
    }
  }
  o.read("surgical_identified", m.surgical_identified);
  if (o.has("diagnostics")) {
    for (const auto& d : o.child("diagnostics")) {
      StrictObject e(d, "gcomp_model.diagnostics");
      ComponentDiagnostics c;
      c.name = e.require<std::string>("component");
      e.read("n", c.n);
      e.read("iterations", c.iterations);
      e.read("grad_norm", c.grad_norm);
      e.finish();
      m.diagnostics.push_back(c);
    }
  }
  o.finish();
  if (m.dynamics.mode != m.propensity.mode) {
    throw UsageError("gcomp_model: propensity and dynamics modes differ");
  }
  return m;
}

json to_json(const NaiveModel& m) {
  json out = {{"kind", "naive"},        {"mode", to_string(m.mode)}, {"k", m.k},
              {"horizon_hour", m.horizon_hour}, {"pooled", m.pooled}};
  if (m.mode == Mode::coarse) {
    out["events"] = m.events;
    out["counts"] = m.counts;
  } else if (m.constant) {
    out["constant_p"] = m.constant_p;
  } else {
    out["logistic"] = to_json(m.logistic);
  }
  return out;
}

NaiveModel naive_model_from_json(const json& doc) {
  StrictObject o(doc, "naive_model");
  if (o.require<std::string>("kind") != "naive") throw UsageError("naive_model: kind must be 'naive'");
  NaiveModel m;
  m.mode = parse_mode(o.require<std::string>("mode"));
  m.k = o.require<int>("k");
  m.horizon_hour = o.require<int>("horizon_hour");
  o.read("pooled", m.pooled);
  if (m.mode == Mode::coarse) {
    m.events = o.require<std::vector<double>>("events");
    m.counts = o.require<std::vector<double>>("counts");
    if (m.events.size() != kCoarseCells || m.counts.size() != kCoarseCells) {
      throw UsageError("naive_model: coarse tables must have one entry per cell");
    }
  } else if (o.read("constant_p", m.constant_p)) {
    m.constant = true;
  } else {
    m.logistic = logistic_model_from_json(o.child("logistic"));
  }
  o.finish();
  return m;
}

}  // namespace seqpi
