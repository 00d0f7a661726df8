#pragma once

// Machine-readable estimands for prediction under interventions and their
// ground-truth evaluation against the known SCM.
//
// An estimand fixes five elements: the population (risk set), the moment of
// intended use k, the intervention option (a regime anchored at k), the
// outcome with its horizon, and the predictors conditioned on. The oracle
// conditions on the full state at k; because the SCM is first-order Markov
// in the observed state this equals conditioning on the observed history.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqpi/regimes.hpp"
#include "seqpi/scm.hpp"

namespace seqpi {

struct Population {
  bool at_risk_only = true;  // z = 1: still in labor, no outcome yet

  bool admits(const PatientState& s) const noexcept { return !at_risk_only || s.at_risk(); }
  bool operator==(const Population&) const = default;
};

struct Horizon {
  enum class Kind { absolute, relative };
  Kind kind = Kind::absolute;
  int hours = 72;  // h for absolute, w for relative

  static Horizon absolute(int h) { return {Kind::absolute, h}; }
  static Horizon relative(int w) { return {Kind::relative, w}; }
  int hour_for(int k) const noexcept { return kind == Kind::absolute ? hours : k + hours; }
  bool operator==(const Horizon&) const = default;
};

enum class Outcome { composite_adverse };

struct EstimandSpec {
  Population population;
  int moment_of_use = 0;
  Regime regime = VaginalOnly{};
  Horizon horizon;
  Outcome outcome = Outcome::composite_adverse;
  std::vector<std::string> predictors;

  int horizon_hour() const noexcept { return horizon.hour_for(moment_of_use); }
  // Throws UsageError on a broken invariant.
  void validate() const;
  bool operator==(const EstimandSpec&) const = default;
};

// Names of the covariates available at every hour.
const std::vector<std::string>& available_predictors();

// The seven case-study estimands. Ids 1-4 are single-stage (k must be 0);
// 5-7 are sequential. `final_hour` is the fixed horizon (72 h in the case
// study; the SCM horizon K in coarse mode).
EstimandSpec builtin_estimand(int id, int k, int final_hour = 72);
std::string builtin_estimand_label(int id);

nlohmann::json to_json(const EstimandSpec& spec);
EstimandSpec estimand_from_json(const nlohmann::json& doc);

enum class Method { oracle_mc, oracle_exact, naive, gcomp, ice };

std::string_view to_string(Method m) noexcept;

struct RiskEstimate {
  double p = 0.0;
  double se = 0.0;
  std::int64_t n = 0;  // replications or rows behind the estimate
  Method method = Method::oracle_mc;

  bool operator==(const RiskEstimate&) const = default;
};

struct McOptions {
  std::int64_t n_mc = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
};

// Monte Carlo estimate of Pr[Y_h = 1 | state at k] under the spec's regime
// by forward simulation from `condition`. Replications are grouped into
// fixed-size blocks, each with its own substream, so the result does not
// depend on the thread count.
RiskEstimate oracle_mc(const EstimandSpec& spec, const PatientState& condition,
                       const ScmConfig& scm, const CesareanPropensity* usual_care,
                       const McOptions& options);

// Same forward simulation under any dynamics (true SCM or fitted models),
// tagged with `method`.
RiskEstimate simulate_risk(const EstimandSpec& spec, const PatientState& condition,
                           const ScmConfig& dynamics, const CesareanPropensity* usual_care,
                           const McOptions& options, Method method);

// Backward induction over the coarse state space.
class CoarseExactOracle {
 public:
  explicit CoarseExactOracle(const ScmConfig& scm);

  // Risk by `horizon_hour` for every coarse cell at `anchor_hour`, under
  // `regime` anchored there. Cells that cannot be at risk hold 0.
  std::vector<double> values(const Regime& regime, int anchor_hour, int horizon_hour,
                             const CesareanPropensity* usual_care,
                             const BaselineCovariates& baseline = {}) const;

  RiskEstimate evaluate(const EstimandSpec& spec, const PatientState& condition,
                        const CesareanPropensity* usual_care) const;

  const ScmConfig& scm() const noexcept { return scm_; }
  // True if the cell can be an at-risk state.
  bool reachable_at_risk(int cell) const noexcept { return at_risk_cells_[cell]; }

 private:
  ScmConfig scm_;
  // next_[late] is a row-major kCoarseCells x kCoarseCells matrix of
  // next-vitals probabilities on the vaginal, no-outcome path.
  std::vector<double> next_[2];
  std::vector<bool> at_risk_cells_;
};

RiskEstimate oracle_exact(const EstimandSpec& spec, const PatientState& condition,
                          const ScmConfig& scm, const CesareanPropensity* usual_care);

enum class EngineMode { exact, mc };

// Oracle risks for built-in estimands at `condition`, in input order.
std::vector<RiskEstimate> risk_profile(const std::vector<int>& estimand_ids,
                                       const PatientState& condition, const ScmConfig& scm,
                                       const CesareanPropensity* usual_care, EngineMode mode,
                                       const McOptions& options);

// Shared argument checks for any estimator of `spec` at `condition`.
void check_query(const EstimandSpec& spec, const PatientState& condition, int scm_horizon,
                 const CesareanPropensity* usual_care);

}  // namespace seqpi
