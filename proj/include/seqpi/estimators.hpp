#pragma once

// Estimators of risk under intervention learned from observational data:
// a naive conditional-risk model, g-computation (fitted transition models
// simulated forward), and iterated conditional expectations for static
// regimes.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqpi/datagen.hpp"
#include "seqpi/estimand.hpp"

namespace seqpi {

// ---------------------------------------------------------------------------
// Logistic and linear regression

// Column-major design with optional row weights (frequency weights).
class DesignMatrix {
 public:
  explicit DesignMatrix(std::vector<std::string> features);

  void add_row(std::span<const double> x, double label, double weight = 1.0);

  std::size_t rows() const noexcept { return labels_.size(); }
  std::size_t cols() const noexcept { return features_.size(); }
  const std::vector<std::string>& features() const noexcept { return features_; }
  std::span<const double> column(std::size_t j) const { return columns_[j]; }
  std::span<const double> labels() const noexcept { return labels_; }
  std::span<const double> weights() const noexcept { return weights_; }

 private:
  std::vector<std::string> features_;
  std::vector<std::vector<double>> columns_;
  std::vector<double> labels_;
  std::vector<double> weights_;
};

struct FitOptions {
  double tolerance = 1e-8;  // on the weight-normalised gradient norm
  int max_iter = 100;
  double ridge = 1e-8;  // added to the Hessian diagonal
  double max_coef_norm = 1e3;
};

struct LogisticModel {
  std::vector<std::string> features;
  std::vector<double> coef;
  bool fitted = false;
  int iterations = 0;
  double grad_norm = 0.0;
  std::int64_t n = 0;

  double linear_predictor(std::span<const double> x) const;
  double predict(std::span<const double> x) const;
};

// Damped Newton (IRLS) for labels in [0, 1]. Throws SeparationError when
// labels are degenerate or the coefficient norm exceeds max_coef_norm, and
// ConvergenceError when max_iter is exhausted.
LogisticModel fit_logistic(const DesignMatrix& design, const FitOptions& options = {});

struct LinearModel {
  std::vector<std::string> features;
  std::vector<double> coef;
  double sigma = 0.0;  // residual standard deviation
  std::int64_t n = 0;

  double predict(std::span<const double> x) const;
};

// Weighted least squares.
LinearModel fit_linear(const DesignMatrix& design);

// ---------------------------------------------------------------------------
// Shared features

// Main effects plus abnormal-FHR flag, used by the continuous naive model.
const std::vector<std::string>& naive_features();
std::vector<double> naive_feature_row(const PatientState& s);

// Outcome status by hour `horizon_hour` of a person observed from hour k.
bool outcome_by(const Trajectory& t, int horizon_hour);

// ---------------------------------------------------------------------------
// Naive conditional risk: Pr[Y by horizon | state at k, z = 1], ignoring the
// treatment received after k.

struct NaiveModel {
  Mode mode = Mode::coarse;
  int k = 0;
  int horizon_hour = 0;
  // Coarse: saturated cell frequencies with a pooled fallback.
  std::vector<double> events;  // per coarse cell
  std::vector<double> counts;
  double pooled = 0.0;
  // Continuous: logistic on naive_features(); constant when no events.
  LogisticModel logistic;
  bool constant = false;
  double constant_p = 0.0;

  RiskEstimate predict(const PatientState& condition) const;
};

// Throws UsageError on an empty risk set at hour k.
NaiveModel fit_naive(const Dataset& ds, int k, int horizon_hour);

// ---------------------------------------------------------------------------
// g-computation

// Fitted usual-care propensity. Coarse: saturated in (hour, abnormal FHR,
// stalled dilatation). Continuous: logistic in the same terms.
class PropensityModel final : public CesareanPropensity {
 public:
  Mode mode = Mode::coarse;
  UsualCarePolicy form;       // flag definitions; logistic coefficients in continuous mode
  std::vector<double> table;  // [hour][abnormal][stalled], coarse mode

  double probability(const PatientState& state) const override;
};

struct ComponentDiagnostics {
  std::string name;
  std::int64_t n = 0;
  int iterations = 0;
  double grad_norm = 0.0;
};

struct TransitionModels {
  ScmConfig dynamics;  // the SCM with every fitted component substituted
  PropensityModel propensity;
  // False when the data hold no cesarean person-hours; regimes that can
  // operate are then not identified.
  bool surgical_identified = true;
  std::vector<ComponentDiagnostics> diagnostics;
};

// Fits every component on `ds`. `horizon` is the SCM horizon the fitted
// dynamics are used over. Throws DataError naming a component that has no
// rows (for example a missing hour stratum) and ConvergenceError /
// SeparationError naming a component whose fit fails.
TransitionModels fit_gcomp(const Dataset& ds, int horizon);

enum class GcompEngine { exact, mc };

// Coarse models default to exact backward induction over the fitted tables
// (the infinite-replication limit of the forward simulation); continuous
// models always simulate.
RiskEstimate gcomp_predict(const TransitionModels& models, const PatientState& condition,
                           const EstimandSpec& spec, const McOptions& options,
                           GcompEngine engine = GcompEngine::exact);

// ---------------------------------------------------------------------------
// Iterated conditional expectations for static regimes

struct IceStage {
  int hour = 0;
  Action action = Action::vaginal;
  std::int64_t n = 0;
  // Coarse: saturated fits by cell with fallbacks. Continuous: fractional
  // logistic on naive_features().
  std::vector<double> cell_mean;  // per coarse cell, NaN when empty
  std::vector<double> cell_count;
  std::vector<double> fallback;  // [fhr][sbp] means
  double pooled = 0.0;
  LogisticModel logistic;
};

struct IceModel {
  Mode mode = Mode::coarse;
  EstimandSpec spec;
  std::vector<IceStage> stages;  // hours k .. h-1

  double stage_value(std::size_t stage, const PatientState& s) const;
  RiskEstimate predict(const PatientState& condition) const;
};

// Throws UsageError for regimes that are not static, PositivityError when a
// stage has no regime-consistent person-hours.
IceModel ice_estimate(const Dataset& ds, const EstimandSpec& spec);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const LogisticModel& m);
LogisticModel logistic_model_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const TransitionModels& m);
TransitionModels transition_models_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const NaiveModel& m);
NaiveModel naive_model_from_json(const nlohmann::json& doc);

}  // namespace seqpi
