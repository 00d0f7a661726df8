#pragma once

// Discrete-time structural causal model of high-risk labor.
//
// One step is one hour. A state at hour k holds the time-fixed baseline,
// the time-varying vitals, the intervention status, and the absorbing
// birth/outcome flags. Two modes share the same interface:
//   continuous  vitals on physical scales, horizon 72 h by default;
//   coarse      categorical vitals on a finite state space (exact oracle),
//               horizon 12 h by default.

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqpi/random.hpp"

namespace seqpi {

enum class Mode { continuous, coarse };

std::string_view to_string(Mode mode) noexcept;
Mode parse_mode(std::string_view text);

enum class Action : std::uint8_t { vaginal = 0, cesarean = 1 };

inline int to_int(Action a) noexcept { return static_cast<int>(a); }

enum class FhrCategory : std::uint8_t {
  bradycardia_transient = 0,
  bradycardia_persistent = 1,
  normal = 2,
  tachycardia = 3,
};
inline constexpr int kFhrCategories = 4;

std::string_view to_string(FhrCategory c) noexcept;
FhrCategory parse_fhr_category(std::string_view text);

enum class BpLevel : std::uint8_t { normal = 0, high = 1 };

std::string_view to_string(BpLevel level) noexcept;
BpLevel parse_bp_level(std::string_view text);

struct BaselineCovariates {
  double maternal_age = 30.0;  // years
  int parity = 0;
  bool history_preterm = false;

  bool operator==(const BaselineCovariates&) const = default;
};

struct ContinuousVitals {
  double fhr = 140.0;          // bpm
  bool brady_persist = false;  // fhr < 110 sustained >= 3 min within the hour
  double dilatation = 3.0;     // cm
  double sbp = 120.0;          // mmHg
  double dbp = 80.0;           // mmHg

  bool operator==(const ContinuousVitals&) const = default;
};

struct CoarseVitals {
  FhrCategory fhr = FhrCategory::normal;
  int dilatation = 3;  // cm, 0..10
  BpLevel sbp = BpLevel::normal;
  BpLevel dbp = BpLevel::normal;

  bool operator==(const CoarseVitals&) const = default;
};

using Vitals = std::variant<ContinuousVitals, CoarseVitals>;

struct PatientState {
  int k = 0;
  BaselineCovariates baseline;
  Vitals tv;
  Action a = Action::vaginal;  // cesarean performed or underway
  bool born = false;
  bool y = false;  // cumulative composite adverse outcome

  bool at_risk() const noexcept { return !born && !y; }
  int z() const noexcept { return at_risk() ? 1 : 0; }
  Mode mode() const noexcept {
    return std::holds_alternative<CoarseVitals>(tv) ? Mode::coarse : Mode::continuous;
  }

  bool operator==(const PatientState&) const = default;
};

// Covariate views shared by both modes.
inline constexpr double kFhrLower = 110.0;
inline constexpr double kFhrUpper = 160.0;

FhrCategory fhr_category(const Vitals& tv) noexcept;
bool brady_persist(const Vitals& tv) noexcept;
double dilatation_cm(const Vitals& tv) noexcept;
// Abnormal FHR as flagged by the 110/160 rule.
bool abnormal_fhr(const Vitals& tv) noexcept;

// ---------------------------------------------------------------------------
// Configuration

struct BaselineParams {
  double age_mean = 30.0;
  double age_sd = 5.0;
  double age_min = 16.0;
  double age_max = 45.0;
  double parity_mean = 0.9;  // Poisson mean, clamped at parity_max
  int parity_max = 6;
  double preterm_prob = 0.15;
};

// Per-hour in-labor outcome hazard, logistic in the listed terms.
struct HazardCoefficients {
  double intercept = -5.5;
  double abnormal_fhr = 2.5;
  double brady_persist = 0.8;
  double duration = 0.04;  // per hour of labor
  double sbp_high = 0.8;
};

// One-time adverse-outcome probability of a cesarean, logistic.
struct SurgicalCoefficients {
  double intercept = -3.5;
  double sbp_high = 1.0;
};

struct ContinuousParams {
  double init_dilatation_mean = 3.0;
  double init_dilatation_sd = 1.0;
  double init_dilatation_max = 6.0;
  double init_p_low = 0.04;
  double init_p_high = 0.06;
  double init_fhr_sd = 8.0;

  // In-band FHR: mean-reverting noise around fhr_mean, clamped to [110, 160].
  double fhr_mean = 140.0;
  double fhr_reversion = 0.5;
  double fhr_sd = 7.0;
  // Excursions out of the normal band: logistic in (out-of-band now, hour).
  double excursion_intercept = -3.0;
  double excursion_out_of_band = 2.0;
  double excursion_duration = 0.05;
  double p_low_given_excursion = 0.45;
  double low_mean = 95.0;
  double low_sd = 8.0;
  double high_mean = 172.0;
  double high_sd = 6.0;
  double p_persist_given_low = 0.5;

  // Dilatation increment max(0, N(mean, sd)), scaled if parity >= 1.
  double dilatation_increment_mean = 0.5;
  double dilatation_increment_sd = 0.3;
  double parous_factor = 1.3;

  double sbp_mean = 130.0;
  double sbp_init_sd = 15.0;
  double sbp_reversion = 0.85;
  double sbp_sd = 6.0;
  double dbp_mean = 82.0;
  double dbp_init_sd = 10.0;
  double dbp_reversion = 0.85;
  double dbp_sd = 4.0;
  double sbp_high_threshold = 160.0;

  HazardCoefficients hazard;
  SurgicalCoefficients surgical;
};

// Coarse mode: explicit probability tables. FHR index order follows
// FhrCategory; "late" is hour >= late_hour.
struct CoarseTables {
  std::array<double, kFhrCategories> init_fhr{0.05, 0.05, 0.80, 0.10};
  std::array<double, 11> init_dilatation{0.0062, 0.0606, 0.2417, 0.3830, 0.2417, 0.0606,
                                         0.0062, 0.0,    0.0,    0.0,    0.0};
  double init_sbp_high = 0.15;
  double init_dbp_high = 0.15;

  // fhr_next[late][from][to]
  std::array<std::array<std::array<double, kFhrCategories>, kFhrCategories>, 2> fhr_next{{
      {{{0.20, 0.15, 0.60, 0.05},
        {0.15, 0.45, 0.35, 0.05},
        {0.05, 0.02, 0.90, 0.03},
        {0.05, 0.05, 0.40, 0.50}}},
      {{{0.22, 0.20, 0.52, 0.06},
        {0.15, 0.52, 0.27, 0.06},
        {0.07, 0.04, 0.84, 0.05},
        {0.05, 0.06, 0.32, 0.57}}},
  }};
  std::array<double, 3> dilatation_increment{0.30, 0.55, 0.15};  // +0, +1, +2 cm
  std::array<double, 2> sbp_high_next{0.05, 0.70};               // from normal, from high
  std::array<double, 2> dbp_high_next{0.05, 0.65};

  // hazard[late][fhr][sbp]
  std::array<std::array<std::array<double, 2>, kFhrCategories>, 2> hazard{{
      {{{0.0090, 0.0198}, {0.1419, 0.2689}, {0.0067, 0.0148}, {0.0759, 0.1545}}},
      {{{0.0148, 0.0323}, {0.2142, 0.3775}, {0.0110, 0.0241}, {0.1192, 0.2315}}},
  }};
  std::array<double, 2> surgical{0.0293, 0.0759};  // by sbp level
  int late_hour = 6;
};

struct ScmConfig {
  Mode mode = Mode::continuous;
  int horizon = 72;  // K
  std::uint64_t seed = 1;
  BaselineParams baseline;
  ContinuousParams continuous;
  CoarseTables coarse;

  static ScmConfig defaults(Mode mode);
  // Throws UsageError on any out-of-range parameter.
  void validate() const;
};

nlohmann::json to_json(const ScmConfig& cfg);
// Keys absent from `doc` keep their mode defaults; unknown keys are rejected.
ScmConfig scm_config_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Dynamics

// Ordered states k = 0.. and the action taken at each non-final state.
// A History is the same record truncated at the current hour.
struct Trajectory {
  std::vector<PatientState> states;
  std::vector<Action> actions;

  const PatientState& current() const { return states.back(); }
  bool operator==(const Trajectory&) const = default;
};
using History = Trajectory;

using DecisionFn = std::function<Action(const History&)>;

BaselineCovariates sample_baseline(Rng& rng, const ScmConfig& cfg);

PatientState initial_state(const BaselineCovariates& baseline, Rng& rng, const ScmConfig& cfg);

// One hour forward. Throws NotAtRiskError if z = 0 and
// IrreversibilityError for a vaginal decision after a cesarean.
PatientState transition(const PatientState& state, Action action, Rng& rng,
                        const ScmConfig& cfg);

// Runs from a fresh initial state until absorption or the horizon.
Trajectory simulate_trajectory(const BaselineCovariates& baseline, const DecisionFn& policy,
                               Rng& rng, const ScmConfig& cfg);

// Continues `history` from its last state until absorption or `stop_hour`.
void simulate_forward(History& history, const DecisionFn& policy, Rng& rng,
                      const ScmConfig& cfg, int stop_hour);

// In-labor hazard and surgical risk at a state (probabilities).
double labor_hazard(const PatientState& state, const ScmConfig& cfg);
double surgical_risk(const PatientState& state, const ScmConfig& cfg);

// ---------------------------------------------------------------------------
// Coarse state space

inline constexpr int kDilatationLevels = 11;
inline constexpr int kCoarseCells = kFhrCategories * kDilatationLevels * 2 * 2;

int coarse_cell(const CoarseVitals& v) noexcept;
CoarseVitals coarse_vitals_from_cell(int cell) noexcept;

struct CoarseState {
  CoarseVitals vitals;
  Action a = Action::vaginal;
  bool born = false;
  bool y = false;

  bool at_risk() const noexcept { return !born && !y; }
  int z() const noexcept { return at_risk() ? 1 : 0; }
  auto operator<=>(const CoarseState& o) const {
    return std::tuple(coarse_cell(vitals), to_int(a), born, y) <=>
           std::tuple(coarse_cell(o.vitals), to_int(o.a), o.born, o.y);
  }
  bool operator==(const CoarseState&) const = default;
};

// Every coarse state reachable from the initial support under some
// action/noise sequence. Sorted, duplicate-free. Throws ModeError in
// continuous mode.
std::vector<CoarseState> enumerate_states(const ScmConfig& cfg);

bool is_late(int k, const CoarseTables& t) noexcept;

// Per-person substream used by dataset generation and batch simulation.
inline Rng person_stream(std::uint64_t seed, std::uint64_t person) {
  return substream(seed, {0x70657273u, person});
}

}  // namespace seqpi
