#pragma once

// Observational data under a confounded usual-care policy, person-hour
// storage, and sequential-positivity diagnostics.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqpi/regimes.hpp"
#include "seqpi/scm.hpp"

namespace seqpi {

// P(initiate cesarean this hour | at risk) =
//   logistic(intercept + abnormal_fhr*[abnormal FHR] + stalled*[stalled dilatation]
//            + duration*min(k, duration_cap)).
// Dilatation is stalled when k >= stall_min_hour and
// dilatation < stall_base + stall_rate*k.
struct UsualCarePolicy final : CesareanPropensity {
  double intercept = -4.5;
  double abnormal_fhr = 3.0;
  double stalled = 1.0;
  double duration = 0.07;
  int duration_cap = 12;
  int stall_min_hour = 4;
  double stall_base = 1.0;
  double stall_rate = 0.5;

  double probability(const PatientState& state) const override;
  bool stalled_flag(const PatientState& state) const noexcept;

  static UsualCarePolicy defaults() { return {}; }
  // Degenerate policy that never initiates a cesarean.
  static UsualCarePolicy never_cesarean();
};

nlohmann::json to_json(const UsualCarePolicy& policy);
UsualCarePolicy usual_care_from_json(const nlohmann::json& doc);

// One person-hour. `state.a` is the intervention status entering hour k;
// `a` is the recorded column: the decision taken at k for at-risk rows that
// have a decision, otherwise the status.
struct PersonHour {
  std::int64_t person_id = 0;
  PatientState state;
  Action a = Action::vaginal;
  bool has_decision = false;

  bool operator==(const PersonHour&) const = default;
};

struct Dataset {
  Mode mode = Mode::continuous;
  std::vector<PersonHour> rows;  // sorted by (person_id, k)

  bool operator==(const Dataset&) const = default;
};

struct PersonTrajectory {
  std::int64_t person_id = 0;
  Trajectory trajectory;
};

std::vector<PersonTrajectory> trajectories(const Dataset& ds);
Dataset flatten(Mode mode, const std::vector<PersonTrajectory>& people);

// n independent persons simulated under `policy`, person i on substream i.
Dataset generate_dataset(std::int64_t n, const ScmConfig& cfg, const UsualCarePolicy& policy,
                         std::uint64_t seed, unsigned threads = 0);

// Per-person invariants: hours 0.. gap-free, unique (person_id, k), a
// non-decreasing, y and born absorbing, z = (not born and y = 0), no rows
// after absorption. Throws DataError naming the row, person, and hour.
void validate_dataset(const Dataset& ds);

// JSONL, one person-hour per line. Continuous values carry two decimals.
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
std::string format_row(const PersonHour& row);

// A state as a JSON object with the dataset column names (without
// person_id). Reading accepts a partial object for a query condition:
// k defaults to 0, a/y to 0, born to false, baseline fields to defaults.
nlohmann::json state_to_json(const PatientState& s);
PatientState state_from_json(const nlohmann::json& doc, Mode mode);

// Train/test split by person id, deterministic in `seed`.
std::pair<Dataset, Dataset> split_by_person(const Dataset& ds, double train_fraction,
                                            std::uint64_t seed);

// FHR category x dilatation tercile.
struct Strata {
  double dilatation_low = 10.0 / 3.0;
  double dilatation_high = 20.0 / 3.0;

  std::vector<std::string> labels() const;
  std::string label(const PatientState& s) const;
};

struct PositivityCell {
  int hour = 0;
  std::string stratum;
  std::int64_t n_at_risk = 0;
  std::int64_t n_consistent = 0;
  bool flagged = false;  // n_consistent < threshold
};

struct PositivityReport {
  std::int64_t threshold = 5;
  std::vector<PositivityCell> cells;

  std::size_t flagged_count() const;
  // Cells with at least `threshold` persons at risk but none consistent.
  std::size_t structural_zero_count() const;
  std::string to_csv() const;
};

// For each decision hour 0..horizon-1 and stratum: persons at risk at that
// hour, and those whose observed actions from hour 0 through that hour
// follow `regime` (natural segments match anything).
PositivityReport positivity_report(const Dataset& ds, const Regime& regime, const Strata& strata,
                                   std::int64_t threshold, int horizon);

}  // namespace seqpi
