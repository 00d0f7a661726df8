#include <map>

#include <fmt/format.h>

#include "seqpi/datagen.hpp"
#include "seqpi/error.hpp"

namespace seqpi {
namespace {

constexpr const char* kTerciles[] = {"dilatation_low", "dilatation_mid", "dilatation_high"};

}  // namespace

std::vector<std::string> Strata::labels() const {
  std::vector<std::string> out;
  for (int c = 0; c < kFhrCategories; ++c) {
    for (const char* t : kTerciles) {
      out.push_back(fmt::format("{}:{}", to_string(static_cast<FhrCategory>(c)), t));
    }
  }
  return out;
}

std::string Strata::label(const PatientState& s) const {
  const double d = dilatation_cm(s.tv);
  const int tercile = d < dilatation_low ? 0 : (d < dilatation_high ? 1 : 2);
  return fmt::format("{}:{}", to_string(fhr_category(s.tv)), kTerciles[tercile]);
}

std::size_t PositivityReport::flagged_count() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.flagged ? 1 : 0;
  return n;
}

std::size_t PositivityReport::structural_zero_count() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += (c.n_at_risk >= threshold && c.n_consistent == 0) ? 1 : 0;
  return n;
}

std::string PositivityReport::to_csv() const {
  std::string out = "hour,stratum,n_at_risk,n_consistent,flagged\n";
  for (const auto& c : cells) {
    out += fmt::format("{},{},{},{},{}\n", c.hour, c.stratum, c.n_at_risk, c.n_consistent,
                       c.flagged ? 1 : 0);
  }
  return out;
}

PositivityReport positivity_report(const Dataset& ds, const Regime& regime, const Strata& strata,
                                   std::int64_t threshold, int horizon) {
  validate(regime);
  if (threshold < 1) throw UsageError("positivity threshold must be >= 1");
  if (horizon < 1) throw UsageError("positivity horizon must be >= 1");
  if (!(strata.dilatation_low < strata.dilatation_high)) {
    throw UsageError("dilatation strata bounds must be increasing");
  }
  const auto labels = strata.labels();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = i;

  PositivityReport report;
  report.threshold = threshold;
  report.cells.resize(static_cast<std::size_t>(horizon) * labels.size());
  for (int h = 0; h < horizon; ++h) {
    for (std::size_t s = 0; s < labels.size(); ++s) {
      auto& c = report.cells[static_cast<std::size_t>(h) * labels.size() + s];
      c.hour = h;
      c.stratum = labels[s];
    }
  }

  for (const auto& person : trajectories(ds)) {
    const auto& t = person.trajectory;
    ConsistencyTracker tracker(regime, 0);
    for (std::size_t i = 0; i < t.actions.size(); ++i) {
      const auto& s = t.states[i];
      if (s.k >= horizon) break;
      if (!s.at_risk()) break;
      // Risk set of the regime at this hour: at risk and consistent so far.
      auto& c = report.cells[static_cast<std::size_t>(s.k) * labels.size() +
                             index.at(strata.label(s))];
      ++c.n_at_risk;
      if (!tracker.observe(s, t.actions[i])) break;
      ++c.n_consistent;
    }
  }
  for (auto& c : report.cells) c.flagged = c.n_consistent < threshold;
  return report;
}

}  // namespace seqpi
