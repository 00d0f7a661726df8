#include <doctest.h>

#include <array>
#include <cmath>
#include <set>

#include "seqpi/datagen.hpp"
#include "seqpi/error.hpp"
#include "seqpi/scm.hpp"
#include "support.hpp"

using namespace seqpi;
using seqpi::testing::coarse_state;

namespace {

const DecisionFn kVaginal = [](const History&) { return Action::vaginal; };

ScmConfig zero_hazard_coarse() {
  auto cfg = ScmConfig::defaults(Mode::coarse);
  for (auto& late : cfg.coarse.hazard) {
    for (auto& f : late) f = {0.0, 0.0};
  }
  cfg.coarse.surgical = {0.0, 0.0};
  return cfg;
}

}  // namespace

TEST_CASE("same seed gives the same trajectory in both modes") {
  for (Mode mode : {Mode::coarse, Mode::continuous}) {
    const auto cfg = ScmConfig::defaults(mode);
    Rng a = person_stream(5, 17);
    Rng b = person_stream(5, 17);
    const auto base_a = sample_baseline(a, cfg);
    const auto base_b = sample_baseline(b, cfg);
    CHECK(simulate_trajectory(base_a, kVaginal, a, cfg) ==
          simulate_trajectory(base_b, kVaginal, b, cfg));
    Rng c = person_stream(5, 18);
    const auto base_c = sample_baseline(c, cfg);
    CHECK(base_c != base_a);
  }
}

TEST_CASE("baseline and initial dilatation match their configured means") {
  const auto cfg = ScmConfig::defaults(Mode::continuous);
  Rng rng = substream(11, {1});
  constexpr int n = 100000;
  double age = 0.0;
  double dil = 0.0;
  double parity = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto b = sample_baseline(rng, cfg);
    CHECK(b.maternal_age >= cfg.baseline.age_min);
    CHECK(b.maternal_age <= cfg.baseline.age_max);
    age += b.maternal_age;
    parity += b.parity;
    const auto s = initial_state(b, rng, cfg);
    dil += std::get<ContinuousVitals>(s.tv).dilatation;
  }
  CHECK(std::abs(age / n - 30.0) <= 0.1);
  CHECK(std::abs(dil / n - 3.0) <= 0.05);
  CHECK(std::abs(parity / n - 0.9) <= 0.03);
}

TEST_CASE("coarse transitions follow the configured tables") {
  const auto cfg = zero_hazard_coarse();
  Rng rng = substream(12, {2});
  constexpr int n = 100000;
  for (int late : {0, 1}) {
    const int k = late ? cfg.coarse.late_hour : 0;
    for (int f = 0; f < kFhrCategories; ++f) {
      const auto s = coarse_state(static_cast<FhrCategory>(f), 3, BpLevel::high, BpLevel::normal, k);
      std::array<double, 4> fhr{};
      std::array<double, 3> inc{};
      double sbp_high = 0.0;
      double dbp_high = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto next = transition(s, Action::vaginal, rng, cfg);
        const auto& v = std::get<CoarseVitals>(next.tv);
        fhr[static_cast<int>(v.fhr)] += 1;
        inc[v.dilatation - 3] += 1;
        sbp_high += v.sbp == BpLevel::high;
        dbp_high += v.dbp == BpLevel::high;
      }
      auto within = [&](double count, double p) {
        const double se = std::sqrt(p * (1 - p) / n);
        return std::abs(count / n - p) <= 3.0 * se + 1e-12;
      };
      for (int t = 0; t < 4; ++t) CHECK(within(fhr[t], cfg.coarse.fhr_next[late][f][t]));
      for (int t = 0; t < 3; ++t) CHECK(within(inc[t], cfg.coarse.dilatation_increment[t]));
      CHECK(within(sbp_high, cfg.coarse.sbp_high_next[1]));
      CHECK(within(dbp_high, cfg.coarse.dbp_high_next[0]));
    }
  }
}

TEST_CASE("a cesarean with zero surgical risk ends in birth without outcome") {
  const auto cfg = zero_hazard_coarse();
  Rng rng = substream(13, {});
  const auto s = coarse_state(FhrCategory::tachycardia, 5, BpLevel::high, BpLevel::high, 2);
  const auto next = transition(s, Action::cesarean, rng, cfg);
  CHECK(next.born);
  CHECK_FALSE(next.y);
  CHECK(next.a == Action::cesarean);
  CHECK(next.k == 3);
  CHECK(next.z() == 0);
}

TEST_CASE("one centimetre per hour from 3 cm is born at hour 7") {
  auto cfg = zero_hazard_coarse();
  cfg.coarse.dilatation_increment = {0.0, 1.0, 0.0};
  cfg.coarse.init_dilatation = {0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0};
  Rng rng = substream(14, {});
  const auto t = simulate_trajectory({}, kVaginal, rng, cfg);
  CHECK(t.current().born);
  CHECK(t.current().k == 7);
  CHECK_FALSE(t.current().y);
  CHECK(t.actions.size() == 7);
}

TEST_CASE("transitions reject absorbed states and reversed cesareans") {
  const auto cfg = ScmConfig::defaults(Mode::coarse);
  Rng rng = substream(15, {});
  auto s = coarse_state(FhrCategory::normal, 4, BpLevel::normal, BpLevel::normal);
  s.a = Action::cesarean;
  CHECK_THROWS_AS(transition(s, Action::vaginal, rng, cfg), IrreversibilityError);
  auto born = coarse_state(FhrCategory::normal, 4, BpLevel::normal, BpLevel::normal);
  born.born = true;
  CHECK_THROWS_AS(transition(born, Action::vaginal, rng, cfg), NotAtRiskError);
  auto hit = born;
  hit.born = false;
  hit.y = true;
  CHECK_THROWS_AS(transition(hit, Action::cesarean, rng, cfg), NotAtRiskError);
  const auto cont = initial_state({}, rng, ScmConfig::defaults(Mode::continuous));
  CHECK_THROWS_AS(transition(cont, Action::vaginal, rng, cfg), ModeError);
}

TEST_CASE("coarse state enumeration is bounded, unique, and reachable") {
  const auto cfg = ScmConfig::defaults(Mode::coarse);
  const auto states = enumerate_states(cfg);
  CHECK(states.size() <= 704);
  CHECK(std::set<CoarseState>(states.begin(), states.end()).size() == states.size());
  int at_risk = 0;
  for (const auto& s : states) {
    if (s.at_risk()) {
      ++at_risk;
      CHECK(s.vitals.dilatation < 10);
    }
  }
  CHECK(at_risk <= kCoarseCells);
  // Every state visited by simulation is in the enumeration.
  const std::set<CoarseState> known(states.begin(), states.end());
  const UsualCarePolicy policy;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    Rng rng = person_stream(16, i);
    Rng prng = substream(17, {i});
    const auto t = simulate_trajectory({}, stochastic_policy(policy, prng), rng, cfg);
    for (const auto& s : t.states) {
      CoarseState c{std::get<CoarseVitals>(s.tv), s.a, s.born, s.y};
      REQUIRE(known.count(c) == 1);
    }
  }
  CHECK_THROWS_AS(enumerate_states(ScmConfig::defaults(Mode::continuous)), ModeError);
}

TEST_CASE("trajectory invariants hold under usual care") {
  for (Mode mode : {Mode::coarse, Mode::continuous}) {
    const auto cfg = ScmConfig::defaults(mode);
    const UsualCarePolicy policy;
    for (std::uint64_t i = 0; i < 10000; ++i) {
      Rng rng = person_stream(18, i);
      Rng prng = substream(19, {i});
      const auto t = simulate_trajectory(sample_baseline(rng, cfg), stochastic_policy(policy, prng),
                                         rng, cfg);
      REQUIRE(t.states.size() == t.actions.size() + 1);
      REQUIRE(t.current().k <= cfg.horizon);
      for (std::size_t j = 0; j < t.states.size(); ++j) {
        const auto& s = t.states[j];
        REQUIRE(s.k == static_cast<int>(j));
        REQUIRE(s.baseline == t.states[0].baseline);
        if (j + 1 < t.states.size()) REQUIRE(s.at_risk());
        if (j > 0) {
          const auto& p = t.states[j - 1];
          REQUIRE(dilatation_cm(s.tv) >= dilatation_cm(p.tv));
          REQUIRE(to_int(s.a) >= to_int(p.a));
          REQUIRE(s.a == t.actions[j - 1]);
        }
      }
      REQUIRE((t.current().k == cfg.horizon || !t.current().at_risk()));
    }
  }
}

TEST_CASE("coarse FHR is first-order Markov") {
  // Among transitions through a normal FHR, the next category must be
  // independent of the previous one. Chi-square with 9 degrees of freedom.
  const auto cfg = zero_hazard_coarse();
  std::array<std::array<double, 4>, 4> table{};
  for (std::uint64_t i = 0; i < 30000; ++i) {
    Rng rng = person_stream(20, i);
    const auto t = simulate_trajectory({}, kVaginal, rng, cfg);
    for (std::size_t j = 1; j + 1 < t.states.size(); ++j) {
      if (t.states[j + 1].k > cfg.coarse.late_hour) break;  // stay within the early table
      const auto& prev = std::get<CoarseVitals>(t.states[j - 1].tv);
      const auto& cur = std::get<CoarseVitals>(t.states[j].tv);
      const auto& next = std::get<CoarseVitals>(t.states[j + 1].tv);
      if (cur.fhr != FhrCategory::normal) continue;
      table[static_cast<int>(prev.fhr)][static_cast<int>(next.fhr)] += 1;
    }
  }
  std::array<double, 4> rows{}, cols{};
  double total = 0.0;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      rows[r] += table[r][c];
      cols[c] += table[r][c];
      total += table[r][c];
    }
  }
  double chi2 = 0.0;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const double e = rows[r] * cols[c] / total;
      REQUIRE(e > 5.0);
      chi2 += (table[r][c] - e) * (table[r][c] - e) / e;
    }
  }
  CAPTURE(chi2);
  CHECK(chi2 < 27.88);  // 0.999 quantile of chi-square(9)
}

TEST_CASE("forward oracle reproduces the frozen usual-care marginals") {
  const auto cfg = ScmConfig::defaults(Mode::coarse);
  const auto uc = testing::forward_marginal(cfg, UsualCarePolicy::defaults(), testing::Rule::natural);
  CHECK(uc.cesarean == doctest::Approx(testing::frozen::kUsualCareCesareanIncidence).epsilon(1e-12));
  CHECK(uc.outcome == doctest::Approx(testing::frozen::kUsualCareOutcomeIncidence).epsilon(1e-12));
  const auto never = testing::forward_marginal(cfg, UsualCarePolicy::defaults(), testing::Rule::vaginal);
  CHECK(never.outcome ==
        doctest::Approx(testing::frozen::kNeverCesareanOutcomeIncidence).epsilon(1e-12));
}

TEST_CASE("simulated usual-care cesarean fraction matches the frozen incidence") {
  const auto cfg = ScmConfig::defaults(Mode::coarse);
  const UsualCarePolicy policy;
  constexpr int n = 100000;
  double cesareans = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    Rng rng = person_stream(21, i);
    Rng prng = substream(22, {i});
    const auto t = simulate_trajectory({}, stochastic_policy(policy, prng), rng, cfg);
    cesareans += t.current().a == Action::cesarean;
  }
  const double p = testing::frozen::kUsualCareCesareanIncidence;
  CHECK(std::abs(cesareans / n - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("config JSON round trip and validation") {
  for (Mode mode : {Mode::coarse, Mode::continuous}) {
    const auto cfg = ScmConfig::defaults(mode);
    CHECK(to_json(scm_config_from_json(to_json(cfg))) == to_json(cfg));
  }
  auto bad = to_json(ScmConfig::defaults(Mode::coarse));
  bad["horizon"] = 0;
  CHECK_THROWS_AS(scm_config_from_json(bad), UsageError);
  auto unknown = to_json(ScmConfig::defaults(Mode::coarse));
  unknown["bogus"] = 1;
  CHECK_THROWS_AS(scm_config_from_json(unknown), UsageError);
  auto cfg = ScmConfig::defaults(Mode::coarse);
  cfg.coarse.dilatation_increment = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("coarse cell index round trips") {
  for (int c = 0; c < kCoarseCells; ++c) CHECK(coarse_cell(coarse_vitals_from_cell(c)) == c);
  CHECK(coarse_cell({FhrCategory::tachycardia, 3, BpLevel::normal, BpLevel::normal}) ==
        ((3 * 11 + 3) * 2 + 0) * 2 + 0);
}
