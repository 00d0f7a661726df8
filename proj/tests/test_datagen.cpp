#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "seqpi/datagen.hpp"
#include "seqpi/error.hpp"
#include "support.hpp"

using namespace seqpi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("seqpi_datagen_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << '\n';
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("dataset generation is deterministic and thread-independent") {
  for (Mode mode : {Mode::coarse, Mode::continuous}) {
    const auto cfg = ScmConfig::defaults(mode);
    const auto a = generate_dataset(300, cfg, UsualCarePolicy::defaults(), 42, 1);
    const auto b = generate_dataset(300, cfg, UsualCarePolicy::defaults(), 42, 4);
    CHECK(a == b);
    CHECK(a.mode == mode);
    CHECK_NOTHROW(validate_dataset(a));
    CHECK_FALSE(a == generate_dataset(300, cfg, UsualCarePolicy::defaults(), 43, 1));
  }
  CHECK_THROWS_AS(generate_dataset(0, ScmConfig::defaults(Mode::coarse), {}, 1), UsageError);
}

TEST_CASE("the never-cesarean policy records no cesarean") {
  const auto ds = generate_dataset(2000, ScmConfig::defaults(Mode::continuous),
                                   UsualCarePolicy::never_cesarean(), 5);
  for (const auto& r : ds.rows) REQUIRE(r.a == Action::vaginal);
}

TEST_CASE("rows carry the person-hour invariants") {
  const auto ds = generate_dataset(1000, ScmConfig::defaults(Mode::coarse), {}, 6);
  const auto people = trajectories(ds);
  CHECK(people.size() == 1000);
  CHECK(flatten(Mode::coarse, people) == ds);
  for (const auto& r : ds.rows) {
    REQUIRE(r.state.z() == (r.state.at_risk() ? 1 : 0));
    if (r.has_decision) REQUIRE(r.state.at_risk());
    REQUIRE(to_int(r.a) >= to_int(r.state.a));
  }
}

TEST_CASE("JSONL round trip in both modes") {
  TempDir dir;
  for (Mode mode : {Mode::coarse, Mode::continuous}) {
    const auto ds = generate_dataset(200, ScmConfig::defaults(mode), {}, 8);
    const auto path = dir.path / (std::string(to_string(mode)) + ".jsonl");
    write_dataset(ds, path);
    const auto back = read_dataset(path);
    // Continuous values are stored with two decimals; the file is the fixed point.
    const auto path2 = dir.path / (std::string(to_string(mode)) + "_2.jsonl");
    write_dataset(back, path2);
    CHECK(read_lines(path) == read_lines(path2));
    if (mode == Mode::coarse) CHECK(back == ds);
    CHECK(back.rows.size() == ds.rows.size());
  }
}

TEST_CASE("reading rejects invariant violations with row, person, and hour") {
  TempDir dir;
  const auto ds = generate_dataset(50, ScmConfig::defaults(Mode::coarse), {}, 9);
  const auto good = dir.path / "good.jsonl";
  write_dataset(ds, good);
  auto lines = read_lines(good);

  SUBCASE("decreasing intervention status") {
    auto doc = nlohmann::json::parse(lines[0]);
    REQUIRE(doc["k"] == 0);
    // Person 0: claim a cesarean decided at hour 0 followed by a vaginal row.
    doc["a"] = 1;
    lines[0] = doc.dump();
    write_lines(dir.path / "bad.jsonl", lines);
    const auto msg = error_of([&] { read_dataset(dir.path / "bad.jsonl"); });
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("person 0") != std::string::npos);
    CHECK(msg.find("decreases from 1 to 0") != std::string::npos);
  }
  SUBCASE("gap in hours") {
    std::size_t second = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      auto doc = nlohmann::json::parse(lines[i]);
      if (doc["k"] == 2) {
        second = i;
        break;
      }
    }
    REQUIRE(second > 0);
    lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(second) - 1);
    write_lines(dir.path / "gap.jsonl", lines);
    const auto msg = error_of([&] { read_dataset(dir.path / "gap.jsonl"); });
    CHECK(msg.find("gap: hour 2 follows hour 0") != std::string::npos);
  }
  SUBCASE("unknown column") {
    auto doc = nlohmann::json::parse(lines[0]);
    doc["extra"] = 1;
    lines[0] = doc.dump();
    write_lines(dir.path / "extra.jsonl", lines);
    CHECK(error_of([&] { read_dataset(dir.path / "extra.jsonl"); }).find("row 1") !=
          std::string::npos);
  }
  SUBCASE("malformed JSON") {
    lines[3] = "{not json";
    write_lines(dir.path / "broken.jsonl", lines);
    CHECK(error_of([&] { read_dataset(dir.path / "broken.jsonl"); }).find("row 4") !=
          std::string::npos);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_dataset(dir.path / "absent.jsonl"), DataError);
  }
}

TEST_CASE("in-memory validation catches records after absorption") {
  auto ds = generate_dataset(20, ScmConfig::defaults(Mode::coarse), {}, 10);
  auto people = trajectories(ds);
  auto& t = people[3].trajectory;
  auto extra = t.current();
  REQUIRE_FALSE(extra.at_risk());
  t.actions.push_back(Action::vaginal);
  extra.k += 1;
  t.states.push_back(extra);
  CHECK_THROWS_AS(validate_dataset(flatten(Mode::coarse, people)), DataError);
}

TEST_CASE("split by person is deterministic and disjoint") {
  const auto ds = generate_dataset(500, ScmConfig::defaults(Mode::coarse), {}, 11);
  const auto [train, test] = split_by_person(ds, 0.8, 3);
  const auto [train2, test2] = split_by_person(ds, 0.8, 3);
  CHECK(train == train2);
  CHECK(train.rows.size() + test.rows.size() == ds.rows.size());
  std::set<std::int64_t> a, b;
  for (const auto& r : train.rows) a.insert(r.person_id);
  for (const auto& r : test.rows) b.insert(r.person_id);
  for (auto id : a) CHECK(b.count(id) == 0);
  CHECK(std::abs(static_cast<double>(a.size()) / 500 - 0.8) < 0.1);
  CHECK_THROWS_AS(split_by_person(ds, 0.0, 3), UsageError);
}

TEST_CASE("query conditions parse from partial objects") {
  const auto s = state_from_json({{"fhr", "tachycardia"}, {"dilatation", 3}}, Mode::coarse);
  CHECK(s == testing::distress_profile());
  CHECK(state_from_json(state_to_json(s), Mode::coarse) == s);
  CHECK_THROWS(state_from_json({{"fhr", "fast"}}, Mode::coarse));
  CHECK_THROWS(state_from_json({{"bogus", 1}}, Mode::coarse));
}

TEST_CASE("positivity: worked examples") {
  // Hand-built dataset: two persons under usual care.
  Dataset ds;
  ds.mode = Mode::coarse;
  auto add = [&](std::int64_t id, int k, FhrCategory f, Action status, Action a, bool decision,
                 bool born = false) {
    PersonHour r;
    r.person_id = id;
    r.state = testing::coarse_state(f, 3, BpLevel::normal, BpLevel::normal, k);
    r.state.a = status;
    r.state.born = born;
    r.a = a;
    r.has_decision = decision;
    ds.rows.push_back(r);
  };
  add(0, 0, FhrCategory::normal, Action::vaginal, Action::vaginal, true);
  add(0, 1, FhrCategory::tachycardia, Action::vaginal, Action::cesarean, true);
  add(0, 2, FhrCategory::tachycardia, Action::cesarean, Action::cesarean, false, true);
  add(1, 0, FhrCategory::normal, Action::vaginal, Action::vaginal, true);
  add(1, 1, FhrCategory::normal, Action::vaginal, Action::vaginal, false);
  REQUIRE_NOTHROW(validate_dataset(ds));
  const Strata strata;
  const auto vag = positivity_report(ds, VaginalOnly{}, strata, 1, 2);
  auto cell = [&](const PositivityReport& r, int hour, const std::string& stratum) {
    for (const auto& c : r.cells) {
      if (c.hour == hour && c.stratum == stratum) return c;
    }
    FAIL("missing cell");
    return PositivityCell{};
  };
  CHECK(cell(vag, 0, "normal:dilatation_low").n_at_risk == 2);
  CHECK(cell(vag, 0, "normal:dilatation_low").n_consistent == 2);
  CHECK(cell(vag, 1, "tachycardia:dilatation_low").n_at_risk == 1);
  CHECK(cell(vag, 1, "tachycardia:dilatation_low").n_consistent == 0);
  CHECK(cell(vag, 1, "tachycardia:dilatation_low").flagged);
  CHECK(vag.structural_zero_count() == 1);
  const auto imm = positivity_report(ds, ImmediateCesarean{}, strata, 1, 2);
  CHECK(cell(imm, 0, "normal:dilatation_low").n_consistent == 0);
  CHECK(cell(imm, 1, "tachycardia:dilatation_low").n_at_risk == 0);
  const auto dyn = positivity_report(ds, DynamicFhr{}, strata, 1, 2);
  // Person 1 has no decision at hour 1, so only two cells hold consistent persons.
  CHECK(dyn.flagged_count() == dyn.cells.size() - 2);
  CHECK(strata.labels().size() == 12);
  const auto csv = vag.to_csv();
  CHECK(csv.rfind("hour,stratum,n_at_risk,n_consistent,flagged\n", 0) == 0);
  CHECK_THROWS_AS(positivity_report(ds, VaginalOnly{}, strata, 0, 2), UsageError);
}

TEST_CASE("never-cesarean data flag every cell for immediate cesarean") {
  const auto ds = generate_dataset(5000, ScmConfig::defaults(Mode::coarse),
                                   UsualCarePolicy::never_cesarean(), 12);
  const auto r = positivity_report(ds, ImmediateCesarean{}, Strata{}, 5, 12);
  CHECK(r.flagged_count() == r.cells.size());
  CHECK(r.structural_zero_count() > 0);
}

TEST_CASE("generated incidence matches the frozen forward-oracle values") {
  const auto cfg = ScmConfig::defaults(Mode::coarse);
  constexpr int n = 100000;
  const auto ds = generate_dataset(n, cfg, UsualCarePolicy::defaults(), 13);
  double ces = 0.0;
  double y = 0.0;
  for (const auto& p : trajectories(ds)) {
    ces += p.trajectory.current().a == Action::cesarean;
    y += p.trajectory.current().y;
  }
  const double pc = testing::frozen::kUsualCareCesareanIncidence;
  const double py = testing::frozen::kUsualCareOutcomeIncidence;
  CHECK(std::abs(ces / n - pc) <= 3.0 * std::sqrt(pc * (1 - pc) / n));
  CHECK(std::abs(y / n - py) <= 3.0 * std::sqrt(py * (1 - py) / n));
}
