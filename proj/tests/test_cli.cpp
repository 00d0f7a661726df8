#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unistd.h>

#include "seqpi/cli.hpp"
#include "seqpi/error.hpp"
#include "support.hpp"

using namespace seqpi;
using namespace seqpi::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("seqpi_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

json small_config() {
  return {{"seed", 3},
          {"scm", {{"mode", "coarse"}}},
          {"n_persons", 2000},
          {"n_mc", 2000},
          {"n_conditions", 2},
          {"query_hours", {0, 2}}};
}

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "seqpi");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("experiment parsing and validation") {
  TempDir dir;
  const auto cfg = parse_experiment(small_config(), dir.path);
  CHECK(cfg.seed == 3);
  CHECK(cfg.scm.mode == Mode::coarse);
  CHECK(cfg.scm.horizon == 12);
  CHECK(parse_experiment(cfg.to_json(), dir.path).to_json() == cfg.to_json());

  auto no_seed = small_config();
  no_seed.erase("seed");
  CHECK_THROWS_AS(parse_experiment(no_seed, dir.path), UsageError);
  auto zero = small_config();
  zero["n_persons"] = 0;
  CHECK_THROWS_AS(parse_experiment(zero, dir.path), UsageError);
  auto bad_id = small_config();
  bad_id["estimands"] = {2, 9};
  CHECK_THROWS_AS(parse_experiment(bad_id, dir.path), UsageError);
  auto bad_method = small_config();
  bad_method["methods"] = {"magic"};
  CHECK_THROWS_AS(parse_experiment(bad_method, dir.path), UsageError);
  auto unknown = small_config();
  unknown["colour"] = "red";
  CHECK_THROWS_AS(parse_experiment(unknown, dir.path), UsageError);
  auto named = small_config();
  named["policy"] = "never_cesarean";
  CHECK(parse_experiment(named, dir.path).policy.intercept < -1e6);

  // The SCM may be given as a file path relative to the config.
  std::ofstream(dir.path / "scm.json") << to_json(ScmConfig::defaults(Mode::coarse)).dump();
  auto by_path = small_config();
  by_path["scm"] = "scm.json";
  CHECK(parse_experiment(by_path, dir.path).to_json() == cfg.to_json());

  Overrides ov;
  ov.seed = 9;
  ov.out = "elsewhere";
  const auto over = parse_experiment(small_config(), dir.path, ov);
  CHECK(over.seed == 9);
  CHECK(over.output_dir == "elsewhere");
}

TEST_CASE("configuration hash") {
  TempDir dir;
  const auto a = parse_experiment(small_config(), dir.path);
  auto b = a;
  b.output_dir = "other";
  b.threads = 7;
  CHECK(config_hash(a) == config_hash(b));
  auto c = a;
  c.seed = 4;
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 64);
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("condition draws are deterministic and at risk") {
  const auto cfg = ScmConfig::defaults(Mode::coarse);
  const auto a = draw_conditions(cfg, {}, 4, 10, 5);
  const auto b = draw_conditions(cfg, {}, 4, 10, 5);
  CHECK(a == b);
  CHECK(a.size() == 10);
  for (const auto& s : a) {
    CHECK(s.k == 4);
    CHECK(s.at_risk());
  }
}

TEST_CASE("reruns are byte-identical") {
  TempDir dir;
  const auto cfg = parse_experiment(small_config(), dir.path);
  for (auto cmd : {cmd_simulate, cmd_evaluate, cmd_fit, cmd_compare}) {
    const auto first = cmd(cfg, dir.path / "a");
    const auto second = cmd(cfg, dir.path / "b");
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
      CHECK(first[i].filename() == second[i].filename());
      CHECK(slurp(first[i]) == slurp(second[i]));
    }
    fs::remove_all(dir.path / "a");
    fs::remove_all(dir.path / "b");
  }
}

TEST_CASE("manifest records the configuration and output digests") {
  TempDir dir;
  const auto cfg = parse_experiment(small_config(), dir.path);
  cmd_simulate(cfg, dir.path / "sim");
  const auto m = json::parse(slurp(dir.path / "sim" / "manifest.json"));
  CHECK(m.at("command") == "simulate");
  CHECK(m.at("seed") == 3);
  CHECK(m.at("version") == kVersion);
  CHECK(m.at("config_hash") == config_hash(cfg));
  bool found = false;
  for (const auto& o : m.at("outputs")) {
    if (o.at("file") == "dataset.jsonl") {
      found = true;
      CHECK(o.at("sha256") == sha256_hex(slurp(dir.path / "sim" / "dataset.jsonl")));
    }
  }
  CHECK(found);
  const auto ds = read_dataset(dir.path / "sim" / "dataset.jsonl");
  CHECK(trajectories(ds).size() == 2000);
}

TEST_CASE("evaluate under zero hazards gives zero risk") {
  TempDir dir;
  auto doc = small_config();
  auto scm = to_json(ScmConfig::defaults(Mode::coarse));
  for (auto& late : scm["coarse"]["hazard"]) {
    for (auto& f : late) f = {0.0, 0.0};
  }
  scm["coarse"]["surgical"] = {0.0, 0.0};
  doc["scm"] = scm;
  const auto cfg = parse_experiment(doc, dir.path);
  cmd_evaluate(cfg, dir.path / "ev");
  const auto rows = read_csv(dir.path / "ev" / "oracle.csv");
  REQUIRE(rows.size() > 1);
  CHECK(rows[0] == std::vector<std::string>{"estimand_id", "k", "condition_id", "method", "p", "se", "n"});
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][4] == "0");
}

TEST_CASE("compare: row count and naive bias under both policies") {
  TempDir dir;
  json doc = {{"seed", 21},
              {"scm", {{"mode", "coarse"}}},
              {"n_persons", 100000},
              {"n_conditions", 0},
              {"estimands", {2}},
              {"methods", {"naive", "gcomp", "ice"}},
              {"train_fraction", 1.0},
              {"conditions",
               {{{"fhr", "normal"}, {"dilatation", 3}},
                {{"fhr", "normal"}, {"dilatation", 4}},
                {{"fhr", "tachycardia"}, {"dilatation", 3}}}}};
  auto never = doc;
  never["policy"] = "never_cesarean";
  const auto cfg_never = parse_experiment(never, dir.path);
  cmd_compare(cfg_never, dir.path / "never");
  const auto rows = read_csv(dir.path / "never" / "compare.csv");
  CHECK(rows.size() == 1 + 1 * 3 * 3);  // estimands x conditions x methods
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][3] != "naive" || rows[i][2] == "2") continue;
    CAPTURE(rows[i][2]);
    CHECK(std::abs(std::stod(rows[i][9])) <= 0.02);
  }

  const auto cfg_default = parse_experiment(doc, dir.path);
  cmd_compare(cfg_default, dir.path / "default");
  const auto drows = read_csv(dir.path / "default" / "compare.csv");
  bool checked = false;
  for (std::size_t i = 1; i < drows.size(); ++i) {
    if (drows[i][3] == "naive" && drows[i][2] == "2") {
      CHECK(std::abs(std::stod(drows[i][9])) > 0.03);
      checked = true;
    }
  }
  CHECK(checked);
  CHECK(fs::exists(dir.path / "default" / "summary.txt"));
}

TEST_CASE("compare marks non-static and unidentified cases") {
  TempDir dir;
  auto doc = small_config();
  doc["policy"] = "never_cesarean";
  doc["estimands"] = {1, 4};
  doc["query_hours"] = {0};
  const auto cfg = parse_experiment(doc, dir.path);
  cmd_compare(cfg, dir.path / "cmp");
  const auto rows = read_csv(dir.path / "cmp" / "compare.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r[3] == "ice" && r[0] == "4") CHECK(r.back() == "not_applicable");
    if (r[3] == "ice" && r[0] == "1") CHECK(r.back() == "positivity_failure");
    if (r[3] == "gcomp") CHECK(r.back() == "positivity_failure");
  }
}

TEST_CASE("run() exit codes") {
  TempDir dir;
  const auto config = dir.path / "exp.json";
  std::ofstream(config) << small_config().dump();
  CHECK(run_args({"simulate", "--config", config.string(), "--out", (dir.path / "s").string()}) == 0);
  CHECK(fs::exists(dir.path / "s" / "dataset.jsonl"));
  CHECK(run_args({"evaluate", "--config", config.string(), "--out", (dir.path / "e").string(),
                  "--seed", "5"}) == 0);
  CHECK(json::parse(slurp(dir.path / "e" / "manifest.json")).at("seed") == 5);
  CHECK(run_args({}) == 2);
  CHECK(run_args({"dance"}) == 2);
  CHECK(run_args({"simulate", "--config", (dir.path / "absent.json").string()}) == 2);
  CHECK(run_args({"simulate", "--config", config.string(), "--mode", "fuzzy"}) == 2);

  auto bad = small_config();
  bad["estimands"] = {12};
  std::ofstream(dir.path / "bad.json") << bad.dump();
  CHECK(run_args({"evaluate", "--config", (dir.path / "bad.json").string()}) == 2);

  auto data = small_config();
  data["dataset"] = (dir.path / "missing.jsonl").string();
  std::ofstream(dir.path / "data.json") << data.dump();
  CHECK(run_args({"fit", "--config", (dir.path / "data.json").string(), "--out",
                  (dir.path / "f").string()}) == 3);
}

TEST_CASE("continuous fit and compare run at the default horizon") {
  TempDir dir;
  auto doc = small_config();
  doc["scm"] = {{"mode", "continuous"}};
  doc["n_persons"] = 3000;
  doc["estimands"] = {2};
  doc["query_hours"] = {0};
  doc["methods"] = {"gcomp", "ice"};
  const auto cfg = parse_experiment(doc, dir.path);
  REQUIRE(cfg.scm.horizon > 24);
  cmd_fit(cfg, dir.path / "fit");
  const auto diag = read_csv(dir.path / "fit" / "fit_diagnostics.csv");
  const auto support = std::find_if(diag.begin(), diag.end(),
                                    [](const auto& r) { return r[0] == "supported_hours"; });
  REQUIRE(support != diag.end());
  CHECK(std::stoi((*support)[1]) < cfg.scm.horizon);

  cmd_compare(cfg, dir.path / "cmp");
  const auto rows = read_csv(dir.path / "cmp" / "compare.csv");
  CHECK(rows.size() == 1 + 2 * 2);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].back() == "ok");
}
