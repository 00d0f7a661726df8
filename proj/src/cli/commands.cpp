#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "seqpi/cli.hpp"
#include "seqpi/error.hpp"
#include "seqpi/estimators.hpp"
#include "seqpi/service.hpp"

namespace seqpi::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kEvalKey = 0x6576616cu;
constexpr std::uint64_t kCompareKey = 0x636d7072u;
constexpr std::uint64_t kSplitKey = 0x73706c74u;

struct Outputs {
  fs::path dir;
  std::vector<fs::path> files;

  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + p.string() + "' for writing");
    out << content;
    if (!out) throw DataError("write to '" + p.string() + "' failed");
    files.push_back(p);
  }

  void add_existing(const std::string& name) { files.push_back(dir / name); }

  std::vector<fs::path> finish(const std::string& command, const ExperimentConfig& cfg) {
    json outputs = json::array();
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      std::stringstream buf;
      buf << in.rdbuf();
      outputs.push_back({{"file", f.filename().string()}, {"sha256", sha256_hex(buf.str())}});
    }
    const json manifest = {{"command", command},
                           {"version", kVersion},
                           {"seed", cfg.seed},
                           {"config_hash", config_hash(cfg)},
                           {"config", cfg.to_json()},
                           {"outputs", outputs}};
    write("manifest.json", manifest.dump(2) + "\n");
    return files;
  }
};

Outputs open_outputs(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create '" + out.string() + "': " + ec.message());
  return Outputs{out, {}};
}

std::string num(double v) { return fmt::format("{}", v); }

bool estimand_valid_at(int id, int k) { return id >= 5 || k == 0; }

struct RegimeEntry {
  std::string tag;
  Regime regime;
};

std::vector<RegimeEntry> regimes_for(const std::vector<int>& ids) {
  std::vector<RegimeEntry> out;
  std::set<std::string> seen;
  for (int id : ids) {
    const Regime r = builtin_estimand(id, id <= 4 ? 0 : 1, 72).regime;
    const std::string tag = to_json(r).at("type").get<std::string>();
    if (seen.insert(tag).second) out.push_back({tag, r});
  }
  return out;
}

Dataset obtain_dataset(const ExperimentConfig& cfg) {
  if (!cfg.dataset.empty()) {
    Dataset ds = read_dataset(cfg.dataset);
    if (ds.mode != cfg.scm.mode) {
      throw DataError("dataset mode differs from the configured SCM mode");
    }
    return ds;
  }
  return generate_dataset(cfg.n_persons, cfg.scm, cfg.policy, cfg.seed, cfg.threads);
}

std::string conditions_jsonl(const std::vector<PatientState>& grid) {
  std::string out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out += json{{"condition_id", i}, {"state", state_to_json(grid[i])}}.dump() + "\n";
  }
  return out;
}

}  // namespace

std::vector<fs::path> cmd_simulate(const ExperimentConfig& cfg, const fs::path& out) {
  Outputs o = open_outputs(out);
  const Dataset ds = generate_dataset(cfg.n_persons, cfg.scm, cfg.policy, cfg.seed, cfg.threads);
  write_dataset(ds, out / "dataset.jsonl");
  o.add_existing("dataset.jsonl");
  for (const auto& r : regimes_for(cfg.estimands)) {
    const auto report =
        positivity_report(ds, r.regime, Strata{}, cfg.positivity_threshold, cfg.scm.horizon);
    o.write("positivity_" + r.tag + ".csv", report.to_csv());
  }
  return o.finish("simulate", cfg);
}

std::vector<fs::path> cmd_evaluate(const ExperimentConfig& cfg, const fs::path& out) {
  Outputs o = open_outputs(out);
  const auto grid = condition_grid(cfg);
  o.write("conditions.jsonl", conditions_jsonl(grid));

  std::optional<CoarseExactOracle> exact;
  if (cfg.scm.mode == Mode::coarse) exact.emplace(cfg.scm);
  std::string csv = "estimand_id,k,condition_id,method,p,se,n\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& c = grid[i];
    for (int id : cfg.estimands) {
      if (!estimand_valid_at(id, c.k)) continue;
      const EstimandSpec spec = builtin_estimand(id, c.k, cfg.scm.horizon);
      auto row = [&](const RiskEstimate& r) {
        csv += fmt::format("{},{},{},{},{},{},{}\n", id, c.k, i, to_string(r.method), num(r.p),
                           num(r.se), r.n);
      };
      if (exact) row(exact->evaluate(spec, c, &cfg.policy));
      McOptions mc{cfg.n_mc, derive_seed(cfg.seed, {kEvalKey, static_cast<std::uint64_t>(id), i}),
                   cfg.threads};
      row(oracle_mc(spec, c, cfg.scm, &cfg.policy, mc));
    }
  }
  o.write("oracle.csv", csv);
  return o.finish("evaluate", cfg);
}

std::vector<fs::path> cmd_fit(const ExperimentConfig& cfg, const fs::path& out) {
  Outputs o = open_outputs(out);
  const Dataset ds = obtain_dataset(cfg);
  const auto [train, test] = split_by_person(ds, cfg.train_fraction, derive_seed(cfg.seed, {kSplitKey}));
  const TransitionModels gcomp = fit_gcomp(train, cfg.scm.horizon);
  o.write("gcomp_model.json", to_json(gcomp).dump(2) + "\n");
  std::string diag = "component,n,iterations,grad_norm\n";
  for (const auto& d : gcomp.diagnostics) {
    diag += fmt::format("{},{},{},{}\n", d.name, d.n, d.iterations, num(d.grad_norm));
  }
  for (int k : cfg.query_hours) {
    const NaiveModel naive = fit_naive(train, k, cfg.scm.horizon);
    o.write(fmt::format("naive_model_k{}.json", k), to_json(naive).dump(2) + "\n");
    if (!naive.constant && naive.mode == Mode::continuous) {
      diag += fmt::format("naive_k{},{},{},{}\n", k, naive.logistic.n, naive.logistic.iterations,
                          num(naive.logistic.grad_norm));
    }
  }
  o.write("fit_diagnostics.csv", diag);
  return o.finish("fit", cfg);
}

std::vector<fs::path> cmd_compare(const ExperimentConfig& cfg, const fs::path& out) {
  Outputs o = open_outputs(out);
  const Dataset ds = obtain_dataset(cfg);
  const auto [train, test] = split_by_person(ds, cfg.train_fraction, derive_seed(cfg.seed, {kSplitKey}));
  const auto grid = condition_grid(cfg);
  o.write("conditions.jsonl", conditions_jsonl(grid));

  const bool want_gcomp =
      std::find(cfg.methods.begin(), cfg.methods.end(), "gcomp") != cfg.methods.end();
  std::optional<TransitionModels> gcomp;
  if (want_gcomp) gcomp = fit_gcomp(train, cfg.scm.horizon);
  std::optional<CoarseExactOracle> exact;
  if (cfg.scm.mode == Mode::coarse) exact.emplace(cfg.scm);
  std::map<std::pair<int, int>, NaiveModel> naive_cache;
  std::map<std::pair<int, int>, std::optional<IceModel>> ice_cache;
  std::map<std::pair<int, int>, std::string> ice_status;

  struct Summary {
    double max_abs = 0.0;
    double sum_bias = 0.0;
    int n = 0;
    int failed = 0;
  };
  std::map<std::pair<std::string, int>, Summary> summary;

  std::string csv = "estimand_id,k,condition_id,method,p,se,truth,truth_se,truth_method,bias,status\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& c = grid[i];
    for (int id : cfg.estimands) {
      if (!estimand_valid_at(id, c.k)) continue;
      const EstimandSpec spec = builtin_estimand(id, c.k, cfg.scm.horizon);
      const McOptions truth_mc{cfg.n_mc,
                               derive_seed(cfg.seed, {kEvalKey, static_cast<std::uint64_t>(id), i}),
                               cfg.threads};
      const RiskEstimate truth = exact ? exact->evaluate(spec, c, &cfg.policy)
                                       : oracle_mc(spec, c, cfg.scm, &cfg.policy, truth_mc);
      for (const auto& method : cfg.methods) {
        std::optional<RiskEstimate> est;
        std::string status = "ok";
        try {
          if (method == "naive") {
            const auto key = std::make_pair(c.k, spec.horizon_hour());
            auto it = naive_cache.find(key);
            if (it == naive_cache.end()) {
              it = naive_cache.emplace(key, fit_naive(train, c.k, spec.horizon_hour())).first;
            }
            est = it->second.predict(c);
          } else if (method == "gcomp") {
            const McOptions mc{cfg.n_mc,
                               derive_seed(cfg.seed, {kCompareKey, static_cast<std::uint64_t>(id), i}),
                               cfg.threads};
            est = gcomp_predict(*gcomp, c, spec, mc);
          } else {
            const auto key = std::make_pair(id, c.k);
            if (!ice_cache.count(key)) {
              try {
                ice_cache[key] = ice_estimate(train, spec);
              } catch (const UsageError&) {
                ice_cache[key] = std::nullopt;
                ice_status[key] = "not_applicable";
              } catch (const PositivityError&) {
                ice_cache[key] = std::nullopt;
                ice_status[key] = "positivity_failure";
              }
            }
            if (ice_cache[key]) {
              est = ice_cache[key]->predict(c);
            } else {
              status = ice_status[key];
            }
          }
        } catch (const PositivityError&) {
          status = "positivity_failure";
        }
        auto& s = summary[{method, id}];
        if (est) {
          const double bias = est->p - truth.p;
          s.max_abs = std::max(s.max_abs, std::abs(bias));
          s.sum_bias += bias;
          ++s.n;
          csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", id, c.k, i, method, num(est->p),
                             num(est->se), num(truth.p), num(truth.se), to_string(truth.method),
                             num(bias), status);
        } else {
          ++s.failed;
          csv += fmt::format("{},{},{},{},,,{},{},{},,{}\n", id, c.k, i, method, num(truth.p),
                             num(truth.se), to_string(truth.method), status);
        }
      }
    }
  }
  o.write("compare.csv", csv);

  std::string text = fmt::format(
      "comparison against the oracle ({} mode, {} persons, {} train, {} conditions)\n",
      to_string(cfg.scm.mode), trajectories(ds).size(), trajectories(train).size(), grid.size());
  text += fmt::format("{:<8} {:>8} {:>6} {:>14} {:>12} {:>8}\n", "method", "estimand", "rows",
                      "max_abs_error", "mean_bias", "skipped");
  for (const auto& [key, s] : summary) {
    if (s.n > 0) {
      text += fmt::format("{:<8} {:>8} {:>6} {:>14.6f} {:>12.6f} {:>8}\n", key.first, key.second,
                          s.n, s.max_abs, s.sum_bias / s.n, s.failed);
    } else {
      text += fmt::format("{:<8} {:>8} {:>6} {:>14} {:>12} {:>8}\n", key.first, key.second, 0,
                          "-", "-", s.failed);
    }
  }
  o.write("summary.txt", text);
  return o.finish("compare", cfg);
}

int run(int argc, char** argv) {
  CLI::App app{"Estimands for sequential prediction under interventions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::string mode_text;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string models_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config JSON")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "seed (overrides the config)");
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--mode", mode_text, "SCM mode")->check(CLI::IsMember({"coarse", "continuous"}));
  };
  auto* simulate = app.add_subcommand("simulate", "generate an observational dataset");
  auto* evaluate = app.add_subcommand("evaluate", "oracle risks at a condition grid");
  auto* fit = app.add_subcommand("fit", "fit naive and g-computation models");
  auto* compare = app.add_subcommand("compare", "estimators versus the oracle");
  auto* serve = app.add_subcommand("serve", "HTTP session service");
  for (auto* sub : {simulate, evaluate, fit, compare, serve}) add_common(sub);
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port")->check(CLI::Range(0, 65535));
  serve->add_option("--models", models_path, "fitted g-computation model JSON")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Overrides ov;
    ov.seed = seed;
    ov.out = out;
    if (!mode_text.empty()) ov.mode = parse_mode(mode_text);

    if (serve->parsed()) {
      ServiceOptions options;
      ExperimentConfig cfg;
      if (!config_path.empty()) {
        cfg = load_experiment(config_path, ov);
      } else {
        if (!ov.seed) ov.seed = 0;
        cfg = parse_experiment(json::object(), fs::current_path(), ov);
      }
      options.policy = cfg.policy;
      (cfg.scm.mode == Mode::coarse ? options.coarse : options.continuous) = cfg.scm;
      options.threads = cfg.threads;
      if (!models_path.empty()) {
        std::ifstream in(models_path);
        auto models = transition_models_from_json(json::parse(in));
        (models.dynamics.mode == Mode::coarse ? options.fitted_coarse : options.fitted_continuous) =
            std::move(models);
      }
      RiskService service(std::move(options));
      HttpServer server(service);
      std::cout << fmt::format("serving on http://{}:{}", host, port) << std::endl;
      server.listen(host, port);
      return 0;
    }

    const ExperimentConfig cfg =
        config_path.empty() ? parse_experiment(json::object(), fs::current_path(), ov)
                            : load_experiment(config_path, ov);
    std::vector<fs::path> files;
    if (simulate->parsed()) files = cmd_simulate(cfg, cfg.output_dir);
    if (evaluate->parsed()) files = cmd_evaluate(cfg, cfg.output_dir);
    if (fit->parsed()) files = cmd_fit(cfg, cfg.output_dir);
    if (compare->parsed()) files = cmd_compare(cfg, cfg.output_dir);
    for (const auto& f : files) std::cout << f.string() << "\n";
    if (compare->parsed()) {
      std::ifstream in(fs::path(cfg.output_dir) / "summary.txt");
      std::cout << in.rdbuf();
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::usage:
      case ErrorKind::mode: return 2;
      case ErrorKind::convergence:
      case ErrorKind::separation: return 4;
      default: return 3;
    }
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace seqpi::cli
