#pragma once

// Reproducible experiment runner: simulate, evaluate, fit, compare, serve.
// Every command is a pure function of the resolved configuration and seed;
// outputs carry a manifest with the configuration hash.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqpi/datagen.hpp"
#include "seqpi/estimand.hpp"

namespace seqpi::cli {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
  std::uint64_t seed = 0;  // mandatory in the file
  ScmConfig scm = ScmConfig::defaults(Mode::coarse);
  UsualCarePolicy policy;
  std::vector<int> estimands{1, 2, 3, 4, 5, 6, 7};
  std::vector<int> query_hours{0};
  int n_conditions = 20;  // random at-risk conditions per query hour
  std::vector<PatientState> conditions;  // explicit conditions, appended
  std::int64_t n_persons = 10000;
  std::int64_t n_mc = 100000;
  double train_fraction = 0.8;
  std::vector<std::string> methods{"naive", "gcomp", "ice"};
  std::int64_t positivity_threshold = 5;
  std::string dataset;  // optional input dataset for fit
  std::string output_dir = "out";
  unsigned threads = 0;

  // Fully resolved form (external references inlined); hashed into manifests.
  nlohmann::json to_json() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<Mode> mode;
};

// `base_dir` resolves relative file references ("scm" given as a path).
ExperimentConfig parse_experiment(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir,
                                  const Overrides& overrides = {});
ExperimentConfig load_experiment(const std::filesystem::path& path,
                                 const Overrides& overrides = {});

std::string sha256_hex(std::string_view data);
std::string config_hash(const ExperimentConfig& cfg);

// At-risk conditions at hour k reached under usual care, deterministic in seed.
std::vector<PatientState> draw_conditions(const ScmConfig& scm, const UsualCarePolicy& policy,
                                          int k, int n, std::uint64_t seed);

// Condition grid used by evaluate and compare: random draws per query hour
// followed by the explicit conditions.
std::vector<PatientState> condition_grid(const ExperimentConfig& cfg);

// Commands write into `out` (created if needed) and return the files written.
std::vector<std::filesystem::path> cmd_simulate(const ExperimentConfig& cfg,
                                                const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_evaluate(const ExperimentConfig& cfg,
                                                const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_fit(const ExperimentConfig& cfg,
                                           const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_compare(const ExperimentConfig& cfg,
                                               const std::filesystem::path& out);

// Entry point: exit codes 0 ok, 2 usage, 3 data, 4 non-convergence.
int run(int argc, char** argv);

}  // namespace seqpi::cli
