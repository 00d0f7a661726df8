#include <fstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "seqpi/cli.hpp"
#include "seqpi/error.hpp"
#include "seqpi/json_util.hpp"

namespace seqpi::cli {
namespace {

using nlohmann::json;

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace

json ExperimentConfig::to_json() const {
  json conds = json::array();
  for (const auto& c : conditions) conds.push_back(state_to_json(c));
  return {{"seed", seed},
          {"scm", seqpi::to_json(scm)},
          {"policy", seqpi::to_json(policy)},
          {"estimands", estimands},
          {"query_hours", query_hours},
          {"n_conditions", n_conditions},
          {"conditions", conds},
          {"n_persons", n_persons},
          {"n_mc", n_mc},
          {"train_fraction", train_fraction},
          {"methods", methods},
          {"positivity_threshold", positivity_threshold},
          {"dataset", dataset}};
}

ExperimentConfig parse_experiment(const json& doc, const std::filesystem::path& base_dir,
                                  const Overrides& overrides) {
  StrictObject o(doc, "experiment");
  ExperimentConfig cfg;
  if (!overrides.seed && !o.has("seed")) {
    throw UsageError("experiment: 'seed' is mandatory (no wall-clock seeding)");
  }
  o.read("seed", cfg.seed);
  if (overrides.seed) cfg.seed = *overrides.seed;

  std::optional<std::string> mode_text;
  if (o.has("mode")) mode_text = o.require<std::string>("mode");
  json scm_doc = json::object();
  if (o.has("scm")) {
    const json& s = o.child("scm");
    if (s.is_string()) {
      std::filesystem::path p = s.get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      scm_doc = read_json_file(p);
    } else {
      scm_doc = s;
    }
  }
  if (!scm_doc.is_object()) throw UsageError("experiment.scm must be an object or a path");
  if (overrides.mode) {
    scm_doc["mode"] = std::string(to_string(*overrides.mode));
  } else if (mode_text) {
    if (scm_doc.contains("mode") && scm_doc["mode"] != *mode_text) {
      throw UsageError("experiment: mode differs from scm.mode");
    }
    scm_doc["mode"] = *mode_text;
  } else if (!scm_doc.contains("mode")) {
    scm_doc["mode"] = "coarse";
  }
  cfg.scm = scm_config_from_json(scm_doc);
  cfg.scm.seed = cfg.seed;

  if (o.has("policy")) {
    const json& p = o.child("policy");
    if (p.is_string()) {
      const auto name = p.get<std::string>();
      if (name == "default") {
        cfg.policy = UsualCarePolicy::defaults();
      } else if (name == "never_cesarean") {
        cfg.policy = UsualCarePolicy::never_cesarean();
      } else {
        throw UsageError("experiment.policy: unknown named policy '" + name + "'");
      }
    } else {
      cfg.policy = usual_care_from_json(p);
    }
  }
  o.read("estimands", cfg.estimands);
  o.read("query_hours", cfg.query_hours);
  o.read("n_conditions", cfg.n_conditions);
  if (o.has("conditions")) {
    const json& list = o.child("conditions");
    if (!list.is_array()) throw UsageError("experiment.conditions must be an array");
    for (const auto& c : list) cfg.conditions.push_back(state_from_json(c, cfg.scm.mode));
  }
  o.read("n_persons", cfg.n_persons);
  o.read("n_mc", cfg.n_mc);
  o.read("train_fraction", cfg.train_fraction);
  o.read("methods", cfg.methods);
  o.read("positivity_threshold", cfg.positivity_threshold);
  o.read("dataset", cfg.dataset);
  if (!cfg.dataset.empty() && std::filesystem::path(cfg.dataset).is_relative()) {
    cfg.dataset = (base_dir / cfg.dataset).string();
  }
  o.read("output_dir", cfg.output_dir);
  o.read("threads", cfg.threads);
  o.finish();
  if (overrides.out) cfg.output_dir = *overrides.out;

  for (int id : cfg.estimands) {
    if (id < 1 || id > 7) throw UsageError(fmt::format("experiment: unknown estimand id {}", id));
  }
  for (int k : cfg.query_hours) {
    if (k < 0 || k >= cfg.scm.horizon) {
      throw UsageError(fmt::format("experiment: query hour {} outside [0, {})", k, cfg.scm.horizon));
    }
  }
  for (const auto& c : cfg.conditions) {
    if (!c.at_risk()) throw UsageError("experiment: explicit conditions must be at risk");
    if (c.k >= cfg.scm.horizon) throw UsageError("experiment: condition hour beyond the horizon");
  }
  if (cfg.n_conditions < 0) throw UsageError("experiment: n_conditions must be >= 0");
  if (cfg.n_persons < 1) throw UsageError("experiment: n_persons must be >= 1");
  if (cfg.n_mc < 1) throw UsageError("experiment: n_mc must be >= 1");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0)) {
    throw UsageError("experiment: train_fraction must be in (0, 1]");
  }
  if (cfg.positivity_threshold < 1) throw UsageError("experiment: positivity_threshold must be >= 1");
  for (const auto& m : cfg.methods) {
    if (m != "naive" && m != "gcomp" && m != "ice") {
      throw UsageError("experiment: unknown method '" + m + "' (naive|gcomp|ice)");
    }
  }
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path, const Overrides& overrides) {
  return parse_experiment(read_json_file(path), path.parent_path(), overrides);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(cfg.to_json().dump()); }

std::vector<PatientState> draw_conditions(const ScmConfig& scm, const UsualCarePolicy& policy,
                                          int k, int n, std::uint64_t seed) {
  std::vector<PatientState> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (attempt > 100000) {
        throw UsageError(fmt::format("cannot reach an at-risk state at hour {}", k));
      }
      Rng rng = substream(seed, {0x636f6e64u, static_cast<std::uint64_t>(k),
                                 static_cast<std::uint64_t>(i), attempt});
      const DecisionFn usual = stochastic_policy(policy, rng);
      History h;
      h.states.push_back(initial_state(sample_baseline(rng, scm), rng, scm));
      simulate_forward(h, usual, rng, scm, k);
      if (h.current().at_risk() && h.current().k == k) {
        out.push_back(h.current());
        break;
      }
    }
  }
  return out;
}

std::vector<PatientState> condition_grid(const ExperimentConfig& cfg) {
  std::vector<PatientState> grid;
  for (int k : cfg.query_hours) {
    auto drawn = draw_conditions(cfg.scm, cfg.policy, k, cfg.n_conditions, cfg.seed);
    grid.insert(grid.end(), drawn.begin(), drawn.end());
  }
  grid.insert(grid.end(), cfg.conditions.begin(), cfg.conditions.end());
  return grid;
}

}  // namespace seqpi::cli
