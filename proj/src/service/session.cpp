#include <fstream>
#include <random>

#include <fmt/format.h>

#include "seqpi/error.hpp"
#include "seqpi/json_util.hpp"
#include "seqpi/service.hpp"

namespace seqpi {
namespace {

using nlohmann::json;

constexpr std::uint64_t kInitKey = 0x696e6974u;
constexpr std::uint64_t kStepKey = 0x73746570u;
constexpr std::uint64_t kQueryKey = 0x71727973u;

PatientState initial_for(std::uint64_t seed, const ScmConfig& cfg) {
  Rng rng = substream(seed, {kInitKey});
  const BaselineCovariates baseline = sample_baseline(rng, cfg);
  return initial_state(baseline, rng, cfg);
}

PatientState step_for(std::uint64_t seed, const PatientState& s, Action action,
                      const ScmConfig& cfg) {
  Rng rng = substream(seed, {kStepKey, static_cast<std::uint64_t>(s.k)});
  return transition(s, action, rng, cfg);
}

bool terminated(const History& h, const ScmConfig& cfg) {
  return !h.current().at_risk() || h.current().k >= cfg.horizon;
}

std::vector<SessionEvent> events_for(const PatientState& before, Action action,
                                     const PatientState& after) {
  std::vector<SessionEvent> out;
  out.push_back({before.k, "decision", action});
  if (after.y) out.push_back({after.k, "adverse_outcome", std::nullopt});
  if (after.born) out.push_back({after.k, "born", std::nullopt});
  return out;
}

json event_json(const SessionEvent& e) {
  json out = {{"k", e.k}, {"type", e.type}};
  if (e.action) out["action"] = *e.action == Action::cesarean ? "cesarean" : "continue_vaginal";
  return out;
}

Action parse_action(const std::string& text) {
  if (text == "continue_vaginal") return Action::vaginal;
  if (text == "cesarean") return Action::cesarean;
  throw UsageError("action must be 'continue_vaginal' or 'cesarean', got '" + text + "'");
}

}  // namespace

QueryEstimand query_estimand(int id, int k, int final_hour) {
  QueryEstimand q;
  if (id >= 1 && id <= 4 && k > 0) {
    q.spec = builtin_estimand(id, 0, final_hour);
    q.spec.moment_of_use = k;
    q.spec.validate();
    q.label = fmt::format("{} (anchored at hour {})", builtin_estimand_label(id), k);
    q.remapped = true;
  } else {
    q.spec = builtin_estimand(id, k, final_hour);
    q.label = builtin_estimand_label(id);
  }
  return q;
}

RiskService::RiskService(ServiceOptions options) : options_(std::move(options)) {
  options_.coarse.validate();
  options_.continuous.validate();
  if (options_.coarse.mode != Mode::coarse || options_.continuous.mode != Mode::continuous) {
    throw UsageError("service: configs must match their modes");
  }
  std::random_device rd;
  id_salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string RiskService::new_id() {
  return fmt::format("{:016x}", derive_seed(id_salt_, {++id_counter_}));
}

std::shared_ptr<RiskService::Session> RiskService::find(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

std::size_t RiskService::session_count() const {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

json RiskService::create_session(const json& request) {
  const json body = request.is_null() ? json::object() : request;
  StrictObject o(body, "session request");
  std::string mode_text = "coarse";
  o.read("mode", mode_text);
  std::uint64_t seed = 0;
  const bool has_seed = o.read("seed", seed);
  o.finish();
  const Mode mode = parse_mode(mode_text);
  if (!has_seed) {
    std::random_device rd;
    seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  auto s = std::make_shared<Session>();
  s->seed = seed;
  s->cfg = mode == Mode::coarse ? options_.coarse : options_.continuous;
  s->cfg.seed = seed;
  s->history.states.push_back(initial_for(seed, s->cfg));
  {
    std::lock_guard lock(sessions_mutex_);
    s->id = new_id();
    sessions_[s->id] = s;
  }
  std::shared_lock lock(s->mutex);
  return state_locked(*s);
}

json RiskService::state_locked(const Session& s) const {
  json history = json::array();
  for (const auto& st : s.history.states) history.push_back(state_to_json(st));
  json actions = json::array();
  for (Action a : s.history.actions) actions.push_back(to_int(a));
  json events = json::array();
  for (const auto& e : s.events) events.push_back(event_json(e));
  return {{"session_id", s.id},
          {"seed", s.seed},
          {"mode", to_string(s.cfg.mode)},
          {"k", s.history.current().k},
          {"horizon", s.cfg.horizon},
          {"terminated", terminated(s.history, s.cfg)},
          {"state", state_to_json(s.history.current())},
          {"history", history},
          {"actions", actions},
          {"events", events}};
}

json RiskService::state(const std::string& id) const {
  auto s = find(id);
  std::shared_lock lock(s->mutex);
  return state_locked(*s);
}

json RiskService::risks(const std::string& id, const std::vector<int>& estimand_ids,
                        std::optional<std::int64_t> n_mc, const std::string& method,
                        const std::string& source) const {
  auto s = find(id);
  std::shared_lock lock(s->mutex);
  const PatientState& cur = s->history.current();
  if (terminated(s->history, s->cfg)) {
    throw ConflictError(fmt::format("session {} is terminated (hour {})", s->id, cur.k));
  }
  if (method != "auto" && method != "exact" && method != "mc") {
    throw UsageError("method must be auto, exact, or mc");
  }
  if (source != "oracle" && source != "fitted") {
    throw UsageError("source must be oracle or fitted");
  }
  const std::int64_t reps = n_mc.value_or(options_.default_n_mc);
  if (reps < 1 || reps > options_.max_n_mc) {
    throw UsageError(fmt::format("n_mc must be in [1, {}]", options_.max_n_mc));
  }
  const Mode mode = s->cfg.mode;
  const bool exact = method == "exact" || (method == "auto" && mode == Mode::coarse);
  if (exact && mode != Mode::coarse) throw ModeError("exact evaluation requires a coarse session");

  const TransitionModels* fitted = nullptr;
  if (source == "fitted") {
    const auto& opt = mode == Mode::coarse ? options_.fitted_coarse : options_.fitted_continuous;
    if (!opt) throw NotFoundError("no fitted models loaded for " + std::string(to_string(mode)) + " mode");
    fitted = &*opt;
  }
  std::optional<CoarseExactOracle> oracle;
  if (exact && !fitted) oracle.emplace(s->cfg);

  json out = json::array();
  for (int eid : estimand_ids) {
    const QueryEstimand q = query_estimand(eid, cur.k, s->cfg.horizon);
    McOptions mc;
    mc.n_mc = reps;
    mc.threads = options_.threads;
    mc.seed = derive_seed(s->seed, {kQueryKey, static_cast<std::uint64_t>(cur.k),
                                    static_cast<std::uint64_t>(eid),
                                    static_cast<std::uint64_t>(reps)});
    RiskEstimate r;
    if (fitted) {
      r = gcomp_predict(*fitted, cur, q.spec, mc, exact ? GcompEngine::exact : GcompEngine::mc);
    } else if (oracle) {
      r = oracle->evaluate(q.spec, cur, &options_.policy);
    } else {
      r = oracle_mc(q.spec, cur, s->cfg, &options_.policy, mc);
    }
    out.push_back({{"estimand_id", eid},
                   {"label", q.label},
                   {"remapped", q.remapped},
                   {"k", cur.k},
                   {"horizon_hour", q.spec.horizon_hour()},
                   {"intervention_option", to_json(q.spec.regime)},
                   {"p", r.p},
                   {"se", r.se},
                   {"n", r.n},
                   {"method", to_string(r.method)},
                   {"source", source}});
  }
  return {{"session_id", s->id}, {"k", cur.k}, {"risks", out}};
}

json RiskService::decide(const std::string& id, const json& request) {
  auto s = find(id);
  StrictObject o(request, "decision");
  const Action action = parse_action(o.require<std::string>("action"));
  std::optional<int> expected_k;
  if (o.has("k")) expected_k = o.require<int>("k");
  o.finish();

  // Decisions are exclusive per session: a second one arriving while the
  // first is in flight is refused rather than queued.
  std::unique_lock in_flight(s->decision_mutex, std::try_to_lock);
  if (!in_flight.owns_lock()) {
    throw ConflictError("another decision for session " + s->id + " is in progress");
  }
  std::unique_lock lock(s->mutex);
  const PatientState cur = s->history.current();
  if (terminated(s->history, s->cfg)) {
    throw ConflictError(fmt::format("session {} is terminated (hour {})", s->id, cur.k));
  }
  if (expected_k && *expected_k != cur.k) {
    throw ConflictError(fmt::format("decision for hour {} but the session is at hour {}",
                                    *expected_k, cur.k));
  }
  PatientState next = step_for(s->seed, cur, action, s->cfg);
  const auto events = events_for(cur, action, next);
  s->history.actions.push_back(action);
  s->history.states.push_back(std::move(next));
  s->events.insert(s->events.end(), events.begin(), events.end());

  json ev = json::array();
  for (const auto& e : events) ev.push_back(event_json(e));
  return {{"session_id", s->id},
          {"k", s->history.current().k},
          {"state", state_to_json(s->history.current())},
          {"events", ev},
          {"terminated", terminated(s->history, s->cfg)}};
}

void RiskService::remove(const std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  if (sessions_.erase(id) == 0) throw NotFoundError("unknown session '" + id + "'");
}

json RiskService::snapshot(const std::string& id) const {
  auto s = find(id);
  std::shared_lock lock(s->mutex);
  json actions = json::array();
  for (Action a : s->history.actions) actions.push_back(to_int(a));
  return {{"session_id", s->id}, {"seed", s->seed}, {"config", to_json(s->cfg)},
          {"actions", actions}, {"state", state_to_json(s->history.current())}};
}

std::string RiskService::restore(const json& doc) {
  StrictObject o(doc, "snapshot");
  auto s = std::make_shared<Session>();
  s->id = o.require<std::string>("session_id");
  s->seed = o.require<std::uint64_t>("seed");
  s->cfg = scm_config_from_json(o.child("config"));
  const auto actions = o.require<std::vector<int>>("actions");
  const PatientState expected = state_from_json(o.child("state"), s->cfg.mode);
  o.finish();
  if (s->cfg.seed != s->seed) throw DataError("snapshot: config seed differs from session seed");

  // Replay: the seed and the decisions determine every state.
  s->history.states.push_back(initial_for(s->seed, s->cfg));
  for (int a : actions) {
    if (a != 0 && a != 1) throw DataError("snapshot: actions must be 0 or 1");
    if (terminated(s->history, s->cfg)) throw DataError("snapshot: decision after termination");
    const PatientState cur = s->history.current();
    PatientState next = step_for(s->seed, cur, static_cast<Action>(a), s->cfg);
    const auto ev = events_for(cur, static_cast<Action>(a), next);
    s->events.insert(s->events.end(), ev.begin(), ev.end());
    s->history.actions.push_back(static_cast<Action>(a));
    s->history.states.push_back(std::move(next));
  }
  if (!(state_to_json(s->history.current()) == state_to_json(expected))) {
    throw DataError("snapshot: replayed state differs from the recorded state");
  }
  std::lock_guard lock(sessions_mutex_);
  if (sessions_.count(s->id)) throw ConflictError("session '" + s->id + "' already exists");
  sessions_[s->id] = s;
  return s->id;
}

void RiskService::save(const std::string& id, const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << snapshot(id).dump(2) << '\n';
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

std::string RiskService::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("snapshot '" + path.string() + "': " + e.what());
  }
  return restore(doc);
}

}  // namespace seqpi
