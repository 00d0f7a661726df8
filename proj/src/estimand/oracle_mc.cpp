#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "seqpi/error.hpp"
#include "seqpi/estimand.hpp"

namespace seqpi {
namespace {

constexpr std::int64_t kBlock = 4096;

std::int64_t run_block(const EstimandSpec& spec, const PatientState& condition,
                       const ScmConfig& dynamics, const CesareanPropensity* usual_care,
                       std::uint64_t seed, std::int64_t block, std::int64_t reps) {
  Rng rng = substream(seed, {0x6d63u, static_cast<std::uint64_t>(block)});
  const int stop = spec.horizon_hour();
  const int anchor = spec.moment_of_use;

  DecisionFn usual;
  if (usual_care != nullptr) usual = stochastic_policy(*usual_care, rng);
  const DecisionFn regime_fn = [&](const History& h) {
    return decide(spec.regime, h, usual ? &usual : nullptr, anchor);
  };

  History history;
  history.states.reserve(static_cast<std::size_t>(stop - anchor + 1));
  history.actions.reserve(static_cast<std::size_t>(stop - anchor));
  std::int64_t events = 0;
  for (std::int64_t r = 0; r < reps; ++r) {
    history.states.clear();
    history.actions.clear();
    history.states.push_back(condition);
    simulate_forward(history, regime_fn, rng, dynamics, stop);
    if (history.current().y) ++events;
  }
  return events;
}

}  // namespace

RiskEstimate simulate_risk(const EstimandSpec& spec, const PatientState& condition,
                           const ScmConfig& dynamics, const CesareanPropensity* usual_care,
                           const McOptions& options, Method method) {
  check_query(spec, condition, dynamics.horizon, usual_care);
  if (condition.mode() != dynamics.mode) throw ModeError("condition mode differs from the SCM");
  if (options.n_mc < 1) throw UsageError("n_mc must be >= 1");

  const std::int64_t n_blocks = (options.n_mc + kBlock - 1) / kBlock;
  std::vector<std::int64_t> events(static_cast<std::size_t>(n_blocks), 0);
  auto reps_in = [&](std::int64_t b) { return std::min(kBlock, options.n_mc - b * kBlock); };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_blocks)));
  if (threads == 1) {
    for (std::int64_t b = 0; b < n_blocks; ++b) {
      events[b] = run_block(spec, condition, dynamics, usual_care, options.seed, b, reps_in(b));
    }
  } else {
    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        try {
          for (std::int64_t b = next++; b < n_blocks; b = next++) {
            events[b] = run_block(spec, condition, dynamics, usual_care, options.seed, b,
                                  reps_in(b));
          }
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::int64_t total = 0;
  for (auto e : events) total += e;
  RiskEstimate out;
  out.n = options.n_mc;
  out.p = static_cast<double>(total) / static_cast<double>(options.n_mc);
  out.se = std::sqrt(out.p * (1.0 - out.p) / static_cast<double>(options.n_mc));
  out.method = method;
  return out;
}

RiskEstimate oracle_mc(const EstimandSpec& spec, const PatientState& condition,
                       const ScmConfig& scm, const CesareanPropensity* usual_care,
                       const McOptions& options) {
  return simulate_risk(spec, condition, scm, usual_care, options, Method::oracle_mc);
}

}  // namespace seqpi
