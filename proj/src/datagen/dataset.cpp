#include <atomic>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "seqpi/datagen.hpp"
#include "seqpi/error.hpp"

namespace seqpi {

std::vector<PersonTrajectory> trajectories(const Dataset& ds) {
  std::vector<PersonTrajectory> out;
  for (const auto& row : ds.rows) {
    if (out.empty() || out.back().person_id != row.person_id) {
      out.push_back({row.person_id, {}});
    }
    auto& traj = out.back().trajectory;
    traj.states.push_back(row.state);
    if (row.has_decision) traj.actions.push_back(row.a);
  }
  return out;
}

Dataset flatten(Mode mode, const std::vector<PersonTrajectory>& people) {
  Dataset ds;
  ds.mode = mode;
  std::size_t total = 0;
  for (const auto& p : people) total += p.trajectory.states.size();
  ds.rows.reserve(total);
  for (const auto& p : people) {
    const auto& t = p.trajectory;
    for (std::size_t i = 0; i < t.states.size(); ++i) {
      PersonHour row;
      row.person_id = p.person_id;
      row.state = t.states[i];
      row.has_decision = i < t.actions.size();
      row.a = row.has_decision ? t.actions[i] : t.states[i].a;
      ds.rows.push_back(std::move(row));
    }
  }
  return ds;
}

Dataset generate_dataset(std::int64_t n, const ScmConfig& cfg, const UsualCarePolicy& policy,
                         std::uint64_t seed, unsigned threads) {
  if (n < 1) throw UsageError("generate_dataset: n must be >= 1");
  cfg.validate();
  std::vector<PersonTrajectory> people(static_cast<std::size_t>(n));

  auto simulate_person = [&](std::int64_t i) {
    Rng rng = person_stream(seed, static_cast<std::uint64_t>(i));
    const DecisionFn usual = stochastic_policy(policy, rng);
    const BaselineCovariates baseline = sample_baseline(rng, cfg);
    people[static_cast<std::size_t>(i)] = {i, simulate_trajectory(baseline, usual, rng, cfg)};
  };

  if (threads == 0) threads = std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::min<std::int64_t>(n, 64))));
  if (threads == 1) {
    for (std::int64_t i = 0; i < n; ++i) simulate_person(i);
  } else {
    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        try {
          for (std::int64_t i = next++; i < n; i = next++) simulate_person(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  return flatten(cfg.mode, people);
}

void validate_dataset(const Dataset& ds) {
  auto fail = [](std::size_t index, const PersonHour& row, const std::string& what) {
    throw DataError(fmt::format("row {}: person {} hour {}: {}", index + 1, row.person_id,
                                row.state.k, what));
  };
  std::vector<std::int64_t> finished;
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const auto& row = ds.rows[i];
    const auto& s = row.state;
    if (s.mode() != ds.mode) fail(i, row, "covariate representation differs from dataset mode");
    const bool first = i == 0 || ds.rows[i - 1].person_id != row.person_id;
    if (first) {
      if (i > 0) finished.push_back(ds.rows[i - 1].person_id);
      if (s.k != 0) fail(i, row, fmt::format("first record is at hour {}, expected 0", s.k));
      continue;
    }
    const auto& prev = ds.rows[i - 1];
    if (s.k == prev.state.k) fail(i, row, "duplicate (person_id, k)");
    if (s.k != prev.state.k + 1) {
      fail(i, row, fmt::format("gap: hour {} follows hour {}", s.k, prev.state.k));
    }
    if (!prev.state.at_risk()) fail(i, row, "record after absorption (z = 0)");
    if (to_int(row.a) < to_int(prev.a)) fail(i, row, "a decreases from 1 to 0");
    if (prev.state.y && !s.y) fail(i, row, "y returns to 0 after an outcome");
    if (prev.state.born && !s.born) fail(i, row, "born returns to false");
    if (!prev.has_decision) fail(i, row, "previous record has no decision");
  }
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const auto& row = ds.rows[i];
    if (to_int(row.a) < to_int(row.state.a)) fail(i, row, "a below the intervention status");
    if (row.has_decision && !row.state.at_risk()) fail(i, row, "decision recorded while z = 0");
    if (const auto* v = std::get_if<ContinuousVitals>(&row.state.tv)) {
      if (v->dilatation < 0.0 || v->dilatation > 10.0) fail(i, row, "dilatation outside [0, 10]");
    } else {
      const auto& c = std::get<CoarseVitals>(row.state.tv);
      if (c.dilatation < 0 || c.dilatation > 10) fail(i, row, "dilatation outside [0, 10]");
    }
    if (i > 0 && ds.rows[i - 1].person_id == row.person_id) {
      const double d0 = dilatation_cm(ds.rows[i - 1].state.tv);
      if (dilatation_cm(row.state.tv) < d0) fail(i, row, "dilatation decreases");
    }
  }
  // Person ids must be grouped: each id appears in one contiguous block.
  if (!ds.rows.empty()) finished.push_back(ds.rows.back().person_id);
  std::sort(finished.begin(), finished.end());
  if (std::adjacent_find(finished.begin(), finished.end()) != finished.end()) {
    throw DataError("records of one person are not contiguous");
  }
}

std::pair<Dataset, Dataset> split_by_person(const Dataset& ds, double train_fraction,
                                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw UsageError("train_fraction must be in (0, 1]");
  }
  Dataset train, test;
  train.mode = test.mode = ds.mode;
  std::int64_t current = -1;
  bool to_train = true;
  for (const auto& row : ds.rows) {
    if (row.person_id != current || &row == ds.rows.data()) {
      current = row.person_id;
      Rng rng = substream(seed, {0x73706c74u, static_cast<std::uint64_t>(current)});
      to_train = uniform01(rng) < train_fraction;
    }
    (to_train ? train : test).rows.push_back(row);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace seqpi
