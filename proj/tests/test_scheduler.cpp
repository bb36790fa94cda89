#include <doctest.h>

#include <map>
#include <set>

#include "cgforge/engine.hpp"
#include "cgforge/oracle.hpp"
#include "cgforge/scheduler.hpp"
#include "helpers.hpp"

using namespace cgforge;
using scheduler::Schedule;
using scheduler::Space;
using scheduler::Strategy;

namespace {

std::uint32_t min_feasible_budget(const tpspec::ValidatedProblem& p) {
  std::uint32_t ws = 0;
  for (const auto& r : p.resolved) {
    ws = std::max(ws, static_cast<std::uint32_t>(r.b_prime * r.dx() + r.dy() + r.weight_count +
                                                 r.b * r.dz()));
  }
  return ws;
}

void check_phase_invariants(const tpspec::ValidatedProblem& p, const Schedule& s) {
  // every instruction appears in exactly one phase
  std::vector<int> seen(p.resolved.size(), 0);
  for (const auto& ph : s.phases) {
    std::uint64_t resident_words = 0;
    std::set<std::uint32_t> resident(ph.resident.begin(), ph.resident.end());
    for (auto id : ph.resident) resident_words += s.resources[id].words();
    CHECK(resident_words <= s.budget_words);
    for (auto id : ph.loaded) CHECK(resident.count(id) == 1);
    for (auto id : ph.z_flush) CHECK(resident.count(id) == 1);
    for (auto pos : ph.instructions) {
      seen[s.order[pos]] += 1;
    }
  }
  for (int c : seen) CHECK(c == 1);

  // every z resource is written by a contiguous run of phases
  std::map<std::uint32_t, std::vector<std::size_t>> z_phases;
  for (std::size_t pi = 0; pi < s.phases.size(); ++pi) {
    for (auto pos : s.phases[pi].instructions) {
      const auto& r = p.resolved[s.order[pos]];
      for (std::uint32_t id = 0; id < s.resources.size(); ++id) {
        if (s.resources[id].space == Space::Z && s.resources[id].offset == r.z_offset &&
            s.resources[id].words() ==
                static_cast<std::uint32_t>(r.b) * static_cast<std::uint32_t>(r.dz())) {
          z_phases[id].push_back(pi);
        }
      }
    }
  }
  for (const auto& [id, phases] : z_phases) {
    for (std::size_t n = 1; n < phases.size(); ++n) {
      CHECK(phases[n] - phases[n - 1] <= 1);
    }
  }
}

}  // namespace

TEST_CASE("split_multiplicities chunks kind B") {
  using irreps::Irreps;
  using irreps::Parity;
  Irreps x, y, z;
  x.blocks.push_back({64, {1, Parity::even}});
  y.blocks.push_back({1, {0, Parity::even}});
  z.blocks.push_back({64, {1, Parity::even}});
  auto vr = tpspec::validate(x, y, z, {{1, 1, 1, tpspec::Kind::B}});
  REQUIRE(vr.ok());

  const auto split = scheduler::split_multiplicities(*vr.problem, 32);
  REQUIRE(split.resolved.size() == 2);
  CHECK(split.resolved[0].b == 32);
  CHECK(split.resolved[1].b == 32);
  CHECK(split.resolved[0].x_offset == 0);
  CHECK(split.resolved[1].x_offset == 32 * 3);
  CHECK(split.resolved[1].z_offset == 32 * 3);
  CHECK(split.resolved[1].weight_offset == 32);
  CHECK(split.origin == std::vector<int>{0, 0});
  CHECK(split.total_weights == vr.problem->total_weights);

  // b == lane width stays untouched
  const auto same = scheduler::split_multiplicities(*vr.problem, 64);
  CHECK(same.resolved.size() == 1);
}

TEST_CASE("split_multiplicities chunks kind C columns and rows") {
  using irreps::Irreps;
  using irreps::Parity;
  Irreps x, y, z;
  x.blocks.push_back({48, {1, Parity::even}});
  y.blocks.push_back({1, {1, Parity::even}});
  z.blocks.push_back({32, {1, Parity::even}});
  auto vr = tpspec::validate(x, y, z, {{1, 1, 1, tpspec::Kind::C}});
  REQUIRE(vr.ok());

  const auto split = scheduler::split_multiplicities(*vr.problem, 32);
  REQUIRE(split.resolved.size() == 2);  // b' in {32, 16}, b = 32 unchanged
  CHECK(split.resolved[0].b_prime == 32);
  CHECK(split.resolved[1].b_prime == 16);
  CHECK(split.resolved[0].b == 32);
  CHECK(split.resolved[1].weight_offset == 32);   // column offset within the row
  CHECK(split.resolved[1].w_row_stride == 48);    // original storage stride

  // chunked engine output equals the unchunked dense oracle
  const auto sched = scheduler::build_schedule(split, 100000);
  const engine::TpPlan plan(split, sched);
  const auto batch = engine::random_batch<double>(split, 4, 77);
  std::vector<double> got;
  plan.forward(batch, got, {});
  const oracle::DenseTP dense(*vr.problem);  // unsplit problem
  for (int r = 0; r < 4; ++r) {
    const auto want = oracle::dense_forward(dense, batch.x.data() + r * split.dim_x,
                                            batch.y.data() + r * split.dim_y,
                                            batch.w.data() + r * split.total_weights);
    std::vector<double> zr(got.begin() + r * split.dim_z, got.begin() + (r + 1) * split.dim_z);
    CHECK(testutil::rel_error(zr, want) <= 1e-13);
  }
}

TEST_CASE("paper problem fits one phase at a generous budget") {
  const auto p = scheduler::split_multiplicities(testutil::paper_problem());
  const auto s = scheduler::build_schedule(p, 100000);
  CHECK(s.strategy == Strategy::single_phase);
  CHECK(s.phases.size() == 1);
  check_phase_invariants(p, s);
}

TEST_CASE("streaming budget groups z segments") {
  const auto p = scheduler::split_multiplicities(testutil::paper_problem());
  // dim_x + dim_y + max z segment + max W tile
  const std::uint32_t budget = 256 + 10 + 352 + 1024;
  const auto s = scheduler::build_schedule(p, budget);
  CHECK(s.strategy == Strategy::stream_z);
  // greedy grouping packs z1+z2 into the first phase, z3 into the second
  CHECK(s.phases.size() == 2);
  CHECK(s.traffic.stores_words == 656);  // dim_z exactly
  CHECK(s.traffic.loads_words == 160 + 10 + 1568);  // used x segment + y + all weights
  check_phase_invariants(p, s);
}

TEST_CASE("greedy budget below x+y still schedules everything") {
  const auto p = scheduler::split_multiplicities(testutil::paper_problem());
  const std::uint32_t budget = min_feasible_budget(p);
  const auto s = scheduler::build_schedule(p, budget);
  CHECK(s.strategy == Strategy::greedy);
  CHECK(s.phases.size() > 1);
  check_phase_invariants(p, s);
  // replayed subkernel multiset equals the instruction list
  std::set<std::uint32_t> replayed;
  for (const auto& ph : s.phases) {
    for (auto pos : ph.instructions) replayed.insert(s.order[pos]);
  }
  CHECK(replayed.size() == p.resolved.size());
}

TEST_CASE("budget below the largest working set is an error") {
  const auto p = scheduler::split_multiplicities(testutil::paper_problem());
  CHECK_THROWS_WITH_AS(scheduler::build_schedule(p, 100), doctest::Contains("subkernel"),
                       scheduler::BudgetError);
}

TEST_CASE("traffic model: single phase touches each word once") {
  // all segments used, so loads = dim_x + dim_y + total_weights
  using irreps::Irreps;
  using irreps::Parity;
  Irreps x, y, z;
  x.blocks.push_back({4, {1, Parity::even}});
  x.blocks.push_back({4, {0, Parity::even}});
  y.blocks.push_back({1, {1, Parity::even}});
  z.blocks.push_back({4, {2, Parity::even}});
  z.blocks.push_back({4, {1, Parity::even}});
  auto vr = tpspec::validate(
      x, y, z, {{1, 1, 1, tpspec::Kind::B}, {2, 1, 2, tpspec::Kind::B}});
  REQUIRE(vr.ok());
  const auto p = scheduler::split_multiplicities(*vr.problem);
  const auto s = scheduler::build_schedule(p, 100000);
  CHECK(s.strategy == Strategy::single_phase);
  CHECK(s.traffic.loads_words ==
        static_cast<std::uint64_t>(p.dim_x + p.dim_y) + p.total_weights);
  CHECK(s.traffic.stores_words == static_cast<std::uint64_t>(p.dim_z));
  CHECK(s.traffic.arithmetic_intensity(8) > 0.0);
}

TEST_CASE("traffic model: stream_z never exceeds the naive strategy") {
  for (std::uint64_t seed : {201u, 202u, 203u}) {
    auto p = scheduler::split_multiplicities(testutil::random_problem(seed));
    // naive: load x/y/w and store z once per instruction
    std::uint64_t naive_loads = 0, naive_stores = 0;
    for (const auto& r : p.resolved) {
      naive_loads += static_cast<std::uint64_t>(r.b_prime * r.dx() + r.dy() + r.weight_count);
      naive_stores += static_cast<std::uint64_t>(r.b * r.dz());
    }
    const std::uint32_t xy = static_cast<std::uint32_t>(p.dim_x + p.dim_y);
    // force streaming with a budget just above x + y + the largest group
    std::uint32_t group = 0;
    for (const auto& r : p.resolved) {
      group = std::max(group, static_cast<std::uint32_t>(r.b * r.dz() + r.weight_count));
    }
    const auto s = scheduler::build_schedule(p, xy + group);
    if (s.strategy != Strategy::stream_z) continue;
    CHECK(s.traffic.loads_words <= naive_loads);
    CHECK(s.traffic.stores_words <= naive_stores);
    check_phase_invariants(p, s);
  }
}

TEST_CASE("traffic model: greedy stores at least dim_z worth of writes") {
  const auto p = scheduler::split_multiplicities(testutil::paper_problem());
  const auto tight = scheduler::build_schedule(p, min_feasible_budget(p));
  const auto roomy = scheduler::build_schedule(p, 100000);
  REQUIRE(tight.strategy == Strategy::greedy);
  // stores cover every written z word at least once
  std::uint64_t written = 0;
  std::set<std::uint32_t> z_ids;
  for (const auto& ph : tight.phases) {
    for (auto id : ph.z_flush) z_ids.insert(id);
  }
  for (auto id : z_ids) written += tight.resources[id].words();
  CHECK(tight.traffic.stores_words >= written);
  CHECK(tight.traffic.loads_words >= roomy.traffic.loads_words);
}

TEST_CASE("schedules are deterministic") {
  const auto p = scheduler::split_multiplicities(testutil::random_problem(211));
  const auto a = scheduler::build_schedule(p, 2048);
  const auto b = scheduler::build_schedule(p, 2048);
  CHECK(a.strategy == b.strategy);
  CHECK(a.order == b.order);
  REQUIRE(a.phases.size() == b.phases.size());
  for (std::size_t n = 0; n < a.phases.size(); ++n) {
    CHECK(a.phases[n].resident == b.phases[n].resident);
    CHECK(a.phases[n].loaded == b.phases[n].loaded);
    CHECK(a.phases[n].instructions == b.phases[n].instructions);
  }
}

TEST_CASE("schedule json dump carries the split map") {
  const auto p = scheduler::split_multiplicities(testutil::paper_problem());
  const auto s = scheduler::build_schedule(p, 4096);
  const std::string j = scheduler::schedule_to_json(p, s);
  CHECK(j.find("\"strategy\"") != std::string::npos);
  CHECK(j.find("\"split_map\"") != std::string::npos);
  CHECK(j.find("\"traffic\"") != std::string::npos);
}
