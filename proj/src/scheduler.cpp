#include "cgforge/scheduler.hpp"

#include <algorithm>
#include <array>
#include <json.hpp>
#include <map>
#include <numeric>

#include "cgforge/kernelgen.hpp"

namespace cgforge::scheduler {

const char* space_name(Space s) {
  switch (s) {
    case Space::X: return "x";
    case Space::Y: return "y";
    case Space::W: return "w";
    case Space::Z: return "z";
  }
  return "?";
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::single_phase: return "single_phase";
    case Strategy::stream_z: return "stream_z";
    case Strategy::greedy: return "greedy";
  }
  return "?";
}

tpspec::ValidatedProblem split_multiplicities(const tpspec::ValidatedProblem& p, int lane_width) {
  if (lane_width <= 0) throw std::invalid_argument("split_multiplicities: lane_width <= 0");
  tpspec::ValidatedProblem out = p;
  out.resolved.clear();
  out.origin.clear();

  for (std::size_t n = 0; n < p.resolved.size(); ++n) {
    const auto& r = p.resolved[n];
    const int origin = p.origin[n];
    const std::uint32_t dx = static_cast<std::uint32_t>(r.dx());
    const std::uint32_t dz = static_cast<std::uint32_t>(r.dz());

    if (r.kind == tpspec::Kind::B) {
      // b == b': chunk x and z lanes together; diagonal weights stay aligned.
      for (int c0 = 0; c0 < r.b; c0 += lane_width) {
        const int chunk = std::min(lane_width, r.b - c0);
        tpspec::ResolvedInstruction s = r;
        s.b = chunk;
        s.b_prime = chunk;
        s.x_offset = r.x_offset + static_cast<std::uint32_t>(c0) * dx;
        s.z_offset = r.z_offset + static_cast<std::uint32_t>(c0) * dz;
        s.weight_offset = r.weight_offset + static_cast<std::uint32_t>(c0);
        s.weight_count = static_cast<std::uint32_t>(chunk);
        out.resolved.push_back(std::move(s));
        out.origin.push_back(origin);
      }
    } else {
      // Chunk z rows (weight rows) outermost, x lanes (weight columns) inner;
      // the x chunks of one z chunk accumulate into the same z rows.
      for (int r0 = 0; r0 < r.b; r0 += lane_width) {
        const int rchunk = std::min(lane_width, r.b - r0);
        for (int c0 = 0; c0 < r.b_prime; c0 += lane_width) {
          const int cchunk = std::min(lane_width, r.b_prime - c0);
          tpspec::ResolvedInstruction s = r;
          s.b = rchunk;
          s.b_prime = cchunk;
          s.x_offset = r.x_offset + static_cast<std::uint32_t>(c0) * dx;
          s.z_offset = r.z_offset + static_cast<std::uint32_t>(r0) * dz;
          s.weight_offset = r.weight_offset + static_cast<std::uint32_t>(r0) * r.w_row_stride +
                            static_cast<std::uint32_t>(c0);
          s.weight_count = static_cast<std::uint32_t>(rchunk * cchunk);
          // w_row_stride keeps the original layout's stride.
          out.resolved.push_back(std::move(s));
          out.origin.push_back(origin);
        }
      }
    }
  }
  return out;
}

namespace {

struct ResourceSet {
  std::vector<Resource> resources;
  std::map<std::tuple<Space, std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t>,
           std::uint32_t>
      index;

  std::uint32_t intern(const Resource& r) {
    const auto key = std::make_tuple(r.space, r.offset, r.rows, r.cols, r.row_stride);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(resources.size());
    resources.push_back(r);
    index.emplace(key, id);
    return id;
  }
};

struct InstrResources {
  std::uint32_t x, y, w, z;
  std::array<std::uint32_t, 4> all() const { return {x, y, w, z}; }
};

Resource x_resource(const tpspec::ResolvedInstruction& r) {
  return {Space::X, r.x_offset, 1,
          static_cast<std::uint32_t>(r.b_prime) * static_cast<std::uint32_t>(r.dx()),
          static_cast<std::uint32_t>(r.b_prime) * static_cast<std::uint32_t>(r.dx())};
}
Resource y_resource(const tpspec::ResolvedInstruction& r) {
  return {Space::Y, r.y_offset, 1, static_cast<std::uint32_t>(r.dy()),
          static_cast<std::uint32_t>(r.dy())};
}
Resource w_resource(const tpspec::ResolvedInstruction& r) {
  if (r.kind == tpspec::Kind::B) {
    return {Space::W, r.weight_offset, 1, static_cast<std::uint32_t>(r.b),
            static_cast<std::uint32_t>(r.b)};
  }
  return {Space::W, r.weight_offset, static_cast<std::uint32_t>(r.b),
          static_cast<std::uint32_t>(r.b_prime), r.w_row_stride};
}
Resource z_resource(const tpspec::ResolvedInstruction& r) {
  return {Space::Z, r.z_offset, 1,
          static_cast<std::uint32_t>(r.b) * static_cast<std::uint32_t>(r.dz()),
          static_cast<std::uint32_t>(r.b) * static_cast<std::uint32_t>(r.dz())};
}

std::string subkernel_name(const tpspec::ResolvedInstruction& r, std::size_t idx) {
  return "subkernel " + std::to_string(idx) + " (" + std::string(1, tpspec::kind_char(r.kind)) +
         ", l=(" + std::to_string(r.l1) + "," + std::to_string(r.l2) + "," +
         std::to_string(r.l3) + "), b=" + std::to_string(r.b) +
         ", b'=" + std::to_string(r.b_prime) + ")";
}

}  // namespace

Schedule build_schedule(const tpspec::ValidatedProblem& p, std::uint32_t budget_words) {
  Schedule sched;
  sched.budget_words = budget_words;

  // Normalized order: group instructions by z range, ranges in offset order,
  // original order within a range. This keeps every z range's writers in one
  // contiguous run of phases.
  std::vector<std::uint32_t> order(p.resolved.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&p](std::uint32_t a, std::uint32_t b) {
    return p.resolved[a].z_offset < p.resolved[b].z_offset;
  });
  sched.order = order;

  ResourceSet rs;
  std::vector<InstrResources> needs(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& r = p.resolved[order[pos]];
    needs[pos] = {rs.intern(x_resource(r)), rs.intern(y_resource(r)), rs.intern(w_resource(r)),
                  rs.intern(z_resource(r))};
  }

  // Budget must admit the largest single working set.
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& r = p.resolved[order[pos]];
    const std::uint32_t ws = x_resource(r).words() + y_resource(r).words() +
                             w_resource(r).words() + z_resource(r).words();
    if (ws > budget_words) {
      throw BudgetError("budget " + std::to_string(budget_words) + " words below working set " +
                        std::to_string(ws) + " of " + subkernel_name(r, order[pos]));
    }
  }

  std::uint64_t total_words = 0;
  for (const auto& r : rs.resources) total_words += r.words();

  std::uint64_t xy_words = 0;
  std::vector<std::uint32_t> xy_ids;
  for (std::uint32_t id = 0; id < rs.resources.size(); ++id) {
    if (rs.resources[id].space == Space::X || rs.resources[id].space == Space::Y) {
      xy_words += rs.resources[id].words();
      xy_ids.push_back(id);
    }
  }

  const auto uniq = [](std::vector<std::uint32_t> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };

  if (total_words <= budget_words) {
    sched.strategy = Strategy::single_phase;
    Phase ph;
    for (std::uint32_t id = 0; id < rs.resources.size(); ++id) ph.resident.push_back(id);
    for (std::uint32_t id = 0; id < rs.resources.size(); ++id) {
      if (rs.resources[id].space == Space::Z) {
        ph.z_flush.push_back(id);
      } else {
        ph.loaded.push_back(id);
      }
    }
    for (std::uint32_t pos = 0; pos < order.size(); ++pos) ph.instructions.push_back(pos);
    sched.phases.push_back(std::move(ph));
    sched.resources = rs.resources;
    sched.traffic = traffic_report(p, sched);
    return sched;
  }

  // Heuristic 1 (stream_z): keep x and y resident, stream groups of z ranges
  // and the weights of the instructions that write them.
  // Group the instruction stream by z resource first.
  struct ZGroup {
    std::uint32_t z_id;
    std::vector<std::uint32_t> positions;  // normalized positions
    std::uint64_t w_words = 0;
    std::vector<std::uint32_t> w_ids;
  };
  std::vector<ZGroup> zgroups;
  for (std::uint32_t pos = 0; pos < order.size(); ++pos) {
    if (zgroups.empty() || zgroups.back().z_id != needs[pos].z) {
      zgroups.push_back({needs[pos].z, {}, 0, {}});
    }
    zgroups.back().positions.push_back(pos);
  }
  for (auto& g : zgroups) {
    std::vector<std::uint32_t> ws;
    for (auto pos : g.positions) ws.push_back(needs[pos].w);
    g.w_ids = uniq(std::move(ws));
    for (auto id : g.w_ids) g.w_words += rs.resources[id].words();
  }

  bool stream_feasible = xy_words <= budget_words;
  for (const auto& g : zgroups) {
    if (xy_words + rs.resources[g.z_id].words() + g.w_words > budget_words) {
      stream_feasible = false;
      break;
    }
  }

  if (stream_feasible) {
    sched.strategy = Strategy::stream_z;
    std::size_t gi = 0;
    bool first_phase = true;
    while (gi < zgroups.size()) {
      Phase ph;
      std::uint64_t used = xy_words;
      while (gi < zgroups.size()) {
        const auto& g = zgroups[gi];
        const std::uint64_t extra = rs.resources[g.z_id].words() + g.w_words;
        if (used + extra > budget_words && !ph.instructions.empty()) break;
        used += extra;
        ph.z_flush.push_back(g.z_id);
        for (auto id : g.w_ids) ph.loaded.push_back(id);
        for (auto pos : g.positions) ph.instructions.push_back(pos);
        ++gi;
      }
      ph.loaded = uniq(std::move(ph.loaded));
      ph.z_flush = uniq(std::move(ph.z_flush));
      if (first_phase) {
        ph.loaded.insert(ph.loaded.end(), xy_ids.begin(), xy_ids.end());
        ph.loaded = uniq(std::move(ph.loaded));
        first_phase = false;
      } else {
        ph.retained = xy_ids;
      }
      ph.resident = ph.loaded;
      ph.resident.insert(ph.resident.end(), ph.retained.begin(), ph.retained.end());
      ph.resident.insert(ph.resident.end(), ph.z_flush.begin(), ph.z_flush.end());
      ph.resident = uniq(std::move(ph.resident));
      sched.phases.push_back(std::move(ph));
    }
    sched.resources = rs.resources;
    sched.traffic = traffic_report(p, sched);
    return sched;
  }

  // Heuristic 2 (greedy): fill scratch with as many resources as fit, close
  // the phase when the next instruction does not fit, retain resources by
  // soonest next use (Belady on the known stream).
  sched.strategy = Strategy::greedy;

  // next_use[pos][id]: next position >= pos needing resource id.
  const std::uint32_t npos = static_cast<std::uint32_t>(order.size());
  const auto next_use_after = [&](std::uint32_t id, std::uint32_t from) -> std::uint32_t {
    for (std::uint32_t pos = from; pos < npos; ++pos) {
      for (auto need : needs[pos].all()) {
        if (need == id) return pos;
      }
    }
    return npos;  // never again
  };

  std::vector<std::uint32_t> retained;  // resource ids carried into the current phase
  std::uint32_t pos = 0;
  while (pos < npos) {
    Phase ph;
    ph.retained = retained;
    std::vector<std::uint32_t> resident = retained;
    std::uint64_t used = 0;
    for (auto id : resident) used += rs.resources[id].words();

    while (pos < npos) {
      std::vector<std::uint32_t> missing;
      for (auto id : needs[pos].all()) {
        if (std::find(resident.begin(), resident.end(), id) == resident.end() &&
            std::find(missing.begin(), missing.end(), id) == missing.end()) {
          missing.push_back(id);
        }
      }
      std::uint64_t extra = 0;
      for (auto id : missing) extra += rs.resources[id].words();
      if (used + extra > budget_words) break;
      for (auto id : missing) {
        resident.push_back(id);
        ph.loaded.push_back(id);
      }
      used += extra;
      ph.instructions.push_back(pos);
      ++pos;
    }

    if (ph.instructions.empty()) {
      // Retained resources blocked the next instruction; drop them all and retry.
      if (retained.empty()) {
        throw BudgetError("greedy scheduling failed to place an instruction");
      }
      for (auto id : retained) {
        if (rs.resources[id].space == Space::Z) ph.z_flush.push_back(id);
      }
      if (!ph.z_flush.empty()) {
        // Emit a flush-only phase so evicted z ranges are stored.
        ph.resident = retained;
        ph.retained.clear();
        sched.phases.push_back(std::move(ph));
      }
      retained.clear();
      continue;
    }

    ph.resident = resident;

    // Belady retention for the next phase.
    std::vector<std::uint32_t> keep;
    if (pos < npos) {
      std::vector<std::uint32_t> required;
      for (auto id : needs[pos].all()) {
        if (std::find(required.begin(), required.end(), id) == required.end())
          required.push_back(id);
      }
      std::uint64_t req_words = 0;
      for (auto id : required) req_words += rs.resources[id].words();

      std::vector<std::pair<std::uint32_t, std::uint32_t>> candidates;  // (next_use, id)
      for (auto id : resident) {
        if (std::find(required.begin(), required.end(), id) != required.end()) continue;
        const std::uint32_t nu = next_use_after(id, pos);
        if (nu < npos) candidates.emplace_back(nu, id);
      }
      std::sort(candidates.begin(), candidates.end());
      std::uint64_t kept_words = 0;
      for (const auto& [nu, id] : candidates) {
        const std::uint64_t w = rs.resources[id].words();
        if (req_words + kept_words + w <= budget_words) {
          keep.push_back(id);
          kept_words += w;
        }
      }
      // Required resources already resident are retained too (no reload).
      for (auto id : required) {
        if (std::find(resident.begin(), resident.end(), id) != resident.end()) {
          keep.push_back(id);
        }
      }
      keep = uniq(std::move(keep));
    }

    for (auto id : resident) {
      if (rs.resources[id].space == Space::Z &&
          std::find(keep.begin(), keep.end(), id) == keep.end()) {
        ph.z_flush.push_back(id);
      }
    }
    retained = keep;
    sched.phases.push_back(std::move(ph));
  }

  sched.resources = rs.resources;
  sched.traffic = traffic_report(p, sched);
  return sched;
}

TrafficReport traffic_report(const tpspec::ValidatedProblem& p, const Schedule& s) {
  TrafficReport t;
  for (const auto& ph : s.phases) {
    for (auto id : ph.loaded) {
      // z scratch is zero-initialized, not read back; stores are the traffic.
      if (s.resources[id].space != Space::Z) t.loads_words += s.resources[id].words();
    }
    for (auto id : ph.z_flush) t.stores_words += s.resources[id].words();
  }
  for (const auto& r : p.resolved) {
    t.flops += kernelgen::flop_count(kernelgen::gen_forward(r));
  }
  return t;
}

std::string schedule_to_json(const tpspec::ValidatedProblem& p, const Schedule& s) {
  nlohmann::json j;
  j["strategy"] = strategy_name(s.strategy);
  j["budget_words"] = s.budget_words;
  j["order"] = s.order;
  j["resources"] = nlohmann::json::array();
  for (const auto& r : s.resources) {
    j["resources"].push_back({{"space", space_name(r.space)},
                              {"offset", r.offset},
                              {"rows", r.rows},
                              {"cols", r.cols},
                              {"row_stride", r.row_stride}});
  }
  j["phases"] = nlohmann::json::array();
  for (const auto& ph : s.phases) {
    j["phases"].push_back({{"resident", ph.resident},
                           {"loaded", ph.loaded},
                           {"retained", ph.retained},
                           {"z_flush", ph.z_flush},
                           {"instructions", ph.instructions}});
  }
  j["split_map"] = nlohmann::json::array();
  for (std::size_t n = 0; n < p.resolved.size(); ++n) {
    const auto& r = p.resolved[n];
    j["split_map"].push_back({{"instruction", p.origin[n]},
                              {"kind", std::string(1, tpspec::kind_char(r.kind))},
                              {"b", r.b},
                              {"b_prime", r.b_prime},
                              {"x_offset", r.x_offset},
                              {"y_offset", r.y_offset},
                              {"z_offset", r.z_offset},
                              {"weight_offset", r.weight_offset},
                              {"w_row_stride", r.w_row_stride}});
  }
  j["traffic"] = {{"loads_words", s.traffic.loads_words},
                  {"stores_words", s.traffic.stores_words},
                  {"flops", s.traffic.flops},
                  {"arithmetic_intensity_fp64", s.traffic.arithmetic_intensity(8)}};
  return j.dump(2);
}

}  // namespace cgforge::scheduler
