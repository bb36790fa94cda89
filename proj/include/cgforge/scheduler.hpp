#ifndef CGFORGE_SCHEDULER_HPP
#define CGFORGE_SCHEDULER_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgforge/tpspec.hpp"

namespace cgforge {

/// Static computation scheduling: multiplicity splitting, phase construction
/// under a per-worker scratch budget (in words), and the global-memory
/// traffic model used for roofline-style reporting.
namespace scheduler {

inline constexpr std::uint32_t kDefaultBudgetWords = 4096;
inline constexpr int kDefaultLaneWidth = 32;

enum class Space : std::uint8_t { X, Y, W, Z };

const char* space_name(Space s);

/// A stageable unit of data: a contiguous word range (rows == 1) or a strided
/// weight tile (rows x cols with the given global row stride).
struct Resource {
  Space space = Space::X;
  std::uint32_t offset = 0;
  std::uint32_t rows = 1;
  std::uint32_t cols = 0;
  std::uint32_t row_stride = 0;

  std::uint32_t words() const { return rows * cols; }
  bool operator==(const Resource&) const = default;
};

struct Phase {
  std::vector<std::uint32_t> resident;   // resource ids live during the phase
  std::vector<std::uint32_t> loaded;     // newly read from global memory
  std::vector<std::uint32_t> retained;   // carried over from the previous phase
  std::vector<std::uint32_t> z_flush;    // z resources stored at phase end
  std::vector<std::uint32_t> instructions;  // positions into Schedule::order
};

enum class Strategy : std::uint8_t { single_phase, stream_z, greedy };

const char* strategy_name(Strategy s);

struct TrafficReport {
  std::uint64_t loads_words = 0;   // per batch element
  std::uint64_t stores_words = 0;  // per batch element
  std::uint64_t flops = 0;         // per batch element (forward pass)

  double arithmetic_intensity(int word_bytes = 8) const {
    const double bytes = static_cast<double>(word_bytes) *
                         static_cast<double>(loads_words + stores_words);
    return bytes > 0.0 ? static_cast<double>(flops) / bytes : 0.0;
  }
};

struct Schedule {
  Strategy strategy = Strategy::single_phase;
  std::uint32_t budget_words = kDefaultBudgetWords;
  std::vector<Resource> resources;
  std::vector<Phase> phases;
  /// Normalized instruction order: position -> index into problem.resolved.
  /// Instructions are grouped by their z range so every z resource is written
  /// by a contiguous run of phases.
  std::vector<std::uint32_t> order;
  TrafficReport traffic;
};

struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Splits instructions until b <= lane_width and b' <= lane_width. Chunked
/// instructions address sub-ranges of the original segments; weight views
/// keep the original storage layout via (offset, rows, cols, row stride),
/// and problem.origin records which user instruction each chunk came from.
tpspec::ValidatedProblem split_multiplicities(const tpspec::ValidatedProblem& p,
                                              int lane_width = kDefaultLaneWidth);

/// Builds the phase schedule. Requires a multiplicity-split problem and a
/// budget at least as large as every single subkernel's working set.
Schedule build_schedule(const tpspec::ValidatedProblem& p,
                        std::uint32_t budget_words = kDefaultBudgetWords);

/// Recomputes the traffic model from the schedule's phases.
TrafficReport traffic_report(const tpspec::ValidatedProblem& p, const Schedule& s);

std::string schedule_to_json(const tpspec::ValidatedProblem& p, const Schedule& s);

}  // namespace scheduler
}  // namespace cgforge

#endif
