#ifndef CGFORGE_ENGINE_HPP
#define CGFORGE_ENGINE_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "cgforge/kernelgen.hpp"
#include "cgforge/scheduler.hpp"
#include "cgforge/tpspec.hpp"

namespace cgforge {

/// Batched execution of a compiled schedule over B independent (x, y, W)
/// rows. Workers own contiguous row ranges and share no mutable state, so
/// results are bitwise independent of the worker count.
namespace engine {

struct ExecStats {
  std::uint64_t loads_words = 0;
  std::uint64_t stores_words = 0;
  std::uint64_t flops = 0;

  ExecStats& operator+=(const ExecStats& o) {
    loads_words += o.loads_words;
    stores_words += o.stores_words;
    flops += o.flops;
    return *this;
  }
};

enum class ExecMode : std::uint8_t {
  specialized,  // pre-bound phase programs with redundant loads eliminated
  interpreted,  // per-instruction IR interpretation
};

struct Options {
  int workers = 1;
  ExecMode mode = ExecMode::specialized;
};

template <typename T>
struct Batch {
  std::int64_t rows = 0;
  std::vector<T> x, y, w;
};

template <typename T>
struct Grads {
  std::vector<T> x, y, w;
};

template <typename T>
struct DoubleGrads {
  std::vector<T> x, y, w, gz;
};

enum class DispatchStyle : std::uint8_t {
  fused,       // one forward-type pass and one backward-type pass
  seven_call,  // the literal seven dispatches, combined afterwards
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {
struct PlanImpl;
}

/// Compiled (problem, schedule) pair: per-phase staging commands plus
/// scratch-bound kernel programs for both directions and both exec modes.
class TpPlan {
 public:
  TpPlan(const tpspec::ValidatedProblem& p, const scheduler::Schedule& s);
  ~TpPlan();
  TpPlan(TpPlan&&) noexcept;
  TpPlan& operator=(TpPlan&&) noexcept;
  TpPlan(const TpPlan&) = delete;
  TpPlan& operator=(const TpPlan&) = delete;

  const tpspec::ValidatedProblem& problem() const;
  const scheduler::Schedule& schedule() const;

  template <typename T>
  ExecStats forward(const Batch<T>& in, std::vector<T>& z, const Options& opt = {}) const;

  template <typename T>
  ExecStats backward(const Batch<T>& in, const std::vector<T>& gz, Grads<T>& out,
                     const Options& opt = {}) const;

  /// Given upstream gradients (dL/da, dL/db, dL/dC) of the backward pass's
  /// three outputs, returns (dL/dx, dL/dy, dL/dW, dL/dg_z).
  template <typename T>
  ExecStats double_backward(const Batch<T>& in, const std::vector<T>& gz,
                            const Grads<T>& upstream, DoubleGrads<T>& out,
                            DispatchStyle style = DispatchStyle::fused,
                            const Options& opt = {}) const;

  const detail::PlanImpl& impl() const { return *impl_; }

 private:
  std::unique_ptr<detail::PlanImpl> impl_;
};

/// Random unit-RMS batch, seeded (normal entries).
template <typename T>
Batch<T> random_batch(const tpspec::ValidatedProblem& p, std::int64_t rows, std::uint64_t seed);

extern template Batch<float> random_batch<float>(const tpspec::ValidatedProblem&, std::int64_t,
                                                 std::uint64_t);
extern template Batch<double> random_batch<double>(const tpspec::ValidatedProblem&, std::int64_t,
                                                   std::uint64_t);

}  // namespace engine
}  // namespace cgforge

#endif
