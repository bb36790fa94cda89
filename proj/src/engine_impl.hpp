#ifndef CGFORGE_ENGINE_IMPL_HPP
#define CGFORGE_ENGINE_IMPL_HPP

#include <cstring>
#include <functional>
#include <utility>

#include "cgforge/engine.hpp"

namespace cgforge::engine::detail {

// Staging command: strided global range -> packed scratch range (or back).
struct CopyCmd {
  scheduler::Space space = scheduler::Space::X;
  std::uint32_t global_base = 0;
  std::uint32_t rows = 1, cols = 0;
  std::uint32_t global_row_stride = 0;
  std::uint32_t scratch_off = 0;

  std::uint32_t words() const { return rows * cols; }
};

struct MoveCmd {
  std::uint32_t from_off = 0, to_off = 0, words = 0;
};

struct ZeroCmd {
  std::uint32_t scratch_off = 0, words = 0;
};

struct Span {
  std::uint32_t off = 0, words = 0;
};

struct PhaseExec {
  std::vector<MoveCmd> moves;        // retained resources, previous scratch -> current
  std::vector<CopyCmd> fwd_copy_in;  // loaded x/y/w
  std::vector<ZeroCmd> fwd_zero_z;   // freshly resident z ranges
  std::vector<CopyCmd> flush_z;      // z ranges stored (accumulated) to global
  std::vector<CopyCmd> bwd_copy_in;  // loaded x/y/w plus g_z staged into z ranges

  // Graph-convolution traversal re-stages every resident input per edge.
  std::vector<CopyCmd> conv_copy_in;   // resident x/y/w
  std::vector<CopyCmd> conv_gz_in;     // resident z ranges read from g_node_z
  std::vector<ZeroCmd> zero_all_z;     // all resident z ranges

  std::vector<Span> z_scratch;  // resident z ranges, scratch side (canonical order)
  std::vector<Span> z_global;   // same ranges, global offsets
  std::vector<Span> x_global;   // resident x ranges, global offsets (conv backward)

  std::uint64_t fwd_load_words = 0, bwd_load_words = 0, store_words = 0;
  std::uint64_t conv_load_words = 0;
  std::uint32_t z_words = 0;  // total resident z words

  std::vector<kernelgen::KernelIR> fwd_interp, bwd_interp;  // remapped, per instruction
  std::vector<kernelgen::KernelIR> fwd_spec, bwd_spec;      // load-eliminated
};

struct PlanImpl {
  tpspec::ValidatedProblem problem;
  scheduler::Schedule schedule;
  std::vector<PhaseExec> phases;
  int max_lanes = 1;
  std::uint32_t scratch_words = 0;

  // Single-phase schedules skip scratch staging: every operand is resident,
  // so the kernels run against the global rows directly. Same values bitwise;
  // the traffic model is unchanged.
  bool direct = false;
  std::vector<kernelgen::KernelIR> direct_fwd_interp, direct_bwd_interp;
  std::vector<kernelgen::KernelIR> direct_fwd_spec, direct_bwd_spec;
};

template <typename T>
struct WorkerScratch {
  std::vector<T> a, b;
  kernelgen::RegFile<T> regs;

  WorkerScratch(std::uint32_t words, int lanes)
      : a(words, T(0)), b(words, T(0)), regs(lanes) {}
};

template <typename T>
inline void run_copy_in(const CopyCmd& cp, const T* src_row, T* scratch) {
  const T* src = src_row + cp.global_base;
  T* dst = scratch + cp.scratch_off;
  for (std::uint32_t r = 0; r < cp.rows; ++r) {
    std::memcpy(dst + static_cast<std::size_t>(r) * cp.cols,
                src + static_cast<std::size_t>(r) * cp.global_row_stride,
                sizeof(T) * cp.cols);
  }
}

// One row's forward sweep over all phases. The caller zeroes z beforehand;
// flushes accumulate into it.
template <typename T>
void run_forward_row(const PlanImpl& pl, ExecMode mode, WorkerScratch<T>& ws, const T* x,
                     const T* y, const T* w, T* z, ExecStats& st) {
  if (pl.direct) {
    kernelgen::RowView<T> rv;
    rv.x = x;
    rv.y = y;
    rv.w = w;
    rv.z = z;
    const auto& programs =
        mode == ExecMode::specialized ? pl.direct_fwd_spec : pl.direct_fwd_interp;
    for (const auto& ir : programs) kernelgen::interpret(ir, ws.regs, rv, &st.flops);
    st.loads_words += pl.phases[0].fwd_load_words;
    st.stores_words += pl.phases[0].store_words;
    return;
  }
  T* cur = ws.a.data();
  T* prev = ws.b.data();
  for (const auto& ph : pl.phases) {
    for (const auto& mv : ph.moves) {
      std::memcpy(cur + mv.to_off, prev + mv.from_off, sizeof(T) * mv.words);
    }
    for (const auto& cp : ph.fwd_copy_in) {
      const T* row = cp.space == scheduler::Space::X   ? x
                     : cp.space == scheduler::Space::Y ? y
                                                       : w;
      run_copy_in(cp, row, cur);
    }
    for (const auto& zc : ph.fwd_zero_z) {
      std::memset(cur + zc.scratch_off, 0, sizeof(T) * zc.words);
    }
    kernelgen::RowView<T> rv;
    rv.x = rv.y = rv.w = cur;
    rv.z = cur;
    const auto& programs = mode == ExecMode::specialized ? ph.fwd_spec : ph.fwd_interp;
    for (const auto& ir : programs) kernelgen::interpret(ir, ws.regs, rv, &st.flops);
    for (const auto& fl : ph.flush_z) {
      T* dst = z + fl.global_base;
      const T* src = cur + fl.scratch_off;
      for (std::uint32_t i = 0; i < fl.cols; ++i) dst[i] += src[i];
    }
    st.loads_words += ph.fwd_load_words;
    st.stores_words += ph.store_words;
    std::swap(cur, prev);
  }
}

// One row's backward sweep. gx/gy/gw accumulate into caller-zeroed rows.
template <typename T>
void run_backward_row(const PlanImpl& pl, ExecMode mode, WorkerScratch<T>& ws, const T* x,
                      const T* y, const T* w, const T* gz, T* gx, T* gy, T* gw, ExecStats& st) {
  if (pl.direct) {
    kernelgen::RowView<T> rv;
    rv.x = x;
    rv.y = y;
    rv.w = w;
    rv.gz = gz;
    rv.gx = gx;
    rv.gy = gy;
    rv.gw = gw;
    const auto& programs =
        mode == ExecMode::specialized ? pl.direct_bwd_spec : pl.direct_bwd_interp;
    for (const auto& ir : programs) kernelgen::interpret(ir, ws.regs, rv, &st.flops);
    st.loads_words += pl.phases[0].bwd_load_words;
    return;
  }
  T* cur = ws.a.data();
  T* prev = ws.b.data();
  for (const auto& ph : pl.phases) {
    for (const auto& mv : ph.moves) {
      std::memcpy(cur + mv.to_off, prev + mv.from_off, sizeof(T) * mv.words);
    }
    for (const auto& cp : ph.bwd_copy_in) {
      const T* row = cp.space == scheduler::Space::X   ? x
                     : cp.space == scheduler::Space::Y ? y
                     : cp.space == scheduler::Space::W ? w
                                                       : gz;
      run_copy_in(cp, row, cur);
    }
    kernelgen::RowView<T> rv;
    rv.x = rv.y = rv.w = cur;
    rv.gz = cur;
    rv.gx = gx;
    rv.gy = gy;
    rv.gw = gw;
    const auto& programs = mode == ExecMode::specialized ? ph.bwd_spec : ph.bwd_interp;
    for (const auto& ir : programs) kernelgen::interpret(ir, ws.regs, rv, &st.flops);
    st.loads_words += ph.bwd_load_words;
    std::swap(cur, prev);
  }
}

void run_rows_parallel(std::int64_t rows, int workers,
                       const std::function<void(int, std::int64_t, std::int64_t)>& body);

}  // namespace cgforge::engine::detail

#endif
