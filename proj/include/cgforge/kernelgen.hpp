#ifndef CGFORGE_KERNELGEN_HPP
#define CGFORGE_KERNELGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cgforge/tpspec.hpp"

namespace cgforge {

/// Unrolled straight-line kernel IR for subkernels B and C.
///
/// The IR models one warp-like unit: `lane_count` lanes execute every op in
/// lockstep, each on a private register file. Ops carry an `active` lane
/// count; lanes >= active are masked off (the stream shape stays uniform).
/// Cross-lane ops (reduce_lanes, matmul) read and write registers across
/// lanes. Registers live in fixed slot groups shared by all kernels (see
/// slot_name) so that values staged by one subkernel can persist into the
/// next when both address the same data.
namespace kernelgen {

// Fixed register slot layout, sized for l <= 12 (vector width 2l+1 <= 25).
inline constexpr int kMaxVecWidth = 25;
inline constexpr int kSlotX = 0;
inline constexpr int kSlotY = 25;
inline constexpr int kSlotZ = 50;    // contraction accumulator; z' in backward
inline constexpr int kSlotOut = 75;  // post-weight output (forward)
inline constexpr int kSlotW = 100;   // diagonal weight (kind B)
inline constexpr int kSlotGz = 101;
inline constexpr int kSlotGzp = 126;  // W^T * g_z
inline constexpr int kSlotGx = 151;
inline constexpr int kSlotGy = 176;
inline constexpr int kSlotGw = 201;  // diagonal weight gradient (kind B)
inline constexpr int kNumSlots = 202;

enum class ArrayId : std::uint8_t { X, Y, W, Z, GZ, GX, GY, GW };

const char* array_name(ArrayId a);

enum class OpKind : std::uint8_t {
  load,          // stage register groups from arrays (one op, many bindings)
  fma,           // reg[dst] += v * reg[a] * reg[b]        (3 FLOPs/lane)
  scale,         // reg[dst] += reg[a] * reg[b]            (2 FLOPs/lane)
  reduce_lanes,  // lane 0's group += other active lanes'  (width*(L-1) FLOPs)
  matmul,        // warp-level small matrix multiply       (2*m*n*k FLOPs)
  store,         // array[...] = reg group
  accumulate,    // array[...] += reg group
};

enum class MatmulKind : std::uint8_t {
  apply_w,    // dst lanes r<rows: dst[r][:] += sum_c W[r,c] * src[c][:]
  apply_wt,   // dst lanes c<cols: dst[c][:] += sum_r W[r,c] * src[r][:]
  outer_acc,  // GW[r,c] += sum_k a[r][k] * b[c][k], written to the GW array
};

struct LoadBinding {
  ArrayId array = ArrayId::X;
  std::uint16_t slot = 0;
  std::uint16_t width = 0;
  std::uint32_t base = 0;         // word offset into the array
  std::uint32_t lane_stride = 0;  // 0 broadcasts the same words to all lanes
  std::uint16_t active = 0;
};

struct Op {
  OpKind kind = OpKind::fma;
  std::uint16_t active = 0;
  bool lane0_only = false;  // store/accumulate once instead of per lane

  // fma / scale
  std::uint16_t dst = 0, a = 0, b = 0;
  double v = 0.0;

  // store / accumulate / reduce_lanes: register group + memory reference
  ArrayId array = ArrayId::X;
  std::uint16_t slot = 0, width = 0;
  std::uint32_t base = 0, lane_stride = 0;

  // matmul
  MatmulKind mm = MatmulKind::apply_w;
  std::uint16_t rows = 0, cols = 0;    // W tile shape (rows=b, cols=b')
  std::uint32_t w_base = 0;            // into W (apply_*) or GW (outer_acc)
  std::uint32_t w_row_stride = 0;
  std::uint16_t src_slot = 0, dst_slot = 0;  // register groups of width `width`

  // load
  std::vector<LoadBinding> bindings;
};

enum class IRKind : std::uint8_t { B_fwd, C_fwd, B_bwd, C_bwd };

const char* ir_kind_name(IRKind k);

struct SlotRange {
  std::uint16_t slot = 0;
  std::uint16_t width = 0;
};

struct KernelIR {
  IRKind kind = IRKind::B_fwd;
  int l1 = 0, l2 = 0, l3 = 0;
  std::uint16_t lane_count = 0;  // max(b, b')
  std::uint16_t b = 0, b_prime = 0;
  std::vector<SlotRange> accum_groups;  // zeroed before the op stream runs
  std::vector<Op> ops;
};

KernelIR gen_forward(const tpspec::ResolvedInstruction& instr);
KernelIR gen_backward(const tpspec::ResolvedInstruction& instr);

std::uint64_t flop_count(const KernelIR& ir);

/// Deterministic line-per-op listing, stable across runs and platforms.
std::string emit_text(const KernelIR& ir);

struct CheckDims {
  std::uint32_t dim_x = 0, dim_y = 0, dim_z = 0, total_weights = 0;
};

/// Read-before-write, slot bounds, lane bounds and (optionally) array bounds.
/// `written`, if given, carries slot state across a sequence of kernels.
std::vector<std::string> type_check(const KernelIR& ir, const CheckDims* dims = nullptr,
                                    std::vector<bool>* written = nullptr);

/// Drops load bindings whose (array, slot, range) were staged by an earlier
/// kernel in the sequence and whose register slots have not been clobbered
/// since. Values are unchanged; only redundant loads disappear.
std::vector<KernelIR> eliminate_redundant_loads(const std::vector<KernelIR>& seq);

/// One row's array pointers. Gradient pointers may alias weight-shaped
/// buffers during double-backward dispatches.
template <typename T>
struct RowView {
  const T* x = nullptr;
  const T* y = nullptr;
  const T* w = nullptr;
  T* z = nullptr;
  const T* gz = nullptr;
  T* gx = nullptr;
  T* gy = nullptr;
  T* gw = nullptr;
};

template <typename T>
struct RegFile {
  int lanes = 0;
  std::vector<T> v;

  explicit RegFile(int lane_count)
      : lanes(lane_count), v(static_cast<std::size_t>(lane_count) * kNumSlots, T(0)) {}
  T& at(int lane, int slot) { return v[static_cast<std::size_t>(lane) * kNumSlots + slot]; }
  const T& at(int lane, int slot) const {
    return v[static_cast<std::size_t>(lane) * kNumSlots + slot];
  }
  void zero(SlotRange g) {
    for (int t = 0; t < lanes; ++t)
      for (int s = 0; s < g.width; ++s) at(t, g.slot + s) = T(0);
  }
};

/// Reference interpreter for one kernel on one row. Zeroes the IR's
/// accumulator groups, then executes the op stream. When `flops` is given it
/// counts executed floating-point operations with the same rule flop_count
/// uses.
template <typename T>
void interpret(const KernelIR& ir, RegFile<T>& regs, const RowView<T>& row,
               std::uint64_t* flops = nullptr);

extern template void interpret<float>(const KernelIR&, RegFile<float>&, const RowView<float>&,
                                      std::uint64_t*);
extern template void interpret<double>(const KernelIR&, RegFile<double>&, const RowView<double>&,
                                       std::uint64_t*);

}  // namespace kernelgen
}  // namespace cgforge

#endif
