#include "cgforge/kernelgen.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace cgforge::kernelgen {

const char* array_name(ArrayId a) {
  switch (a) {
    case ArrayId::X: return "X";
    case ArrayId::Y: return "Y";
    case ArrayId::W: return "W";
    case ArrayId::Z: return "Z";
    case ArrayId::GZ: return "GZ";
    case ArrayId::GX: return "GX";
    case ArrayId::GY: return "GY";
    case ArrayId::GW: return "GW";
  }
  return "?";
}

const char* ir_kind_name(IRKind k) {
  switch (k) {
    case IRKind::B_fwd: return "B_fwd";
    case IRKind::C_fwd: return "C_fwd";
    case IRKind::B_bwd: return "B_bwd";
    case IRKind::C_bwd: return "C_bwd";
  }
  return "?";
}

namespace {

struct SlotGroup {
  int base;
  int width;
  const char* name;
};

constexpr SlotGroup kSlotGroups[] = {
    {kSlotX, kMaxVecWidth, "x"},
    {kSlotY, kMaxVecWidth, "y"},
    {kSlotZ, kMaxVecWidth, "z"},
    {kSlotOut, kMaxVecWidth, "out"},
    {kSlotW, 1, "w"},
    {kSlotGz, kMaxVecWidth, "gz"},
    {kSlotGzp, kMaxVecWidth, "gzp"},
    {kSlotGx, kMaxVecWidth, "gx"},
    {kSlotGy, kMaxVecWidth, "gy"},
    {kSlotGw, 1, "gw"},
};

std::string slot_name(int slot) {
  for (const auto& g : kSlotGroups) {
    if (slot >= g.base && slot < g.base + g.width) {
      if (g.width == 1) return g.name;
      return std::string(g.name) + "[" + std::to_string(slot - g.base) + "]";
    }
  }
  return "s" + std::to_string(slot);
}

void require_supported(const tpspec::ResolvedInstruction& r) {
  if (r.l1 > 12 || r.l2 > 12 || r.l3 > 12) {
    throw std::invalid_argument("kernelgen: l > 12 unsupported");
  }
  if (r.b <= 0 || r.b_prime <= 0) {
    throw std::invalid_argument("kernelgen: nonpositive multiplicity");
  }
}

Op make_load(std::vector<LoadBinding> bindings, int active) {
  Op op;
  op.kind = OpKind::load;
  op.active = static_cast<std::uint16_t>(active);
  op.bindings = std::move(bindings);
  return op;
}

Op make_fma(int dst, double v, int a, int b, int active) {
  Op op;
  op.kind = OpKind::fma;
  op.dst = static_cast<std::uint16_t>(dst);
  op.a = static_cast<std::uint16_t>(a);
  op.b = static_cast<std::uint16_t>(b);
  op.v = v;
  op.active = static_cast<std::uint16_t>(active);
  return op;
}

Op make_scale(int dst, int a, int b, int active) {
  Op op;
  op.kind = OpKind::scale;
  op.dst = static_cast<std::uint16_t>(dst);
  op.a = static_cast<std::uint16_t>(a);
  op.b = static_cast<std::uint16_t>(b);
  op.active = static_cast<std::uint16_t>(active);
  return op;
}

Op make_mem(OpKind kind, ArrayId array, int slot, int width, std::uint32_t base,
            std::uint32_t lane_stride, int active, bool lane0_only = false) {
  Op op;
  op.kind = kind;
  op.array = array;
  op.slot = static_cast<std::uint16_t>(slot);
  op.width = static_cast<std::uint16_t>(width);
  op.base = base;
  op.lane_stride = lane_stride;
  op.active = static_cast<std::uint16_t>(active);
  op.lane0_only = lane0_only;
  return op;
}

Op make_matmul(MatmulKind mm, int rows, int cols, int width, std::uint32_t w_base,
               std::uint32_t w_row_stride, int src_slot, int dst_slot, int active) {
  Op op;
  op.kind = OpKind::matmul;
  op.mm = mm;
  op.rows = static_cast<std::uint16_t>(rows);
  op.cols = static_cast<std::uint16_t>(cols);
  op.width = static_cast<std::uint16_t>(width);
  op.w_base = w_base;
  op.w_row_stride = w_row_stride;
  op.src_slot = static_cast<std::uint16_t>(src_slot);
  op.dst_slot = static_cast<std::uint16_t>(dst_slot);
  op.active = static_cast<std::uint16_t>(active);
  return op;
}

}  // namespace

KernelIR gen_forward(const tpspec::ResolvedInstruction& r) {
  require_supported(r);
  const int dx = r.dx(), dy = r.dy(), dz = r.dz();
  const int b = r.b, bp = r.b_prime;
  const bool diag = r.kind == tpspec::Kind::B;

  KernelIR ir;
  ir.kind = diag ? IRKind::B_fwd : IRKind::C_fwd;
  ir.l1 = r.l1;
  ir.l2 = r.l2;
  ir.l3 = r.l3;
  ir.b = static_cast<std::uint16_t>(b);
  ir.b_prime = static_cast<std::uint16_t>(bp);
  ir.lane_count = static_cast<std::uint16_t>(std::max(b, bp));
  ir.accum_groups = {{kSlotZ, static_cast<std::uint16_t>(dz)},
                     {kSlotOut, static_cast<std::uint16_t>(dz)}};

  std::vector<LoadBinding> binds;
  binds.push_back({ArrayId::X, kSlotX, static_cast<std::uint16_t>(dx), r.x_offset,
                   static_cast<std::uint32_t>(dx), static_cast<std::uint16_t>(bp)});
  binds.push_back({ArrayId::Y, kSlotY, static_cast<std::uint16_t>(dy), r.y_offset, 0,
                   static_cast<std::uint16_t>(bp)});
  if (diag) {
    binds.push_back({ArrayId::W, kSlotW, 1, r.weight_offset, 1, static_cast<std::uint16_t>(b)});
  }
  ir.ops.push_back(make_load(std::move(binds), ir.lane_count));

  for (const auto& e : r.block->entries) {
    ir.ops.push_back(make_fma(kSlotZ + e.k, e.v, kSlotX + e.i, kSlotY + e.j, bp));
  }

  if (diag) {
    for (int k = 0; k < dz; ++k) {
      ir.ops.push_back(make_scale(kSlotOut + k, kSlotW, kSlotZ + k, b));
    }
  } else {
    ir.ops.push_back(make_matmul(MatmulKind::apply_w, b, bp, dz, r.weight_offset,
                                 r.w_row_stride, kSlotZ, kSlotOut, ir.lane_count));
  }

  ir.ops.push_back(make_mem(OpKind::accumulate, ArrayId::Z, kSlotOut, dz, r.z_offset,
                            static_cast<std::uint32_t>(dz), b));
  return ir;
}

KernelIR gen_backward(const tpspec::ResolvedInstruction& r) {
  require_supported(r);
  const int dx = r.dx(), dy = r.dy(), dz = r.dz();
  const int b = r.b, bp = r.b_prime;
  const bool diag = r.kind == tpspec::Kind::B;

  KernelIR ir;
  ir.kind = diag ? IRKind::B_bwd : IRKind::C_bwd;
  ir.l1 = r.l1;
  ir.l2 = r.l2;
  ir.l3 = r.l3;
  ir.b = static_cast<std::uint16_t>(b);
  ir.b_prime = static_cast<std::uint16_t>(bp);
  ir.lane_count = static_cast<std::uint16_t>(std::max(b, bp));
  ir.accum_groups = {{kSlotGzp, static_cast<std::uint16_t>(dz)},
                     {kSlotGx, static_cast<std::uint16_t>(dx)},
                     {kSlotGy, static_cast<std::uint16_t>(dy)},
                     {kSlotZ, static_cast<std::uint16_t>(dz)},
                     {kSlotGw, 1}};

  std::vector<LoadBinding> binds;
  binds.push_back({ArrayId::X, kSlotX, static_cast<std::uint16_t>(dx), r.x_offset,
                   static_cast<std::uint32_t>(dx), static_cast<std::uint16_t>(bp)});
  binds.push_back({ArrayId::Y, kSlotY, static_cast<std::uint16_t>(dy), r.y_offset, 0,
                   static_cast<std::uint16_t>(bp)});
  binds.push_back({ArrayId::GZ, kSlotGz, static_cast<std::uint16_t>(dz), r.z_offset,
                   static_cast<std::uint32_t>(dz), static_cast<std::uint16_t>(b)});
  if (diag) {
    binds.push_back({ArrayId::W, kSlotW, 1, r.weight_offset, 1, static_cast<std::uint16_t>(b)});
  }
  ir.ops.push_back(make_load(std::move(binds), ir.lane_count));

  // g_z' = W^T g_z: per-lane diagonal scaling for B, warp matmul for C.
  if (diag) {
    for (int k = 0; k < dz; ++k) {
      ir.ops.push_back(make_scale(kSlotGzp + k, kSlotW, kSlotGz + k, b));
    }
  } else {
    ir.ops.push_back(make_matmul(MatmulKind::apply_wt, b, bp, dz, r.weight_offset,
                                 r.w_row_stride, kSlotGz, kSlotGzp, ir.lane_count));
  }

  for (const auto& e : r.block->entries) {
    ir.ops.push_back(make_fma(kSlotGx + e.i, e.v, kSlotY + e.j, kSlotGzp + e.k, bp));
    ir.ops.push_back(make_fma(kSlotGy + e.j, e.v, kSlotX + e.i, kSlotGzp + e.k, bp));
    ir.ops.push_back(make_fma(kSlotZ + e.k, e.v, kSlotX + e.i, kSlotY + e.j, bp));
  }

  Op reduce;
  reduce.kind = OpKind::reduce_lanes;
  reduce.slot = kSlotGy;
  reduce.width = static_cast<std::uint16_t>(dy);
  reduce.active = static_cast<std::uint16_t>(bp);
  ir.ops.push_back(reduce);

  ir.ops.push_back(
      make_mem(OpKind::accumulate, ArrayId::GY, kSlotGy, dy, r.y_offset, 0, bp, true));
  ir.ops.push_back(make_mem(OpKind::accumulate, ArrayId::GX, kSlotGx, dx, r.x_offset,
                            static_cast<std::uint32_t>(dx), bp));

  // G_W = G_Z (Z')^T: per-lane dot products for B, warp matmul for C.
  if (diag) {
    for (int k = 0; k < dz; ++k) {
      ir.ops.push_back(make_scale(kSlotGw, kSlotGz + k, kSlotZ + k, b));
    }
    ir.ops.push_back(make_mem(OpKind::accumulate, ArrayId::GW, kSlotGw, 1, r.weight_offset, 1, b));
  } else {
    ir.ops.push_back(make_matmul(MatmulKind::outer_acc, b, bp, dz, r.weight_offset,
                                 r.w_row_stride, kSlotGz, kSlotZ, ir.lane_count));
  }
  return ir;
}

std::uint64_t flop_count(const KernelIR& ir) {
  std::uint64_t total = 0;
  for (const auto& op : ir.ops) {
    switch (op.kind) {
      case OpKind::fma:
        total += 3ull * op.active;
        break;
      case OpKind::scale:
        total += 2ull * op.active;
        break;
      case OpKind::reduce_lanes:
        if (op.active > 1) total += static_cast<std::uint64_t>(op.width) * (op.active - 1);
        break;
      case OpKind::matmul:
        total += 2ull * op.rows * op.cols * op.width;
        break;
      case OpKind::load:
      case OpKind::store:
      case OpKind::accumulate:
        break;
    }
  }
  return total;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_mem(ArrayId array, std::uint32_t base, std::uint32_t stride) {
  std::string s = std::string(array_name(array)) + "[@" + std::to_string(base);
  if (stride != 0) s += "+" + std::to_string(stride) + "t";
  s += "]";
  return s;
}

std::string fmt_group(int slot, int width) {
  if (width == 1) return slot_name(slot);
  for (const auto& g : kSlotGroups) {
    if (slot == g.base && g.width > 1) {
      return std::string(g.name) + "[0:" + std::to_string(width) + "]";
    }
  }
  return slot_name(slot) + ":" + std::to_string(width);
}

}  // namespace

std::string emit_text(const KernelIR& ir) {
  std::ostringstream os;
  for (const auto& op : ir.ops) {
    switch (op.kind) {
      case OpKind::load: {
        os << "load   ";
        for (std::size_t n = 0; n < op.bindings.size(); ++n) {
          const auto& bd = op.bindings[n];
          if (n > 0) os << "  ";
          os << fmt_group(bd.slot, bd.width) << " = " << fmt_mem(bd.array, bd.base, bd.lane_stride)
             << " |" << bd.active << "L";
        }
        os << "\n";
        break;
      }
      case OpKind::fma:
        os << "fma    " << slot_name(op.dst) << " += " << fmt_double(op.v) << " * "
           << slot_name(op.a) << " * " << slot_name(op.b) << " |" << op.active << "L\n";
        break;
      case OpKind::scale:
        os << "scale  " << slot_name(op.dst) << " += " << slot_name(op.a) << " * "
           << slot_name(op.b) << " |" << op.active << "L\n";
        break;
      case OpKind::reduce_lanes:
        os << "reduce " << fmt_group(op.slot, op.width) << " over " << op.active << "L\n";
        break;
      case OpKind::matmul:
        switch (op.mm) {
          case MatmulKind::apply_w:
            os << "matmul " << fmt_group(op.dst_slot, op.width) << " += W[@" << op.w_base << ",s"
               << op.w_row_stride << "|" << op.rows << "x" << op.cols << "] * "
               << fmt_group(op.src_slot, op.width) << "\n";
            break;
          case MatmulKind::apply_wt:
            os << "matmul " << fmt_group(op.dst_slot, op.width) << " += W^T[@" << op.w_base
               << ",s" << op.w_row_stride << "|" << op.rows << "x" << op.cols << "] * "
               << fmt_group(op.src_slot, op.width) << "\n";
            break;
          case MatmulKind::outer_acc:
            os << "outer  GW[@" << op.w_base << ",s" << op.w_row_stride << "|" << op.rows << "x"
               << op.cols << "] += " << fmt_group(op.src_slot, op.width) << " (x) "
               << fmt_group(op.dst_slot, op.width) << "\n";
            break;
        }
        break;
      case OpKind::store:
      case OpKind::accumulate:
        os << (op.kind == OpKind::store ? "store  " : "acc    ")
           << fmt_mem(op.array, op.base, op.lane_stride)
           << (op.kind == OpKind::store ? " = " : " += ") << fmt_group(op.slot, op.width) << " |"
           << (op.lane0_only ? "lane0" : std::to_string(op.active) + "L") << "\n";
        break;
    }
  }
  return os.str();
}

namespace {

std::uint32_t array_dim(ArrayId a, const CheckDims& d) {
  switch (a) {
    case ArrayId::X:
    case ArrayId::GX: return d.dim_x;
    case ArrayId::Y:
    case ArrayId::GY: return d.dim_y;
    case ArrayId::Z:
    case ArrayId::GZ: return d.dim_z;
    case ArrayId::W:
    case ArrayId::GW: return d.total_weights;
  }
  return 0;
}

}  // namespace

std::vector<std::string> type_check(const KernelIR& ir, const CheckDims* dims,
                                    std::vector<bool>* written_io) {
  std::vector<std::string> errors;
  std::vector<bool> local(kNumSlots, false);
  std::vector<bool>& written = written_io ? *written_io : local;
  if (written.size() != kNumSlots) written.assign(kNumSlots, false);
  std::vector<bool> stored(kNumSlots, false);

  auto err = [&errors](std::size_t op_idx, const std::string& msg) {
    errors.push_back("op " + std::to_string(op_idx) + ": " + msg);
  };
  auto require_written = [&](std::size_t op_idx, int slot, const char* what) {
    if (slot < 0 || slot >= kNumSlots) {
      err(op_idx, std::string(what) + ": slot out of range");
    } else if (!written[static_cast<std::size_t>(slot)]) {
      err(op_idx, std::string(what) + ": slot " + slot_name(slot) + " read before written");
    }
  };
  auto mark_written = [&](std::size_t op_idx, int slot, int width) {
    for (int s = slot; s < slot + width; ++s) {
      if (s < 0 || s >= kNumSlots) {
        err(op_idx, "slot " + std::to_string(s) + " out of range");
        return;
      }
      if (stored[static_cast<std::size_t>(s)]) {
        err(op_idx, "slot " + slot_name(s) + " written after being stored");
      }
      written[static_cast<std::size_t>(s)] = true;
    }
  };
  auto check_mem = [&](std::size_t op_idx, ArrayId a, std::uint32_t base, std::uint32_t stride,
                       int width, int active, bool lane0) {
    if (!dims) return;
    const std::uint32_t dim = array_dim(a, *dims);
    const std::uint32_t lanes = lane0 ? 1u : static_cast<std::uint32_t>(active);
    if (lanes == 0 || width == 0) return;
    const std::uint32_t last = base + (lanes - 1) * stride + static_cast<std::uint32_t>(width) - 1;
    if (last >= dim) {
      err(op_idx, std::string("out of bounds access to ") + array_name(a) + " at " +
                      std::to_string(last) + " >= " + std::to_string(dim));
    }
  };

  for (const auto& g : ir.accum_groups) mark_written(0, g.slot, g.width);

  for (std::size_t n = 0; n < ir.ops.size(); ++n) {
    const Op& op = ir.ops[n];
    if (op.active > ir.lane_count && op.kind != OpKind::load) {
      err(n, "active lanes exceed lane_count");
    }
    switch (op.kind) {
      case OpKind::load:
        for (const auto& bd : op.bindings) {
          mark_written(n, bd.slot, bd.width);
          check_mem(n, bd.array, bd.base, bd.lane_stride, bd.width, bd.active, false);
        }
        break;
      case OpKind::fma:
      case OpKind::scale:
        require_written(n, op.a, "operand a");
        require_written(n, op.b, "operand b");
        mark_written(n, op.dst, 1);
        break;
      case OpKind::reduce_lanes:
        require_written(n, op.slot, "reduce group");
        mark_written(n, op.slot, op.width);
        break;
      case OpKind::matmul:
        require_written(n, op.src_slot, "matmul src");
        if (op.mm == MatmulKind::outer_acc) {
          require_written(n, op.dst_slot, "matmul operand");
          if (dims) {
            const std::uint32_t last =
                op.w_base + (op.rows - 1u) * op.w_row_stride + op.cols - 1u;
            if (last >= dims->total_weights) err(n, "outer_acc out of W bounds");
          }
        } else {
          mark_written(n, op.dst_slot, op.width);
          if (dims) {
            const std::uint32_t last =
                op.w_base + (op.rows - 1u) * op.w_row_stride + op.cols - 1u;
            if (last >= dims->total_weights) err(n, "matmul out of W bounds");
          }
        }
        break;
      case OpKind::store:
      case OpKind::accumulate:
        for (int s = op.slot; s < op.slot + op.width; ++s) {
          require_written(n, s, "stored group");
          if (s >= 0 && s < kNumSlots) stored[static_cast<std::size_t>(s)] = true;
        }
        check_mem(n, op.array, op.base, op.lane_stride, op.width, op.active, op.lane0_only);
        break;
    }
  }
  return errors;
}

std::vector<KernelIR> eliminate_redundant_loads(const std::vector<KernelIR>& seq) {
  struct Staged {
    LoadBinding bd;
  };
  std::vector<Staged> staged;  // live (array, slot range, address) records

  auto clobber = [&staged](int slot, int width) {
    staged.erase(std::remove_if(staged.begin(), staged.end(),
                                [&](const Staged& s) {
                                  const int lo = s.bd.slot, hi = s.bd.slot + s.bd.width;
                                  return slot < hi && slot + width > lo;
                                }),
                 staged.end());
  };
  auto covered = [&staged](const LoadBinding& bd) {
    for (const auto& s : staged) {
      if (s.bd.array == bd.array && s.bd.slot == bd.slot && s.bd.width == bd.width &&
          s.bd.base == bd.base && s.bd.lane_stride == bd.lane_stride &&
          s.bd.active >= bd.active) {
        return true;
      }
    }
    return false;
  };

  std::vector<KernelIR> out;
  out.reserve(seq.size());
  for (const KernelIR& ir : seq) {
    KernelIR next = ir;
    for (const auto& g : next.accum_groups) clobber(g.slot, g.width);
    for (auto& op : next.ops) {
      switch (op.kind) {
        case OpKind::load: {
          std::vector<LoadBinding> kept;
          for (const auto& bd : op.bindings) {
            if (covered(bd)) continue;
            clobber(bd.slot, bd.width);
            staged.push_back({bd});
            kept.push_back(bd);
          }
          op.bindings = std::move(kept);
          break;
        }
        case OpKind::fma:
        case OpKind::scale:
          clobber(op.dst, 1);
          break;
        case OpKind::reduce_lanes:
          clobber(op.slot, op.width);
          break;
        case OpKind::matmul:
          if (op.mm != MatmulKind::outer_acc) clobber(op.dst_slot, op.width);
          break;
        case OpKind::store:
        case OpKind::accumulate:
          break;
      }
    }
    // Drop load ops whose bindings were all eliminated.
    next.ops.erase(std::remove_if(next.ops.begin(), next.ops.end(),
                                  [](const Op& op) {
                                    return op.kind == OpKind::load && op.bindings.empty();
                                  }),
                   next.ops.end());
    out.push_back(std::move(next));
  }
  return out;
}

template <typename T>
void interpret(const KernelIR& ir, RegFile<T>& regs, const RowView<T>& row,
               std::uint64_t* flops) {
  if (regs.lanes < ir.lane_count) {
    throw std::invalid_argument("interpret: register file has too few lanes");
  }
  for (const auto& g : ir.accum_groups) regs.zero(g);

  const auto in_ptr = [&row](ArrayId a) -> const T* {
    switch (a) {
      case ArrayId::X: return row.x;
      case ArrayId::Y: return row.y;
      case ArrayId::W: return row.w;
      case ArrayId::GZ: return row.gz;
      default: return nullptr;
    }
  };
  const auto out_ptr = [&row](ArrayId a) -> T* {
    switch (a) {
      case ArrayId::Z: return row.z;
      case ArrayId::GX: return row.gx;
      case ArrayId::GY: return row.gy;
      case ArrayId::GW: return row.gw;
      default: return nullptr;
    }
  };

  for (const auto& op : ir.ops) {
    switch (op.kind) {
      case OpKind::load:
        for (const auto& bd : op.bindings) {
          const T* src = in_ptr(bd.array);
          for (int t = 0; t < bd.active; ++t) {
            const T* p = src + bd.base + static_cast<std::size_t>(t) * bd.lane_stride;
            for (int s = 0; s < bd.width; ++s) regs.at(t, bd.slot + s) = p[s];
          }
        }
        break;
      case OpKind::fma: {
        const T v = static_cast<T>(op.v);
        for (int t = 0; t < op.active; ++t) {
          regs.at(t, op.dst) += v * regs.at(t, op.a) * regs.at(t, op.b);
        }
        if (flops) *flops += 3ull * op.active;
        break;
      }
      case OpKind::scale:
        for (int t = 0; t < op.active; ++t) {
          regs.at(t, op.dst) += regs.at(t, op.a) * regs.at(t, op.b);
        }
        if (flops) *flops += 2ull * op.active;
        break;
      case OpKind::reduce_lanes:
        for (int s = 0; s < op.width; ++s) {
          T acc = regs.at(0, op.slot + s);
          for (int t = 1; t < op.active; ++t) acc += regs.at(t, op.slot + s);
          regs.at(0, op.slot + s) = acc;
        }
        if (flops && op.active > 1) {
          *flops += static_cast<std::uint64_t>(op.width) * (op.active - 1);
        }
        break;
      case OpKind::matmul: {
        switch (op.mm) {
          case MatmulKind::apply_w: {
            const T* wmat = in_ptr(ArrayId::W);
            for (int r = 0; r < op.rows; ++r) {
              for (int s = 0; s < op.width; ++s) {
                T acc = regs.at(r, op.dst_slot + s);
                for (int c = 0; c < op.cols; ++c) {
                  acc += wmat[op.w_base + static_cast<std::size_t>(r) * op.w_row_stride + c] *
                         regs.at(c, op.src_slot + s);
                }
                regs.at(r, op.dst_slot + s) = acc;
              }
            }
            break;
          }
          case MatmulKind::apply_wt: {
            const T* wmat = in_ptr(ArrayId::W);
            for (int c = 0; c < op.cols; ++c) {
              for (int s = 0; s < op.width; ++s) {
                T acc = regs.at(c, op.dst_slot + s);
                for (int r = 0; r < op.rows; ++r) {
                  acc += wmat[op.w_base + static_cast<std::size_t>(r) * op.w_row_stride + c] *
                         regs.at(r, op.src_slot + s);
                }
                regs.at(c, op.dst_slot + s) = acc;
              }
            }
            break;
          }
          case MatmulKind::outer_acc: {
            T* gw = out_ptr(ArrayId::GW);
            for (int r = 0; r < op.rows; ++r) {
              for (int c = 0; c < op.cols; ++c) {
                T acc = gw[op.w_base + static_cast<std::size_t>(r) * op.w_row_stride + c];
                for (int s = 0; s < op.width; ++s) {
                  acc += regs.at(r, op.src_slot + s) * regs.at(c, op.dst_slot + s);
                }
                gw[op.w_base + static_cast<std::size_t>(r) * op.w_row_stride + c] = acc;
              }
            }
            break;
          }
        }
        if (flops) *flops += 2ull * op.rows * op.cols * op.width;
        break;
      }
      case OpKind::store:
      case OpKind::accumulate: {
        T* dst = out_ptr(op.array);
        const bool acc = op.kind == OpKind::accumulate;
        const int lanes = op.lane0_only ? 1 : op.active;
        for (int t = 0; t < lanes; ++t) {
          T* p = dst + op.base + static_cast<std::size_t>(t) * op.lane_stride;
          for (int s = 0; s < op.width; ++s) {
            if (acc) {
              p[s] += regs.at(t, op.slot + s);
            } else {
              p[s] = regs.at(t, op.slot + s);
            }
          }
        }
        break;
      }
    }
  }
}

template void interpret<float>(const KernelIR&, RegFile<float>&, const RowView<float>&,
                               std::uint64_t*);
template void interpret<double>(const KernelIR&, RegFile<double>&, const RowView<double>&,
                                std::uint64_t*);

}  // namespace cgforge::kernelgen
