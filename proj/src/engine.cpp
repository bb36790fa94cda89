#include "cgforge/engine.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <thread>

#include "cgforge/rng.hpp"
#include "engine_impl.hpp"

namespace cgforge::engine {

namespace detail {

void run_rows_parallel(std::int64_t rows, int workers,
                       const std::function<void(int, std::int64_t, std::int64_t)>& body) {
  if (workers < 1) workers = 1;
  if (rows <= 0) return;
  const int n = static_cast<int>(std::min<std::int64_t>(workers, rows));
  if (n == 1) {
    body(0, 0, rows);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n));
  for (int wk = 0; wk < n; ++wk) {
    const std::int64_t r0 = rows * wk / n;
    const std::int64_t r1 = rows * (wk + 1) / n;
    threads.emplace_back([&body, wk, r0, r1] { body(wk, r0, r1); });
  }
  for (auto& t : threads) t.join();
}

namespace {

using scheduler::Resource;
using scheduler::Space;

kernelgen::KernelIR remap_ir(const kernelgen::KernelIR& ir,
                             const std::map<std::uint32_t, std::uint32_t>& scratch_off,
                             const tpspec::ValidatedProblem& p,
                             const scheduler::Schedule& s,
                             const std::map<std::tuple<Space, std::uint32_t>, std::uint32_t>&
                                 resource_by_loc) {
  const auto find = [&](Space sp, std::uint32_t base) -> std::pair<std::uint32_t, const Resource*> {
    auto it = resource_by_loc.find({sp, base});
    if (it == resource_by_loc.end()) {
      throw std::logic_error("engine: no staged resource covers an IR operand");
    }
    return {scratch_off.at(it->second), &s.resources[it->second]};
  };
  (void)p;

  kernelgen::KernelIR out = ir;
  for (auto& op : out.ops) {
    switch (op.kind) {
      case kernelgen::OpKind::load:
        for (auto& bd : op.bindings) {
          switch (bd.array) {
            case kernelgen::ArrayId::X: bd.base = find(Space::X, bd.base).first; break;
            case kernelgen::ArrayId::Y: bd.base = find(Space::Y, bd.base).first; break;
            case kernelgen::ArrayId::W: bd.base = find(Space::W, bd.base).first; break;
            case kernelgen::ArrayId::GZ: bd.base = find(Space::Z, bd.base).first; break;
            default: throw std::logic_error("engine: unexpected load array");
          }
        }
        break;
      case kernelgen::OpKind::matmul:
        if (op.mm != kernelgen::MatmulKind::outer_acc) {
          const auto [off, res] = find(Space::W, op.w_base);
          op.w_base = off;
          op.w_row_stride = res->cols;  // packed in scratch
        }
        break;
      case kernelgen::OpKind::store:
      case kernelgen::OpKind::accumulate:
        if (op.array == kernelgen::ArrayId::Z) {
          op.base = find(Space::Z, op.base).first;
        }
        break;
      default:
        break;
    }
  }
  return out;
}

}  // namespace

}  // namespace detail

TpPlan::TpPlan(const tpspec::ValidatedProblem& p, const scheduler::Schedule& s)
    : impl_(std::make_unique<detail::PlanImpl>()) {
  using detail::CopyCmd;
  using detail::MoveCmd;
  using detail::PhaseExec;
  using detail::ZeroCmd;
  using scheduler::Resource;
  using scheduler::Space;

  impl_->problem = p;
  impl_->schedule = s;
  impl_->scratch_words = s.budget_words;

  // Resources are addressed by their exact (space, offset); instruction
  // operands coincide with whole resources by construction.
  std::map<std::tuple<Space, std::uint32_t>, std::uint32_t> resource_by_loc;
  for (std::uint32_t id = 0; id < s.resources.size(); ++id) {
    resource_by_loc[{s.resources[id].space, s.resources[id].offset}] = id;
  }

  std::map<std::uint32_t, std::uint32_t> prev_offsets;
  for (const auto& ph : s.phases) {
    PhaseExec pe;

    // Pack resident resources in id order.
    std::map<std::uint32_t, std::uint32_t> offsets;
    std::vector<std::uint32_t> resident = ph.resident;
    std::sort(resident.begin(), resident.end());
    std::uint32_t cursor = 0;
    for (auto id : resident) {
      offsets[id] = cursor;
      cursor += s.resources[id].words();
    }
    if (cursor > s.budget_words) {
      throw std::logic_error("engine: phase resident set exceeds budget");
    }

    const auto is_retained = [&](std::uint32_t id) {
      return std::find(ph.retained.begin(), ph.retained.end(), id) != ph.retained.end();
    };

    for (auto id : resident) {
      const Resource& r = s.resources[id];
      if (is_retained(id)) {
        pe.moves.push_back({prev_offsets.at(id), offsets.at(id), r.words()});
      }
      CopyCmd cp{r.space, r.offset, r.rows, r.cols, r.row_stride, offsets.at(id)};
      const bool loaded =
          std::find(ph.loaded.begin(), ph.loaded.end(), id) != ph.loaded.end();
      if (r.space == Space::Z) {
        pe.z_scratch.push_back({offsets.at(id), r.words()});
        pe.z_global.push_back({r.offset, r.words()});
        pe.z_words += r.words();
        pe.zero_all_z.push_back({offsets.at(id), r.words()});
        pe.conv_gz_in.push_back(cp);
        if (!is_retained(id)) {
          pe.fwd_zero_z.push_back({offsets.at(id), r.words()});
          pe.bwd_copy_in.push_back(cp);  // g_z staged from global
          pe.bwd_load_words += r.words();
        }
      } else {
        if (r.space == Space::X) pe.x_global.push_back({r.offset, r.words()});
        pe.conv_copy_in.push_back(cp);
        pe.conv_load_words += r.words();
        if (loaded) {
          pe.fwd_copy_in.push_back(cp);
          pe.bwd_copy_in.push_back(cp);
          pe.fwd_load_words += r.words();
          pe.bwd_load_words += r.words();
        }
      }
    }
    for (auto id : ph.z_flush) {
      const Resource& r = s.resources[id];
      pe.flush_z.push_back({r.space, r.offset, 1, r.words(), r.words(), offsets.at(id)});
      pe.store_words += r.words();
    }

    for (auto pos : ph.instructions) {
      const auto& instr = p.resolved[s.order[pos]];
      pe.fwd_interp.push_back(detail::remap_ir(kernelgen::gen_forward(instr), offsets, p, s,
                                               resource_by_loc));
      pe.bwd_interp.push_back(detail::remap_ir(kernelgen::gen_backward(instr), offsets, p, s,
                                               resource_by_loc));
      impl_->max_lanes = std::max(impl_->max_lanes, int(pe.fwd_interp.back().lane_count));
    }
    pe.fwd_spec = kernelgen::eliminate_redundant_loads(pe.fwd_interp);
    pe.bwd_spec = kernelgen::eliminate_redundant_loads(pe.bwd_interp);

    prev_offsets = std::move(offsets);
    impl_->phases.push_back(std::move(pe));
  }

  if (s.strategy == scheduler::Strategy::single_phase && s.phases.size() == 1) {
    impl_->direct = true;
    for (auto pos : s.phases[0].instructions) {
      const auto& instr = p.resolved[s.order[pos]];
      impl_->direct_fwd_interp.push_back(kernelgen::gen_forward(instr));
      impl_->direct_bwd_interp.push_back(kernelgen::gen_backward(instr));
    }
    impl_->direct_fwd_spec = kernelgen::eliminate_redundant_loads(impl_->direct_fwd_interp);
    impl_->direct_bwd_spec = kernelgen::eliminate_redundant_loads(impl_->direct_bwd_interp);
  }
}

TpPlan::~TpPlan() = default;
TpPlan::TpPlan(TpPlan&&) noexcept = default;
TpPlan& TpPlan::operator=(TpPlan&&) noexcept = default;

const tpspec::ValidatedProblem& TpPlan::problem() const { return impl_->problem; }
const scheduler::Schedule& TpPlan::schedule() const { return impl_->schedule; }

namespace {

template <typename T>
void check_shape(const char* what, const std::vector<T>& v, std::int64_t rows, int cols) {
  if (static_cast<std::int64_t>(v.size()) != rows * cols) {
    throw ShapeError(std::string("shape mismatch for ") + what + ": expected " +
                     std::to_string(rows) + "x" + std::to_string(cols) + " = " +
                     std::to_string(rows * cols) + " elements, got " + std::to_string(v.size()));
  }
}

template <typename T>
void check_batch(const detail::PlanImpl& pl, const Batch<T>& in) {
  check_shape("x", in.x, in.rows, pl.problem.dim_x);
  check_shape("y", in.y, in.rows, pl.problem.dim_y);
  check_shape("w", in.w, in.rows, static_cast<int>(pl.problem.total_weights));
}

// Output rows are zeroed by the worker that owns them, inside the parallel
// region, so large output buffers get first-touched in parallel.
template <typename T>
ExecStats forward_arrays(const detail::PlanImpl& pl, const T* x, const T* y, const T* w, T* z,
                         std::int64_t rows, const Options& opt) {
  const int dim_x = pl.problem.dim_x, dim_y = pl.problem.dim_y, dim_z = pl.problem.dim_z;
  const int dim_w = static_cast<int>(pl.problem.total_weights);
  std::vector<ExecStats> stats(static_cast<std::size_t>(std::max(opt.workers, 1)));
  detail::run_rows_parallel(rows, opt.workers, [&](int wk, std::int64_t r0, std::int64_t r1) {
    detail::WorkerScratch<T> ws(pl.scratch_words, pl.max_lanes);
    ExecStats st;
    std::memset(z + r0 * dim_z, 0, sizeof(T) * static_cast<std::size_t>((r1 - r0) * dim_z));
    for (std::int64_t r = r0; r < r1; ++r) {
      detail::run_forward_row(pl, opt.mode, ws, x + r * dim_x, y + r * dim_y, w + r * dim_w,
                              z + r * dim_z, st);
    }
    stats[static_cast<std::size_t>(wk)] = st;
  });
  ExecStats total;
  for (const auto& st : stats) total += st;
  return total;
}

template <typename T>
ExecStats backward_arrays(const detail::PlanImpl& pl, const T* x, const T* y, const T* w,
                          const T* gz, T* gx, T* gy, T* gw, std::int64_t rows,
                          const Options& opt) {
  const int dim_x = pl.problem.dim_x, dim_y = pl.problem.dim_y, dim_z = pl.problem.dim_z;
  const int dim_w = static_cast<int>(pl.problem.total_weights);
  std::vector<ExecStats> stats(static_cast<std::size_t>(std::max(opt.workers, 1)));
  detail::run_rows_parallel(rows, opt.workers, [&](int wk, std::int64_t r0, std::int64_t r1) {
    detail::WorkerScratch<T> ws(pl.scratch_words, pl.max_lanes);
    ExecStats st;
    std::memset(gx + r0 * dim_x, 0, sizeof(T) * static_cast<std::size_t>((r1 - r0) * dim_x));
    std::memset(gy + r0 * dim_y, 0, sizeof(T) * static_cast<std::size_t>((r1 - r0) * dim_y));
    std::memset(gw + r0 * dim_w, 0, sizeof(T) * static_cast<std::size_t>((r1 - r0) * dim_w));
    for (std::int64_t r = r0; r < r1; ++r) {
      detail::run_backward_row(pl, opt.mode, ws, x + r * dim_x, y + r * dim_y, w + r * dim_w,
                               gz + r * dim_z, gx + r * dim_x, gy + r * dim_y, gw + r * dim_w,
                               st);
    }
    stats[static_cast<std::size_t>(wk)] = st;
  });
  ExecStats total;
  for (const auto& st : stats) total += st;
  return total;
}

template <typename T>
void ensure_zeroed(std::vector<T>& v, std::size_t n) {
  // Reused right-sized buffers are zeroed by the workers instead.
  if (v.size() != n) v.assign(n, T(0));
}

}  // namespace

template <typename T>
ExecStats TpPlan::forward(const Batch<T>& in, std::vector<T>& z, const Options& opt) const {
  check_batch(*impl_, in);
  ensure_zeroed(z, static_cast<std::size_t>(in.rows) * impl_->problem.dim_z);
  return forward_arrays(*impl_, in.x.data(), in.y.data(), in.w.data(), z.data(), in.rows, opt);
}

template <typename T>
ExecStats TpPlan::backward(const Batch<T>& in, const std::vector<T>& gz, Grads<T>& out,
                           const Options& opt) const {
  check_batch(*impl_, in);
  check_shape("g_z", gz, in.rows, impl_->problem.dim_z);
  ensure_zeroed(out.x, in.x.size());
  ensure_zeroed(out.y, in.y.size());
  ensure_zeroed(out.w, in.w.size());
  return backward_arrays(*impl_, in.x.data(), in.y.data(), in.w.data(), gz.data(), out.x.data(),
                         out.y.data(), out.w.data(), in.rows, opt);
}

template <typename T>
ExecStats TpPlan::double_backward(const Batch<T>& in, const std::vector<T>& gz,
                                  const Grads<T>& upstream, DoubleGrads<T>& out,
                                  DispatchStyle style, const Options& opt) const {
  const auto& pl = *impl_;
  check_batch(pl, in);
  check_shape("g_z", gz, in.rows, pl.problem.dim_z);
  check_shape("dL/da", upstream.x, in.rows, pl.problem.dim_x);
  check_shape("dL/db", upstream.y, in.rows, pl.problem.dim_y);
  check_shape("dL/dC", upstream.w, in.rows, static_cast<int>(pl.problem.total_weights));

  const std::int64_t rows = in.rows;
  const int dim_x = pl.problem.dim_x, dim_y = pl.problem.dim_y, dim_z = pl.problem.dim_z;
  const int dim_w = static_cast<int>(pl.problem.total_weights);
  ensure_zeroed(out.x, in.x.size());
  ensure_zeroed(out.y, in.y.size());
  ensure_zeroed(out.w, in.w.size());
  ensure_zeroed(out.gz, gz.size());

  const T* x = in.x.data();
  const T* y = in.y.data();
  const T* w = in.w.data();
  const T* da = upstream.x.data();
  const T* db = upstream.y.data();
  const T* dc = upstream.w.data();

  ExecStats total;
  if (style == DispatchStyle::seven_call) {
    std::vector<T> t3(out.gz.size(), T(0)), t6(out.gz.size(), T(0)), t7(out.gz.size(), T(0));
    std::vector<T> o1x(out.x.size(), T(0)), o1y(out.y.size(), T(0)), o1w(out.w.size(), T(0));
    std::vector<T> o2x(out.x.size(), T(0)), o2y(out.y.size(), T(0)), o2w(out.w.size(), T(0));
    std::vector<T> o4x(out.x.size(), T(0)), o4y(out.y.size(), T(0)), o4w(out.w.size(), T(0));
    std::vector<T> o5x(out.x.size(), T(0)), o5y(out.y.size(), T(0)), o5w(out.w.size(), T(0));

    total += backward_arrays(pl, da, db, w, gz.data(), o1x.data(), o1y.data(), o1w.data(), rows,
                             opt);  // op1
    total += backward_arrays(pl, x, y, dc, gz.data(), o2x.data(), o2y.data(), o2w.data(), rows,
                             opt);  // op2
    total += forward_arrays(pl, da, y, w, t3.data(), rows, opt);                        // op3
    total += backward_arrays(pl, da, y, w, gz.data(), o4x.data(), o4y.data(), o4w.data(), rows,
                             opt);  // op4
    total += backward_arrays(pl, x, db, w, gz.data(), o5x.data(), o5y.data(), o5w.data(), rows,
                             opt);  // op5
    total += forward_arrays(pl, x, db, w, t6.data(), rows, opt);                        // op6
    total += forward_arrays(pl, x, y, dc, t7.data(), rows, opt);                        // op7

    for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] = o1x[i] + o2x[i];
    for (std::size_t i = 0; i < out.y.size(); ++i) out.y[i] = o1y[i] + o2y[i];
    for (std::size_t i = 0; i < out.w.size(); ++i) out.w[i] = o4w[i] + o5w[i];
    for (std::size_t i = 0; i < out.gz.size(); ++i) out.gz[i] = t3[i] + t6[i] + t7[i];
    return total;
  }

  // Fused: one forward-type pass (op3, op6, op7 accumulate into dL/dg_z) and
  // one backward-type pass (op1, op2 into dL/dx, dL/dy; op4, op5 into dL/dW).
  std::vector<ExecStats> stats(static_cast<std::size_t>(std::max(opt.workers, 1)));
  detail::run_rows_parallel(rows, opt.workers, [&](int wk, std::int64_t r0, std::int64_t r1) {
    detail::WorkerScratch<T> ws(pl.scratch_words, pl.max_lanes);
    std::vector<T> dump_x(static_cast<std::size_t>(dim_x), T(0));
    std::vector<T> dump_y(static_cast<std::size_t>(dim_y), T(0));
    std::vector<T> dump_w(static_cast<std::size_t>(dim_w), T(0));
    ExecStats st;
    for (std::int64_t r = r0; r < r1; ++r) {
      const T* xr = x + r * dim_x;
      const T* yr = y + r * dim_y;
      const T* wr = w + r * dim_w;
      const T* dar = da + r * dim_x;
      const T* dbr = db + r * dim_y;
      const T* dcr = dc + r * dim_w;
      const T* gzr = gz.data() + r * dim_z;
      T* ogz = out.gz.data() + r * dim_z;
      std::memset(ogz, 0, sizeof(T) * static_cast<std::size_t>(dim_z));
      detail::run_forward_row(pl, opt.mode, ws, dar, yr, wr, ogz, st);   // op3
      detail::run_forward_row(pl, opt.mode, ws, xr, dbr, wr, ogz, st);   // op6
      detail::run_forward_row(pl, opt.mode, ws, xr, yr, dcr, ogz, st);   // op7

      T* ox = out.x.data() + r * dim_x;
      T* oy = out.y.data() + r * dim_y;
      T* ow = out.w.data() + r * dim_w;
      std::memset(ox, 0, sizeof(T) * static_cast<std::size_t>(dim_x));
      std::memset(oy, 0, sizeof(T) * static_cast<std::size_t>(dim_y));
      std::memset(ow, 0, sizeof(T) * static_cast<std::size_t>(dim_w));
      detail::run_backward_row(pl, opt.mode, ws, dar, dbr, wr, gzr, ox, oy, dump_w.data(),
                               st);  // op1
      detail::run_backward_row(pl, opt.mode, ws, xr, yr, dcr, gzr, ox, oy, dump_w.data(),
                               st);  // op2
      detail::run_backward_row(pl, opt.mode, ws, dar, yr, wr, gzr, dump_x.data(), dump_y.data(),
                               ow, st);  // op4
      detail::run_backward_row(pl, opt.mode, ws, xr, dbr, wr, gzr, dump_x.data(), dump_y.data(),
                               ow, st);  // op5
    }
    stats[static_cast<std::size_t>(wk)] = st;
  });
  for (const auto& st : stats) total += st;
  return total;
}

template <typename T>
Batch<T> random_batch(const tpspec::ValidatedProblem& p, std::int64_t rows, std::uint64_t seed) {
  rng::NormalGen gen(seed);
  Batch<T> b;
  b.rows = rows;
  b.x = gen.normal_vec<T>(static_cast<std::size_t>(rows) * p.dim_x);
  b.y = gen.normal_vec<T>(static_cast<std::size_t>(rows) * p.dim_y);
  b.w = gen.normal_vec<T>(static_cast<std::size_t>(rows) * p.total_weights);
  return b;
}

template ExecStats TpPlan::forward<float>(const Batch<float>&, std::vector<float>&,
                                          const Options&) const;
template ExecStats TpPlan::forward<double>(const Batch<double>&, std::vector<double>&,
                                           const Options&) const;
template ExecStats TpPlan::backward<float>(const Batch<float>&, const std::vector<float>&,
                                           Grads<float>&, const Options&) const;
template ExecStats TpPlan::backward<double>(const Batch<double>&, const std::vector<double>&,
                                            Grads<double>&, const Options&) const;
template ExecStats TpPlan::double_backward<float>(const Batch<float>&, const std::vector<float>&,
                                                  const Grads<float>&, DoubleGrads<float>&,
                                                  DispatchStyle, const Options&) const;
template ExecStats TpPlan::double_backward<double>(const Batch<double>&,
                                                   const std::vector<double>&,
                                                   const Grads<double>&, DoubleGrads<double>&,
                                                   DispatchStyle, const Options&) const;
template Batch<float> random_batch<float>(const tpspec::ValidatedProblem&, std::int64_t,
                                          std::uint64_t);
template Batch<double> random_batch<double>(const tpspec::ValidatedProblem&, std::int64_t,
                                            std::uint64_t);

}  // namespace cgforge::engine
