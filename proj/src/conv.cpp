#include "cgforge/conv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "engine_impl.hpp"

namespace cgforge::conv {

Geometry load_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw XyzError("cannot open " + path);
  std::string line;
  int lineno = 0;

  if (!std::getline(in, line)) throw XyzError("missing atom count line");
  ++lineno;
  long count = 0;
  try {
    std::size_t used = 0;
    count = std::stol(line, &used);
    while (used < line.size() && std::isspace(static_cast<unsigned char>(line[used]))) ++used;
    if (used != line.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw XyzError("line 1: malformed atom count \"" + line + "\"");
  }
  if (count < 0) throw XyzError("line 1: negative atom count");

  std::getline(in, line);  // comment line, may be absent for count == 0
  ++lineno;

  Geometry geo;
  geo.positions.reserve(static_cast<std::size_t>(count));
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string el;
    double x, y, z;
    if (!(ls >> el >> x >> y >> z)) {
      throw XyzError("line " + std::to_string(lineno) + ": expected `El x y z`, got \"" + line +
                     "\"");
    }
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      throw XyzError("line " + std::to_string(lineno) + ": non-finite coordinate");
    }
    geo.species.push_back(el);
    geo.positions.push_back({x, y, z});
  }
  if (static_cast<long>(geo.positions.size()) != count) {
    throw XyzError("atom count line says " + std::to_string(count) + " but file has " +
                   std::to_string(geo.positions.size()) + " rows");
  }
  return geo;
}

GraphCSR make_graph(std::int64_t node_count, std::vector<Edge> edges, bool allow_self_loops) {
  for (const auto& e : edges) {
    if (e.src < 0 || e.src >= node_count || e.dst < 0 || e.dst >= node_count) {
      throw std::invalid_argument("make_graph: edge endpoint out of range");
    }
    if (!allow_self_loops && e.src == e.dst) {
      throw std::invalid_argument("make_graph: self-loop (" + std::to_string(e.src) + ")");
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  GraphCSR g;
  g.node_count = node_count;
  g.edges = std::move(edges);
  g.row_ptr.assign(static_cast<std::size_t>(node_count) + 1, 0);
  for (const auto& e : g.edges) ++g.row_ptr[static_cast<std::size_t>(e.src) + 1];
  for (std::int64_t v = 0; v < node_count; ++v) {
    g.row_ptr[static_cast<std::size_t>(v) + 1] += g.row_ptr[static_cast<std::size_t>(v)];
  }
  return g;
}

GraphCSR radius_graph(const Geometry& geo, double r_cut) {
  if (r_cut <= 0.0) throw std::invalid_argument("radius_graph: r_cut must be positive");
  const std::int64_t s = geo.size();
  std::vector<Edge> edges;
  if (s > 0) {
    // Uniform cells of side r_cut; candidate pairs come from the 27
    // neighboring cells.
    std::array<double, 3> lo = geo.positions[0];
    for (const auto& p : geo.positions) {
      for (int d = 0; d < 3; ++d) lo[d] = std::min(lo[d], p[d]);
    }
    const auto cell_of = [&](const std::array<double, 3>& p) {
      return std::array<std::int64_t, 3>{
          static_cast<std::int64_t>(std::floor((p[0] - lo[0]) / r_cut)),
          static_cast<std::int64_t>(std::floor((p[1] - lo[1]) / r_cut)),
          static_cast<std::int64_t>(std::floor((p[2] - lo[2]) / r_cut))};
    };
    std::map<std::array<std::int64_t, 3>, std::vector<std::int32_t>> cells;
    for (std::int64_t i = 0; i < s; ++i) {
      cells[cell_of(geo.positions[i])].push_back(static_cast<std::int32_t>(i));
    }
    const double r2 = r_cut * r_cut;
    for (std::int64_t i = 0; i < s; ++i) {
      const auto& pi = geo.positions[i];
      const auto ci = cell_of(pi);
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          for (std::int64_t dz = -1; dz <= 1; ++dz) {
            auto it = cells.find({ci[0] + dx, ci[1] + dy, ci[2] + dz});
            if (it == cells.end()) continue;
            for (std::int32_t j : it->second) {
              if (j == i) continue;
              const auto& pj = geo.positions[static_cast<std::size_t>(j)];
              const double ddx = pi[0] - pj[0], ddy = pi[1] - pj[1], ddz = pi[2] - pj[2];
              if (ddx * ddx + ddy * ddy + ddz * ddz <= r2) {
                edges.push_back({static_cast<std::int32_t>(i), j});
              }
            }
          }
        }
      }
    }
  }
  return make_graph(s, std::move(edges));
}

std::vector<std::int64_t> transpose_permutation(const GraphCSR& g) {
  const std::int64_t ne = g.edge_count();
  // Counting sort of (dst, src); matches CSR order of the transposed graph.
  std::vector<std::int64_t> count(static_cast<std::size_t>(g.node_count) + 1, 0);
  for (const auto& e : g.edges) ++count[static_cast<std::size_t>(e.dst) + 1];
  for (std::int64_t v = 0; v < g.node_count; ++v) {
    count[static_cast<std::size_t>(v) + 1] += count[static_cast<std::size_t>(v)];
  }
  std::vector<std::int64_t> perm(static_cast<std::size_t>(ne));
  // Edges are scanned in (src, dst) order, so within one dst bucket the src
  // values arrive ascending: stable counting fill yields transposed CSR order.
  for (std::int64_t e = 0; e < ne; ++e) {
    const auto d = static_cast<std::size_t>(g.edges[static_cast<std::size_t>(e)].dst);
    perm[static_cast<std::size_t>(e)] = count[d]++;
  }
  return perm;
}

Geometry cubic_lattice(int nx, int ny, int nz, double spacing) {
  Geometry geo;
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      for (int iz = 0; iz < nz; ++iz) {
        geo.positions.push_back({ix * spacing, iy * spacing, iz * spacing});
        geo.species.push_back("C");
      }
    }
  }
  return geo;
}

std::string graph_to_json(const GraphCSR& g) {
  nlohmann::json j;
  j["nodes"] = g.node_count;
  j["edges"] = nlohmann::json::array();
  for (const auto& e : g.edges) j["edges"].push_back({e.src, e.dst});
  return j.dump();
}

namespace {

using engine::detail::PhaseExec;
using engine::detail::PlanImpl;
using engine::detail::WorkerScratch;

template <typename T>
void check_conv_shapes(const PlanImpl& pl, const GraphCSR& g, const std::vector<T>& node_x,
                       const std::vector<T>& edge_y, const std::vector<T>& edge_w) {
  const auto nv = static_cast<std::size_t>(g.node_count);
  const auto ne = static_cast<std::size_t>(g.edge_count());
  if (node_x.size() != nv * static_cast<std::size_t>(pl.problem.dim_x)) {
    throw engine::ShapeError("conv: node_x shape mismatch");
  }
  if (edge_y.size() != ne * static_cast<std::size_t>(pl.problem.dim_y)) {
    throw engine::ShapeError("conv: edge_y shape mismatch");
  }
  if (edge_w.size() != ne * static_cast<std::size_t>(pl.problem.total_weights)) {
    throw engine::ShapeError("conv: edge_w shape mismatch");
  }
}

void check_sorted(const GraphCSR& g) {
  for (std::size_t e = 1; e < g.edges.size(); ++e) {
    const auto& a = g.edges[e - 1];
    const auto& b = g.edges[e];
    if (a.src > b.src || (a.src == b.src && a.dst >= b.dst)) {
      throw std::invalid_argument(
          "conv: deterministic mode requires edges sorted by first coordinate");
    }
  }
}

std::array<std::mutex, 256>& node_locks() {
  static std::array<std::mutex, 256> locks;
  return locks;
}

// Stage one edge's operands for a phase and run its programs.
template <typename T>
void run_conv_edge_fwd(const PhaseExec& pe, engine::ExecMode mode, WorkerScratch<T>& ws,
                       const T* x_row, const T* y_row, const T* w_row, ConvStats& st) {
  T* cur = ws.a.data();
  for (const auto& cp : pe.conv_copy_in) {
    const T* row = cp.space == scheduler::Space::X   ? x_row
                   : cp.space == scheduler::Space::Y ? y_row
                                                     : w_row;
    engine::detail::run_copy_in(cp, row, cur);
  }
  for (const auto& zc : pe.zero_all_z) std::memset(cur + zc.scratch_off, 0, sizeof(T) * zc.words);
  kernelgen::RowView<T> rv;
  rv.x = rv.y = rv.w = cur;
  rv.z = cur;
  const auto& programs = mode == engine::ExecMode::specialized ? pe.fwd_spec : pe.fwd_interp;
  for (const auto& ir : programs) kernelgen::interpret(ir, ws.regs, rv, &st.flops);
  st.loads_words += pe.conv_load_words;
}

}  // namespace

template <typename T>
ConvStats ConvPlan::forward(const GraphCSR& g, const std::vector<T>& node_x,
                            const std::vector<T>& edge_y, const std::vector<T>& edge_w,
                            std::vector<T>& node_z, Mode mode, const ConvOptions& opt) const {
  const PlanImpl& pl = plan_->impl();
  check_conv_shapes(pl, g, node_x, edge_y, edge_w);
  if (mode == Mode::deterministic) check_sorted(g);

  const int dim_x = pl.problem.dim_x, dim_y = pl.problem.dim_y, dim_z = pl.problem.dim_z;
  const int dim_w = static_cast<int>(pl.problem.total_weights);
  const std::int64_t ne = g.edge_count();
  node_z.assign(static_cast<std::size_t>(g.node_count) * dim_z, T(0));

  const int chunks = std::max(1, opt.chunks);
  const std::size_t nphases = pl.phases.size();

  // fixup[phase * chunks + chunk] = (row, partial packed z) or row == -1.
  std::vector<std::int64_t> fixup_row(nphases * static_cast<std::size_t>(chunks), -1);
  std::vector<std::vector<T>> fixup_buf(nphases * static_cast<std::size_t>(chunks));

  std::vector<ConvStats> stats(static_cast<std::size_t>(chunks));

  engine::detail::run_rows_parallel(
      chunks, opt.workers, [&](int, std::int64_t c0, std::int64_t c1) {
        for (std::int64_t c = c0; c < c1; ++c) {
          const std::int64_t e0 = ne * c / chunks;
          const std::int64_t e1 = ne * (c + 1) / chunks;
          if (e0 == e1) continue;
          WorkerScratch<T> ws(pl.scratch_words, pl.max_lanes);
          ConvStats& st = stats[static_cast<std::size_t>(c)];

          for (std::size_t p = 0; p < nphases; ++p) {
            const PhaseExec& pe = pl.phases[p];
            if (pe.z_words == 0 && pe.fwd_interp.empty()) continue;
            std::vector<T> z_acc(pe.z_words, T(0));
            std::int64_t current_row = -1;
            bool first_emitted = false;

            const auto emit = [&](std::int64_t row) {
              if (mode == Mode::deterministic && !first_emitted) {
                fixup_row[p * static_cast<std::size_t>(chunks) + static_cast<std::size_t>(c)] =
                    row;
                fixup_buf[p * static_cast<std::size_t>(chunks) + static_cast<std::size_t>(c)] =
                    z_acc;
                first_emitted = true;
              } else {
                T* zrow = node_z.data() + static_cast<std::size_t>(row) * dim_z;
                std::size_t packed = 0;
                for (std::size_t k = 0; k < pe.z_global.size(); ++k) {
                  for (std::uint32_t i = 0; i < pe.z_global[k].words; ++i) {
                    zrow[pe.z_global[k].off + i] += z_acc[packed++];
                  }
                }
                st.stores_words += pe.z_words;
                st.output_store_ops += 1;
              }
              std::fill(z_acc.begin(), z_acc.end(), T(0));
            };

            for (std::int64_t e = e0; e < e1; ++e) {
              const Edge& ed = g.edges[static_cast<std::size_t>(e)];
              if (mode == Mode::deterministic) {
                if (current_row != -1 && ed.src != current_row) emit(current_row);
                current_row = ed.src;
              }
              run_conv_edge_fwd(pe, opt.mode, ws,
                                node_x.data() + static_cast<std::size_t>(ed.dst) * dim_x,
                                edge_y.data() + static_cast<std::size_t>(e) * dim_y,
                                edge_w.data() + static_cast<std::size_t>(e) * dim_w, st);
              if (mode == Mode::deterministic) {
                const T* cur = ws.a.data();
                std::size_t packed = 0;
                for (const auto& span : pe.z_scratch) {
                  for (std::uint32_t i = 0; i < span.words; ++i) {
                    z_acc[packed++] += cur[span.off + i];
                  }
                }
              } else {
                // Atomic variant: serialized accumulation per node row.
                std::lock_guard<std::mutex> lock(
                    node_locks()[static_cast<std::size_t>(ed.src) % node_locks().size()]);
                T* zrow = node_z.data() + static_cast<std::size_t>(ed.src) * dim_z;
                const T* cur = ws.a.data();
                for (std::size_t k = 0; k < pe.z_global.size(); ++k) {
                  for (std::uint32_t i = 0; i < pe.z_global[k].words; ++i) {
                    zrow[pe.z_global[k].off + i] += cur[pe.z_scratch[k].off + i];
                  }
                }
                st.stores_words += pe.z_words;
                st.output_store_ops += 1;
              }
            }
            if (mode == Mode::deterministic && current_row != -1) emit(current_row);
          }
        }
      });

  ConvStats total;
  for (const auto& st : stats) total += st;

  if (mode == Mode::deterministic) {
    // Fixup pass: chunk order within each phase.
    for (std::size_t p = 0; p < nphases; ++p) {
      const PhaseExec& pe = pl.phases[p];
      for (int c = 0; c < chunks; ++c) {
        const std::size_t slot = p * static_cast<std::size_t>(chunks) + static_cast<std::size_t>(c);
        if (fixup_row[slot] < 0) continue;
        T* zrow = node_z.data() + static_cast<std::size_t>(fixup_row[slot]) * dim_z;
        const auto& buf = fixup_buf[slot];
        std::size_t packed = 0;
        for (std::size_t k = 0; k < pe.z_global.size(); ++k) {
          for (std::uint32_t i = 0; i < pe.z_global[k].words; ++i) {
            zrow[pe.z_global[k].off + i] += buf[packed++];
          }
        }
        total.stores_words += pe.z_words;
        total.output_store_ops += 1;
      }
    }
  }
  return total;
}

template <typename T>
ConvStats ConvPlan::backward(const GraphCSR& g, const std::vector<std::int64_t>& perm,
                             const std::vector<T>& node_x, const std::vector<T>& edge_y,
                             const std::vector<T>& edge_w, const std::vector<T>& g_node_z,
                             std::vector<T>& g_node_x, std::vector<T>& g_edge_y,
                             std::vector<T>& g_edge_w, Mode mode, const ConvOptions& opt) const {
  const PlanImpl& pl = plan_->impl();
  check_conv_shapes(pl, g, node_x, edge_y, edge_w);
  const int dim_x = pl.problem.dim_x, dim_y = pl.problem.dim_y, dim_z = pl.problem.dim_z;
  const int dim_w = static_cast<int>(pl.problem.total_weights);
  const std::int64_t ne = g.edge_count();
  if (g_node_z.size() != static_cast<std::size_t>(g.node_count) * dim_z) {
    throw engine::ShapeError("conv: g_node_z shape mismatch");
  }
  if (mode == Mode::deterministic) {
    check_sorted(g);
    if (static_cast<std::int64_t>(perm.size()) != ne) {
      throw engine::ShapeError("conv: transpose permutation size mismatch");
    }
  }

  g_node_x.assign(static_cast<std::size_t>(g.node_count) * dim_x, T(0));
  g_edge_y.assign(static_cast<std::size_t>(ne) * dim_y, T(0));
  g_edge_w.assign(static_cast<std::size_t>(ne) * dim_w, T(0));

  // Traversal order: transposed CSR for the deterministic variant (groups
  // edges by the node whose features they read), original order otherwise.
  std::vector<std::int64_t> by_pos(static_cast<std::size_t>(ne));
  if (mode == Mode::deterministic) {
    for (std::int64_t e = 0; e < ne; ++e) by_pos[static_cast<std::size_t>(perm[e])] = e;
  } else {
    for (std::int64_t e = 0; e < ne; ++e) by_pos[static_cast<std::size_t>(e)] = e;
  }

  const int chunks = std::max(1, opt.chunks);
  const std::size_t nphases = pl.phases.size();
  std::vector<std::int64_t> fixup_row(nphases * static_cast<std::size_t>(chunks), -1);
  std::vector<std::vector<T>> fixup_buf(nphases * static_cast<std::size_t>(chunks));
  std::vector<ConvStats> stats(static_cast<std::size_t>(chunks));

  engine::detail::run_rows_parallel(
      chunks, opt.workers, [&](int, std::int64_t c0, std::int64_t c1) {
        for (std::int64_t c = c0; c < c1; ++c) {
          const std::int64_t q0 = ne * c / chunks;
          const std::int64_t q1 = ne * (c + 1) / chunks;
          if (q0 == q1) continue;
          WorkerScratch<T> ws(pl.scratch_words, pl.max_lanes);
          ConvStats& st = stats[static_cast<std::size_t>(c)];
          std::vector<T> gx_acc(static_cast<std::size_t>(dim_x), T(0));

          for (std::size_t p = 0; p < nphases; ++p) {
            const PhaseExec& pe = pl.phases[p];
            std::int64_t current_row = -1;
            bool first_emitted = false;

            const auto pack_gx = [&]() {
              std::vector<T> packed;
              for (const auto& span : pe.x_global) {
                for (std::uint32_t i = 0; i < span.words; ++i) {
                  packed.push_back(gx_acc[span.off + i]);
                }
              }
              return packed;
            };
            const auto emit = [&](std::int64_t row) {
              if (mode == Mode::deterministic && !first_emitted) {
                fixup_row[p * static_cast<std::size_t>(chunks) + static_cast<std::size_t>(c)] =
                    row;
                fixup_buf[p * static_cast<std::size_t>(chunks) + static_cast<std::size_t>(c)] =
                    pack_gx();
                first_emitted = true;
              } else {
                T* gxrow = g_node_x.data() + static_cast<std::size_t>(row) * dim_x;
                for (const auto& span : pe.x_global) {
                  for (std::uint32_t i = 0; i < span.words; ++i) {
                    gxrow[span.off + i] += gx_acc[span.off + i];
                  }
                }
                st.stores_words += std::accumulate(
                    pe.x_global.begin(), pe.x_global.end(), std::uint64_t{0},
                    [](std::uint64_t acc, const auto& s) { return acc + s.words; });
                st.output_store_ops += 1;
              }
              for (const auto& span : pe.x_global) {
                std::fill(gx_acc.begin() + span.off, gx_acc.begin() + span.off + span.words,
                          T(0));
              }
            };

            for (std::int64_t q = q0; q < q1; ++q) {
              const std::int64_t e = by_pos[static_cast<std::size_t>(q)];
              const Edge& ed = g.edges[static_cast<std::size_t>(e)];
              if (mode == Mode::deterministic) {
                if (current_row != -1 && ed.dst != current_row) emit(current_row);
                current_row = ed.dst;
              }

              T* cur = ws.a.data();
              for (const auto& cp : pe.conv_copy_in) {
                const T* row =
                    cp.space == scheduler::Space::X
                        ? node_x.data() + static_cast<std::size_t>(ed.dst) * dim_x
                        : cp.space == scheduler::Space::Y
                              ? edge_y.data() + static_cast<std::size_t>(e) * dim_y
                              : edge_w.data() + static_cast<std::size_t>(e) * dim_w;
                engine::detail::run_copy_in(cp, row, cur);
              }
              for (const auto& cp : pe.conv_gz_in) {
                engine::detail::run_copy_in(
                    cp, g_node_z.data() + static_cast<std::size_t>(ed.src) * dim_z, cur);
              }
              st.loads_words += pe.conv_load_words + pe.z_words;

              kernelgen::RowView<T> rv;
              rv.x = rv.y = rv.w = cur;
              rv.gz = cur;
              rv.gy = g_edge_y.data() + static_cast<std::size_t>(e) * dim_y;
              rv.gw = g_edge_w.data() + static_cast<std::size_t>(e) * dim_w;

              if (mode == Mode::deterministic) {
                rv.gx = gx_acc.data();
                const auto& programs =
                    opt.mode == engine::ExecMode::specialized ? pe.bwd_spec : pe.bwd_interp;
                for (const auto& ir : programs) kernelgen::interpret(ir, ws.regs, rv, &st.flops);
              } else {
                rv.gx = gx_acc.data();
                const auto& programs =
                    opt.mode == engine::ExecMode::specialized ? pe.bwd_spec : pe.bwd_interp;
                for (const auto& ir : programs) kernelgen::interpret(ir, ws.regs, rv, &st.flops);
                std::lock_guard<std::mutex> lock(
                    node_locks()[static_cast<std::size_t>(ed.dst) % node_locks().size()]);
                T* gxrow = g_node_x.data() + static_cast<std::size_t>(ed.dst) * dim_x;
                std::uint64_t words = 0;
                for (const auto& span : pe.x_global) {
                  for (std::uint32_t i = 0; i < span.words; ++i) {
                    gxrow[span.off + i] += gx_acc[span.off + i];
                    gx_acc[span.off + i] = T(0);
                  }
                  words += span.words;
                }
                st.stores_words += words;
                st.output_store_ops += 1;
              }
            }
            if (mode == Mode::deterministic && current_row != -1) emit(current_row);
          }
        }
      });

  ConvStats total;
  for (const auto& st : stats) total += st;

  if (mode == Mode::deterministic) {
    for (std::size_t p = 0; p < nphases; ++p) {
      const PhaseExec& pe = pl.phases[p];
      for (int c = 0; c < chunks; ++c) {
        const std::size_t slot = p * static_cast<std::size_t>(chunks) + static_cast<std::size_t>(c);
        if (fixup_row[slot] < 0) continue;
        T* gxrow = g_node_x.data() + static_cast<std::size_t>(fixup_row[slot]) * dim_x;
        const auto& buf = fixup_buf[slot];
        std::size_t packed = 0;
        for (const auto& span : pe.x_global) {
          for (std::uint32_t i = 0; i < span.words; ++i) {
            gxrow[span.off + i] += buf[packed++];
          }
        }
        total.output_store_ops += 1;
      }
    }
  }
  return total;
}

template <typename T>
ConvStats unfused_forward(const engine::TpPlan& plan, const GraphCSR& g,
                          const std::vector<T>& node_x, const std::vector<T>& edge_y,
                          const std::vector<T>& edge_w, std::vector<T>& node_z,
                          const engine::Options& opt) {
  const PlanImpl& pl = plan.impl();
  check_conv_shapes(pl, g, node_x, edge_y, edge_w);
  const int dim_x = pl.problem.dim_x, dim_z = pl.problem.dim_z;
  const std::int64_t ne = g.edge_count();

  // Duplicate node features per edge.
  engine::Batch<T> batch;
  batch.rows = ne;
  batch.x.resize(static_cast<std::size_t>(ne) * dim_x);
  for (std::int64_t e = 0; e < ne; ++e) {
    std::memcpy(batch.x.data() + static_cast<std::size_t>(e) * dim_x,
                node_x.data() + static_cast<std::size_t>(g.edges[static_cast<std::size_t>(e)].dst) * dim_x,
                sizeof(T) * static_cast<std::size_t>(dim_x));
  }
  batch.y = edge_y;
  batch.w = edge_w;

  std::vector<T> ze;
  const engine::ExecStats fwd = plan.forward(batch, ze, opt);

  node_z.assign(static_cast<std::size_t>(g.node_count) * dim_z, T(0));
  for (std::int64_t e = 0; e < ne; ++e) {
    T* zrow = node_z.data() + static_cast<std::size_t>(g.edges[static_cast<std::size_t>(e)].src) * dim_z;
    const T* src = ze.data() + static_cast<std::size_t>(e) * dim_z;
    for (int k = 0; k < dim_z; ++k) zrow[k] += src[k];
  }

  ConvStats st;
  st.loads_words = fwd.loads_words + static_cast<std::uint64_t>(ne) * dim_x;  // gather
  st.stores_words = fwd.stores_words + static_cast<std::uint64_t>(ne) * dim_z;  // scatter
  st.output_store_ops = static_cast<std::uint64_t>(ne);
  st.flops = fwd.flops;
  return st;
}

template <typename T>
ConvStats unfused_backward(const engine::TpPlan& plan, const GraphCSR& g,
                           const std::vector<T>& node_x, const std::vector<T>& edge_y,
                           const std::vector<T>& edge_w, const std::vector<T>& g_node_z,
                           std::vector<T>& g_node_x, std::vector<T>& g_edge_y,
                           std::vector<T>& g_edge_w, const engine::Options& opt) {
  const PlanImpl& pl = plan.impl();
  check_conv_shapes(pl, g, node_x, edge_y, edge_w);
  const int dim_x = pl.problem.dim_x, dim_z = pl.problem.dim_z;
  const std::int64_t ne = g.edge_count();

  engine::Batch<T> batch;
  batch.rows = ne;
  batch.x.resize(static_cast<std::size_t>(ne) * dim_x);
  std::vector<T> gz(static_cast<std::size_t>(ne) * dim_z);
  for (std::int64_t e = 0; e < ne; ++e) {
    const auto& ed = g.edges[static_cast<std::size_t>(e)];
    std::memcpy(batch.x.data() + static_cast<std::size_t>(e) * dim_x,
                node_x.data() + static_cast<std::size_t>(ed.dst) * dim_x,
                sizeof(T) * static_cast<std::size_t>(dim_x));
    std::memcpy(gz.data() + static_cast<std::size_t>(e) * dim_z,
                g_node_z.data() + static_cast<std::size_t>(ed.src) * dim_z,
                sizeof(T) * static_cast<std::size_t>(dim_z));
  }
  batch.y = edge_y;
  batch.w = edge_w;

  engine::Grads<T> grads;
  const engine::ExecStats bwd = plan.backward(batch, gz, grads, opt);

  g_node_x.assign(static_cast<std::size_t>(g.node_count) * dim_x, T(0));
  for (std::int64_t e = 0; e < ne; ++e) {
    T* dst = g_node_x.data() +
             static_cast<std::size_t>(g.edges[static_cast<std::size_t>(e)].dst) * dim_x;
    const T* src = grads.x.data() + static_cast<std::size_t>(e) * dim_x;
    for (int i = 0; i < dim_x; ++i) dst[i] += src[i];
  }
  g_edge_y = std::move(grads.y);
  g_edge_w = std::move(grads.w);

  ConvStats st;
  st.loads_words = bwd.loads_words + static_cast<std::uint64_t>(ne) * (dim_x + dim_z);
  st.stores_words = static_cast<std::uint64_t>(ne) * dim_x;
  st.output_store_ops = static_cast<std::uint64_t>(ne);
  st.flops = bwd.flops;
  return st;
}

template ConvStats ConvPlan::forward<float>(const GraphCSR&, const std::vector<float>&,
                                            const std::vector<float>&, const std::vector<float>&,
                                            std::vector<float>&, Mode, const ConvOptions&) const;
template ConvStats ConvPlan::forward<double>(const GraphCSR&, const std::vector<double>&,
                                             const std::vector<double>&,
                                             const std::vector<double>&, std::vector<double>&,
                                             Mode, const ConvOptions&) const;
template ConvStats ConvPlan::backward<float>(const GraphCSR&, const std::vector<std::int64_t>&,
                                             const std::vector<float>&, const std::vector<float>&,
                                             const std::vector<float>&, const std::vector<float>&,
                                             std::vector<float>&, std::vector<float>&,
                                             std::vector<float>&, Mode, const ConvOptions&) const;
template ConvStats ConvPlan::backward<double>(const GraphCSR&, const std::vector<std::int64_t>&,
                                              const std::vector<double>&,
                                              const std::vector<double>&,
                                              const std::vector<double>&,
                                              const std::vector<double>&, std::vector<double>&,
                                              std::vector<double>&, std::vector<double>&, Mode,
                                              const ConvOptions&) const;
template ConvStats unfused_forward<float>(const engine::TpPlan&, const GraphCSR&,
                                          const std::vector<float>&, const std::vector<float>&,
                                          const std::vector<float>&, std::vector<float>&,
                                          const engine::Options&);
template ConvStats unfused_forward<double>(const engine::TpPlan&, const GraphCSR&,
                                           const std::vector<double>&, const std::vector<double>&,
                                           const std::vector<double>&, std::vector<double>&,
                                           const engine::Options&);
template ConvStats unfused_backward<float>(const engine::TpPlan&, const GraphCSR&,
                                           const std::vector<float>&, const std::vector<float>&,
                                           const std::vector<float>&, const std::vector<float>&,
                                           std::vector<float>&, std::vector<float>&,
                                           std::vector<float>&, const engine::Options&);
template ConvStats unfused_backward<double>(const engine::TpPlan&, const GraphCSR&,
                                            const std::vector<double>&,
                                            const std::vector<double>&,
                                            const std::vector<double>&,
                                            const std::vector<double>&, std::vector<double>&,
                                            std::vector<double>&, std::vector<double>&,
                                            const engine::Options&);

}  // namespace cgforge::conv
