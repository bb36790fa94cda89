#ifndef CGFORGE_CONV_HPP
#define CGFORGE_CONV_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cgforge/engine.hpp"

namespace cgforge {

/// Fused tensor product + graph convolution.
///
/// Edge convention: an edge (src, dst) contributes
///   node_z[src] += TP(node_x[dst], edge_y[e], edge_w[e]);
/// src indexes the CSR row (the output node), dst the neighbor whose
/// features are read. Radius graphs contain both directions of every pair.
///
/// Deterministic mode processes a fixed number of contiguous edge chunks
/// (independent of the worker count); each chunk's first output row goes to
/// a fixup buffer applied in chunk order afterwards, so results are bitwise
/// reproducible for any worker count.
namespace conv {

struct Geometry {
  std::vector<std::array<double, 3>> positions;
  std::vector<std::string> species;

  std::int64_t size() const { return static_cast<std::int64_t>(positions.size()); }
};

struct XyzError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// XYZ file: count line, comment line, `El x y z` rows.
Geometry load_xyz(const std::string& path);

struct Edge {
  std::int32_t src = 0;
  std::int32_t dst = 0;
  bool operator==(const Edge&) const = default;
};

struct GraphCSR {
  std::int64_t node_count = 0;
  std::vector<Edge> edges;           // sorted by (src, dst), strictly
  std::vector<std::int64_t> row_ptr;  // size node_count + 1

  std::int64_t edge_count() const { return static_cast<std::int64_t>(edges.size()); }
};

/// Sorts, deduplicates and validates an edge list into CSR form.
GraphCSR make_graph(std::int64_t node_count, std::vector<Edge> edges,
                    bool allow_self_loops = false);

/// Directed edges (i, j), i != j, for ||r_i - r_j|| <= r_cut. Uses a uniform
/// cell grid; the O(s^2) pair check lives in the tests as its oracle.
GraphCSR radius_graph(const Geometry& geo, double r_cut);

/// perm[e] = position of edge e in the CSR ordering of the transposed graph.
std::vector<std::int64_t> transpose_permutation(const GraphCSR& g);

/// Regular nx x ny x nz lattice with the given spacing.
Geometry cubic_lattice(int nx, int ny, int nz, double spacing);

std::string graph_to_json(const GraphCSR& g);

enum class Mode : std::uint8_t { deterministic, atomic };

struct ConvOptions {
  int workers = 1;
  int chunks = 16;  // fixed work decomposition; determines the reduction shape
  engine::ExecMode mode = engine::ExecMode::specialized;
};

struct ConvStats {
  std::uint64_t loads_words = 0;
  std::uint64_t stores_words = 0;       // words stored to node outputs
  std::uint64_t output_store_ops = 0;   // z_acc flushes + fixup applications
  std::uint64_t flops = 0;

  ConvStats& operator+=(const ConvStats& o) {
    loads_words += o.loads_words;
    stores_words += o.stores_words;
    output_store_ops += o.output_store_ops;
    flops += o.flops;
    return *this;
  }
};

class ConvPlan {
 public:
  explicit ConvPlan(const engine::TpPlan& plan) : plan_(&plan) {}

  /// node_x: |V| x dim_x, edge_y: |E| x dim_y, edge_w: |E| x total_weights,
  /// node_z out: |V| x dim_z.
  template <typename T>
  ConvStats forward(const GraphCSR& g, const std::vector<T>& node_x,
                    const std::vector<T>& edge_y, const std::vector<T>& edge_w,
                    std::vector<T>& node_z, Mode mode, const ConvOptions& opt = {}) const;

  /// g_node_x aggregates per neighbor node via the transposed traversal;
  /// g_edge_y / g_edge_w are per edge.
  template <typename T>
  ConvStats backward(const GraphCSR& g, const std::vector<std::int64_t>& perm,
                     const std::vector<T>& node_x, const std::vector<T>& edge_y,
                     const std::vector<T>& edge_w, const std::vector<T>& g_node_z,
                     std::vector<T>& g_node_x, std::vector<T>& g_edge_y,
                     std::vector<T>& g_edge_w, Mode mode, const ConvOptions& opt = {}) const;

 private:
  const engine::TpPlan* plan_;
};

/// Reference path: gather node features per edge, one batched tensor
/// product, scatter-sum into node outputs (in edge order).
template <typename T>
ConvStats unfused_forward(const engine::TpPlan& plan, const GraphCSR& g,
                          const std::vector<T>& node_x, const std::vector<T>& edge_y,
                          const std::vector<T>& edge_w, std::vector<T>& node_z,
                          const engine::Options& opt = {});

template <typename T>
ConvStats unfused_backward(const engine::TpPlan& plan, const GraphCSR& g,
                           const std::vector<T>& node_x, const std::vector<T>& edge_y,
                           const std::vector<T>& edge_w, const std::vector<T>& g_node_z,
                           std::vector<T>& g_node_x, std::vector<T>& g_edge_y,
                           std::vector<T>& g_edge_w, const engine::Options& opt = {});

}  // namespace conv
}  // namespace cgforge

#endif
