#ifndef CGFORGE_ORACLE_HPP
#define CGFORGE_ORACLE_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "cgforge/tpspec.hpp"

namespace cgforge {

/// Independent reference implementations, kept simple enough to audit by
/// eye. Performance is irrelevant here.
namespace oracle {

/// Explicitly materialized coefficient tensor (dim_y x dim_x x dim_z_pre)
/// and the expanded weight matrix (dim_z_pre x dim_z) with structural zeros.
/// dim_z_pre stacks one (rows x dz) block per instruction, rows = b' for
/// kind C and b for kind B.
struct DenseTP {
  int dim_x = 0, dim_y = 0, dim_z = 0, dim_z_pre = 0;
  std::uint32_t total_weights = 0;
  std::vector<double> p;  // [j * dim_x * dim_z_pre + i * dim_z_pre + r]
  std::vector<int> pre_base;  // per resolved instruction

  explicit DenseTP(const tpspec::ValidatedProblem& problem);

  /// Expanded weights from the compressed per-row layout.
  std::vector<double> expand_weights(const double* w_compressed) const;

  const tpspec::ValidatedProblem* problem = nullptr;
};

/// z = einsum("jir,i,j,rk->k", P, x, y, W_expanded), summation k-major.
std::vector<double> dense_forward(const DenseTP& d, const double* x, const double* y,
                                  const double* w_compressed);

/// Second route: plain loop nest over instructions and block indices,
/// no materialized tensor.
std::vector<double> loop_forward(const tpspec::ValidatedProblem& p, const double* x,
                                 const double* y, const double* w_compressed);

struct DenseGrads {
  std::vector<double> x, y, w;
};

/// Analytic gradients through the materialized tensor.
DenseGrads dense_backward(const DenseTP& d, const double* x, const double* y,
                          const double* w_compressed, const double* gz);

std::uint64_t dense_forward_flops(const DenseTP& d);

/// Central-difference directional derivatives: column `probe` of the
/// Jacobian of f at `point`.
std::vector<double> fd_gradient(const std::function<std::vector<double>(const std::vector<double>&)>& f,
                                const std::vector<double>& point, std::size_t probe, double h);

/// Gradient of the scalar map p -> dot(gz, f(p)) via central differences,
/// one probe per coordinate.
std::vector<double> fd_vjp(const std::function<std::vector<double>(const std::vector<double>&)>& f,
                           const std::vector<double>& point, const std::vector<double>& gz,
                           double h);

}  // namespace oracle
}  // namespace cgforge

#endif
