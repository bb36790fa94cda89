#include "cgforge/oracle.hpp"

#include <stdexcept>

namespace cgforge::oracle {

DenseTP::DenseTP(const tpspec::ValidatedProblem& prob) : problem(&prob) {
  dim_x = prob.dim_x;
  dim_y = prob.dim_y;
  dim_z = prob.dim_z;
  total_weights = prob.total_weights;

  dim_z_pre = 0;
  for (const auto& r : prob.resolved) {
    pre_base.push_back(dim_z_pre);
    const int rows = r.kind == tpspec::Kind::B ? r.b : r.b_prime;
    dim_z_pre += rows * r.dz();
  }

  const std::size_t size = static_cast<std::size_t>(dim_y) * dim_x * dim_z_pre;
  if (size > std::size_t{10'000'000}) {
    throw std::invalid_argument("DenseTP: materialized tensor would exceed 1e7 entries");
  }
  p.assign(size, 0.0);

  for (std::size_t n = 0; n < prob.resolved.size(); ++n) {
    const auto& r = prob.resolved[n];
    const int dx = r.dx(), dz = r.dz();
    const int rows = r.kind == tpspec::Kind::B ? r.b : r.b_prime;
    for (int u = 0; u < rows; ++u) {
      for (const auto& e : r.block->entries) {
        const std::size_t j = r.y_offset + static_cast<std::size_t>(e.j);
        const std::size_t i = r.x_offset + static_cast<std::size_t>(u) * dx + e.i;
        const std::size_t rr = static_cast<std::size_t>(pre_base[n]) +
                               static_cast<std::size_t>(u) * dz + e.k;
        p[(j * dim_x + i) * dim_z_pre + rr] += e.v;
      }
    }
  }
}

std::vector<double> DenseTP::expand_weights(const double* w) const {
  std::vector<double> we(static_cast<std::size_t>(dim_z_pre) * dim_z, 0.0);
  for (std::size_t n = 0; n < problem->resolved.size(); ++n) {
    const auto& r = problem->resolved[n];
    const int dz = r.dz();
    if (r.kind == tpspec::Kind::B) {
      for (int t = 0; t < r.b; ++t) {
        const double wt = w[r.weight_offset + static_cast<std::size_t>(t)];
        for (int k = 0; k < dz; ++k) {
          const std::size_t row = static_cast<std::size_t>(pre_base[n]) +
                                  static_cast<std::size_t>(t) * dz + k;
          const std::size_t col = r.z_offset + static_cast<std::size_t>(t) * dz + k;
          we[row * dim_z + col] = wt;
        }
      }
    } else {
      for (int t = 0; t < r.b; ++t) {
        for (int u = 0; u < r.b_prime; ++u) {
          const double wtu =
              w[r.weight_offset + static_cast<std::size_t>(t) * r.w_row_stride + u];
          for (int k = 0; k < dz; ++k) {
            const std::size_t row = static_cast<std::size_t>(pre_base[n]) +
                                    static_cast<std::size_t>(u) * dz + k;
            const std::size_t col = r.z_offset + static_cast<std::size_t>(t) * dz + k;
            we[row * dim_z + col] = wtu;
          }
        }
      }
    }
  }
  return we;
}

std::vector<double> dense_forward(const DenseTP& d, const double* x, const double* y,
                                  const double* w_compressed) {
  // pre[r] = sum_{j,i} P[j,i,r] x[i] y[j], k-major accumulation.
  std::vector<double> pre(static_cast<std::size_t>(d.dim_z_pre), 0.0);
  for (int r = 0; r < d.dim_z_pre; ++r) {
    double acc = 0.0;
    for (int j = 0; j < d.dim_y; ++j) {
      for (int i = 0; i < d.dim_x; ++i) {
        acc += d.p[(static_cast<std::size_t>(j) * d.dim_x + i) * d.dim_z_pre + r] * x[i] * y[j];
      }
    }
    pre[static_cast<std::size_t>(r)] = acc;
  }
  const std::vector<double> we = d.expand_weights(w_compressed);
  std::vector<double> z(static_cast<std::size_t>(d.dim_z), 0.0);
  for (int k = 0; k < d.dim_z; ++k) {
    double acc = 0.0;
    for (int r = 0; r < d.dim_z_pre; ++r) {
      acc += pre[static_cast<std::size_t>(r)] * we[static_cast<std::size_t>(r) * d.dim_z + k];
    }
    z[static_cast<std::size_t>(k)] = acc;
  }
  return z;
}

std::uint64_t dense_forward_flops(const DenseTP& d) {
  // Two multiplies and one add per tensor entry, two per expanded-W entry.
  return 3ull * static_cast<std::uint64_t>(d.dim_y) * d.dim_x * d.dim_z_pre +
         2ull * static_cast<std::uint64_t>(d.dim_z_pre) * d.dim_z;
}

std::vector<double> loop_forward(const tpspec::ValidatedProblem& p, const double* x,
                                 const double* y, const double* w) {
  std::vector<double> z(static_cast<std::size_t>(p.dim_z), 0.0);
  for (const auto& r : p.resolved) {
    const int dx = r.dx(), dz = r.dz();
    // z' rows for every x lane, then the weight application.
    std::vector<double> zp(static_cast<std::size_t>(r.b_prime) * dz, 0.0);
    for (int u = 0; u < r.b_prime; ++u) {
      for (const auto& e : r.block->entries) {
        zp[static_cast<std::size_t>(u) * dz + e.k] +=
            e.v * x[r.x_offset + static_cast<std::size_t>(u) * dx + e.i] *
            y[r.y_offset + static_cast<std::size_t>(e.j)];
      }
    }
    if (r.kind == tpspec::Kind::B) {
      for (int t = 0; t < r.b; ++t) {
        const double wt = w[r.weight_offset + static_cast<std::size_t>(t)];
        for (int k = 0; k < dz; ++k) {
          z[r.z_offset + static_cast<std::size_t>(t) * dz + k] +=
              wt * zp[static_cast<std::size_t>(t) * dz + k];
        }
      }
    } else {
      for (int t = 0; t < r.b; ++t) {
        for (int k = 0; k < dz; ++k) {
          double acc = 0.0;
          for (int u = 0; u < r.b_prime; ++u) {
            acc += w[r.weight_offset + static_cast<std::size_t>(t) * r.w_row_stride + u] *
                   zp[static_cast<std::size_t>(u) * dz + k];
          }
          z[r.z_offset + static_cast<std::size_t>(t) * dz + k] += acc;
        }
      }
    }
  }
  return z;
}

DenseGrads dense_backward(const DenseTP& d, const double* x, const double* y,
                          const double* w_compressed, const double* gz) {
  const std::vector<double> we = d.expand_weights(w_compressed);

  // gpre[r] = sum_k W[r,k] gz[k]
  std::vector<double> gpre(static_cast<std::size_t>(d.dim_z_pre), 0.0);
  for (int r = 0; r < d.dim_z_pre; ++r) {
    double acc = 0.0;
    for (int k = 0; k < d.dim_z; ++k) {
      acc += we[static_cast<std::size_t>(r) * d.dim_z + k] * gz[k];
    }
    gpre[static_cast<std::size_t>(r)] = acc;
  }

  DenseGrads g;
  g.x.assign(static_cast<std::size_t>(d.dim_x), 0.0);
  g.y.assign(static_cast<std::size_t>(d.dim_y), 0.0);
  g.w.assign(static_cast<std::size_t>(d.total_weights), 0.0);

  for (int j = 0; j < d.dim_y; ++j) {
    for (int i = 0; i < d.dim_x; ++i) {
      const double* prow = &d.p[(static_cast<std::size_t>(j) * d.dim_x + i) * d.dim_z_pre];
      double acc_x = 0.0;
      for (int r = 0; r < d.dim_z_pre; ++r) acc_x += prow[r] * gpre[static_cast<std::size_t>(r)];
      g.x[static_cast<std::size_t>(i)] += acc_x * y[j];
      g.y[static_cast<std::size_t>(j)] += acc_x * x[i];
    }
  }

  // pre[r], then gW[r,k] = pre[r] gz[k] compressed back onto the layout.
  std::vector<double> pre(static_cast<std::size_t>(d.dim_z_pre), 0.0);
  for (int r = 0; r < d.dim_z_pre; ++r) {
    double acc = 0.0;
    for (int j = 0; j < d.dim_y; ++j) {
      for (int i = 0; i < d.dim_x; ++i) {
        acc += d.p[(static_cast<std::size_t>(j) * d.dim_x + i) * d.dim_z_pre + r] * x[i] * y[j];
      }
    }
    pre[static_cast<std::size_t>(r)] = acc;
  }
  const auto& prob = *d.problem;
  for (std::size_t n = 0; n < prob.resolved.size(); ++n) {
    const auto& r = prob.resolved[n];
    const int dz = r.dz();
    if (r.kind == tpspec::Kind::B) {
      for (int t = 0; t < r.b; ++t) {
        double acc = 0.0;
        for (int k = 0; k < dz; ++k) {
          acc += pre[static_cast<std::size_t>(d.pre_base[n]) + static_cast<std::size_t>(t) * dz +
                     k] *
                 gz[r.z_offset + static_cast<std::size_t>(t) * dz + k];
        }
        g.w[r.weight_offset + static_cast<std::size_t>(t)] += acc;
      }
    } else {
      for (int t = 0; t < r.b; ++t) {
        for (int u = 0; u < r.b_prime; ++u) {
          double acc = 0.0;
          for (int k = 0; k < dz; ++k) {
            acc += pre[static_cast<std::size_t>(d.pre_base[n]) +
                       static_cast<std::size_t>(u) * dz + k] *
                   gz[r.z_offset + static_cast<std::size_t>(t) * dz + k];
          }
          g.w[r.weight_offset + static_cast<std::size_t>(t) * r.w_row_stride + u] += acc;
        }
      }
    }
  }
  return g;
}

std::vector<double> fd_gradient(
    const std::function<std::vector<double>(const std::vector<double>&)>& f,
    const std::vector<double>& point, std::size_t probe, double h) {
  if (h <= 0.0) throw std::invalid_argument("fd_gradient: step must be positive");
  std::vector<double> plus = point, minus = point;
  plus[probe] += h;
  minus[probe] -= h;
  const std::vector<double> fp = f(plus);
  const std::vector<double> fm = f(minus);
  std::vector<double> out(fp.size());
  for (std::size_t k = 0; k < fp.size(); ++k) out[k] = (fp[k] - fm[k]) / (2.0 * h);
  return out;
}

std::vector<double> fd_vjp(
    const std::function<std::vector<double>(const std::vector<double>&)>& f,
    const std::vector<double>& point, const std::vector<double>& gz, double h) {
  std::vector<double> grad(point.size(), 0.0);
  for (std::size_t i = 0; i < point.size(); ++i) {
    const std::vector<double> col = fd_gradient(f, point, i, h);
    double acc = 0.0;
    for (std::size_t k = 0; k < col.size(); ++k) acc += gz[k] * col[k];
    grad[i] = acc;
  }
  return grad;
}

}  // namespace cgforge::oracle
