#ifndef CGFORGE_TESTS_HELPERS_HPP
#define CGFORGE_TESTS_HELPERS_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cgforge/rng.hpp"
#include "cgforge/tpspec.hpp"

namespace testutil {

inline double rel_error(const std::vector<double>& got, const std::vector<double>& want) {
  if (got.size() != want.size()) throw std::invalid_argument("rel_error: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double d = got[i] - want[i];
    num += d * d;
    den += want[i] * want[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline double rel_error_f(const std::vector<float>& got, const std::vector<double>& want) {
  return rel_error(std::vector<double>(got.begin(), got.end()), want);
}

struct ProblemConfig {
  int max_l = 4;
  int max_mult = 64;
  int max_x_segments = 3;
  int max_y_segments = 2;
  int max_instructions = 4;
  std::size_t max_dense_entries = 2'000'000;  // keeps the dense oracle affordable
};

/// Deterministic random problem: irreps with l <= max_l, y multiplicities 1,
/// mixed B/C instructions, occasional shared x/y/z segments.
inline cgforge::tpspec::ValidatedProblem random_problem(std::uint64_t seed,
                                                        const ProblemConfig& cfg = {}) {
  using namespace cgforge;
  for (std::uint64_t attempt = 0;; ++attempt) {
    rng::NormalGen gen(seed * 7919 + attempt * 104729 + 13);

    irreps::Irreps x_ir, y_ir, z_ir;
    const int nx = 1 + static_cast<int>(gen.below(cfg.max_x_segments));
    for (int i = 0; i < nx; ++i) {
      x_ir.blocks.push_back({1 + static_cast<int>(gen.below(cfg.max_mult)),
                             {static_cast<int>(gen.below(cfg.max_l + 1)),
                              (gen.bits() & 1) ? irreps::Parity::even : irreps::Parity::odd}});
    }
    const int ny = 1 + static_cast<int>(gen.below(cfg.max_y_segments));
    for (int i = 0; i < ny; ++i) {
      y_ir.blocks.push_back({1,
                             {static_cast<int>(gen.below(cfg.max_l + 1)),
                              (gen.bits() & 1) ? irreps::Parity::even : irreps::Parity::odd}});
    }

    std::vector<tpspec::Instruction> instrs;
    const int ni = 1 + static_cast<int>(gen.below(cfg.max_instructions));
    for (int n = 0; n < ni; ++n) {
      const int xs = 1 + static_cast<int>(gen.below(nx));
      const int ys = 1 + static_cast<int>(gen.below(ny));
      const auto& bx = x_ir.blocks[static_cast<std::size_t>(xs - 1)];
      const auto& by = y_ir.blocks[static_cast<std::size_t>(ys - 1)];
      const int lo = std::abs(bx.ir.l - by.ir.l);
      const int hi = std::min(bx.ir.l + by.ir.l, cfg.max_l);
      if (lo > hi) continue;
      const int l3 = lo + static_cast<int>(gen.below(hi - lo + 1));
      const auto p3 = (bx.ir.parity == irreps::Parity::odd) != (by.ir.parity == irreps::Parity::odd)
                          ? irreps::Parity::odd
                          : irreps::Parity::even;
      const auto kind = (gen.bits() & 1) ? tpspec::Kind::B : tpspec::Kind::C;
      const int mult_z = kind == tpspec::Kind::B ? bx.mult
                                                 : 1 + static_cast<int>(gen.below(cfg.max_mult));
      int zs = 0;
      if ((gen.bits() & 3) == 0) {  // reuse a compatible segment when possible
        for (std::size_t k = 0; k < z_ir.blocks.size(); ++k) {
          const auto& bz = z_ir.blocks[k];
          if (bz.ir.l == l3 && bz.ir.parity == p3 && bz.mult == mult_z) {
            zs = static_cast<int>(k) + 1;
            break;
          }
        }
      }
      if (zs == 0) {
        z_ir.blocks.push_back({mult_z, {l3, p3}});
        zs = z_ir.num_segments();
      }
      instrs.push_back({xs, ys, zs, kind});
    }
    if (instrs.empty()) continue;

    auto vr = tpspec::validate(x_ir, y_ir, z_ir, instrs);
    if (!vr.ok()) continue;

    // Dense-oracle affordability: dim_y * dim_x * dim_z_pre.
    std::size_t z_pre = 0;
    for (const auto& r : vr.problem->resolved) {
      z_pre += static_cast<std::size_t>(r.kind == tpspec::Kind::B ? r.b : r.b_prime) *
               static_cast<std::size_t>(r.dz());
    }
    const std::size_t dense = static_cast<std::size_t>(vr.problem->dim_y) *
                              static_cast<std::size_t>(vr.problem->dim_x) * z_pre;
    if (dense > cfg.max_dense_entries) continue;
    return *vr.problem;
  }
}

inline cgforge::tpspec::ValidatedProblem scalar_problem() {
  using namespace cgforge;
  const auto ir = irreps::parse_irreps("1x0e");
  auto vr = tpspec::validate(ir, ir, ir, {{1, 1, 1, tpspec::Kind::B}});
  return *vr.problem;
}

inline cgforge::tpspec::ValidatedProblem paper_problem() {
  using namespace cgforge;
  auto vr = tpspec::validate(irreps::parse_irreps("32x2e + 32x1e"),
                             irreps::parse_irreps("1x3e + 1x1e"),
                             irreps::parse_irreps("32x5e + 16x2e + 32x3e"),
                             {{1, 1, 1, tpspec::Kind::B},
                              {1, 2, 2, tpspec::Kind::C},
                              {1, 2, 3, tpspec::Kind::C}});
  return *vr.problem;
}

}  // namespace testutil

#endif
