#ifndef CGFORGE_CG_HPP
#define CGFORGE_CG_HPP

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgforge {

/// Real-basis Clebsch-Gordan coefficient blocks.
///
/// cg_block builds the complex CG tensor from the Racah formula
/// (Condon-Shortley convention), changes all three modes to the real
/// spherical-harmonic basis, fixes the global phase so the largest-magnitude
/// entry is real and positive, drops entries with |v| <= 1e-12, and rescales
/// so that sum_{ij} P[ijk] P[ijk'] = delta_{kk'}.
namespace cg {

struct CGEntry {
  int i = 0;  // x index, < 2*l1+1
  int j = 0;  // y index, < 2*l2+1
  int k = 0;  // z index, < 2*l3+1
  double v = 0.0;
};

struct CGBlock {
  int l1 = 0;
  int l2 = 0;
  int l3 = 0;
  std::vector<CGEntry> entries;  // sorted lexicographically by (k, i, j)

  int dim1() const { return 2 * l1 + 1; }
  int dim2() const { return 2 * l2 + 1; }
  int dim3() const { return 2 * l3 + 1; }
  std::size_t dense_size() const {
    return static_cast<std::size_t>(dim1()) * dim2() * dim3();
  }
};

struct TriangleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline bool triangle_rule(int l1, int l2, int l3) {
  return l3 >= std::abs(l1 - l2) && l3 <= l1 + l2;
}

/// Complex CG coefficient <l1 m1 l2 m2 | l3 m3> via the Racah sum.
double complex_cg(int l1, int l2, int l3, int m1, int m2, int m3);

/// Real-basis CG block for one (l1, l2, l3) triple. Results are memoized;
/// repeated calls return the same shared block.
std::shared_ptr<const CGBlock> cg_block(int l1, int l2, int l3);

double block_sparsity(const CGBlock& b);

/// JSON dump `{l1,l2,l3,entries:[[i,j,k,v],...]}` for golden tests.
std::string to_json(const CGBlock& b);

// Test hook: when enabled, cg_block perturbs one coefficient of freshly built
// blocks (memo cleared). Used by the verify command's negative control.
void set_corrupt_for_testing(bool enabled);

}  // namespace cg
}  // namespace cgforge

#endif
