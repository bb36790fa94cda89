#ifndef CGFORGE_IRREPS_HPP
#define CGFORGE_IRREPS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgforge {

/// O(3) irrep parser and block-diagonal representation matrices.
///
/// Conventions used throughout this library:
///  - Rotations are intrinsic ZYZ Euler angles: R = Rz(alpha) * Ry(beta) * Rz(gamma).
///  - The complex Wigner small-d matrix is evaluated by the explicit factorial
///    sum; the real representation matrix is obtained by conjugating the
///    complex D-matrix with the complex-to-real spherical-harmonic change of
///    basis (see real_basis_matrix). Imaginary residue is asserted <= 1e-12
///    and dropped.
///  - Inversion acts as a scalar per block: +1 on even-parity blocks, -1 on
///    odd-parity blocks, independent of l.
namespace irreps {

enum class Parity : std::uint8_t { even, odd };

inline char parity_char(Parity p) { return p == Parity::even ? 'e' : 'o'; }

struct Irrep {
  int l = 0;
  Parity parity = Parity::even;

  int dim() const { return 2 * l + 1; }
  bool operator==(const Irrep&) const = default;
};

struct MulIrrep {
  int mult = 1;
  Irrep ir;

  int dim() const { return mult * ir.dim(); }
  bool operator==(const MulIrrep&) const = default;
};

/// Ordered list of (multiplicity, irrep) blocks. Segment k occupies the word
/// range [offset(k), offset(k) + blocks[k].dim()) given by prefix sums.
struct Irreps {
  std::vector<MulIrrep> blocks;

  int dim() const;
  int num_segments() const { return static_cast<int>(blocks.size()); }
  /// Word offset of segment `seg` (0-based). seg == num_segments() yields dim().
  int offset(int seg) const;
  std::string str() const;
  bool operator==(const Irreps&) const = default;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses `<mult>x<l><e|o>` blocks joined by '+'. Blocks are kept in textual
/// order; adjacent identical irreps are not merged.
Irreps parse_irreps(const std::string& text);

inline int irreps_dim(const Irreps& ir) { return ir.dim(); }

/// Element of O(3): a proper rotation in ZYZ Euler angles, optionally
/// composed with the inversion.
struct Rotation {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  bool improper = false;

  static Rotation identity() { return {}; }
  static Rotation inversion() { return {0.0, 0.0, 0.0, true}; }
};

/// 3x3 proper rotation matrix for the ZYZ angles (inversion ignored).
Eigen::Matrix3d rotation_matrix_3d(const Rotation& g);

/// Group composition: rotation_matrix_3d(compose(a,b)) ==
/// rotation_matrix_3d(a) * rotation_matrix_3d(b), improper flags xor.
Rotation compose(const Rotation& a, const Rotation& b);

/// Complex-to-real spherical-harmonic change of basis, unitary, (2l+1)^2.
/// Row p (real index, p = -l..l shifted by +l), column m (complex index):
///   p = 0 : picks m = 0;
///   p > 0 : ( (-1)^p Y_{l}^{p} + Y_l^{-p} ) / sqrt(2);
///   p < 0 : i ( Y_l^{-|p|} - (-1)^p Y_l^{|p|} ) / sqrt(2).
Eigen::MatrixXcd real_basis_matrix(int l);

/// Complex Wigner D-matrix for the ZYZ angles, dimension 2l+1.
Eigen::MatrixXcd wigner_d_complex(int l, double alpha, double beta, double gamma);

/// Real Wigner D-matrix of order l, including the parity sign for improper g.
Eigen::MatrixXd wigner_d_real(int l, const Rotation& g, Parity parity = Parity::even);

/// Block-diagonal representation matrix of `ir` evaluated at g.
Eigen::MatrixXd rep_matrix(const Irreps& ir, const Rotation& g);

/// Exact factorial (from a wide-integer table), valid for 0 <= n <= 33.
double factorial(int n);

}  // namespace irreps
}  // namespace cgforge

#endif
