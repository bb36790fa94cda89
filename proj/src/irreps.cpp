#include "cgforge/irreps.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <complex>
#include <sstream>

namespace cgforge::irreps {

namespace {

constexpr int kMaxFactorial = 33;  // 33! is the largest fitting in 128 bits

const std::array<double, kMaxFactorial + 1>& factorial_table() {
  static const std::array<double, kMaxFactorial + 1> table = [] {
    std::array<double, kMaxFactorial + 1> t{};
    unsigned __int128 acc = 1;
    t[0] = 1.0;
    for (int n = 1; n <= kMaxFactorial; ++n) {
      acc *= static_cast<unsigned>(n);
      t[n] = static_cast<double>(acc);
    }
    return t;
  }();
  return table;
}

}  // namespace

double factorial(int n) {
  if (n < 0 || n > kMaxFactorial) {
    throw std::invalid_argument("factorial: argument out of range [0, 33]: " +
                                std::to_string(n));
  }
  return factorial_table()[static_cast<std::size_t>(n)];
}

int Irreps::dim() const {
  int d = 0;
  for (const auto& b : blocks) d += b.dim();
  return d;
}

int Irreps::offset(int seg) const {
  int off = 0;
  for (int k = 0; k < seg; ++k) off += blocks[static_cast<std::size_t>(k)].dim();
  return off;
}

std::string Irreps::str() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (k > 0) os << " + ";
    os << blocks[k].mult << 'x' << blocks[k].ir.l << parity_char(blocks[k].ir.parity);
  }
  return os.str();
}

Irreps parse_irreps(const std::string& text) {
  Irreps out;
  std::size_t pos = 0;
  const auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  const auto fail = [&](const std::string& token, const std::string& why) -> ParseError {
    return ParseError("bad irreps token \"" + token + "\": " + why);
  };

  skip_ws();
  bool first = true;
  while (pos < text.size() || first) {
    if (!first) {
      if (pos >= text.size() || text[pos] != '+') {
        throw ParseError("expected '+' between irreps blocks near \"" + text.substr(pos) + "\"");
      }
      ++pos;
      skip_ws();
    }
    first = false;

    std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '+') {
      ++pos;
    }
    std::string token = text.substr(start, pos - start);
    if (token.empty()) throw ParseError("empty irreps token in \"" + text + "\"");

    std::size_t xpos = token.find('x');
    if (xpos == std::string::npos || xpos == 0 || xpos + 1 >= token.size()) {
      throw fail(token, "expected <mult>x<l><e|o>");
    }
    const std::string mult_s = token.substr(0, xpos);
    const std::string rest = token.substr(xpos + 1);
    if (rest.size() < 2) throw fail(token, "expected <l><e|o> after 'x'");

    const char suffix = rest.back();
    const std::string l_s = rest.substr(0, rest.size() - 1);
    if (suffix != 'e' && suffix != 'o') throw fail(token, "parity must be 'e' or 'o'");

    for (char c : mult_s)
      if (!std::isdigit(static_cast<unsigned char>(c))) throw fail(token, "multiplicity is not a number");
    for (char c : l_s)
      if (!std::isdigit(static_cast<unsigned char>(c))) throw fail(token, "l is not a number");

    long mult = 0, l = 0;
    try {
      mult = std::stol(mult_s);
      l = std::stol(l_s);
    } catch (const std::exception&) {
      throw fail(token, "number out of range");
    }
    if (mult <= 0) throw fail(token, "multiplicity must be positive");
    if (l < 0) throw fail(token, "l must be non-negative");

    out.blocks.push_back({static_cast<int>(mult),
                          {static_cast<int>(l), suffix == 'e' ? Parity::even : Parity::odd}});
    skip_ws();
  }
  return out;
}

Eigen::Matrix3d rotation_matrix_3d(const Rotation& g) {
  const double ca = std::cos(g.alpha), sa = std::sin(g.alpha);
  const double cb = std::cos(g.beta), sb = std::sin(g.beta);
  const double cc = std::cos(g.gamma), sc = std::sin(g.gamma);
  Eigen::Matrix3d rz_a, ry_b, rz_c;
  rz_a << ca, -sa, 0, sa, ca, 0, 0, 0, 1;
  ry_b << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  rz_c << cc, -sc, 0, sc, cc, 0, 0, 0, 1;
  return rz_a * ry_b * rz_c;
}

namespace {

Rotation euler_from_matrix(const Eigen::Matrix3d& r, bool improper) {
  Rotation g;
  g.improper = improper;
  const double sb = std::hypot(r(0, 2), r(1, 2));
  g.beta = std::atan2(sb, r(2, 2));
  if (sb > 1e-12) {
    g.alpha = std::atan2(r(1, 2), r(0, 2));
    g.gamma = std::atan2(r(2, 1), -r(2, 0));
  } else if (r(2, 2) > 0.0) {
    // beta == 0: only alpha + gamma is determined
    g.alpha = std::atan2(r(1, 0), r(0, 0));
    g.gamma = 0.0;
  } else {
    // beta == pi: only alpha - gamma is determined
    g.alpha = std::atan2(-r(1, 0), -r(0, 0));
    g.gamma = 0.0;
  }
  return g;
}

}  // namespace

Rotation compose(const Rotation& a, const Rotation& b) {
  const Eigen::Matrix3d r = rotation_matrix_3d(a) * rotation_matrix_3d(b);
  return euler_from_matrix(r, a.improper != b.improper);
}

Eigen::MatrixXcd real_basis_matrix(int l) {
  if (l < 0) throw std::invalid_argument("real_basis_matrix: negative l");
  const int d = 2 * l + 1;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(d, d);
  u(l, l) = 1.0;
  for (int m = 1; m <= l; ++m) {
    const double cs = (m % 2 == 0) ? 1.0 : -1.0;  // Condon-Shortley (-1)^m
    u(l + m, l + m) = cs * inv_sqrt2;
    u(l + m, l - m) = inv_sqrt2;
    u(l - m, l + m) = std::complex<double>(0.0, -cs * inv_sqrt2);
    u(l - m, l - m) = std::complex<double>(0.0, inv_sqrt2);
  }
  return u;
}

namespace {

double wigner_small_d(int l, int m1, int m2, double beta) {
  // Explicit factorial sum for d^l_{m1,m2}(beta).
  const double cb = std::cos(beta / 2.0);
  const double sb = std::sin(beta / 2.0);
  const int s_min = std::max(0, m2 - m1);
  const int s_max = std::min(l + m2, l - m1);
  double sum = 0.0;
  for (int s = s_min; s <= s_max; ++s) {
    const double denom = factorial(l + m2 - s) * factorial(s) * factorial(m1 - m2 + s) *
                         factorial(l - m1 - s);
    const double sign = ((m1 - m2 + s) % 2 == 0) ? 1.0 : -1.0;
    sum += sign * std::pow(cb, 2 * l + m2 - m1 - 2 * s) * std::pow(sb, m1 - m2 + 2 * s) / denom;
  }
  return sum * std::sqrt(factorial(l + m1) * factorial(l - m1) * factorial(l + m2) *
                         factorial(l - m2));
}

}  // namespace

Eigen::MatrixXcd wigner_d_complex(int l, double alpha, double beta, double gamma) {
  const int d = 2 * l + 1;
  Eigen::MatrixXcd out(d, d);
  const std::complex<double> im(0.0, 1.0);
  for (int m1 = -l; m1 <= l; ++m1) {
    for (int m2 = -l; m2 <= l; ++m2) {
      out(l + m1, l + m2) = std::exp(-im * (alpha * m1)) * wigner_small_d(l, m1, m2, beta) *
                            std::exp(-im * (gamma * m2));
    }
  }
  return out;
}

Eigen::MatrixXd wigner_d_real(int l, const Rotation& g, Parity parity) {
  const Eigen::MatrixXcd u = real_basis_matrix(l);
  const Eigen::MatrixXcd dc = wigner_d_complex(l, g.alpha, g.beta, g.gamma);
  const Eigen::MatrixXcd dr = u * dc * u.adjoint();
  const double residue = dr.imag().cwiseAbs().maxCoeff();
  if (residue > 1e-12) {
    throw std::runtime_error("wigner_d_real: imaginary residue " + std::to_string(residue));
  }
  Eigen::MatrixXd out = dr.real();
  if (g.improper && parity == Parity::odd) out = -out;
  return out;
}

Eigen::MatrixXd rep_matrix(const Irreps& ir, const Rotation& g) {
  const int n = ir.dim();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  int off = 0;
  for (const auto& b : ir.blocks) {
    const Eigen::MatrixXd d = wigner_d_real(b.ir.l, g, b.ir.parity);
    const int bd = b.ir.dim();
    for (int c = 0; c < b.mult; ++c) {
      out.block(off, off, bd, bd) = d;
      off += bd;
    }
  }
  return out;
}

}  // namespace cgforge::irreps
