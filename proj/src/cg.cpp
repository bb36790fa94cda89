#include "cgforge/cg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <sstream>

#include "cgforge/irreps.hpp"

namespace cgforge::cg {

namespace {

using irreps::factorial;

bool g_corrupt = false;

}  // namespace

void set_corrupt_for_testing(bool enabled) { g_corrupt = enabled; }

double complex_cg(int l1, int l2, int l3, int m1, int m2, int m3) {
  if (std::abs(m1) > l1 || std::abs(m2) > l2 || std::abs(m3) > l3) {
    throw std::invalid_argument("complex_cg: |m| exceeds l");
  }
  if (!triangle_rule(l1, l2, l3)) {
    throw TriangleError("complex_cg: triangle rule violated for (" + std::to_string(l1) + "," +
                        std::to_string(l2) + "," + std::to_string(l3) + ")");
  }
  if (m1 + m2 != m3) return 0.0;
  if (l1 + l2 + l3 + 1 > 33) {
    throw std::invalid_argument("complex_cg: l1+l2+l3 too large for exact factorial table");
  }

  const double prefactor =
      std::sqrt((2.0 * l3 + 1.0) * factorial(l1 + l2 - l3) * factorial(l1 - l2 + l3) *
                factorial(-l1 + l2 + l3) / factorial(l1 + l2 + l3 + 1)) *
      std::sqrt(factorial(l3 + m3) * factorial(l3 - m3) * factorial(l1 - m1) *
                factorial(l1 + m1) * factorial(l2 - m2) * factorial(l2 + m2));

  const int k_min = std::max({0, l2 - l3 - m1, l1 - l3 + m2});
  const int k_max = std::min({l1 + l2 - l3, l1 - m1, l2 + m2});
  double sum = 0.0;
  for (int k = k_min; k <= k_max; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    sum += sign / (factorial(k) * factorial(l1 + l2 - l3 - k) * factorial(l1 - m1 - k) *
                   factorial(l2 + m2 - k) * factorial(l3 - l2 + m1 + k) *
                   factorial(l3 - l1 - m2 + k));
  }
  return prefactor * sum;
}

namespace {

CGBlock build_block(int l1, int l2, int l3) {
  const int d1 = 2 * l1 + 1, d2 = 2 * l2 + 1, d3 = 2 * l3 + 1;

  // Complex CG tensor, then contract every mode with the real basis change.
  const Eigen::MatrixXcd u1 = irreps::real_basis_matrix(l1);
  const Eigen::MatrixXcd u2 = irreps::real_basis_matrix(l2);
  const Eigen::MatrixXcd u3 = irreps::real_basis_matrix(l3);

  std::vector<std::complex<double>> t(static_cast<std::size_t>(d1) * d2 * d3);
  const auto at = [&](int i, int j, int k) -> std::complex<double>& {
    return t[(static_cast<std::size_t>(i) * d2 + j) * d3 + k];
  };

  // P[i,j,k] = sum_{m1,m2,m3} U1[i,m1] U2[j,m2] conj(U3[k,m3]) C[m1,m2,m3].
  // The complex tensor is sparse (m1 + m2 == m3), so iterate its support.
  for (int m1 = -l1; m1 <= l1; ++m1) {
    for (int m2 = -l2; m2 <= l2; ++m2) {
      const int m3 = m1 + m2;
      if (std::abs(m3) > l3) continue;
      const double c = complex_cg(l1, l2, l3, m1, m2, m3);
      if (c == 0.0) continue;
      for (int i = 0; i < d1; ++i) {
        const std::complex<double> f1 = u1(i, l1 + m1);
        if (f1 == 0.0) continue;
        for (int j = 0; j < d2; ++j) {
          const std::complex<double> f2 = u2(j, l2 + m2);
          if (f2 == 0.0) continue;
          for (int k = 0; k < d3; ++k) {
            const std::complex<double> f3 = std::conj(u3(k, l3 + m3));
            if (f3 == 0.0) continue;
            at(i, j, k) += f1 * f2 * f3 * c;
          }
        }
      }
    }
  }

  // Global phase: largest-magnitude entry becomes real and positive.
  std::complex<double> top = 0.0;
  for (const auto& v : t) {
    if (std::abs(v) > std::abs(top)) top = v;
  }
  if (std::abs(top) > 0.0) {
    const std::complex<double> phase = std::conj(top) / std::abs(top);
    for (auto& v : t) v *= phase;
  }

  constexpr double kZeroTol = 1e-12;
  CGBlock block{l1, l2, l3, {}};
  for (int k = 0; k < d3; ++k) {
    for (int i = 0; i < d1; ++i) {
      for (int j = 0; j < d2; ++j) {
        const std::complex<double> v = at(i, j, k);
        if (std::abs(v.imag()) > kZeroTol) {
          throw std::runtime_error("cg_block: imaginary residue " +
                                   std::to_string(std::abs(v.imag())));
        }
        if (std::abs(v.real()) > kZeroTol) {
          block.entries.push_back({i, j, k, v.real()});
        }
      }
    }
  }

  // Rescale each output slice so sum_{ij} P[ijk]^2 == 1 exactly as computed.
  std::vector<double> norm(static_cast<std::size_t>(d3), 0.0);
  for (const auto& e : block.entries) norm[static_cast<std::size_t>(e.k)] += e.v * e.v;
  for (auto& e : block.entries) {
    const double n = norm[static_cast<std::size_t>(e.k)];
    if (n > 0.0) e.v /= std::sqrt(n);
  }

  if (g_corrupt && !block.entries.empty()) {
    block.entries.front().v *= 1.0 + 1e-3;
  }
  return block;
}

}  // namespace

std::shared_ptr<const CGBlock> cg_block(int l1, int l2, int l3) {
  if (l1 < 0 || l2 < 0 || l3 < 0) {
    throw std::invalid_argument("cg_block: negative l");
  }
  if (!triangle_rule(l1, l2, l3)) {
    throw TriangleError("cg_block: triangle rule violated for (" + std::to_string(l1) + "," +
                        std::to_string(l2) + "," + std::to_string(l3) + ")");
  }

  static std::mutex memo_mutex;
  static std::map<std::tuple<int, int, int, bool>, std::shared_ptr<const CGBlock>> memo;

  const auto key = std::make_tuple(l1, l2, l3, g_corrupt);
  {
    std::lock_guard<std::mutex> lock(memo_mutex);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
  }
  auto block = std::make_shared<const CGBlock>(build_block(l1, l2, l3));
  std::lock_guard<std::mutex> lock(memo_mutex);
  auto [it, inserted] = memo.emplace(key, std::move(block));
  return it->second;  // first insert wins; values never change
}

double block_sparsity(const CGBlock& b) {
  return 1.0 - static_cast<double>(b.entries.size()) / static_cast<double>(b.dense_size());
}

std::string to_json(const CGBlock& b) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"l1\":" << b.l1 << ",\"l2\":" << b.l2 << ",\"l3\":" << b.l3 << ",\"entries\":[";
  for (std::size_t n = 0; n < b.entries.size(); ++n) {
    const auto& e = b.entries[n];
    if (n > 0) os << ",";
    os << "[" << e.i << "," << e.j << "," << e.k << "," << e.v << "]";
  }
  os << "]}";
  return os.str();
}

}  // namespace cgforge::cg
