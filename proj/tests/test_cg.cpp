#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>
#include <thread>

#include "cgforge/cg.hpp"
#include "cgforge/irreps.hpp"
#include "cgforge/rng.hpp"

using namespace cgforge;
using cg::CGBlock;

namespace {

// Brute-force Racah sum, written independently of cg::complex_cg.
double racah_reference(int l1, int l2, int l3, int m1, int m2, int m3) {
  if (m1 + m2 != m3) return 0.0;
  const auto f = [](int n) { return cgforge::irreps::factorial(n); };
  double pre = (2.0 * l3 + 1.0);
  pre *= f(l3 + l1 - l2) / f(l1 + l2 + l3 + 1);
  pre *= f(l3 - l1 + l2) / f(l1 - m1);
  pre *= f(l1 + l2 - l3) / f(l1 + m1);
  pre *= f(l3 + m3) / f(l2 - m2);
  pre *= f(l3 - m3) / f(l2 + m2);
  pre = std::sqrt(pre);
  int nmin = std::max(0, -(l1 - l2 - m3));
  int nmax = std::min(l3 - l1 + l2, l3 + m3);
  double sum = 0.0;
  for (int n = nmin; n <= nmax; ++n) {
    const double sign = ((n + l2 + m2) % 2 == 0) ? 1.0 : -1.0;
    sum += sign * f(l2 + l3 + m1 - n) * f(l1 - m1 + n) /
           (f(n) * f(l3 - l1 + l2 - n) * f(l3 + m3 - n) * f(n + l1 - l2 - m3));
  }
  return pre * sum;
}

double dense_at(const CGBlock& b, int i, int j, int k) {
  for (const auto& e : b.entries) {
    if (e.i == i && e.j == j && e.k == k) return e.v;
  }
  return 0.0;
}

}  // namespace

TEST_CASE("complex_cg basics") {
  CHECK(cg::complex_cg(0, 0, 0, 0, 0, 0) == 1.0);
  CHECK(cg::complex_cg(1, 1, 2, 1, 0, 1) != 0.0);
  CHECK(cg::complex_cg(1, 1, 2, 1, 0, 0) == 0.0);  // selection rule m1+m2 != m3
  CHECK(cg::complex_cg(1, 1, 2, 1, 1, 2) == doctest::Approx(1.0).epsilon(1e-14));  // stretched
  CHECK_THROWS_AS(cg::complex_cg(1, 1, 5, 0, 0, 0), cg::TriangleError);
  CHECK_THROWS_AS(cg::complex_cg(1, 1, 2, 2, 0, 2), std::invalid_argument);
}

TEST_CASE("complex_cg matches the reference Racah sum") {
  for (int l1 = 0; l1 <= 3; ++l1) {
    for (int l2 = 0; l2 <= 3; ++l2) {
      for (int l3 = std::abs(l1 - l2); l3 <= l1 + l2; ++l3) {
        for (int m1 = -l1; m1 <= l1; ++m1) {
          for (int m2 = -l2; m2 <= l2; ++m2) {
            const int m3 = m1 + m2;
            if (std::abs(m3) > l3) continue;
            CHECK(cg::complex_cg(l1, l2, l3, m1, m2, m3) ==
                  doctest::Approx(racah_reference(l1, l2, l3, m1, m2, m3)).epsilon(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("cg_block scalar coupling") {
  const auto b = cg::cg_block(0, 0, 0);
  REQUIRE(b->entries.size() == 1);
  CHECK(b->entries[0].i == 0);
  CHECK(b->entries[0].j == 0);
  CHECK(b->entries[0].k == 0);
  CHECK(b->entries[0].v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("cg_block (1,1,0) is the scaled identity pairing") {
  const auto b = cg::cg_block(1, 1, 0);
  REQUIRE(b->entries.size() == 3);
  const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
  for (int i = 0; i < 3; ++i) {
    CHECK(dense_at(*b, i, i, 0) == doctest::Approx(inv_sqrt3).epsilon(1e-14));
  }
}

TEST_CASE("cg_block (1,1,1) is the Levi-Civita pattern") {
  const auto b = cg::cg_block(1, 1, 1);
  REQUIRE(b->entries.size() == 6);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (const auto& e : b->entries) {
    CHECK(std::abs(e.v) == doctest::Approx(inv_sqrt2).epsilon(1e-14));
    CHECK(e.i != e.j);  // antisymmetric support
    CHECK(dense_at(*b, e.j, e.i, e.k) == doctest::Approx(-e.v).epsilon(1e-12));
  }
}

TEST_CASE("cg_block shape and bounds") {
  const auto b = cg::cg_block(2, 3, 5);
  CHECK(b->dim1() == 5);
  CHECK(b->dim2() == 7);
  CHECK(b->dim3() == 11);
  std::set<std::tuple<int, int, int>> seen;
  int last_k = -1, last_i = -1, last_j = -1;
  for (const auto& e : b->entries) {
    CHECK(e.i >= 0);
    CHECK(e.i < 5);
    CHECK(e.j < 7);
    CHECK(e.k < 11);
    CHECK(e.v != 0.0);
    CHECK(seen.insert({e.i, e.j, e.k}).second);  // no duplicates
    // sorted by (k, i, j)
    const bool ordered = std::tie(last_k, last_i, last_j) < std::tie(e.k, e.i, e.j);
    CHECK(ordered);
    last_k = e.k;
    last_i = e.i;
    last_j = e.j;
  }
}

TEST_CASE("triangle violation is an error, not an empty block") {
  CHECK_THROWS_AS(cg::cg_block(1, 1, 3), cg::TriangleError);
  CHECK_THROWS_AS(cg::cg_block(0, 0, 1), cg::TriangleError);
}

TEST_CASE("orthonormality of every generated block") {
  for (int l1 = 0; l1 <= 4; ++l1) {
    for (int l2 = 0; l2 <= 4; ++l2) {
      for (int l3 = std::abs(l1 - l2); l3 <= std::min(l1 + l2, 4); ++l3) {
        const auto b = cg::cg_block(l1, l2, l3);
        const int d3 = b->dim3();
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d3, d3);
        for (const auto& e1 : b->entries) {
          for (const auto& e2 : b->entries) {
            if (e1.i == e2.i && e1.j == e2.j) gram(e1.k, e2.k) += e1.v * e2.v;
          }
        }
        CHECK((gram - Eigen::MatrixXd::Identity(d3, d3)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("equivariance identity against rep_matrix") {
  cgforge::rng::NormalGen gen(37);
  for (int trial = 0; trial < 3; ++trial) {
    const irreps::Rotation g{gen.normal(), std::abs(gen.normal()), gen.normal(), false};
    for (int l1 = 0; l1 <= 4; ++l1) {
      for (int l2 = 0; l2 <= 4 - l1 + l1 && l2 <= 4; ++l2) {
        for (int l3 = std::abs(l1 - l2); l3 <= std::min(l1 + l2, 4); ++l3) {
          const auto b = cg::cg_block(l1, l2, l3);
          const Eigen::MatrixXd d1 = irreps::wigner_d_real(l1, g);
          const Eigen::MatrixXd d2 = irreps::wigner_d_real(l2, g);
          const Eigen::MatrixXd d3 = irreps::wigner_d_real(l3, g);
          const int n1 = b->dim1(), n2 = b->dim2(), n3 = b->dim3();
          // lhs[i',j',k] = sum_{i,j} D1[i,i'] D2[j,j'] P[i,j,k]
          std::vector<double> lhs(static_cast<std::size_t>(n1) * n2 * n3, 0.0);
          std::vector<double> rhs(lhs.size(), 0.0);
          for (const auto& e : b->entries) {
            for (int ip = 0; ip < n1; ++ip) {
              for (int jp = 0; jp < n2; ++jp) {
                lhs[(static_cast<std::size_t>(ip) * n2 + jp) * n3 + e.k] +=
                    d1(e.i, ip) * d2(e.j, jp) * e.v;
              }
            }
            for (int k = 0; k < n3; ++k) {
              rhs[(static_cast<std::size_t>(e.i) * n2 + e.j) * n3 + k] += e.v * d3(k, e.k);
            }
          }
          // rhs needs the transpose direction: sum_{k'} P[i',j',k'] D3[k,k']
          // which the loop above accumulates as rhs[i',j',k].
          double max_err = 0.0;
          for (std::size_t n = 0; n < lhs.size(); ++n) {
            max_err = std::max(max_err, std::abs(lhs[n] - rhs[n]));
          }
          CHECK(max_err <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("determinism and memo stability") {
  const auto a = cg::cg_block(2, 2, 3);
  const auto b = cg::cg_block(2, 2, 3);
  CHECK(a.get() == b.get());  // memoized

  // fresh computation (different triple) is bit-identical across calls
  const auto c1 = cg::cg_block(3, 2, 1);
  const auto c2 = cg::cg_block(3, 2, 1);
  REQUIRE(c1->entries.size() == c2->entries.size());
  for (std::size_t n = 0; n < c1->entries.size(); ++n) {
    CHECK(c1->entries[n].v == c2->entries[n].v);
  }
}

TEST_CASE("memo table is safe under concurrent access") {
  std::vector<std::thread> threads;
  std::vector<std::shared_ptr<const CGBlock>> results(8);
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&results, t] { results[static_cast<std::size_t>(t)] = cg::cg_block(4, 3, 2); });
  }
  for (auto& th : threads) th.join();
  for (int t = 1; t < 8; ++t) CHECK(results[static_cast<std::size_t>(t)].get() == results[0].get());
}

TEST_CASE("block_sparsity values and trend") {
  CHECK(cg::block_sparsity(*cg::cg_block(0, 0, 0)) == 0.0);
  CHECK(cg::block_sparsity(*cg::cg_block(1, 1, 1)) ==
        doctest::Approx(1.0 - 6.0 / 27.0).epsilon(1e-14));
  CHECK(cg::block_sparsity(*cg::cg_block(4, 4, 4)) > cg::block_sparsity(*cg::cg_block(2, 2, 2)));
}

TEST_CASE("json dump shape") {
  const std::string j = cg::to_json(*cg::cg_block(1, 1, 0));
  CHECK(j.find("\"l1\":1") != std::string::npos);
  CHECK(j.find("\"entries\":[[") != std::string::npos);
}
