#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cgforge/kernelgen.hpp"
#include "cgforge/oracle.hpp"
#include "cgforge/rng.hpp"
#include "helpers.hpp"

using namespace cgforge;
using namespace cgforge::kernelgen;

namespace {

tpspec::ResolvedInstruction only_instr(const tpspec::ValidatedProblem& p) {
  return p.resolved.at(0);
}

tpspec::ValidatedProblem single_instruction_problem(int l1, int l2, int l3, tpspec::Kind kind,
                                                    int mult_x, int mult_z) {
  using irreps::Irreps;
  using irreps::Parity;
  Irreps x, y, z;
  x.blocks.push_back({mult_x, {l1, Parity::even}});
  y.blocks.push_back({1, {l2, Parity::even}});
  z.blocks.push_back({mult_z, {l3, Parity::even}});
  auto vr = tpspec::validate(x, y, z, {{1, 1, 1, kind}});
  REQUIRE(vr.ok());
  return *vr.problem;
}

int count_ops(const KernelIR& ir, OpKind kind) {
  int n = 0;
  for (const auto& op : ir.ops)
    if (op.kind == kind) ++n;
  return n;
}

// Executes an IR directly against global arrays (identity scheduling).
struct DirectRun {
  std::vector<double> x, y, w, z, gz, gx, gy, gw;

  explicit DirectRun(const tpspec::ValidatedProblem& p, std::uint64_t seed) {
    rng::NormalGen gen(seed);
    x = gen.normal_vec(static_cast<std::size_t>(p.dim_x));
    y = gen.normal_vec(static_cast<std::size_t>(p.dim_y));
    w = gen.normal_vec(static_cast<std::size_t>(p.total_weights));
    gz = gen.normal_vec(static_cast<std::size_t>(p.dim_z));
    z.assign(static_cast<std::size_t>(p.dim_z), 0.0);
    gx.assign(static_cast<std::size_t>(p.dim_x), 0.0);
    gy.assign(static_cast<std::size_t>(p.dim_y), 0.0);
    gw.assign(static_cast<std::size_t>(p.total_weights), 0.0);
  }

  RowView<double> view() {
    RowView<double> rv;
    rv.x = x.data();
    rv.y = y.data();
    rv.w = w.data();
    rv.z = z.data();
    rv.gz = gz.data();
    rv.gx = gx.data();
    rv.gy = gy.data();
    rv.gw = gw.data();
    return rv;
  }
};

std::string golden_path(const std::string& name) {
  return std::string(CGFORGE_TEST_DATA_DIR) + "/golden/" + name;
}

void check_golden(const std::string& name, const std::string& text) {
  const std::string path = golden_path(name);
  if (std::getenv("CGFORGE_REGEN_GOLDEN")) {
    std::ofstream out(path);
    out << text;
    return;
  }
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "missing golden file " << path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK_MESSAGE(ss.str() == text, "golden mismatch for " << name);
}

}  // namespace

TEST_CASE("scalar B forward IR is minimal") {
  const auto p = testutil::scalar_problem();
  const KernelIR ir = gen_forward(only_instr(p));
  CHECK(count_ops(ir, OpKind::fma) == 1);
  CHECK(count_ops(ir, OpKind::scale) == 1);
  CHECK(count_ops(ir, OpKind::accumulate) == 1);
  CHECK(flop_count(ir) == 5);  // one fma + one width-1 diagonal scale

  const std::string text = emit_text(ir);
  const auto lines = std::count(text.begin(), text.end(), '\n');
  CHECK(lines == 4);
  CHECK(text.substr(text.rfind("acc"), 3) == "acc");  // ends in an accumulate
}

TEST_CASE("(1,1,1) B forward has six fmas per lane body") {
  const auto p = single_instruction_problem(1, 1, 1, tpspec::Kind::B, 32, 32);
  const KernelIR ir = gen_forward(only_instr(p));
  CHECK(count_ops(ir, OpKind::fma) == 6);
  CHECK(ir.lane_count == 32);
  CHECK(flop_count(ir) == 32 * (6 * 3 + 3 * 2));  // 768

  const std::string text = emit_text(ir);
  std::size_t n_fma_lines = 0, pos = 0;
  while ((pos = text.find("fma", pos)) != std::string::npos) {
    ++n_fma_lines;
    pos += 3;
  }
  CHECK(n_fma_lines == 6);
}

TEST_CASE("C kernel shapes: contraction plus small matmul") {
  const auto p = single_instruction_problem(1, 1, 1, tpspec::Kind::C, 32, 16);
  const KernelIR ir = gen_forward(only_instr(p));
  CHECK(ir.kind == IRKind::C_fwd);
  CHECK(ir.b == 16);
  CHECK(ir.b_prime == 32);
  bool found = false;
  for (const auto& op : ir.ops) {
    if (op.kind == OpKind::matmul) {
      found = true;
      CHECK(op.mm == MatmulKind::apply_w);
      CHECK(op.rows == 16);
      CHECK(op.cols == 32);
      CHECK(op.width == 3);
    }
  }
  CHECK(found);
  CHECK(type_check(ir).empty());
}

TEST_CASE("emit_text is deterministic") {
  const auto p = single_instruction_problem(2, 1, 2, tpspec::Kind::B, 8, 8);
  const KernelIR ir1 = gen_forward(only_instr(p));
  const KernelIR ir2 = gen_forward(only_instr(p));
  CHECK(emit_text(ir1) == emit_text(ir2));
}

TEST_CASE("golden listings") {
  check_golden("b_fwd_000.txt", emit_text(gen_forward(only_instr(testutil::scalar_problem()))));
  const auto b111 = single_instruction_problem(1, 1, 1, tpspec::Kind::B, 32, 32);
  check_golden("b_fwd_111.txt", emit_text(gen_forward(only_instr(b111))));
  check_golden("b_bwd_111.txt", emit_text(gen_backward(only_instr(b111))));
  const auto c110 = single_instruction_problem(1, 1, 0, tpspec::Kind::C, 32, 16);
  check_golden("c_fwd_110.txt", emit_text(gen_forward(only_instr(c110))));
  check_golden("c_bwd_110.txt", emit_text(gen_backward(only_instr(c110))));
}

TEST_CASE("type checker accepts generated IR and rejects corrupted IR") {
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    const auto p = testutil::random_problem(seed);
    const CheckDims dims{static_cast<std::uint32_t>(p.dim_x), static_cast<std::uint32_t>(p.dim_y),
                         static_cast<std::uint32_t>(p.dim_z), p.total_weights};
    for (const auto& r : p.resolved) {
      CHECK(type_check(gen_forward(r), &dims).empty());
      CHECK(type_check(gen_backward(r), &dims).empty());
    }
  }

  const auto p = single_instruction_problem(1, 1, 1, tpspec::Kind::B, 4, 4);
  KernelIR ir = gen_forward(only_instr(p));

  SUBCASE("read before write") {
    // first fma reads a slot nothing wrote
    ir.ops[1].a = kSlotGzp;
    CHECK(!type_check(ir).empty());
  }
  SUBCASE("out of bounds store") {
    const CheckDims dims{12, 3, 12, 4};
    for (auto& op : ir.ops) {
      if (op.kind == OpKind::accumulate) op.base = 100;
    }
    CHECK(!type_check(ir, &dims).empty());
  }
  SUBCASE("missing load") {
    ir.ops.erase(ir.ops.begin());  // drop the load op
    CHECK(!type_check(ir).empty());
  }
}

TEST_CASE("forward IR matches the dense oracle on random instructions") {
  for (std::uint64_t seed : {41u, 42u, 43u, 44u}) {
    const auto p = testutil::random_problem(seed);
    const oracle::DenseTP dense(p);
    DirectRun run(p, seed);
    RegFile<double> regs(64);
    for (const auto& r : p.resolved) {
      kernelgen::interpret(gen_forward(r), regs, run.view(), nullptr);
    }
    const auto want = oracle::dense_forward(dense, run.x.data(), run.y.data(), run.w.data());
    CHECK(testutil::rel_error(run.z, want) <= 1e-13);
  }
}

TEST_CASE("backward IR: scalar product rule") {
  const auto p = testutil::scalar_problem();
  DirectRun run(p, 0);
  run.x = {2.0};
  run.y = {3.0};
  run.w = {0.5};
  run.gz = {1.0};
  RegFile<double> regs(1);
  kernelgen::interpret(gen_backward(only_instr(p)), regs, run.view(), nullptr);
  CHECK(run.gx[0] == doctest::Approx(1.5).epsilon(1e-15));  // y * w * gz
  CHECK(run.gy[0] == doctest::Approx(1.0).epsilon(1e-15));  // x * w * gz
  CHECK(run.gw[0] == doctest::Approx(6.0).epsilon(1e-15));  // z' = x*y
}

TEST_CASE("backward IR: zero upstream gradient gives zero gradients") {
  const auto p = testutil::random_problem(51);
  DirectRun run(p, 51);
  run.gz.assign(run.gz.size(), 0.0);
  RegFile<double> regs(64);
  for (const auto& r : p.resolved) {
    kernelgen::interpret(gen_backward(r), regs, run.view(), nullptr);
  }
  for (double v : run.gx) CHECK(v == 0.0);
  for (double v : run.gy) CHECK(v == 0.0);
  // z' column of the weight gradient is not zero in general, but gw is
  // g_z-weighted, so it must vanish too
  for (double v : run.gw) CHECK(v == 0.0);
}

TEST_CASE("backward IR matches finite differences and dense gradients") {
  const auto p = single_instruction_problem(1, 1, 0, tpspec::Kind::B, 8, 8);
  const auto& r = only_instr(p);
  DirectRun run(p, 61);
  RegFile<double> regs(8);
  kernelgen::interpret(gen_backward(r), regs, run.view(), nullptr);

  const oracle::DenseTP dense(p);
  const auto analytic =
      oracle::dense_backward(dense, run.x.data(), run.y.data(), run.w.data(), run.gz.data());
  CHECK(testutil::rel_error(run.gx, analytic.x) <= 1e-12);
  CHECK(testutil::rel_error(run.gy, analytic.y) <= 1e-12);
  CHECK(testutil::rel_error(run.gw, analytic.w) <= 1e-12);

  const auto fx = [&](const std::vector<double>& xv) {
    return oracle::dense_forward(dense, xv.data(), run.y.data(), run.w.data());
  };
  const auto fd = oracle::fd_vjp(fx, run.x, run.gz, 1e-5);
  CHECK(testutil::rel_error(run.gx, fd) <= 1e-6);
}

TEST_CASE("flop_count is exact against the instrumented interpreter") {
  for (std::uint64_t seed : {71u, 72u}) {
    const auto p = testutil::random_problem(seed);
    DirectRun run(p, seed);
    RegFile<double> regs(64);
    for (const auto& r : p.resolved) {
      for (const bool backward : {false, true}) {
        const KernelIR ir = backward ? gen_backward(r) : gen_forward(r);
        std::uint64_t counted = 0;
        kernelgen::interpret(ir, regs, run.view(), &counted);
        CHECK(counted == flop_count(ir));
      }
    }
  }
}

TEST_CASE("redundant load elimination preserves results bitwise") {
  // two instructions sharing x and y segments
  using irreps::Irreps;
  using irreps::Parity;
  Irreps x, y, z;
  x.blocks.push_back({8, {1, Parity::even}});
  y.blocks.push_back({1, {1, Parity::even}});
  z.blocks.push_back({8, {0, Parity::even}});
  z.blocks.push_back({8, {2, Parity::even}});
  auto vr = tpspec::validate(x, y, z,
                             {{1, 1, 1, tpspec::Kind::B}, {1, 1, 2, tpspec::Kind::B}});
  REQUIRE(vr.ok());
  const auto& p = *vr.problem;

  std::vector<KernelIR> seq;
  for (const auto& r : p.resolved) seq.push_back(gen_forward(r));
  const auto elim = eliminate_redundant_loads(seq);

  // the second kernel's x and y loads must be gone, the w load must stay
  REQUIRE(elim.size() == 2);
  const auto& load2 = elim[1].ops.front();
  REQUIRE(load2.kind == OpKind::load);
  CHECK(load2.bindings.size() == 1);
  CHECK(load2.bindings[0].array == ArrayId::W);

  DirectRun a(p, 81), b(p, 81);
  RegFile<double> regs_a(8), regs_b(8);
  std::vector<bool> written;  // the eliminated sequence still type-checks as a chain
  for (const auto& ir : elim) {
    CHECK(type_check(ir, nullptr, &written).empty());
  }
  for (const auto& ir : seq) kernelgen::interpret(ir, regs_a, a.view(), nullptr);
  for (const auto& ir : elim) kernelgen::interpret(ir, regs_b, b.view(), nullptr);
  CHECK(a.z == b.z);  // bitwise
}

TEST_CASE("masked lanes stay inert") {
  // C kernel with b < b': output lanes beyond b are masked in stores
  const auto p = single_instruction_problem(0, 0, 0, tpspec::Kind::C, 8, 3);
  DirectRun run(p, 91);
  RegFile<double> regs(8);
  kernelgen::interpret(gen_forward(only_instr(p)), regs, run.view(), nullptr);
  const oracle::DenseTP dense(p);
  const auto want = oracle::dense_forward(dense, run.x.data(), run.y.data(), run.w.data());
  CHECK(testutil::rel_error(run.z, want) <= 1e-13);
}
