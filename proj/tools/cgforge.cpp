// Command-line front end: compile problem specs, verify correctness against
// the dense oracle, and benchmark the execution engine.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cgforge/array_io.hpp"
#include "cgforge/cg.hpp"
#include "cgforge/conv.hpp"
#include "cgforge/engine.hpp"
#include "cgforge/kernelgen.hpp"
#include "cgforge/oracle.hpp"
#include "cgforge/rng.hpp"
#include "cgforge/scheduler.hpp"

namespace fs = std::filesystem;
using namespace cgforge;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitBudget = 3;
constexpr int kExitVerifyFailed = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int default_workers() {
  if (const char* env = std::getenv("CGFORGE_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

struct LoadedProblem {
  tpspec::ValidatedProblem problem;       // as specified
  tpspec::ValidatedProblem split;         // multiplicity-split
  scheduler::Schedule schedule;
};

LoadedProblem load_and_compile(const std::string& spec_path, std::uint32_t budget,
                               int lane_width) {
  const tpspec::ValidationResult vr = tpspec::parse_problem_json(read_file(spec_path));
  if (!vr.ok()) {
    for (const auto& v : vr.violations) {
      std::cerr << "instruction " << v.instruction_index << ": " << v.message << "\n";
    }
    std::exit(kExitValidation);
  }
  LoadedProblem lp;
  lp.problem = *vr.problem;
  lp.split = scheduler::split_multiplicities(lp.problem, lane_width);
  lp.schedule = scheduler::build_schedule(lp.split, budget);
  return lp;
}

double rel_error(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double d = got[i] - want[i];
    num += d * d;
    den += want[i] * want[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// ---------------------------------------------------------------- compile --

int cmd_compile(const std::string& spec_path, std::uint32_t budget, int lane_width,
                bool emit_schedule, bool emit_ir, const std::string& out_dir) {
  LoadedProblem lp;
  try {
    lp = load_and_compile(spec_path, budget, lane_width);
  } catch (const irreps::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const scheduler::BudgetError& e) {
    std::cerr << e.what() << "\n";
    return kExitBudget;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }

  fs::create_directories(out_dir);
  if (emit_schedule) {
    std::ofstream out(fs::path(out_dir) / "schedule.json");
    out << scheduler::schedule_to_json(lp.split, lp.schedule) << "\n";
  }
  if (emit_ir) {
    for (std::size_t n = 0; n < lp.split.resolved.size(); ++n) {
      const auto& r = lp.split.resolved[n];
      char name[64];
      std::snprintf(name, sizeof(name), "ir_%03zu_%c_l%d%d%d.txt", n,
                    tpspec::kind_char(r.kind), r.l1, r.l2, r.l3);
      std::ofstream out(fs::path(out_dir) / name);
      out << "# forward\n" << kernelgen::emit_text(kernelgen::gen_forward(r));
      out << "# backward\n" << kernelgen::emit_text(kernelgen::gen_backward(r));
    }
  }

  const auto& t = lp.schedule.traffic;
  std::cout << "strategy " << scheduler::strategy_name(lp.schedule.strategy) << ", "
            << lp.schedule.phases.size() << " phase(s), " << lp.split.resolved.size()
            << " subkernel(s)\n";
  std::cout << "traffic/batch-element: loads " << t.loads_words << " words, stores "
            << t.stores_words << " words, " << t.flops << " flops, ai(fp64) "
            << t.arithmetic_intensity(8) << "\n";
  std::cout << "outputs written to " << out_dir << "\n";
  return 0;
}

// ----------------------------------------------------------------- verify --

struct Suite {
  std::string name;
  double max_err = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

int cmd_verify(const std::string& spec_path, std::uint32_t budget, int lane_width,
               std::int64_t batch, int workers, std::uint64_t seed, bool corrupt) {
  if (corrupt) cg::set_corrupt_for_testing(true);
  LoadedProblem lp;
  try {
    lp = load_and_compile(spec_path, budget, lane_width);
  } catch (const scheduler::BudgetError& e) {
    std::cerr << e.what() << "\n";
    return kExitBudget;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }

  const engine::TpPlan plan(lp.split, lp.schedule);
  const engine::Options opt{workers, engine::ExecMode::specialized};
  std::vector<Suite> suites;

  const auto batch64 = engine::random_batch<double>(lp.split, batch, seed);
  std::vector<double> z;
  plan.forward(batch64, z, opt);

  {  // oracle equivalence
    Suite s{"oracle-equivalence", 0.0, 1e-13};
    const oracle::DenseTP dense(lp.split);
    for (std::int64_t r = 0; r < batch; ++r) {
      const auto zr = oracle::dense_forward(dense, batch64.x.data() + r * lp.split.dim_x,
                                            batch64.y.data() + r * lp.split.dim_y,
                                            batch64.w.data() + r * lp.split.total_weights);
      std::vector<double> er(z.begin() + r * lp.split.dim_z,
                             z.begin() + (r + 1) * lp.split.dim_z);
      s.max_err = std::max(s.max_err, rel_error(er, zr));
    }
    s.pass = s.max_err <= s.tolerance;
    suites.push_back(s);
  }

  {  // equivariance
    Suite s{"equivariance", 0.0, 1e-10};
    rng::NormalGen gen(seed + 1);
    for (int trial = 0; trial < 8; ++trial) {
      irreps::Rotation g{gen.normal(), std::abs(gen.normal()), gen.normal(),
                         (gen.bits() & 1) != 0};
      const Eigen::MatrixXd dx = irreps::rep_matrix(lp.split.x_ir, g);
      const Eigen::MatrixXd dy = irreps::rep_matrix(lp.split.y_ir, g);
      const Eigen::MatrixXd dz = irreps::rep_matrix(lp.split.z_ir, g);
      engine::Batch<double> rotated = batch64;
      for (std::int64_t r = 0; r < batch; ++r) {
        Eigen::Map<Eigen::VectorXd> xr(rotated.x.data() + r * lp.split.dim_x, lp.split.dim_x);
        xr = dx * xr;
        Eigen::Map<Eigen::VectorXd> yr(rotated.y.data() + r * lp.split.dim_y, lp.split.dim_y);
        yr = dy * yr;
      }
      std::vector<double> z_rot;
      plan.forward(rotated, z_rot, opt);
      for (std::int64_t r = 0; r < batch; ++r) {
        Eigen::Map<const Eigen::VectorXd> zr(z.data() + r * lp.split.dim_z, lp.split.dim_z);
        const Eigen::VectorXd want = dz * zr;
        Eigen::Map<const Eigen::VectorXd> got(z_rot.data() + r * lp.split.dim_z,
                                              lp.split.dim_z);
        const double err = (got - want).norm() / std::max(want.norm(), 1e-300);
        s.max_err = std::max(s.max_err, err);
      }
    }
    s.pass = s.max_err <= s.tolerance;
    suites.push_back(s);
  }

  {  // gradients vs dense analytic + finite differences (first rows)
    Suite s{"gradients", 0.0, 1e-6};
    const std::vector<double> gz = rng::NormalGen(seed + 2).normal_vec(z.size());
    engine::Grads<double> grads;
    plan.backward(batch64, gz, grads, opt);
    const oracle::DenseTP dense(lp.split);
    double analytic_err = 0.0;
    for (std::int64_t r = 0; r < batch; ++r) {
      const auto g = oracle::dense_backward(dense, batch64.x.data() + r * lp.split.dim_x,
                                            batch64.y.data() + r * lp.split.dim_y,
                                            batch64.w.data() + r * lp.split.total_weights,
                                            gz.data() + r * lp.split.dim_z);
      std::vector<double> gx(grads.x.begin() + r * lp.split.dim_x,
                             grads.x.begin() + (r + 1) * lp.split.dim_x);
      analytic_err = std::max(analytic_err, rel_error(gx, g.x));
    }
    if (analytic_err > 1e-12) s.pass = false;

    // finite differences on row 0, x argument
    const std::vector<double> x0(batch64.x.begin(), batch64.x.begin() + lp.split.dim_x);
    const std::vector<double> gz0(gz.begin(), gz.begin() + lp.split.dim_z);
    engine::Batch<double> one;
    one.rows = 1;
    one.x = x0;
    one.y.assign(batch64.y.begin(), batch64.y.begin() + lp.split.dim_y);
    one.w.assign(batch64.w.begin(), batch64.w.begin() + lp.split.total_weights);
    const auto f = [&](const std::vector<double>& xv) {
      engine::Batch<double> b = one;
      b.x = xv;
      std::vector<double> zz;
      plan.forward(b, zz, opt);
      return zz;
    };
    const auto fd = oracle::fd_vjp(f, x0, gz0, 1e-5);
    std::vector<double> gx0(grads.x.begin(), grads.x.begin() + lp.split.dim_x);
    s.max_err = std::max(analytic_err, rel_error(gx0, fd));
    s.pass = s.pass && rel_error(gx0, fd) <= s.tolerance;
    suites.push_back(s);
  }

  {  // double backward: fused vs seven-call
    Suite s{"double-backward", 0.0, 1e-13};
    const std::vector<double> gz = rng::NormalGen(seed + 3).normal_vec(z.size());
    engine::Grads<double> up;
    up.x = rng::NormalGen(seed + 4).normal_vec(batch64.x.size());
    up.y = rng::NormalGen(seed + 5).normal_vec(batch64.y.size());
    up.w = rng::NormalGen(seed + 6).normal_vec(batch64.w.size());
    engine::DoubleGrads<double> fused, literal;
    plan.double_backward(batch64, gz, up, fused, engine::DispatchStyle::fused, opt);
    plan.double_backward(batch64, gz, up, literal, engine::DispatchStyle::seven_call, opt);
    s.max_err = std::max({rel_error(fused.x, literal.x), rel_error(fused.y, literal.y),
                          rel_error(fused.w, literal.w), rel_error(fused.gz, literal.gz)});
    s.pass = s.max_err <= s.tolerance;
    suites.push_back(s);
  }

  {  // schedule independence across budgets
    Suite s{"schedule-independence", 0.0, 1e-13};
    std::uint32_t min_budget = 0;
    for (const auto& r : lp.split.resolved) {
      const std::uint32_t ws =
          static_cast<std::uint32_t>(r.b_prime * r.dx() + r.dy() + r.weight_count +
                                     r.b * r.dz());
      min_budget = std::max(min_budget, ws);
    }
    for (const std::uint32_t b :
         {min_budget, min_budget + 64, std::max<std::uint32_t>(budget, min_budget)}) {
      const auto sched = scheduler::build_schedule(lp.split, b);
      const engine::TpPlan p2(lp.split, sched);
      std::vector<double> z2;
      p2.forward(batch64, z2, opt);
      s.max_err = std::max(s.max_err, rel_error(z2, z));
    }
    s.pass = s.max_err <= s.tolerance;
    suites.push_back(s);
  }

  {  // determinism across worker counts (bitwise)
    Suite s{"determinism", 0.0, 0.0};
    for (const int wk : {1, 2, 8}) {
      std::vector<double> z2;
      plan.forward(batch64, z2, engine::Options{wk, engine::ExecMode::specialized});
      if (z2 != z) s.pass = false;
    }
    std::vector<double> z3;
    plan.forward(batch64, z3, engine::Options{workers, engine::ExecMode::interpreted});
    if (z3 != z) s.pass = false;
    suites.push_back(s);
  }

  {  // fp32 vs fp64
    Suite s{"precision-fp32", 0.0, 1e-4};
    const auto batch32 = engine::random_batch<float>(lp.split, batch, seed);
    engine::Batch<float> b32;
    b32.rows = batch;
    b32.x.assign(batch64.x.begin(), batch64.x.end());
    b32.y.assign(batch64.y.begin(), batch64.y.end());
    b32.w.assign(batch64.w.begin(), batch64.w.end());
    std::vector<float> z32;
    plan.forward(b32, z32, opt);
    std::vector<double> z32d(z32.begin(), z32.end());
    s.max_err = rel_error(z32d, z);
    s.pass = s.max_err <= s.tolerance;
    suites.push_back(s);
  }

  bool all_pass = true;
  for (const auto& s : suites) {
    std::cout << (s.pass ? "PASS" : "FAIL") << "  " << s.name << "  max_err=" << s.max_err
              << " tol=" << s.tolerance << "\n";
    all_pass = all_pass && s.pass;
  }
  if (corrupt) cg::set_corrupt_for_testing(false);
  return all_pass ? 0 : kExitVerifyFailed;
}

// ------------------------------------------------------------------ bench --

struct BenchRow {
  std::string op;
  std::string dtype;
  std::int64_t batch = 0;
  std::int64_t wall_ns = 0;
  std::uint64_t flops = 0, loads = 0, stores = 0;
  double ai = 0.0, gflops = 0.0;
};

void print_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "op,dtype,batch,wall_ns,flops,loads,stores,ai,gflops_per_s\n";
  for (const auto& r : rows) {
    os << r.op << "," << r.dtype << "," << r.batch << "," << r.wall_ns << "," << r.flops << ","
       << r.loads << "," << r.stores << "," << r.ai << "," << r.gflops << "\n";
  }
}

template <typename F>
std::int64_t median_wall_ns(int warmup, int iters, F&& body) {
  for (int i = 0; i < warmup; ++i) body();
  std::vector<std::int64_t> times;
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

template <typename T>
std::vector<BenchRow> bench_unfused(const engine::TpPlan& plan, const char* dtype,
                                    std::int64_t batch, int workers, int warmup, int iters,
                                    std::uint64_t seed, const std::string& dump_dir) {
  std::vector<BenchRow> rows;
  if (batch == 0) return rows;
  const auto& p = plan.problem();
  const auto in = engine::random_batch<T>(p, batch, seed);
  const engine::Options opt{workers, engine::ExecMode::specialized};

  std::vector<T> z;
  engine::ExecStats st;
  BenchRow fwd{"forward", dtype, batch, 0, 0, 0, 0, 0.0, 0.0};
  fwd.wall_ns = median_wall_ns(warmup, iters, [&] { st = plan.forward(in, z, opt); });
  fwd.flops = st.flops;
  fwd.loads = st.loads_words;
  fwd.stores = st.stores_words;
  fwd.ai = double(st.flops) / (sizeof(T) * double(st.loads_words + st.stores_words));
  fwd.gflops = double(st.flops) / double(fwd.wall_ns);
  rows.push_back(fwd);

  const std::vector<T> gz = rng::NormalGen(seed + 1).normal_vec<T>(z.size());
  engine::Grads<T> grads;
  BenchRow bwd{"backward", dtype, batch, 0, 0, 0, 0, 0.0, 0.0};
  bwd.wall_ns = median_wall_ns(warmup, iters, [&] { st = plan.backward(in, gz, grads, opt); });
  bwd.flops = st.flops;
  bwd.loads = st.loads_words;
  bwd.stores = st.stores_words;
  bwd.ai = double(st.flops) / (sizeof(T) * double(st.loads_words + st.stores_words));
  bwd.gflops = double(st.flops) / double(bwd.wall_ns);
  rows.push_back(bwd);

  engine::Grads<T> up;
  up.x = rng::NormalGen(seed + 2).normal_vec<T>(in.x.size());
  up.y = rng::NormalGen(seed + 3).normal_vec<T>(in.y.size());
  up.w = rng::NormalGen(seed + 4).normal_vec<T>(in.w.size());
  engine::DoubleGrads<T> dg;
  BenchRow dbl{"double_backward", dtype, batch, 0, 0, 0, 0, 0.0, 0.0};
  dbl.wall_ns = median_wall_ns(warmup, iters, [&] {
    st = plan.double_backward(in, gz, up, dg, engine::DispatchStyle::fused, opt);
  });
  dbl.flops = st.flops;
  dbl.loads = st.loads_words;
  dbl.stores = st.stores_words;
  dbl.ai = double(st.flops) / (sizeof(T) * double(st.loads_words + st.stores_words));
  dbl.gflops = double(st.flops) / double(dbl.wall_ns);
  rows.push_back(dbl);

  if (!dump_dir.empty()) {
    fs::create_directories(dump_dir);
    array_io::save_array((fs::path(dump_dir) / "x").string(), in.x.data(), batch, p.dim_x);
    array_io::save_array((fs::path(dump_dir) / "y").string(), in.y.data(), batch, p.dim_y);
    array_io::save_array((fs::path(dump_dir) / "w").string(), in.w.data(), batch,
                         static_cast<std::int64_t>(p.total_weights));
    array_io::save_array((fs::path(dump_dir) / "z").string(), z.data(), batch, p.dim_z);
  }
  return rows;
}

template <typename T>
std::vector<BenchRow> bench_fused(const engine::TpPlan& plan, const char* dtype, int workers,
                                  int warmup, int iters, std::uint64_t seed, conv::Mode mode,
                                  const conv::GraphCSR& graph) {
  std::vector<BenchRow> rows;
  const auto& p = plan.problem();
  const std::int64_t nv = graph.node_count, ne = graph.edge_count();
  rng::NormalGen gen(seed);
  const auto node_x = gen.normal_vec<T>(static_cast<std::size_t>(nv) * p.dim_x);
  const auto edge_y = gen.normal_vec<T>(static_cast<std::size_t>(ne) * p.dim_y);
  const auto edge_w = gen.normal_vec<T>(static_cast<std::size_t>(ne) * p.total_weights);

  const conv::ConvPlan cp(plan);
  const conv::ConvOptions opt{workers, 16, engine::ExecMode::specialized};
  const char* tag = mode == conv::Mode::deterministic ? "conv_fused_det" : "conv_fused_atomic";

  std::vector<T> node_z;
  conv::ConvStats st;
  BenchRow fwd{std::string(tag) + "_forward", dtype, ne, 0, 0, 0, 0, 0.0, 0.0};
  fwd.wall_ns = median_wall_ns(warmup, iters, [&] {
    st = cp.forward(graph, node_x, edge_y, edge_w, node_z, mode, opt);
  });
  fwd.flops = st.flops;
  fwd.loads = st.loads_words;
  fwd.stores = st.stores_words;
  fwd.ai = double(st.flops) / (sizeof(T) * double(st.loads_words + st.stores_words));
  fwd.gflops = double(st.flops) / double(fwd.wall_ns);
  rows.push_back(fwd);

  const auto perm = conv::transpose_permutation(graph);
  const auto g_node_z = rng::NormalGen(seed + 1).normal_vec<T>(node_z.size());
  std::vector<T> gx, gy, gw;
  BenchRow bwd{std::string(tag) + "_backward", dtype, ne, 0, 0, 0, 0, 0.0, 0.0};
  bwd.wall_ns = median_wall_ns(warmup, iters, [&] {
    st = cp.backward(graph, perm, node_x, edge_y, edge_w, g_node_z, gx, gy, gw, mode, opt);
  });
  bwd.flops = st.flops;
  bwd.loads = st.loads_words;
  bwd.stores = st.stores_words;
  bwd.ai = double(st.flops) / (sizeof(T) * double(st.loads_words + st.stores_words));
  bwd.gflops = double(st.flops) / double(bwd.wall_ns);
  rows.push_back(bwd);

  std::vector<T> ref_z;
  conv::ConvStats ust;
  BenchRow unf{"conv_unfused_forward", dtype, ne, 0, 0, 0, 0, 0.0, 0.0};
  unf.wall_ns = median_wall_ns(warmup, iters, [&] {
    ust = conv::unfused_forward(plan, graph, node_x, edge_y, edge_w, ref_z,
                                engine::Options{workers, engine::ExecMode::specialized});
  });
  unf.flops = ust.flops;
  unf.loads = ust.loads_words;
  unf.stores = ust.stores_words;
  unf.ai = double(ust.flops) / (sizeof(T) * double(ust.loads_words + ust.stores_words));
  unf.gflops = double(ust.flops) / double(unf.wall_ns);
  rows.push_back(unf);
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CG tensor-product kernel compiler and execution engine"};
  app.require_subcommand(1);

  std::string spec_path, out_dir = "cgforge_out", mode = "unfused", dtype = "fp64";
  std::string xyz_path, dump_dir;
  std::uint32_t budget = scheduler::kDefaultBudgetWords;
  int lane_width = scheduler::kDefaultLaneWidth;
  int workers = default_workers();
  std::int64_t batch = 64;
  std::uint64_t seed = 1234;
  int warmup = 2, iters = 5;
  double r_cut = 3.5;
  bool corrupt = false, emit_schedule = false, emit_ir = false;

  auto* compile = app.add_subcommand("compile", "validate, schedule and emit kernel IR");
  compile->add_option("--spec", spec_path, "problem JSON")->required();
  compile->add_option("--budget", budget, "scratch budget in words");
  compile->add_option("--lane-width", lane_width, "multiplicity chunk width");
  compile->add_flag("--emit-schedule", emit_schedule, "write schedule.json");
  compile->add_flag("--emit-ir", emit_ir, "write per-subkernel IR listings");
  compile->add_option("--out", out_dir, "output directory");

  auto* verify = app.add_subcommand("verify", "run correctness suites against the dense oracle");
  verify->add_option("--spec", spec_path, "problem JSON")->required();
  verify->add_option("--budget", budget, "scratch budget in words");
  verify->add_option("--batch", batch, "verification batch size");
  verify->add_option("--workers", workers, "worker threads");
  verify->add_option("--seed", seed, "random seed");
  verify->add_flag("--corrupt-cg", corrupt,
                   "negative control: perturb one CG coefficient (must fail)");

  auto* bench = app.add_subcommand("bench", "benchmark and emit CSV");
  bench->add_option("--spec", spec_path, "problem JSON")->required();
  bench->add_option("--batch", batch, "batch size");
  bench->add_option("--dtype", dtype, "fp32 or fp64")
      ->check(CLI::IsMember({"fp32", "fp64"}));
  bench->add_option("--budget", budget, "scratch budget in words");
  bench->add_option("--workers", workers, "worker threads");
  bench->add_option("--seed", seed, "random seed");
  bench->add_option("--mode", mode, "unfused | fused-det | fused-atomic")
      ->check(CLI::IsMember({"unfused", "fused-det", "fused-atomic"}));
  bench->add_option("--warmup", warmup, "warmup iterations");
  bench->add_option("--iters", iters, "measured iterations");
  bench->add_option("--xyz", xyz_path, "geometry file for fused modes (default: lattice)");
  bench->add_option("--r-cut", r_cut, "radius graph cutoff");
  bench->add_option("--out", out_dir, "write bench.csv here instead of stdout");
  bench->add_option("--dump-arrays", dump_dir, "dump input/output arrays to this directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (compile->parsed()) {
      const bool both = !emit_schedule && !emit_ir;
      return cmd_compile(spec_path, budget, lane_width, emit_schedule || both, emit_ir || both,
                         out_dir);
    }
    if (verify->parsed()) {
      return cmd_verify(spec_path, budget, lane_width, batch, workers, seed, corrupt);
    }

    // bench
    LoadedProblem lp = load_and_compile(spec_path, budget, lane_width);
    const engine::TpPlan plan(lp.split, lp.schedule);
    std::vector<BenchRow> rows;
    if (mode == "unfused") {
      rows = dtype == "fp32" ? bench_unfused<float>(plan, "fp32", batch, workers, warmup, iters,
                                                    seed, dump_dir)
                             : bench_unfused<double>(plan, "fp64", batch, workers, warmup, iters,
                                                     seed, dump_dir);
    } else {
      const conv::Geometry geo =
          xyz_path.empty() ? conv::cubic_lattice(10, 10, 10, 1.0) : conv::load_xyz(xyz_path);
      const conv::GraphCSR graph = conv::radius_graph(geo, r_cut);
      const conv::Mode m =
          mode == "fused-det" ? conv::Mode::deterministic : conv::Mode::atomic;
      std::cerr << "graph: " << graph.node_count << " nodes, " << graph.edge_count()
                << " edges\n";
      rows = dtype == "fp32"
                 ? bench_fused<float>(plan, "fp32", workers, warmup, iters, seed, m, graph)
                 : bench_fused<double>(plan, "fp64", workers, warmup, iters, seed, m, graph);
    }
    if (bench->count("--out") > 0) {
      fs::create_directories(out_dir);
      std::ofstream out(fs::path(out_dir) / "bench.csv");
      print_csv(out, rows);
      for (const auto& r : rows) {
        std::cout << r.op << ": " << r.wall_ns / 1e6 << " ms, " << r.gflops << " GFLOP/s\n";
      }
    } else {
      print_csv(std::cout, rows);
    }
    return 0;
  } catch (const scheduler::BudgetError& e) {
    std::cerr << e.what() << "\n";
    return kExitBudget;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }
}
