#include "cgforge/tpspec.hpp"

#include <json.hpp>
#include <sstream>

namespace cgforge::tpspec {

ValidationResult validate(const irreps::Irreps& x_ir, const irreps::Irreps& y_ir,
                          const irreps::Irreps& z_ir, const std::vector<Instruction>& instrs) {
  ValidationResult result;
  auto flag = [&result](int idx, const std::string& msg) {
    result.violations.push_back({idx, msg});
  };

  ValidatedProblem p;
  p.x_ir = x_ir;
  p.y_ir = y_ir;
  p.z_ir = z_ir;
  p.instructions = instrs;
  p.dim_x = x_ir.dim();
  p.dim_y = y_ir.dim();
  p.dim_z = z_ir.dim();

  std::uint32_t w_off = 0;
  for (std::size_t n = 0; n < instrs.size(); ++n) {
    const int idx = static_cast<int>(n);
    const Instruction& in = instrs[n];
    bool usable = true;
    if (in.x_seg < 1 || in.x_seg > x_ir.num_segments()) {
      flag(idx, "x segment index " + std::to_string(in.x_seg) + " out of range");
      usable = false;
    }
    if (in.y_seg < 1 || in.y_seg > y_ir.num_segments()) {
      flag(idx, "y segment index " + std::to_string(in.y_seg) + " out of range");
      usable = false;
    }
    if (in.z_seg < 1 || in.z_seg > z_ir.num_segments()) {
      flag(idx, "z segment index " + std::to_string(in.z_seg) + " out of range");
      usable = false;
    }
    if (!usable) continue;

    const auto& bx = x_ir.blocks[static_cast<std::size_t>(in.x_seg - 1)];
    const auto& by = y_ir.blocks[static_cast<std::size_t>(in.y_seg - 1)];
    const auto& bz = z_ir.blocks[static_cast<std::size_t>(in.z_seg - 1)];

    if (by.mult != 1) {
      flag(idx, "y segment multiplicity must be 1 (unsupported pattern), got " +
                    std::to_string(by.mult));
    }
    if (in.kind == Kind::B && bx.mult != bz.mult) {
      flag(idx, "kind B requires mult(x_seg) == mult(z_seg), got " + std::to_string(bx.mult) +
                    " vs " + std::to_string(bz.mult));
    }
    if (!cg::triangle_rule(bx.ir.l, by.ir.l, bz.ir.l)) {
      flag(idx, "triangle rule violated: (" + std::to_string(bx.ir.l) + "," +
                    std::to_string(by.ir.l) + "," + std::to_string(bz.ir.l) + ")");
    }
    const bool px = bx.ir.parity == irreps::Parity::odd;
    const bool py = by.ir.parity == irreps::Parity::odd;
    const bool pz = bz.ir.parity == irreps::Parity::odd;
    if ((px != py) != pz) {
      flag(idx, "parity rule violated: p_x * p_y != p_z");
    }

    ResolvedInstruction r;
    r.x_seg = in.x_seg - 1;
    r.y_seg = in.y_seg - 1;
    r.z_seg = in.z_seg - 1;
    r.kind = in.kind;
    r.l1 = bx.ir.l;
    r.l2 = by.ir.l;
    r.l3 = bz.ir.l;
    r.b_prime = bx.mult;
    r.b = bz.mult;
    r.x_offset = static_cast<std::uint32_t>(x_ir.offset(r.x_seg));
    r.y_offset = static_cast<std::uint32_t>(y_ir.offset(r.y_seg));
    r.z_offset = static_cast<std::uint32_t>(z_ir.offset(r.z_seg));
    r.weight_offset = w_off;
    if (in.kind == Kind::B) {
      r.weight_count = static_cast<std::uint32_t>(r.b);
      r.w_row_stride = 1;
    } else {
      r.weight_count = static_cast<std::uint32_t>(r.b) * static_cast<std::uint32_t>(r.b_prime);
      r.w_row_stride = static_cast<std::uint32_t>(r.b_prime);
    }
    w_off += r.weight_count;
    p.resolved.push_back(std::move(r));
    p.origin.push_back(idx);
  }
  p.total_weights = w_off;

  if (!result.violations.empty()) return result;

  // CG blocks exist for every valid instruction (triangle rule checked above).
  for (auto& r : p.resolved) r.block = cg::cg_block(r.l1, r.l2, r.l3);
  result.problem = std::move(p);
  return result;
}

std::tuple<int, int, int, std::uint32_t> problem_dims(const ValidatedProblem& p) {
  return {p.dim_x, p.dim_y, p.dim_z, p.total_weights};
}

ValidationResult parse_problem_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const auto x_ir = irreps::parse_irreps(j.at("x").get<std::string>());
  const auto y_ir = irreps::parse_irreps(j.at("y").get<std::string>());
  const auto z_ir = irreps::parse_irreps(j.at("z").get<std::string>());
  std::vector<Instruction> instrs;
  for (const auto& tup : j.at("instructions")) {
    if (!tup.is_array() || tup.size() != 4) {
      throw std::runtime_error("instruction must be [x_seg, y_seg, z_seg, \"B\"|\"C\"]");
    }
    Instruction in;
    in.x_seg = tup.at(0).get<int>();
    in.y_seg = tup.at(1).get<int>();
    in.z_seg = tup.at(2).get<int>();
    const std::string k = tup.at(3).get<std::string>();
    if (k == "B") {
      in.kind = Kind::B;
    } else if (k == "C") {
      in.kind = Kind::C;
    } else {
      throw std::runtime_error("instruction kind must be \"B\" or \"C\", got \"" + k + "\"");
    }
    instrs.push_back(in);
  }
  return validate(x_ir, y_ir, z_ir, instrs);
}

std::string problem_to_json(const ValidatedProblem& p) {
  nlohmann::json j;
  j["x"] = p.x_ir.str();
  j["y"] = p.y_ir.str();
  j["z"] = p.z_ir.str();
  j["instructions"] = nlohmann::json::array();
  for (const auto& in : p.instructions) {
    j["instructions"].push_back(
        {in.x_seg, in.y_seg, in.z_seg, std::string(1, kind_char(in.kind))});
  }
  return j.dump();
}

}  // namespace cgforge::tpspec
