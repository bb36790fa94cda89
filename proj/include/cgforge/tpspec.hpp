#ifndef CGFORGE_TPSPEC_HPP
#define CGFORGE_TPSPEC_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "cgforge/cg.hpp"
#include "cgforge/irreps.hpp"

namespace cgforge {

/// Tensor-product problem descriptions.
///
/// Weight layout: weights are concatenated per instruction, in instruction
/// order. Kind B stores b diagonal values; kind C stores b*b' values
/// row-major (b rows of b' columns, rows indexed by the z-segment
/// multiplicity, columns by the x-segment multiplicity).
namespace tpspec {

enum class Kind : std::uint8_t { B, C };

inline char kind_char(Kind k) { return k == Kind::B ? 'B' : 'C'; }

struct Instruction {
  int x_seg = 1;  // 1-based segment indices
  int y_seg = 1;
  int z_seg = 1;
  Kind kind = Kind::B;
};

/// One subkernel with every offset resolved. After multiplicity splitting a
/// resolved instruction may cover a sub-range of its segment's lanes; the
/// weight view then addresses a tile of the original layout via
/// (weight_offset, b, b_prime, w_row_stride).
struct ResolvedInstruction {
  int x_seg = 0;  // 0-based
  int y_seg = 0;
  int z_seg = 0;
  Kind kind = Kind::B;
  int l1 = 0, l2 = 0, l3 = 0;
  int b_prime = 0;  // x-side multiplicity (contraction lanes)
  int b = 0;        // z-side multiplicity (output rows); equals b_prime for kind B
  std::uint32_t x_offset = 0;
  std::uint32_t y_offset = 0;
  std::uint32_t z_offset = 0;
  std::uint32_t weight_offset = 0;
  std::uint32_t weight_count = 0;  // b for B, b*b_prime for C
  std::uint32_t w_row_stride = 0;  // stored columns per row (C); 1 for B
  std::shared_ptr<const cg::CGBlock> block;

  int dx() const { return 2 * l1 + 1; }
  int dy() const { return 2 * l2 + 1; }
  int dz() const { return 2 * l3 + 1; }
};

struct ValidatedProblem {
  irreps::Irreps x_ir, y_ir, z_ir;
  std::vector<Instruction> instructions;
  std::vector<ResolvedInstruction> resolved;  // instruction order; one per
                                              // instruction unless split
  std::vector<int> origin;  // resolved[i] derives from instructions[origin[i]]
  int dim_x = 0, dim_y = 0, dim_z = 0;
  std::uint32_t total_weights = 0;
};

struct Violation {
  int instruction_index = -1;  // -1: not tied to one instruction
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;
  std::optional<ValidatedProblem> problem;
  bool ok() const { return violations.empty(); }
};

/// Total validation: never throws on bad input, returns either a resolved
/// problem or the full list of violations.
ValidationResult validate(const irreps::Irreps& x_ir, const irreps::Irreps& y_ir,
                          const irreps::Irreps& z_ir, const std::vector<Instruction>& instrs);

std::tuple<int, int, int, std::uint32_t> problem_dims(const ValidatedProblem& p);

/// Parses the CLI problem schema
/// `{"x": "...", "y": "...", "z": "...", "instructions": [[xs,ys,zs,"B"|"C"],...]}`.
/// Throws irreps::ParseError / std::runtime_error on malformed input.
ValidationResult parse_problem_json(const std::string& text);

std::string problem_to_json(const ValidatedProblem& p);

}  // namespace tpspec
}  // namespace cgforge

#endif
