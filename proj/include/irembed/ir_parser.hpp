// SPDX-License-Identifier: Apache-2.0
//
// Parser for a subset of textual LLVM IR: define/declare, labels, %-values,
// @-globals, literal constants and the common arithmetic, memory, compare,
// cast, branch, phi and call opcodes. Instructions with other opcodes are
// kept with operands recovered by sigil scanning and flagged as generic.
#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "irembed/corpus.hpp"

namespace irembed {

struct IRInstr {
  IRStatement text;
  std::string opcode;
  std::optional<std::string> defined_value;    // with sigil, e.g. "%c"
  std::vector<std::string> operand_values;     // "%x" / "@g", in order of use
  std::vector<std::string> operand_constants;  // literal spellings
  std::optional<std::string> callee;           // function name without '@'
  std::vector<std::string> successors;         // block labels without '%'
  bool generic = false;                        // opcode outside the core subset
  std::size_t line = 0;

  bool is_terminator() const;
  bool is_call() const { return opcode == "call" || opcode == "invoke"; }
};

struct IRBlock {
  std::string label;  // empty for an unlabelled entry block
  std::vector<IRInstr> instructions;
};

struct IRFunction {
  std::string name;  // without '@'
  std::vector<std::string> params;  // with sigil
  std::vector<IRBlock> blocks;
  std::size_t line = 0;
};

struct IRModule {
  std::vector<IRFunction> functions;
  std::vector<std::string> declarations;  // declared-only function names
  std::set<std::string> type_names;       // "%struct.foo" etc.
  std::vector<std::string> globals;       // "@g" for global variables

  const IRFunction* find_function(std::string_view name) const;
};

bool is_core_opcode(std::string_view opcode);

/// Throws ParseError (with a 1-based line number) on an unclosed function,
/// a branch to a missing block, or a value defined twice in one function.
IRModule parse_ir(std::string_view text);

}  // namespace irembed
