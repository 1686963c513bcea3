#include <doctest.h>

#include "irembed/errors.hpp"
#include "irembed/io.hpp"
#include "irembed/ir_parser.hpp"
#include "support.hpp"

using namespace irembed;

TEST_CASE("the add function parses into one block of two") {
  const IRModule m = parse_ir(irembed::testing::kAddFunction);
  REQUIRE(m.functions.size() == 1);
  const IRFunction& f = m.functions[0];
  CHECK(f.name == "add");
  CHECK(f.params == std::vector<std::string>{"%a", "%b"});
  REQUIRE(f.blocks.size() == 1);
  REQUIRE(f.blocks[0].instructions.size() == 2);
  const IRInstr& add = f.blocks[0].instructions[0];
  CHECK(add.opcode == "add");
  CHECK(add.defined_value == "%c");
  CHECK(add.operand_values == std::vector<std::string>{"%a", "%b"});
  CHECK(add.operand_constants.empty());
  CHECK(f.blocks[0].instructions[1].opcode == "ret");
  CHECK(f.blocks[0].instructions[1].is_terminator());
}

TEST_CASE("branch to a missing block") {
  const char* text =
      "define void @f() {\n"
      "entry:\n"
      "  br label %exit\n"
      "}\n";
  try {
    parse_ir(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("unclosed function") {
  CHECK_THROWS_AS(parse_ir("define void @f() {\nentry:\n  ret void\n"), ParseError);
}

TEST_CASE("SSA redefinition") {
  CHECK_THROWS_AS(parse_ir("define i32 @f(i32 %a) {\n  %x = add i32 %a, 1\n  %x = add i32 %a, 2\n  ret i32 %x\n}\n"),
                  ParseError);
}

TEST_CASE("call operands and callee") {
  const IRModule m = parse_ir(
      "declare i32 @f(i32)\n"
      "define i32 @main(i32 %x) {\n"
      "  %r = call i32 @f(i32 %x)\n"
      "  ret i32 %r\n"
      "}\n");
  const IRInstr& call = m.functions[0].blocks[0].instructions[0];
  CHECK(call.callee == "f");
  CHECK(call.operand_values == std::vector<std::string>{"%x"});
  CHECK(call.is_call());
  CHECK(m.declarations == std::vector<std::string>{"f"});
}

TEST_CASE("constants, phi blocks and successors") {
  const std::string text = read_file(irembed::testing::data_dir() / "golden" / "branch.ll");
  const IRModule m = parse_ir(text);
  const auto& blocks = m.functions[0].blocks;
  REQUIRE(blocks.size() == 3);
  CHECK(blocks[0].label == "entry");
  const IRInstr& cmp = blocks[0].instructions[0];
  CHECK(cmp.operand_values == std::vector<std::string>{"%n"});
  CHECK(cmp.operand_constants == std::vector<std::string>{"0"});
  CHECK(blocks[0].instructions[1].successors == std::vector<std::string>{"pos", "done"});
  const IRInstr& phi = blocks[2].instructions[0];
  CHECK(phi.operand_values == std::vector<std::string>{"%m"});
  CHECK(phi.operand_constants == std::vector<std::string>{"0"});
}

TEST_CASE("alignment and array sizes are not constants") {
  const IRModule m = parse_ir(
      "define void @f() {\n"
      "  %a = alloca [4 x i32], align 16\n"
      "  ret void\n"
      "}\n");
  CHECK(m.functions[0].blocks[0].instructions[0].operand_constants.empty());
}

TEST_CASE("unknown opcodes are kept and flagged") {
  const IRModule m = parse_ir(
      "define i32 @f(i32 %a) {\n"
      "  %x = frobnicate i32 %a, 7\n"
      "  ret i32 %x\n"
      "}\n");
  const IRInstr& ins = m.functions[0].blocks[0].instructions[0];
  CHECK(ins.generic);
  CHECK(ins.defined_value == "%x");
  CHECK(ins.operand_values == std::vector<std::string>{"%a"});
  CHECK(ins.operand_constants == std::vector<std::string>{"7"});
  CHECK_FALSE(is_core_opcode("frobnicate"));
  CHECK(is_core_opcode("getelementptr"));
}

TEST_CASE("struct types are not values") {
  const IRModule m = parse_ir(
      "%struct.p = type { i32, i32 }\n"
      "define i32 @f(%struct.p* %s) {\n"
      "  %q = getelementptr inbounds %struct.p, %struct.p* %s, i64 0, i32 1\n"
      "  %v = load i32, i32* %q, align 4\n"
      "  ret i32 %v\n"
      "}\n");
  CHECK(m.type_names.count("%struct.p") == 1);
  CHECK(m.functions[0].params == std::vector<std::string>{"%s"});
  CHECK(m.functions[0].blocks[0].instructions[0].operand_values == std::vector<std::string>{"%s"});
}

TEST_CASE("every corpus file parses") {
  for (const auto& e : std::filesystem::directory_iterator(irembed::testing::data_dir() / "corpus")) {
    CAPTURE(e.path().string());
    const IRModule m = parse_ir(read_file(e.path()));
    CHECK_FALSE(m.functions.empty());
  }
}
