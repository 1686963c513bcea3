// SPDX-License-Identifier: Apache-2.0
#include "irembed/ir_parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

#include "irembed/errors.hpp"

namespace irembed {

namespace {

constexpr std::array<std::string_view, 21> kCoreOpcodes = {
    "add",  "sub", "mul",   "fadd", "fsub",   "fmul", "load",
    "store", "alloca", "icmp", "fcmp", "br", "switch", "phi",
    "call", "ret", "getelementptr", "zext", "sext", "trunc", "bitcast"};

constexpr std::array<std::string_view, 7> kTerminators = {
    "ret", "br", "switch", "unreachable", "resume", "indirectbr", "invoke"};

constexpr std::array<std::string_view, 7> kConstantWords = {
    "true", "false", "null", "undef", "poison", "zeroinitializer", "none"};

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '$' ||
         c == '-';
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool is_int_literal(std::string_view w) {
  std::size_t i = (!w.empty() && w[0] == '-') ? 1 : 0;
  if (i >= w.size()) return false;
  return std::all_of(w.begin() + static_cast<std::ptrdiff_t>(i), w.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

bool is_float_literal(std::string_view w) {
  if (w.starts_with("0x") && w.size() > 2)
    return std::all_of(w.begin() + 2, w.end(),
                       [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
  std::size_t i = (!w.empty() && (w[0] == '-' || w[0] == '+')) ? 1 : 0;
  bool digits = false, dot = false;
  for (; i < w.size(); ++i) {
    const char c = w[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits = true;
    } else if (c == '.' && !dot) {
      dot = true;
    } else if (c == 'e' && digits) {
      std::size_t j = i + 1;
      if (j < w.size() && (w[j] == '+' || w[j] == '-')) ++j;
      if (j >= w.size()) return false;
      return dot && std::all_of(w.begin() + static_cast<std::ptrdiff_t>(j), w.end(), [](char d) {
               return std::isdigit(static_cast<unsigned char>(d));
             });
    } else {
      return false;
    }
  }
  return digits && dot;
}

/// Removes double-quoted string literals (c"...", !"...", attribute strings).
std::string drop_strings(std::string_view s) {
  std::string out;
  bool in_string = false;
  for (const char c : s) {
    if (c == '"') {
      in_string = !in_string;
      out.push_back(' ');
      continue;
    }
    if (!in_string) out.push_back(c);
  }
  return out;
}

/// Maps IR punctuation to spaces, keeping sigils attached to their names.
std::vector<std::string> operand_tokens(std::string_view s) {
  std::string spaced;
  for (const char c : s) {
    if (c == ',' || c == '(' || c == ')' || c == '[' || c == ']' || c == '{' || c == '}' ||
        c == '<' || c == '>' || c == '*' || c == '=')
      spaced.push_back(' ');
    else
      spaced.push_back(c);
  }
  return split_words(spaced);
}

std::string read_name(std::string_view s, std::size_t pos) {
  std::size_t end = pos;
  while (end < s.size() && is_ident_char(s[end])) ++end;
  return std::string(s.substr(pos, end - pos));
}

/// Drops the predecessor block from each "[ value, %block ]" incoming pair.
std::string strip_phi_blocks(std::string_view body) {
  std::string out;
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] != '[') {
      out.push_back(body[i++]);
      continue;
    }
    int depth = 0;
    std::size_t j = i, last_comma = std::string_view::npos;
    for (; j < body.size(); ++j) {
      if (body[j] == '[' || body[j] == '(' || body[j] == '{' || body[j] == '<') ++depth;
      if (body[j] == ']' || body[j] == ')' || body[j] == '}' || body[j] == '>') --depth;
      if (body[j] == ',' && depth == 1) last_comma = j;
      if (depth == 0) break;
    }
    const std::size_t stop = last_comma == std::string_view::npos ? j : last_comma;
    out += body.substr(i, stop - i);
    out.push_back(' ');
    i = j + 1;
  }
  return out;
}

struct ParsedLine {
  IRStatement stmt;
  std::size_t line;
};

class Parser {
 public:
  explicit Parser(std::string_view text) {
    std::size_t start = 0, lineno = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      ++lineno;
      if (auto s = normalize_line(text.substr(start, end - start)))
        lines_.push_back({std::move(*s), lineno});
      start = end + 1;
    }
  }

  IRModule run() {
    collect_module_names();
    for (std::size_t i = 0; i < lines_.size(); ++i) {
      const std::string& t = lines_[i].stmt.text;
      if (t.starts_with("define ")) {
        i = parse_function(i);
      } else if (t.starts_with("declare ")) {
        const auto at = t.find('@');
        if (at != std::string::npos) module_.declarations.push_back(read_name(t, at + 1));
      }
    }
    return std::move(module_);
  }

 private:
  void collect_module_names() {
    bool in_function = false;
    for (const auto& pl : lines_) {
      const std::string& t = pl.stmt.text;
      if (t.starts_with("define ")) in_function = true;
      if (in_function) {
        if (t == "}") in_function = false;
        continue;
      }
      if (t.starts_with("%") && t.find(" = type ") != std::string::npos)
        module_.type_names.insert(t.substr(0, t.find(' ')));
      else if (t.starts_with("@") && t.find(" = ") != std::string::npos)
        module_.globals.push_back(t.substr(0, t.find(' ')));
    }
  }

  std::size_t parse_function(std::size_t header) {
    const ParsedLine& hl = lines_[header];
    const std::string& h = hl.stmt.text;
    IRFunction fn;
    fn.line = hl.line;
    const auto at = h.find('@');
    if (at == std::string::npos) throw ParseError(hl.line, "function header without a name");
    fn.name = read_name(h, at + 1);
    const auto open = h.find('(', at);
    if (open == std::string::npos) throw ParseError(hl.line, "function header without parameters");
    int depth = 0;
    std::size_t close = open;
    for (; close < h.size(); ++close) {
      if (h[close] == '(') ++depth;
      if (h[close] == ')' && --depth == 0) break;
    }
    if (close >= h.size()) throw ParseError(hl.line, "unbalanced parameter list");
    for (const auto& tok : operand_tokens(h.substr(open + 1, close - open - 1)))
      if (tok.size() > 1 && tok[0] == '%' && !module_.type_names.count(tok)) fn.params.push_back(tok);
    if (h.back() != '{') throw ParseError(hl.line, "expected '{' at end of function header");

    std::size_t i = header + 1;
    bool closed = false;
    for (; i < lines_.size(); ++i) {
      const ParsedLine& pl = lines_[i];
      const std::string& t = pl.stmt.text;
      if (t == "}") {
        closed = true;
        break;
      }
      if (t.starts_with("define ")) break;
      if (is_label(t)) {
        fn.blocks.push_back({t.substr(0, t.size() - 1), {}});
        continue;
      }
      if (fn.blocks.empty()) fn.blocks.push_back({"", {}});
      IRStatement text = pl.stmt;
      // A switch table may continue over several lines until ']'.
      if (t.find("switch ") != std::string::npos && t.find('[') != std::string::npos &&
          t.find(']') == std::string::npos) {
        std::size_t j = i + 1;
        for (; j < lines_.size(); ++j) {
          text.text += ' ';
          text.text += lines_[j].stmt.text;
          if (lines_[j].stmt.text.find(']') != std::string::npos) break;
        }
        if (j >= lines_.size()) throw ParseError(pl.line, "unterminated switch table");
        i = j;
      }
      fn.blocks.back().instructions.push_back(parse_instruction(std::move(text), pl.line));
    }
    if (!closed) throw ParseError(hl.line, "unclosed function @" + fn.name);
    validate(fn);
    module_.functions.push_back(std::move(fn));
    return i;
  }

  static bool is_label(const std::string& t) {
    if (t.size() < 2 || t.back() != ':') return false;
    const std::string_view name(t.data(), t.size() - 1);
    if (name.front() == '"' && name.back() == '"') return true;
    return std::all_of(name.begin(), name.end(), is_ident_char);
  }

  IRInstr parse_instruction(IRStatement text, std::size_t line) {
    IRInstr ins;
    ins.line = line;
    std::string_view t = text.text;
    std::string_view rest = t;
    if ((t.starts_with("%") || t.starts_with("@"))) {
      const auto eq = t.find(" = ");
      if (eq != std::string_view::npos) {
        ins.defined_value = std::string(t.substr(0, eq));
        rest = t.substr(eq + 3);
      }
    }
    auto words = split_words(rest);
    std::size_t w = 0;
    while (w < words.size() &&
           (words[w] == "tail" || words[w] == "musttail" || words[w] == "notail"))
      ++w;
    if (w >= words.size()) throw ParseError(line, "instruction without an opcode");
    ins.opcode = words[w];
    ins.generic = !is_core_opcode(ins.opcode);

    std::string body = drop_strings(rest.substr(rest.find(ins.opcode) + ins.opcode.size()));

    if (ins.is_call()) {
      // The callee is the first @name or %name immediately followed by '('.
      for (std::size_t p = 0; p < body.size(); ++p) {
        if (body[p] != '@' && body[p] != '%') continue;
        const std::string name = read_name(body, p + 1);
        const std::size_t after = p + 1 + name.size();
        if (!name.empty() && after < body.size() && body[after] == '(') {
          if (body[p] == '@') {
            ins.callee = name;
            body.replace(p, after - p, std::string(after - p, ' '));
          }
          break;
        }
      }
    }

    if (ins.opcode == "phi") body = strip_phi_blocks(body);
    std::vector<std::string> toks = operand_tokens(body);
    std::vector<bool> skip(toks.size(), false);
    for (std::size_t k = 0; k + 1 < toks.size(); ++k) {
      if (toks[k] == "label" && toks[k + 1].starts_with("%")) {
        ins.successors.push_back(toks[k + 1].substr(1));
        skip[k + 1] = true;
      }
    }
    for (std::size_t k = 0; k < toks.size(); ++k) {
      if (skip[k]) continue;
      const std::string& tok = toks[k];
      const std::string prev = k > 0 ? toks[k - 1] : std::string();
      const std::string next = k + 1 < toks.size() ? toks[k + 1] : std::string();
      if (tok.size() > 1 && tok[0] == '%') {
        if (module_.type_names.count(tok)) continue;
        ins.operand_values.push_back(tok);
      } else if (tok.size() > 1 && tok[0] == '@') {
        ins.operand_values.push_back(tok);
      } else if (is_int_literal(tok)) {
        if (prev == "align" || prev == "addrspace" || prev == "dereferenceable" ||
            prev == "dereferenceable_or_null" || prev == "alignstack" || next == "x")
          continue;
        ins.operand_constants.push_back(tok);
      } else if (is_float_literal(tok) ||
                 std::find(kConstantWords.begin(), kConstantWords.end(), tok) !=
                     kConstantWords.end()) {
        ins.operand_constants.push_back(tok);
      }
    }
    ins.text = std::move(text);
    return ins;
  }

  void validate(const IRFunction& fn) const {
    std::unordered_set<std::string> labels;
    for (const auto& b : fn.blocks) labels.insert(b.label);
    std::unordered_set<std::string> defs(fn.params.begin(), fn.params.end());
    if (defs.size() != fn.params.size())
      throw ParseError(fn.line, "duplicate parameter name in @" + fn.name);
    for (const auto& b : fn.blocks) {
      for (const auto& ins : b.instructions) {
        for (const auto& s : ins.successors)
          if (!labels.count(s))
            throw ParseError(ins.line, "branch to undefined block %" + s);
        if (ins.defined_value && !defs.insert(*ins.defined_value).second)
          throw ParseError(ins.line, "value " + *ins.defined_value + " defined twice");
      }
    }
  }

  std::vector<ParsedLine> lines_;
  IRModule module_;
};

}  // namespace

bool IRInstr::is_terminator() const {
  return std::find(kTerminators.begin(), kTerminators.end(), opcode) != kTerminators.end();
}

const IRFunction* IRModule::find_function(std::string_view name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

bool is_core_opcode(std::string_view opcode) {
  return std::find(kCoreOpcodes.begin(), kCoreOpcodes.end(), opcode) != kCoreOpcodes.end();
}

IRModule parse_ir(std::string_view text) { return Parser(text).run(); }

}  // namespace irembed
