// SPDX-License-Identifier: Apache-2.0
#include "irembed/graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "irembed/errors.hpp"

namespace irembed {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Instruction: return "instruction";
    case NodeKind::Variable: return "variable";
    case NodeKind::Constant: return "constant";
  }
  return "instruction";
}

std::string_view to_string(EdgeType type) {
  switch (type) {
    case EdgeType::Control: return "control";
    case EdgeType::Data: return "data";
    case EdgeType::Call: return "call";
  }
  return "control";
}

NodeKind node_kind_from_string(std::string_view name) {
  if (name == "instruction") return NodeKind::Instruction;
  if (name == "variable") return NodeKind::Variable;
  if (name == "constant") return NodeKind::Constant;
  throw ValidationError("unknown node kind '" + std::string(name) + "'");
}

EdgeType edge_type_from_string(std::string_view name) {
  if (name == "control") return EdgeType::Control;
  if (name == "data") return EdgeType::Data;
  if (name == "call") return EdgeType::Call;
  throw ValidationError("unknown edge type '" + std::string(name) + "'");
}

std::size_t ProGraph::count(EdgeType type) const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [&](const Edge& e) { return e.type == type; }));
}

namespace {

struct FunctionLayout {
  std::vector<std::vector<std::size_t>> block_nodes;  // instruction node ids per block
  std::unordered_map<std::string, std::size_t> block_index;
  std::vector<std::size_t> ret_nodes;
  std::unordered_map<std::string, std::size_t> values;     // local name -> variable node
  std::map<std::string, std::size_t> constants;            // literal -> constant node
  std::optional<std::size_t> entry;
};

}  // namespace

ProGraph build_multigraph(const IRModule& module, const Vocab& vocab) {
  ProGraph g;
  auto add_node = [&](NodeKind kind, std::string text) {
    Node n;
    n.index = g.nodes.size();
    n.kind = kind;
    n.feature = encode_statement(vocab, text);
    n.text = std::move(text);
    g.nodes.push_back(std::move(n));
    return g.nodes.back().index;
  };

  std::vector<FunctionLayout> layouts(module.functions.size());
  std::unordered_map<std::string, std::size_t> function_index;
  for (std::size_t f = 0; f < module.functions.size(); ++f)
    function_index.emplace(module.functions[f].name, f);

  // Instruction nodes in program order.
  for (std::size_t f = 0; f < module.functions.size(); ++f) {
    const IRFunction& fn = module.functions[f];
    FunctionLayout& lay = layouts[f];
    for (std::size_t b = 0; b < fn.blocks.size(); ++b) {
      lay.block_index.emplace(fn.blocks[b].label, b);
      auto& ids = lay.block_nodes.emplace_back();
      for (const auto& ins : fn.blocks[b].instructions) {
        const std::size_t id = add_node(NodeKind::Instruction, ins.text.text);
        ids.push_back(id);
        if (!lay.entry) lay.entry = id;
        if (ins.opcode == "ret") lay.ret_nodes.push_back(id);
      }
    }
  }

  // Synthetic nodes for callees without a body, in order of first call.
  std::map<std::string, std::size_t> external;
  std::vector<std::string> external_order;
  for (const auto& fn : module.functions)
    for (const auto& blk : fn.blocks)
      for (const auto& ins : blk.instructions) {
        if (!ins.callee) continue;
        const auto it = function_index.find(*ins.callee);
        const bool has_body =
            it != function_index.end() && layouts[it->second].entry.has_value();
        if (!has_body && !external.count(*ins.callee)) {
          external.emplace(*ins.callee, 0);
          external_order.push_back(*ins.callee);
        }
      }
  for (const auto& name : external_order)
    external[name] = add_node(NodeKind::Instruction, "declare @" + name);

  // Variables: parameters then definitions, per function; globals on first use.
  for (std::size_t f = 0; f < module.functions.size(); ++f) {
    const IRFunction& fn = module.functions[f];
    FunctionLayout& lay = layouts[f];
    for (const auto& p : fn.params) lay.values.emplace(p, add_node(NodeKind::Variable, p));
    for (const auto& blk : fn.blocks)
      for (const auto& ins : blk.instructions)
        if (ins.defined_value)
          lay.values.emplace(*ins.defined_value, add_node(NodeKind::Variable, *ins.defined_value));
  }
  std::unordered_map<std::string, std::size_t> globals;
  for (const auto& fn : module.functions)
    for (const auto& blk : fn.blocks)
      for (const auto& ins : blk.instructions)
        for (const auto& v : ins.operand_values)
          if (v.starts_with("@") && !globals.count(v))
            globals.emplace(v, add_node(NodeKind::Variable, v));

  // Constants, deduplicated per function.
  for (std::size_t f = 0; f < module.functions.size(); ++f)
    for (const auto& blk : module.functions[f].blocks)
      for (const auto& ins : blk.instructions)
        for (const auto& c : ins.operand_constants)
          if (!layouts[f].constants.count(c))
            layouts[f].constants.emplace(c, add_node(NodeKind::Constant, c));

  std::set<Edge> edges;
  for (std::size_t f = 0; f < module.functions.size(); ++f) {
    const IRFunction& fn = module.functions[f];
    const FunctionLayout& lay = layouts[f];
    for (std::size_t b = 0; b < fn.blocks.size(); ++b) {
      const auto& blk = fn.blocks[b];
      const auto& ids = lay.block_nodes[b];
      for (std::size_t k = 0; k < blk.instructions.size(); ++k) {
        const IRInstr& ins = blk.instructions[k];
        const std::size_t self = ids[k];
        if (k + 1 < ids.size()) edges.insert({self, ids[k + 1], EdgeType::Control});
        for (const auto& s : ins.successors) {
          const auto& target = lay.block_nodes[lay.block_index.at(s)];
          if (!target.empty()) edges.insert({self, target.front(), EdgeType::Control});
        }
        if (ins.defined_value)
          edges.insert({self, lay.values.at(*ins.defined_value), EdgeType::Data});
        for (const auto& v : ins.operand_values) {
          std::size_t src;
          if (v.starts_with("@")) {
            src = globals.at(v);
          } else {
            const auto it = lay.values.find(v);
            if (it == lay.values.end())
              throw GraphError("undefined value " + v + " in @" + fn.name + " (line " +
                               std::to_string(ins.line) + ")");
            src = it->second;
          }
          edges.insert({src, self, EdgeType::Data});
        }
        for (const auto& c : ins.operand_constants)
          edges.insert({lay.constants.at(c), self, EdgeType::Data});
        if (ins.callee) {
          if (const auto ext = external.find(*ins.callee); ext != external.end()) {
            edges.insert({self, ext->second, EdgeType::Call});
          } else {
            const FunctionLayout& callee = layouts[function_index.at(*ins.callee)];
            edges.insert({self, *callee.entry, EdgeType::Call});
            for (const std::size_t r : callee.ret_nodes) edges.insert({r, self, EdgeType::Call});
          }
        }
      }
    }
  }
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

SubGraph extract_subgraph(const ProGraph& graph, EdgeType type) {
  SubGraph sg{&graph, type, {}};
  for (const auto& e : graph.edges)
    if (e.type == type) sg.edges.push_back(e);
  return sg;
}

SubGraph extract_subgraph(const ProGraph& graph, std::string_view type) {
  return extract_subgraph(graph, edge_type_from_string(type));
}

std::string check_graph_invariants(const ProGraph& g) {
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].index != i) return "node " + std::to_string(i) + " has a stale index";
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const Edge& e = g.edges[k];
    if (e.src >= g.nodes.size() || e.dst >= g.nodes.size()) return "edge endpoint out of range";
    if (k > 0 && !(g.edges[k - 1] < e)) return "edges not sorted or duplicated";
    const bool si = g.nodes[e.src].kind == NodeKind::Instruction;
    const bool di = g.nodes[e.dst].kind == NodeKind::Instruction;
    switch (e.type) {
      case EdgeType::Control:
      case EdgeType::Call:
        if (!si || !di)
          return std::string(to_string(e.type)) + " edge " + std::to_string(e.src) + "->" +
                 std::to_string(e.dst) + " touches a non-instruction node";
        break;
      case EdgeType::Data:
        if (si == di)
          return "data edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
                 " must join an instruction and a value";
        break;
    }
  }
  return {};
}

std::string serialize_graph(const ProGraph& g) {
  // Written by hand so the byte layout is fixed regardless of library
  // formatting defaults; strings go through the JSON escaper.
  std::ostringstream os;
  os << "{\"schema\":" << kGraphSchema << ",\"nodes\":[";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    if (i) os << ',';
    os << "{\"i\":" << n.index << ",\"kind\":\"" << to_string(n.kind)
       << "\",\"text\":" << nlohmann::json(n.text).dump() << ",\"ids\":[";
    for (std::size_t k = 0; k < kSeqLen; ++k) os << (k ? "," : "") << n.feature.ids[k];
    os << "]}";
  }
  os << "],\"edges\":[";
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const Edge& e = g.edges[k];
    if (k) os << ',';
    os << "{\"s\":" << e.src << ",\"d\":" << e.dst << ",\"t\":\"" << to_string(e.type) << "\"}";
  }
  os << "]}\n";
  return os.str();
}

ProGraph deserialize_graph(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed graph file: ") + ex.what());
  }
  try {
    if (j.at("schema").get<int>() != kGraphSchema)
      throw ValidationError("graph schema " + j.at("schema").dump() + " is not supported");
    ProGraph g;
    for (const auto& jn : j.at("nodes")) {
      Node n;
      n.index = jn.at("i").get<std::size_t>();
      n.kind = node_kind_from_string(jn.at("kind").get<std::string>());
      n.text = jn.at("text").get<std::string>();
      const auto ids = jn.at("ids").get<std::vector<int>>();
      if (ids.size() != kSeqLen) throw ValidationError("node feature must have 64 ids");
      for (std::size_t k = 0; k < kSeqLen; ++k) {
        n.feature.ids[k] = ids[k];
        n.feature.attention_mask[k] = ids[k] != kPadId ? 1 : 0;
      }
      g.nodes.push_back(std::move(n));
    }
    for (const auto& je : j.at("edges"))
      g.edges.push_back({je.at("s").get<std::size_t>(), je.at("d").get<std::size_t>(),
                         edge_type_from_string(je.at("t").get<std::string>())});
    if (auto problem = check_graph_invariants(g); !problem.empty())
      throw ValidationError("invalid graph: " + problem);
    return g;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed graph file: ") + ex.what());
  }
}

void save_graph(const ProGraph& graph, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << serialize_graph(graph);
}

ProGraph load_graph(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_graph(buf.str());
}

}  // namespace irembed
