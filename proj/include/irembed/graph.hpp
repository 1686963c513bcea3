// SPDX-License-Identifier: Apache-2.0
//
// Program multi-graph: instruction, variable and constant nodes joined by
// control, data and call edges. Node features are tokenized node texts.
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "irembed/ir_parser.hpp"
#include "irembed/tokenizer.hpp"

namespace irembed {

enum class NodeKind { Instruction, Variable, Constant };
enum class EdgeType { Control = 0, Data = 1, Call = 2 };
inline constexpr std::array<EdgeType, 3> kEdgeTypes = {EdgeType::Control, EdgeType::Data,
                                                       EdgeType::Call};

std::string_view to_string(NodeKind kind);
std::string_view to_string(EdgeType type);
NodeKind node_kind_from_string(std::string_view name);
/// Throws ValidationError for anything but "control", "data" or "call".
EdgeType edge_type_from_string(std::string_view name);

struct Node {
  std::size_t index = 0;
  NodeKind kind = NodeKind::Instruction;
  TokenSeq feature;
  std::string text;

  friend bool operator==(const Node&, const Node&) = default;
};

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  EdgeType type = EdgeType::Control;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge& a, const Edge& b) {
    if (auto c = a.src <=> b.src; c != 0) return c;
    if (auto c = a.dst <=> b.dst; c != 0) return c;
    return static_cast<int>(a.type) <=> static_cast<int>(b.type);
  }
};

/// Nodes are ordered instructions (program order, then synthetic external
/// callee nodes), variables, constants. Edges are sorted and unique.
struct ProGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t count(EdgeType type) const;

  friend bool operator==(const ProGraph&, const ProGraph&) = default;
};

/// Edge-filtered view; the node set is the parent's.
struct SubGraph {
  const ProGraph* parent = nullptr;
  EdgeType type = EdgeType::Control;
  std::vector<Edge> edges;

  std::size_t num_nodes() const { return parent ? parent->num_nodes() : 0; }
};

/// Throws GraphError when an operand names a value that is not defined.
ProGraph build_multigraph(const IRModule& module, const Vocab& vocab);

SubGraph extract_subgraph(const ProGraph& graph, EdgeType type);
SubGraph extract_subgraph(const ProGraph& graph, std::string_view type);

/// Checks the endpoint-typing and uniqueness invariants; returns a
/// description of the first violation, or an empty string.
std::string check_graph_invariants(const ProGraph& graph);

inline constexpr int kGraphSchema = 1;

std::string serialize_graph(const ProGraph& graph);
/// Throws ValidationError on schema mismatch or malformed input.
ProGraph deserialize_graph(std::string_view bytes);

void save_graph(const ProGraph& graph, const std::filesystem::path& file);
ProGraph load_graph(const std::filesystem::path& file);

}  // namespace irembed
