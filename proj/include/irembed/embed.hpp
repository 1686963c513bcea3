// SPDX-License-Identifier: Apache-2.0
//
// Frozen-encoder embeddings for downstream heads.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "irembed/corpus.hpp"
#include "irembed/graph.hpp"
#include "irembed/model.hpp"
#include "irembed/tasks.hpp"

namespace irembed {

enum class Modality { Text, Graph, Both };
Modality modality_from_string(std::string_view name);
std::string_view to_string(Modality m);

struct EmbeddingVector {
  nn::RowVector text_part;   // hidden_dim
  nn::RowVector graph_part;  // latent_dim
  bool text_present = false;
  bool graph_present = false;
  nn::RowVector concat() const;
};

/// Mean of per-statement [CLS] states, and the node mean of the all-edge
/// graph encoding. The part a modality leaves out is zero.
EmbeddingVector embed_ir(const Encoder& encoder, std::span<const TokenSeq> statements,
                         const ProGraph* graph, Modality modality);
EmbeddingVector embed_ir(const Encoder& encoder, const Vocab& vocab, const IRDocument& document,
                         const ProGraph* graph, Modality modality);

struct EmbedFailure {
  std::string id;
  std::string message;
};

struct EmbedResult {
  EmbeddingTable table;
  std::vector<EmbedFailure> failures;
};

/// Every manifest entry, ordered by id. Graphs come from the cache
/// directory; per-document errors are collected, not thrown.
EmbedResult embed_corpus(const Encoder& encoder, const Vocab& vocab, const Manifest& manifest,
                         const std::filesystem::path& graph_dir, Modality modality);

/// CSV "id,dim_0,...", plus `<csv>.meta.json` with the checkpoint hash,
/// modality and width.
void write_embedding_table(const EmbeddingTable& table, const std::filesystem::path& csv,
                           const std::string& checkpoint_hash, Modality modality);
EmbeddingTable read_embedding_table(const std::filesystem::path& csv);

}  // namespace irembed
