// SPDX-License-Identifier: Apache-2.0
//
// Two-modality encoder: a transformer over tokenized statements and a GCN
// over the program multi-graph, with the three pretraining objectives
// (masked-token prediction, per-subgraph edge reconstruction and
// sequence/graph matching).
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "irembed/autograd.hpp"
#include "irembed/graph.hpp"
#include "irembed/tokenizer.hpp"

namespace irembed {

struct EncoderConfig {
  std::size_t vocab_size = 8192;
  std::size_t hidden_dim = 128;
  std::size_t num_transformer_layers = 2;
  std::size_t num_attention_heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t num_gcn_layers = 2;
  std::size_t latent_dim = 64;
  std::size_t match_hidden_dim = 64;
  std::size_t max_seq_len = kSeqLen;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

enum class MaskAction { Mask, Random, Keep };

/// Positions are TokenSeq indices of body tokens, strictly increasing.
struct MaskPlan {
  std::vector<std::size_t> positions;
  std::vector<MaskAction> actions;
  std::vector<int> originals;
};

/// Edge set a GCN pass propagates over.
enum class GraphMode { Control, Data, Call, All };
GraphMode graph_mode_from_string(std::string_view name);
GraphMode graph_mode_for(EdgeType type);

class Encoder {
 public:
  explicit Encoder(const EncoderConfig& config);

  const EncoderConfig& config() const { return config_; }
  nn::ParameterStore& params() const { return params_; }

  /// Final hidden states, one row per position. With trim only the non-pad
  /// prefix is computed; otherwise all rows are, with PAD keys masked out.
  nn::Var encode_tokens(nn::Tape& tape, const TokenSeq& seq, bool trim = true) const;
  nn::Var mlm_logits(nn::Var hidden) const;
  /// Hidden state at the [CLS] position (1 x hidden_dim).
  nn::Var statement_embedding(nn::Tape& tape, const TokenSeq& seq) const;
  /// Mean of statement embeddings (1 x hidden_dim).
  nn::Var sequence_summary(nn::Tape& tape, std::span<const TokenSeq> statements) const;

  /// Masked mean of each node's token embeddings (num_nodes x hidden_dim).
  nn::Var node_inputs(nn::Tape& tape, const ProGraph& graph) const;
  nn::Var gae_encode(nn::Tape& tape, const ProGraph& graph, GraphMode mode) const;
  /// Node mean of the all-edge encoding (1 x latent_dim).
  nn::Var graph_pool(nn::Tape& tape, const ProGraph& graph) const;
  nn::Var match_logit(nn::Var summary, nn::Var pooled) const;

 private:
  EncoderConfig config_;
  // Gradient buffers are written by recorded passes on a const encoder.
  mutable nn::ParameterStore params_;
};

MaskPlan plan_mask(const TokenSeq& seq, std::uint64_t seed);
TokenSeq apply_mask(const TokenSeq& seq, const MaskPlan& plan, const Vocab& vocab,
                    std::uint64_t seed);
/// RANDOM replacements draw from [kNumSpecial, vocab_size).
TokenSeq apply_mask(const TokenSeq& seq, const MaskPlan& plan, std::size_t vocab_size,
                    std::uint64_t seed);

/// 64 x vocab_size logits over the full padded sequence.
nn::Matrix mlm_forward(const Encoder& encoder, const TokenSeq& masked);
nn::Matrix mlm_forward(const Encoder& encoder, std::span<const int> ids);

/// Mean cross-entropy over the planned positions of `logits` rows.
nn::Var mlm_loss(nn::Var logits, const MaskPlan& plan);
double mlm_loss(const nn::Matrix& logits, const MaskPlan& plan);

/// Logits for the planned rows only (|positions| x vocab_size), computed from
/// the trimmed encoding. Training uses this; it skips the unplanned rows.
nn::Var mlm_planned_logits(nn::Tape& tape, const Encoder& encoder, const TokenSeq& masked,
                           const MaskPlan& plan, nn::Var* cls_state = nullptr);

nn::Matrix gae_encode(const Encoder& encoder, const ProGraph& graph, GraphMode mode);
double gae_decode(const nn::Matrix& latents, std::size_t i, std::size_t j);

/// Uniform node pairs (i != j) with no edge of `type` in either direction.
std::vector<std::pair<std::size_t, std::size_t>> sample_negative_pairs(
    const ProGraph& graph, EdgeType type, std::size_t count, std::mt19937_64& rng);

/// Sum over edge types present in the graph of the reconstruction BCE on
/// positive edges plus as many sampled non-edges.
nn::Var gae_loss(nn::Tape& tape, const Encoder& encoder, const ProGraph& graph,
                 std::uint64_t seed);
double gae_loss(const Encoder& encoder, const ProGraph& graph, std::uint64_t seed);

nn::RowVector aggregate_statement_embeddings(std::span<const nn::RowVector> vectors);

struct MatchPair {
  std::string sequence_id;
  std::string graph_id;
  nn::RowVector sequence_summary;
  const ProGraph* graph = nullptr;
  bool match = false;
};

double match_forward(const Encoder& encoder, const MatchPair& pair);

}  // namespace irembed
