// SPDX-License-Identifier: Apache-2.0
#include "irembed/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "irembed/errors.hpp"
#include "irembed/numeric.hpp"

namespace irembed {

using nn::Matrix;
using nn::Parameter;
using nn::Tape;
using nn::Var;

void EncoderConfig::validate() const {
  if (vocab_size < static_cast<std::size_t>(kNumSpecial) + 1)
    throw ValidationError("vocab_size must exceed the special tokens");
  if (hidden_dim == 0 || num_transformer_layers == 0 || num_attention_heads == 0 ||
      ffn_dim == 0 || num_gcn_layers == 0 || latent_dim == 0 || match_hidden_dim == 0)
    throw ValidationError("encoder dimensions must be at least 1");
  if (hidden_dim % num_attention_heads != 0)
    throw ValidationError("hidden_dim must be divisible by num_attention_heads");
  if (max_seq_len != kSeqLen) throw ValidationError("max_seq_len is fixed at 64");
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},
                     {"hidden_dim", c.hidden_dim},
                     {"num_transformer_layers", c.num_transformer_layers},
                     {"num_attention_heads", c.num_attention_heads},
                     {"ffn_dim", c.ffn_dim},
                     {"num_gcn_layers", c.num_gcn_layers},
                     {"latent_dim", c.latent_dim},
                     {"match_hidden_dim", c.match_hidden_dim},
                     {"max_seq_len", c.max_seq_len},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.num_transformer_layers = j.at("num_transformer_layers").get<std::size_t>();
  c.num_attention_heads = j.at("num_attention_heads").get<std::size_t>();
  c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  c.num_gcn_layers = j.at("num_gcn_layers").get<std::size_t>();
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.match_hidden_dim = j.at("match_hidden_dim").get<std::size_t>();
  c.max_seq_len = j.value("max_seq_len", kSeqLen);
  c.seed = j.at("seed").get<std::uint64_t>();
}

GraphMode graph_mode_from_string(std::string_view name) {
  if (name == "control") return GraphMode::Control;
  if (name == "data") return GraphMode::Data;
  if (name == "call") return GraphMode::Call;
  if (name == "all") return GraphMode::All;
  throw ValidationError("unknown graph mode '" + std::string(name) + "'");
}

GraphMode graph_mode_for(EdgeType type) {
  switch (type) {
    case EdgeType::Control: return GraphMode::Control;
    case EdgeType::Data: return GraphMode::Data;
    case EdgeType::Call: return GraphMode::Call;
  }
  return GraphMode::All;
}

// --- encoder -------------------------------------------------------------

namespace {

Matrix zeros_row(std::size_t n) { return Matrix::Zero(1, static_cast<Eigen::Index>(n)); }
Matrix ones_row(std::size_t n) { return Matrix::Ones(1, static_cast<Eigen::Index>(n)); }

Var linear_named(Var x, const nn::ParameterStore& store, const std::string& name, bool bias = true) {
  auto& s = const_cast<nn::ParameterStore&>(store);
  return nn::linear(x, s.at(name + ".weight"), bias ? &s.at(name + ".bias") : nullptr);
}

Var layer_norm_named(Var x, const nn::ParameterStore& store, const std::string& name) {
  auto& s = const_cast<nn::ParameterStore&>(store);
  return nn::layer_norm(x, s.at(name + ".gamma"), s.at(name + ".beta"));
}

}  // namespace

Encoder::Encoder(const EncoderConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const auto V = static_cast<Eigen::Index>(config_.vocab_size);
  const auto H = static_cast<Eigen::Index>(config_.hidden_dim);
  const auto F = static_cast<Eigen::Index>(config_.ffn_dim);
  const auto L = static_cast<Eigen::Index>(config_.latent_dim);
  const auto M = static_cast<Eigen::Index>(config_.match_hidden_dim);
  auto add_linear = [&](const std::string& name, Eigen::Index in, Eigen::Index out) {
    params_.add(name + ".weight", nn::xavier_uniform(in, out, rng));
    params_.add(name + ".bias", Matrix::Zero(1, out));
  };
  auto add_norm = [&](const std::string& name, Eigen::Index width) {
    params_.add(name + ".gamma", ones_row(static_cast<std::size_t>(width)));
    params_.add(name + ".beta", zeros_row(static_cast<std::size_t>(width)));
  };

  params_.add("text.token_embedding", nn::normal_init(V, H, 0.1, rng));
  params_.add("text.position_embedding", nn::normal_init(static_cast<Eigen::Index>(kSeqLen), H, 0.1, rng));
  for (std::size_t l = 0; l < config_.num_transformer_layers; ++l) {
    const std::string p = "text.layer" + std::to_string(l);
    add_norm(p + ".ln1", H);
    add_linear(p + ".query", H, H);
    add_linear(p + ".key", H, H);
    add_linear(p + ".value", H, H);
    add_linear(p + ".output", H, H);
    add_norm(p + ".ln2", H);
    add_linear(p + ".ffn_in", H, F);
    add_linear(p + ".ffn_out", F, H);
  }
  add_norm("text.final_norm", H);
  add_linear("mlm.output", H, V);

  params_.add("graph.token_embedding", nn::normal_init(V, H, 1.0, rng));
  for (std::size_t l = 0; l < config_.num_gcn_layers; ++l) {
    const Eigen::Index out = l + 1 == config_.num_gcn_layers ? L : H;
    add_linear("graph.gcn" + std::to_string(l), H, out);
  }

  add_linear("match.project", H, L);
  add_norm("match.text_norm", L);
  add_norm("match.graph_norm", L);
  add_linear("match.hidden", 4 * L, M);
  add_linear("match.output", M, 1);
}

Var Encoder::encode_tokens(Tape& tape, const TokenSeq& seq, bool trim) const {
  const std::size_t n = trim ? seq.length() : kSeqLen;
  if (n == 0) throw ValidationError("cannot encode an empty token sequence");
  for (std::size_t i = 0; i < n; ++i)
    if (seq.ids[i] < 0 || static_cast<std::size_t>(seq.ids[i]) >= config_.vocab_size)
      throw ValidationError("token id " + std::to_string(seq.ids[i]) + " exceeds vocab_size");
  std::vector<int> positions(n);
  std::iota(positions.begin(), positions.end(), 0);
  Var x = nn::add(nn::embedding(tape, params_.at("text.token_embedding"),
                                std::span<const int>(seq.ids.data(), n)),
                  nn::embedding(tape, params_.at("text.position_embedding"), positions));
  std::span<const std::uint8_t> key_mask;
  if (!trim) key_mask = std::span<const std::uint8_t>(seq.attention_mask);

  const auto heads = static_cast<Eigen::Index>(config_.num_attention_heads);
  const auto head_dim = static_cast<Eigen::Index>(config_.hidden_dim) / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (std::size_t l = 0; l < config_.num_transformer_layers; ++l) {
    const std::string p = "text.layer" + std::to_string(l);
    const Var h = layer_norm_named(x, params_, p + ".ln1");
    const Var q = linear_named(h, params_, p + ".query");
    const Var k = linear_named(h, params_, p + ".key");
    const Var v = linear_named(h, params_, p + ".value");
    std::vector<Var> outs;
    for (Eigen::Index hd = 0; hd < heads; ++hd) {
      const Var qh = nn::col_block(q, hd * head_dim, head_dim);
      const Var kh = nn::col_block(k, hd * head_dim, head_dim);
      const Var vh = nn::col_block(v, hd * head_dim, head_dim);
      const Var scores = nn::scale(nn::matmul(qh, nn::transpose(kh)), inv_sqrt);
      outs.push_back(nn::matmul(nn::masked_softmax_rows(scores, key_mask), vh));
    }
    x = nn::add(x, linear_named(nn::concat_cols(outs), params_, p + ".output"));
    const Var h2 = layer_norm_named(x, params_, p + ".ln2");
    x = nn::add(x, linear_named(nn::gelu(linear_named(h2, params_, p + ".ffn_in")), params_,
                                p + ".ffn_out"));
  }
  return layer_norm_named(x, params_, "text.final_norm");
}

Var Encoder::mlm_logits(Var hidden) const { return linear_named(hidden, params_, "mlm.output"); }

Var Encoder::statement_embedding(Tape& tape, const TokenSeq& seq) const {
  return nn::row_block(encode_tokens(tape, seq, true), 0, 1);
}

Var Encoder::sequence_summary(Tape& tape, std::span<const TokenSeq> statements) const {
  if (statements.empty()) throw ValidationError("sequence summary of zero statements");
  std::vector<Var> rows;
  rows.reserve(statements.size());
  for (const auto& s : statements) rows.push_back(statement_embedding(tape, s));
  return nn::mean_of(rows);
}

Var Encoder::node_inputs(Tape& tape, const ProGraph& graph) const {
  if (graph.nodes.empty()) throw ValidationError("graph has no nodes");
  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& node : graph.nodes) {
    const std::size_t len = node.feature.length();
    if (len == 0) throw ValidationError("node " + std::to_string(node.index) + " has no tokens");
    for (std::size_t k = 0; k < len; ++k) {
      const int id = node.feature.ids[k];
      if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size)
        throw ValidationError("node token id exceeds vocab_size");
      trips.emplace_back(static_cast<Eigen::Index>(node.index), id, 1.0 / static_cast<double>(len));
    }
  }
  nn::SparseMatrix avg(static_cast<Eigen::Index>(graph.nodes.size()),
                       static_cast<Eigen::Index>(config_.vocab_size));
  avg.setFromTriplets(trips.begin(), trips.end());
  return nn::sparse_embed(tape, avg, params_.at("graph.token_embedding"));
}

Var Encoder::gae_encode(Tape& tape, const ProGraph& graph, GraphMode mode) const {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  for (const auto& e : graph.edges)
    if (mode == GraphMode::All || graph_mode_for(e.type) == mode)
      edges.emplace_back(static_cast<Eigen::Index>(e.src), static_cast<Eigen::Index>(e.dst));
  const nn::SparseMatrix adj =
      normalized_adjacency<double>(static_cast<Eigen::Index>(graph.nodes.size()), edges);
  Var x = node_inputs(tape, graph);
  for (std::size_t l = 0; l < config_.num_gcn_layers; ++l) {
    const std::string p = "graph.gcn" + std::to_string(l);
    x = nn::add_row_param(nn::spmm(adj, linear_named(x, params_, p, false)),
                          params_.at(p + ".bias"));
    if (l + 1 < config_.num_gcn_layers) x = nn::gelu(x);
  }
  return x;
}

Var Encoder::graph_pool(Tape& tape, const ProGraph& graph) const {
  return nn::mean_rows(gae_encode(tape, graph, GraphMode::All));
}

Var Encoder::match_logit(Var summary, Var pooled) const {
  if (summary.cols() != static_cast<Eigen::Index>(config_.hidden_dim) ||
      pooled.cols() != static_cast<Eigen::Index>(config_.latent_dim) || summary.rows() != 1 ||
      pooled.rows() != 1)
    throw ValidationError("match head input width mismatch");
  // Project the text side into graph space, then compare both directly.
  // Both sides are normalized: pooled graph vectors differ little between documents.
  const Var s = layer_norm_named(linear_named(summary, params_, "match.project"), params_, "match.text_norm");
  const Var g = layer_norm_named(pooled, params_, "match.graph_norm");
  const Var d = nn::sub(s, g);
  const std::vector<Var> parts{s, g, nn::hadamard(s, g), nn::hadamard(d, d)};
  const Var h = nn::gelu(linear_named(nn::concat_cols(parts), params_, "match.hidden"));
  return linear_named(h, params_, "match.output");
}

// --- masking -------------------------------------------------------------

MaskPlan plan_mask(const TokenSeq& seq, std::uint64_t seed) {
  const std::size_t n = seq.length() >= 2 ? seq.body_length() : 0;
  if (n == 0) throw ValidationError("cannot mask an empty statement body");
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(n))));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{1});
  // Partial Fisher-Yates: the first k entries become a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  MaskPlan plan;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const std::size_t pos : pool) {
    const double r = u(rng);
    plan.positions.push_back(pos);
    plan.actions.push_back(r < 0.8 ? MaskAction::Mask : (r < 0.9 ? MaskAction::Random : MaskAction::Keep));
    plan.originals.push_back(seq.ids[pos]);
  }
  return plan;
}

TokenSeq apply_mask(const TokenSeq& seq, const MaskPlan& plan, const Vocab& vocab,
                    std::uint64_t seed) {
  return apply_mask(seq, plan, vocab.size(), seed);
}

TokenSeq apply_mask(const TokenSeq& seq, const MaskPlan& plan, std::size_t vocab_size,
                    std::uint64_t seed) {
  if (plan.positions.size() != plan.actions.size() || plan.positions.size() != plan.originals.size())
    throw ValidationError("mask plan fields differ in length");
  if (vocab_size <= static_cast<std::size_t>(kNumSpecial))
    throw ValidationError("vocabulary has no non-special tokens");
  const std::size_t len = seq.length();
  TokenSeq out = seq;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> random_id(kNumSpecial, static_cast<int>(vocab_size) - 1);
  for (std::size_t k = 0; k < plan.positions.size(); ++k) {
    const std::size_t pos = plan.positions[k];
    if (pos == 0 || pos + 1 >= len || seq.ids[pos] != plan.originals[k])
      throw ValidationError("mask plan does not match the sequence at position " + std::to_string(pos));
    switch (plan.actions[k]) {
      case MaskAction::Mask: out.ids[pos] = kMaskId; break;
      case MaskAction::Random: out.ids[pos] = random_id(rng); break;
      case MaskAction::Keep: break;
    }
  }
  return out;
}

Matrix mlm_forward(const Encoder& encoder, const TokenSeq& masked) {
  Tape tape(false);
  return encoder.mlm_logits(encoder.encode_tokens(tape, masked, false)).value();
}

Matrix mlm_forward(const Encoder& encoder, std::span<const int> ids) {
  if (ids.size() != kSeqLen)
    throw ValidationError("mlm_forward expects 64 ids, got " + std::to_string(ids.size()));
  TokenSeq seq;
  for (std::size_t i = 0; i < kSeqLen; ++i) {
    seq.ids[i] = ids[i];
    seq.attention_mask[i] = ids[i] != kPadId ? 1 : 0;
  }
  return mlm_forward(encoder, seq);
}

Var mlm_loss(Var logits, const MaskPlan& plan) {
  if (plan.positions.empty()) throw ValidationError("mask plan is empty");
  std::vector<Eigen::Index> rows(plan.positions.begin(), plan.positions.end());
  return nn::cross_entropy_rows(nn::gather_rows(logits, rows), plan.originals);
}

double mlm_loss(const Matrix& logits, const MaskPlan& plan) {
  Tape tape(false);
  return mlm_loss(tape.constant(logits), plan).scalar();
}

Var mlm_planned_logits(Tape& tape, const Encoder& encoder, const TokenSeq& masked,
                       const MaskPlan& plan, Var* cls_state) {
  if (plan.positions.empty()) throw ValidationError("mask plan is empty");
  const Var hidden = encoder.encode_tokens(tape, masked, true);
  if (cls_state) *cls_state = nn::row_block(hidden, 0, 1);
  std::vector<Eigen::Index> rows(plan.positions.begin(), plan.positions.end());
  return encoder.mlm_logits(nn::gather_rows(hidden, rows));
}

// --- graph auto-encoder --------------------------------------------------

Matrix gae_encode(const Encoder& encoder, const ProGraph& graph, GraphMode mode) {
  Tape tape(false);
  return encoder.gae_encode(tape, graph, mode).value();
}

double gae_decode(const Matrix& latents, std::size_t i, std::size_t j) {
  const auto n = static_cast<std::size_t>(latents.rows());
  if (i >= n || j >= n) throw ValidationError("node index out of range");
  return sigmoid(latents.row(static_cast<Eigen::Index>(i)).dot(latents.row(static_cast<Eigen::Index>(j))));
}

std::vector<std::pair<std::size_t, std::size_t>> sample_negative_pairs(const ProGraph& graph,
                                                                       EdgeType type,
                                                                       std::size_t count,
                                                                       std::mt19937_64& rng) {
  const std::size_t n = graph.nodes.size();
  std::set<std::pair<std::size_t, std::size_t>> linked;
  for (const auto& e : graph.edges)
    if (e.type == type) {
      linked.emplace(e.src, e.dst);
      linked.emplace(e.dst, e.src);
    }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (n < 2) return out;
  std::uniform_int_distribution<std::size_t> node(0, n - 1);
  // Bounded rejection sampling; dense graphs may yield fewer negatives.
  const std::size_t max_tries = 50 * count + 100;
  for (std::size_t tries = 0; out.size() < count && tries < max_tries; ++tries) {
    const std::size_t i = node(rng), j = node(rng);
    if (i == j || linked.count({i, j})) continue;
    out.emplace_back(i, j);
  }
  return out;
}

Var gae_loss(Tape& tape, const Encoder& encoder, const ProGraph& graph, std::uint64_t seed) {
  if (graph.edges.empty()) throw ValidationError("graph has no edges to reconstruct");
  std::mt19937_64 rng(seed);
  std::vector<Var> terms;
  for (const EdgeType type : kEdgeTypes) {
    std::vector<Eigen::Index> src, dst;
    std::vector<double> labels;
    for (const auto& e : graph.edges)
      if (e.type == type) {
        src.push_back(static_cast<Eigen::Index>(e.src));
        dst.push_back(static_cast<Eigen::Index>(e.dst));
        labels.push_back(1.0);
      }
    if (src.empty()) continue;
    for (const auto& [i, j] : sample_negative_pairs(graph, type, src.size(), rng)) {
      src.push_back(static_cast<Eigen::Index>(i));
      dst.push_back(static_cast<Eigen::Index>(j));
      labels.push_back(0.0);
    }
    const Var z = encoder.gae_encode(tape, graph, graph_mode_for(type));
    const Var logits = nn::rowwise_dot(nn::gather_rows(z, src), nn::gather_rows(z, dst));
    terms.push_back(nn::bce_with_logits(logits, labels));
  }
  const std::vector<double> ones(terms.size(), 1.0);
  return nn::weighted_sum(terms, ones);
}

double gae_loss(const Encoder& encoder, const ProGraph& graph, std::uint64_t seed) {
  Tape tape(false);
  return gae_loss(tape, encoder, graph, seed).scalar();
}

// --- matching ------------------------------------------------------------

nn::RowVector aggregate_statement_embeddings(std::span<const nn::RowVector> vectors) {
  return mean_of_rows(vectors);
}

double match_forward(const Encoder& encoder, const MatchPair& pair) {
  if (!pair.graph) throw ValidationError("match pair has no graph");
  if (pair.sequence_summary.size() != static_cast<Eigen::Index>(encoder.config().hidden_dim))
    throw ValidationError("sequence summary width mismatch");
  Tape tape(false);
  const Var summary = tape.constant(pair.sequence_summary);
  const Var logit = encoder.match_logit(summary, encoder.graph_pool(tape, *pair.graph));
  return sigmoid(logit.scalar());
}

}  // namespace irembed
