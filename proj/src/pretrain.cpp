// SPDX-License-Identifier: Apache-2.0
#include "irembed/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "irembed/errors.hpp"
#include "irembed/io.hpp"
#include "irembed/ir_parser.hpp"
#include "irembed/numeric.hpp"

namespace irembed {

using nn::Tape;
using nn::Var;

namespace {

constexpr std::uint64_t kMaskStream = 0x6d61736bULL;
constexpr std::uint64_t kApplyStream = 0x72706c63ULL;
constexpr std::uint64_t kPairStream = 0x70616972ULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;

struct MaskedInput {
  MaskPlan plan;
  TokenSeq masked;
};

std::uint64_t mask_seed(const PretrainConfig& config, std::size_t doc, std::size_t stmt,
                        std::size_t epoch) {
  std::uint64_t s = mix_seed(mix_seed(mix_seed(config.seed, kMaskStream), doc), stmt);
  return config.resample_masks ? mix_seed(s, epoch) : s;
}

MaskedInput masked_input(const PretrainConfig& config, const TokenSeq& seq, std::size_t doc,
                         std::size_t stmt, std::size_t epoch) {
  const std::uint64_t seed = mask_seed(config, doc, stmt, epoch);
  MaskedInput in;
  in.plan = plan_mask(seq, seed);
  in.masked = apply_mask(seq, in.plan, config.encoder.vocab_size, mix_seed(seed, kApplyStream));
  return in;
}

/// partner[k] == k means document k keeps its own graph.
std::vector<std::size_t> match_partners(std::size_t n, std::uint64_t seed,
                                        const std::function<bool(std::size_t)>& draw) {
  if (n < 2) throw ValidationError("matching needs at least two documents in a batch");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<std::size_t> other(0, n - 2);
  std::vector<std::size_t> partner(n);
  for (std::size_t k = 0; k < n; ++k) {
    const bool coin_says = coin(rng);
    const std::size_t pick = other(rng);
    const bool mismatch = draw ? draw(k) : coin_says;
    partner[k] = mismatch ? (pick >= k ? pick + 1 : pick) : k;
  }
  return partner;
}

void require_finite(const LossRecord& r, std::size_t epoch) {
  for (const auto& [name, value] : {std::pair<const char*, double>{"mlm", r.mlm},
                                    {"gae", r.gae},
                                    {"match", r.match},
                                    {"total", r.total}})
    if (!std::isfinite(value))
      throw Error(std::string("non-finite ") + name + " loss (" + format_double(value) +
                  ") during epoch " + std::to_string(epoch + 1));
}

}  // namespace

void PretrainConfig::validate() const {
  encoder.validate();
  if (batch_size < 2) throw ValidationError("batch_size must be at least 2");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (weights.mlm < 0 || weights.gae < 0 || weights.match < 0)
    throw ValidationError("loss weights must be non-negative");
  if (weights.mlm + weights.gae + weights.match <= 0)
    throw ValidationError("at least one loss weight must be positive");
  if (lr_schedule != "constant" && lr_schedule != "linear")
    throw ValidationError("lr_schedule must be 'constant' or 'linear', got '" + lr_schedule + "'");
}

double epoch_learning_rate(const PretrainConfig& config, std::size_t epoch) {
  if (config.lr_schedule != "linear" || config.epochs == 0) return config.learning_rate;
  const double left = static_cast<double>(config.epochs - std::min(epoch, config.epochs));
  return config.learning_rate * left / static_cast<double>(config.epochs);
}

void to_json(nlohmann::json& j, const PretrainConfig& c) {
  j = nlohmann::json{{"encoder", c.encoder},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"loss_weights", {{"mlm", c.weights.mlm}, {"gae", c.weights.gae}, {"match", c.weights.match}}},
                     {"seed", c.seed},
                     {"resample_masks", c.resample_masks},
                     {"lr_schedule", c.lr_schedule}};
}

void from_json(const nlohmann::json& j, PretrainConfig& c) {
  c.encoder = j.at("encoder").get<EncoderConfig>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  const auto& w = j.at("loss_weights");
  c.weights = {w.at("mlm").get<double>(), w.at("gae").get<double>(), w.at("match").get<double>()};
  c.seed = j.at("seed").get<std::uint64_t>();
  c.resample_masks = j.value("resample_masks", true);
  c.lr_schedule = j.value("lr_schedule", std::string("constant"));
}

PretrainDocument make_pretrain_document(const IRDocument& doc, ProGraph graph, const Vocab& vocab) {
  PretrainDocument out;
  out.id = doc.id;
  out.graph = std::move(graph);
  for (const auto& s : doc.statements) {
    TokenSeq seq = encode_statement(vocab, s);
    if (seq.body_length() > 0) out.statements.push_back(seq);
  }
  if (out.statements.empty()) throw EmptyDocumentError("document '" + doc.id + "' has no tokens");
  return out;
}

std::string to_jsonl(const LossRecord& r) {
  // Fixed key order keeps the log byte-stable.
  return "{\"epoch\":" + std::to_string(r.epoch) + ",\"mlm\":" + format_double(r.mlm) +
         ",\"gae\":" + format_double(r.gae) + ",\"match\":" + format_double(r.match) +
         ",\"total\":" + format_double(r.total) + "}";
}

LossRecord loss_record_from_json(const nlohmann::json& j) {
  return {j.at("epoch").get<std::size_t>(), j.at("mlm").get<double>(), j.at("gae").get<double>(),
          j.at("match").get<double>(), j.at("total").get<double>()};
}

std::vector<MatchPair> make_match_pairs(std::span<const PretrainDocument> batch, std::uint64_t seed,
                                        const std::function<bool(std::size_t)>& draw) {
  const auto partner = match_partners(batch.size(), seed, draw);
  std::vector<MatchPair> pairs;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    MatchPair p;
    p.sequence_id = batch[k].id;
    p.graph_id = batch[partner[k]].id;
    p.graph = &batch[partner[k]].graph;
    p.match = partner[k] == k;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

PretrainState::PretrainState(const PretrainConfig& cfg)
    : config(cfg), encoder(cfg.encoder), optimizer([&] {
        nn::Adam::Options o;
        o.learning_rate = cfg.learning_rate;
        return o;
      }()) {
  config.validate();
}

MaskPlan training_mask_plan(const PretrainConfig& config, const TokenSeq& seq, std::size_t doc,
                            std::size_t stmt, std::size_t epoch) {
  return plan_mask(seq, mask_seed(config, doc, stmt, epoch));
}

LossRecord pretrain_step(PretrainState& state, std::span<const BatchItem> batch, std::size_t epoch,
                         std::uint64_t step_seed) {
  const auto& cfg = state.config;
  const Encoder& enc = state.encoder;
  if (batch.size() < 2) throw ValidationError("a batch needs at least two documents");
  Tape tape(true);

  std::vector<Var> mlm_terms;
  std::vector<Var> summaries;
  for (const auto& item : batch) {
    for (std::size_t s = 0; s < item.doc->statements.size(); ++s) {
      const MaskedInput in = masked_input(cfg, item.doc->statements[s], item.index, s, epoch);
      const Var logits = mlm_planned_logits(tape, enc, in.masked, in.plan);
      mlm_terms.push_back(nn::cross_entropy_rows(logits, in.plan.originals));
    }
    // Matching sees the unmasked statements, same as at embedding time.
    summaries.push_back(enc.sequence_summary(tape, item.doc->statements));
  }

  std::vector<Var> gae_terms;
  for (std::size_t k = 0; k < batch.size(); ++k)
    gae_terms.push_back(gae_loss(tape, enc, batch[k].doc->graph, mix_seed(step_seed, k)));

  const auto partner = match_partners(batch.size(), mix_seed(step_seed, kPairStream), {});
  std::vector<Var> match_logits;
  std::vector<double> labels;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    match_logits.push_back(enc.match_logit(summaries[k], enc.graph_pool(tape, batch[partner[k]].doc->graph)));
    labels.push_back(partner[k] == k ? 1.0 : 0.0);
  }

  const std::vector<double> mlm_w(mlm_terms.size(), 1.0 / static_cast<double>(mlm_terms.size()));
  const std::vector<double> gae_w(gae_terms.size(), 1.0 / static_cast<double>(gae_terms.size()));
  const Var mlm = nn::weighted_sum(mlm_terms, mlm_w);
  const Var gae = nn::weighted_sum(gae_terms, gae_w);
  const Var match = nn::bce_with_logits(nn::concat_rows(match_logits), labels);
  const std::vector<Var> parts{mlm, gae, match};
  const std::vector<double> weights{cfg.weights.mlm, cfg.weights.gae, cfg.weights.match};
  const Var total = nn::weighted_sum(parts, weights);

  LossRecord rec{epoch + 1, mlm.scalar(), gae.scalar(), match.scalar(), total.scalar()};
  require_finite(rec, epoch);
  enc.params().zero_grad();
  tape.backward(total);
  state.optimizer.step(enc.params());
  return rec;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t num_docs, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch) {
  if (batch_size < 2) throw ValidationError("batch_size must be at least 2");
  if (num_docs < 2) throw ValidationError("pretraining needs at least two documents");
  std::vector<std::size_t> order(num_docs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(mix_seed(seed, kShuffleStream), epoch));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < num_docs; i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(num_docs, i + batch_size)));
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

void train_epochs(PretrainState& state, std::span<const PretrainDocument> docs,
                  const EpochCallback& after_epoch) {
  while (state.epochs_done < state.config.epochs) {
    const std::size_t epoch = state.epochs_done;
    state.optimizer.set_learning_rate(epoch_learning_rate(state.config, epoch));
    const auto batches = epoch_batches(docs.size(), state.config.batch_size, state.config.seed, epoch);
    LossRecord sum{epoch + 1, 0, 0, 0, 0};
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<BatchItem> items;
      for (const std::size_t i : batches[b]) items.push_back({&docs[i], i});
      const LossRecord r =
          pretrain_step(state, items, epoch, mix_seed(mix_seed(state.config.seed, epoch), b + 1));
      sum.mlm += r.mlm;
      sum.gae += r.gae;
      sum.match += r.match;
      sum.total += r.total;
    }
    const double n = static_cast<double>(batches.size());
    state.log.push_back({epoch + 1, sum.mlm / n, sum.gae / n, sum.match / n, sum.total / n});
    ++state.epochs_done;
    if (after_epoch && !after_epoch(state)) break;
  }
}

// --- checkpoints ------------------------------------------------------------

std::string vocab_hash(const Vocab& vocab) { return sha256_hex(vocab.serialize()); }

void save_checkpoint(const PretrainState& state, const Vocab& vocab,
                     const std::filesystem::path& dir) {
  if (state.config.encoder.vocab_size != vocab.size())
    throw ValidationError("encoder vocab_size does not match the vocabulary");
  std::filesystem::create_directories(dir);
  write_file(dir / "config.json", nlohmann::json(state.config).dump(2) + "\n");
  write_file(dir / "vocab.sha256", vocab_hash(vocab) + "\n");
  write_file(dir / "vocab.txt", vocab.serialize());
  write_file(dir / "params.bin", state.encoder.params().serialize());
  write_file(dir / "optimizer.bin", state.optimizer.serialize());
  std::string log;
  for (const auto& r : state.log) log += to_jsonl(r) + "\n";
  write_file(dir / "trainlog.jsonl", log);
  // Written last: its presence marks a complete checkpoint.
  write_file(dir / "state.json",
             nlohmann::ordered_json{{"epochs_done", state.epochs_done}, {"optimizer_steps", state.optimizer.steps()}}
                     .dump() + "\n");
}

Vocab checkpoint_vocab(const std::filesystem::path& dir) { return Vocab::load(dir / "vocab.txt"); }

PretrainState load_checkpoint(const std::filesystem::path& dir, const Vocab& vocab) {
  if (!std::filesystem::exists(dir / "state.json"))
    throw IoError("no checkpoint in " + dir.string());
  std::string stored = read_file(dir / "vocab.sha256");
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
  if (stored != vocab_hash(vocab))
    throw ValidationError("vocabulary hash mismatch: checkpoint was trained with a different vocab");
  PretrainConfig config;
  try {
    config = nlohmann::json::parse(read_file(dir / "config.json")).get<PretrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad checkpoint config: ") + e.what());
  }
  if (config.encoder.vocab_size != vocab.size())
    throw ValidationError("checkpoint vocab_size does not match the vocabulary");
  PretrainState state(config);
  state.encoder.params().deserialize(read_file(dir / "params.bin"));
  state.optimizer.deserialize(read_file(dir / "optimizer.bin"));
  const auto meta = nlohmann::json::parse(read_file(dir / "state.json"));
  state.epochs_done = meta.at("epochs_done").get<std::size_t>();
  std::istringstream log(read_file(dir / "trainlog.jsonl"));
  for (std::string line; std::getline(log, line);)
    if (!line.empty()) state.log.push_back(loss_record_from_json(nlohmann::json::parse(line)));
  if (state.log.size() != state.epochs_done)
    throw ValidationError("training log length disagrees with the completed epoch count");
  return state;
}

std::filesystem::path graph_cache_path(const std::filesystem::path& graph_dir, std::string_view id) {
  return graph_dir / (std::string(id) + ".json");
}

PretrainState pretrain(const PretrainConfig& config, const PretrainInputs& inputs,
                       const std::filesystem::path& out_dir, bool resume) {
  config.validate();
  if (config.encoder.vocab_size != inputs.vocab.size())
    throw ValidationError("encoder.vocab_size (" + std::to_string(config.encoder.vocab_size) +
                          ") differs from the vocabulary size (" +
                          std::to_string(inputs.vocab.size()) + ")");
  const auto entries = inputs.manifest.with_split(Split::Pretrain);
  if (entries.size() < 2) throw ValidationError("the pretrain split needs at least two documents");
  std::vector<std::string> missing;
  for (const auto* e : entries)
    if (!std::filesystem::exists(graph_cache_path(inputs.graph_dir, e->id))) missing.push_back(e->id);
  if (!missing.empty())
    throw IoError(std::to_string(missing.size()) + " cached graph(s) missing, first: " +
                  graph_cache_path(inputs.graph_dir, missing.front()).string());
  std::vector<PretrainDocument> docs;
  for (const auto* e : entries)
    docs.push_back(make_pretrain_document(ingest_ir_file(e->path, e->id),
                                          load_graph(graph_cache_path(inputs.graph_dir, e->id)),
                                          inputs.vocab));

  const bool have = resume && std::filesystem::exists(out_dir / "state.json");
  PretrainState state = have ? load_checkpoint(out_dir, inputs.vocab) : PretrainState(config);
  if (have) {
    PretrainConfig a = state.config, b = config;
    a.epochs = b.epochs = 0;
    if (!(a == b)) throw ValidationError("resume config differs from the checkpoint config");
    state.config.epochs = config.epochs;
  }
  save_checkpoint(state, inputs.vocab, out_dir);
  train_epochs(state, docs, [&](const PretrainState& s) {
    save_checkpoint(s, inputs.vocab, out_dir);
    return true;
  });
  return state;
}

// --- diagnostics --------------------------------------------------------

double mlm_accuracy(const PretrainState& state, std::span<const PretrainDocument> docs,
                    std::size_t epoch) {
  std::size_t hit = 0, total = 0;
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (std::size_t s = 0; s < docs[d].statements.size(); ++s) {
      const MaskedInput in = masked_input(state.config, docs[d].statements[s], d, s, epoch);
      Tape tape(false);
      const nn::Matrix logits = mlm_planned_logits(tape, state.encoder, in.masked, in.plan).value();
      for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        hit += argmax_first(logits.row(r)) == in.plan.originals[static_cast<std::size_t>(r)];
        ++total;
      }
    }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

double gae_auc(const Encoder& encoder, std::span<const PretrainDocument> docs, std::uint64_t seed) {
  std::vector<std::pair<double, int>> scored;  // (score, is_positive)
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const ProGraph& g = docs[d].graph;
    std::mt19937_64 rng(mix_seed(seed, d));
    for (const EdgeType type : kEdgeTypes) {
      const std::size_t n_pos = g.count(type);
      if (n_pos == 0) continue;
      const nn::Matrix z = gae_encode(encoder, g, graph_mode_for(type));
      for (const auto& e : g.edges)
        if (e.type == type)
          scored.emplace_back(z.row(static_cast<Eigen::Index>(e.src)).dot(z.row(static_cast<Eigen::Index>(e.dst))), 1);
      for (const auto& [i, j] : sample_negative_pairs(g, type, n_pos, rng))
        scored.emplace_back(z.row(static_cast<Eigen::Index>(i)).dot(z.row(static_cast<Eigen::Index>(j))), 0);
    }
  }
  // Mann-Whitney U with average ranks for ties.
  std::sort(scored.begin(), scored.end());
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < scored.size();) {
    std::size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (scored[k].second) rank_sum += avg_rank;
    i = j;
  }
  for (const auto& [score, label] : scored) (label ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw ValidationError("AUC needs both positive and negative pairs");
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

double match_accuracy(const Encoder& encoder, std::span<const PretrainDocument> docs,
                      std::uint64_t seed) {
  if (docs.size() < 2) throw ValidationError("matching accuracy needs at least two documents");
  std::vector<nn::RowVector> summaries, pooled;
  for (const auto& d : docs) {
    Tape tape(false);
    summaries.push_back(encoder.sequence_summary(tape, d.statements).value());
    pooled.push_back(encoder.graph_pool(tape, d.graph).value());
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> other(0, docs.size() - 2);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < docs.size(); ++k) {
    std::size_t j = other(rng);
    if (j >= k) ++j;
    for (const auto& [g, want] : {std::pair{k, true}, std::pair{j, false}}) {
      Tape tape(false);
      const double p = sigmoid(encoder.match_logit(tape.constant(summaries[k]), tape.constant(pooled[g])).scalar());
      correct += (p > 0.5) == want;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(2 * docs.size());
}

}  // namespace irembed
