// SPDX-License-Identifier: Apache-2.0
//
// Joint pretraining over masked-token prediction, edge reconstruction and
// sequence/graph matching, with resumable on-disk checkpoints.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "irembed/autograd.hpp"
#include "irembed/corpus.hpp"
#include "irembed/graph.hpp"
#include "irembed/model.hpp"
#include "irembed/tokenizer.hpp"

namespace irembed {

struct LossWeights {
  double mlm = 1.0;
  double gae = 1.0;
  double match = 1.0;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct PretrainConfig {
  EncoderConfig encoder;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  LossWeights weights;
  std::uint64_t seed = 0;
  /// When false every statement keeps one mask plan for the whole run.
  bool resample_masks = true;
  /// "constant", or "linear": epoch e of E runs at learning_rate * (E - e) / E.
  std::string lr_schedule = "constant";

  void validate() const;
  friend bool operator==(const PretrainConfig&, const PretrainConfig&) = default;
};

/// Learning rate used for every step of `epoch` (0-based).
double epoch_learning_rate(const PretrainConfig& config, std::size_t epoch);

void to_json(nlohmann::json& j, const PretrainConfig& c);
void from_json(const nlohmann::json& j, PretrainConfig& c);

/// Tokenized statements and prebuilt graph of one document.
struct PretrainDocument {
  std::string id;
  std::vector<TokenSeq> statements;
  ProGraph graph;
};

PretrainDocument make_pretrain_document(const IRDocument& doc, ProGraph graph, const Vocab& vocab);

struct LossRecord {
  std::size_t epoch = 0;
  double mlm = 0.0;
  double gae = 0.0;
  double match = 0.0;
  double total = 0.0;
  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

std::string to_jsonl(const LossRecord& r);
LossRecord loss_record_from_json(const nlohmann::json& j);

/// One pair per document. `draw` overrides the per-document Bernoulli(0.5)
/// mismatch decision when given (true = mismatch).
std::vector<MatchPair> make_match_pairs(std::span<const PretrainDocument> batch, std::uint64_t seed,
                                        const std::function<bool(std::size_t)>& draw = {});

struct PretrainState {
  explicit PretrainState(const PretrainConfig& config);

  PretrainConfig config;
  Encoder encoder;
  nn::Adam optimizer;
  std::size_t epochs_done = 0;
  std::vector<LossRecord> log;
};

/// Mask plan used for statement `stmt` of the document at corpus index
/// `doc` during `epoch`.
MaskPlan training_mask_plan(const PretrainConfig& config, const TokenSeq& seq, std::size_t doc,
                            std::size_t stmt, std::size_t epoch);

/// The batch members carry their corpus indices so mask plans stay tied to
/// documents rather than batch slots.
struct BatchItem {
  const PretrainDocument* doc = nullptr;
  std::size_t index = 0;
};

/// Forward and backward on the weighted objective plus one optimizer update.
/// Throws Error when a loss is not finite.
LossRecord pretrain_step(PretrainState& state, std::span<const BatchItem> batch, std::size_t epoch,
                         std::uint64_t step_seed);

/// Shuffled batch order for an epoch; a trailing singleton joins the
/// previous batch so matching always has a mismatch candidate.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t num_docs, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch);

using EpochCallback = std::function<bool(const PretrainState&)>;

/// Runs epochs until state.config.epochs, appending one averaged record per
/// epoch. The callback runs after each epoch; returning false stops early.
void train_epochs(PretrainState& state, std::span<const PretrainDocument> docs,
                  const EpochCallback& after_epoch = {});

// --- checkpoints ------------------------------------------------------------

void save_checkpoint(const PretrainState& state, const Vocab& vocab,
                     const std::filesystem::path& dir);
/// Validates the stored vocabulary hash against `vocab`.
PretrainState load_checkpoint(const std::filesystem::path& dir, const Vocab& vocab);
/// Loads the vocabulary copy stored with the checkpoint.
Vocab checkpoint_vocab(const std::filesystem::path& dir);
std::string vocab_hash(const Vocab& vocab);

struct PretrainInputs {
  Manifest manifest;
  Vocab vocab;
  std::filesystem::path graph_dir;
};

/// Loads the pretrain split and its cached graphs (failing before any
/// training if one is missing), then trains, checkpointing after each
/// epoch. With resume, an existing checkpoint in `out_dir` is continued.
PretrainState pretrain(const PretrainConfig& config, const PretrainInputs& inputs,
                       const std::filesystem::path& out_dir, bool resume = false);

std::filesystem::path graph_cache_path(const std::filesystem::path& graph_dir, std::string_view id);

// --- training-set diagnostics -------------------------------------------

/// Argmax accuracy at planned positions with the plans used for `epoch`.
double mlm_accuracy(const PretrainState& state, std::span<const PretrainDocument> docs,
                    std::size_t epoch);
/// Area under the ROC curve of decoder scores, positives against an equal
/// number of sampled non-edges, pooled over edge types.
double gae_auc(const Encoder& encoder, std::span<const PretrainDocument> docs, std::uint64_t seed);
/// Accuracy over every matching pair plus one mismatched pair per document.
double match_accuracy(const Encoder& encoder, std::span<const PretrainDocument> docs,
                      std::uint64_t seed);

}  // namespace irembed
