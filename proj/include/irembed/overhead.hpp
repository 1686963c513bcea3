// SPDX-License-Identifier: Apache-2.0
//
// Wall-time comparison of the frozen-embedding protocol against fine-tuning
// the encoder together with the head.
#pragma once

#include <filesystem>

#include "irembed/corpus.hpp"
#include "irembed/embed.hpp"
#include "irembed/model.hpp"
#include "irembed/pretrain.hpp"
#include "irembed/tasks.hpp"
#include "irembed/tokenizer.hpp"

namespace irembed {

struct OverheadOptions {
  HeadConfig head;
  Modality modality = Modality::Both;
  std::size_t finetune_epochs = 2;
  std::size_t finetune_batch = 8;
  double finetune_learning_rate = 1e-4;
  std::uint64_t seed = 0;
};

struct OverheadReport {
  std::size_t samples = 0;
  std::size_t documents = 0;
  double frozen_seconds = 0.0;    // embedding extraction plus head training
  double finetune_seconds = 0.0;  // encoder and head trained jointly
  std::size_t head_epochs = 0;
  std::size_t finetune_epochs = 0;
  double finetune_final_loss = 0.0;
  double ratio() const { return finetune_seconds / frozen_seconds; }
};

/// Documents are looked up by sample id, then program id, in `documents`
/// (statements and, unless modality is text, graphs). Both runs fit the
/// whole bundle; nothing is held out.
OverheadReport measure_overhead(const Encoder& encoder, const TaskSpec& spec, const TaskBundle& bundle,
                                std::span<const PretrainDocument> documents, const OverheadOptions& options);

/// Fine-tunes a copy of `encoder` with a fresh head. Returns the mean
/// training loss of the last epoch.
double finetune(const Encoder& encoder, const TaskSpec& spec, const TaskBundle& bundle,
                std::span<const PretrainDocument> documents, const OverheadOptions& options);

}  // namespace irembed
