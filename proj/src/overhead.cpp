// SPDX-License-Identifier: Apache-2.0
#include "irembed/overhead.hpp"

#include <chrono>
#include <numeric>
#include <random>
#include <unordered_map>

#include "irembed/errors.hpp"
#include "irembed/numeric.hpp"

namespace irembed {

using nn::Matrix;
using nn::Tape;
using nn::Var;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Prepared {
  std::vector<const PretrainDocument*> doc;  // per sample
  Matrix aux;
  std::vector<int> labels;
};

Prepared prepare(const TaskSpec& spec, const TaskBundle& bundle, std::span<const PretrainDocument> documents) {
  if (bundle.samples.size() < 2) throw ValidationError("overhead needs at least two samples");
  std::unordered_map<std::string, const PretrainDocument*> by_id;
  for (const auto& d : documents) by_id[d.id] = &d;
  Prepared p;
  p.aux.resize(static_cast<Eigen::Index>(bundle.samples.size()),
               static_cast<Eigen::Index>(spec.aux_feature_names.size()));
  for (std::size_t i = 0; i < bundle.samples.size(); ++i) {
    const auto& s = bundle.samples[i];
    auto it = by_id.find(s.sample_id);
    if (it == by_id.end()) it = by_id.find(s.program_id);
    if (it == by_id.end()) throw ValidationError("no document for sample '" + s.sample_id + "'");
    if (s.aux.size() != spec.aux_feature_names.size()) throw ValidationError("aux width mismatch for " + s.sample_id);
    p.doc.push_back(it->second);
    for (std::size_t j = 0; j < s.aux.size(); ++j)
      p.aux(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.aux[j];
    p.labels.push_back(static_cast<int>(spec.label_index(s.label)));
  }
  return p;
}

// Recorded embedding row; the absent modality is a zero constant.
Var embed_row(Tape& tape, const Encoder& enc, const PretrainDocument& d, Modality m) {
  const auto& cfg = enc.config();
  const Var text = m == Modality::Graph
                       ? tape.constant(Matrix::Zero(1, static_cast<Eigen::Index>(cfg.hidden_dim)))
                       : enc.sequence_summary(tape, d.statements);
  const Var graph = m == Modality::Text
                        ? tape.constant(Matrix::Zero(1, static_cast<Eigen::Index>(cfg.latent_dim)))
                        : enc.graph_pool(tape, d.graph);
  const std::vector<Var> parts{text, graph};
  return nn::concat_cols(parts);
}

}  // namespace

double finetune(const Encoder& encoder, const TaskSpec& spec, const TaskBundle& bundle,
                std::span<const PretrainDocument> documents, const OverheadOptions& options) {
  if (options.finetune_epochs == 0 || options.finetune_batch == 0)
    throw ValidationError("fine-tuning needs at least one epoch and a positive batch size");
  const Prepared p = prepare(spec, bundle, documents);
  const auto& cfg = encoder.config();
  Encoder enc(cfg);
  enc.params().deserialize(encoder.params().serialize());
  HeadConfig hc = options.head;
  hc.seed = mix_seed(options.seed, 0xf7);
  Head head(cfg.hidden_dim + cfg.latent_dim, spec.aux_feature_names.size(), spec.label_space.size(), hc);
  if (p.aux.cols() > 0) {
    auto [mean, sd] = standardization_stats(p.aux);
    head.set_standardization(std::move(mean), std::move(sd));
  }
  nn::Adam::Options eo;
  eo.learning_rate = options.finetune_learning_rate;
  nn::Adam enc_opt(eo);
  nn::Adam::Options ho;
  ho.learning_rate = options.head.learning_rate;
  nn::Adam head_opt(ho);

  std::vector<std::size_t> order(p.doc.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double last = 0.0;
  for (std::size_t epoch = 0; epoch < options.finetune_epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(options.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.finetune_batch) {
      const std::size_t end = std::min(order.size(), start + options.finetune_batch);
      Tape tape(true);
      std::vector<Var> rows;
      std::vector<int> labels;
      Matrix aux(static_cast<Eigen::Index>(end - start), p.aux.cols());
      for (std::size_t k = start; k < end; ++k) {
        rows.push_back(embed_row(tape, enc, *p.doc[order[k]], options.modality));
        labels.push_back(p.labels[order[k]]);
        aux.row(static_cast<Eigen::Index>(k - start)) = p.aux.row(static_cast<Eigen::Index>(order[k]));
      }
      const Var loss = nn::cross_entropy_rows(head.forward(tape, nn::concat_rows(rows), aux), labels);
      if (!std::isfinite(loss.scalar())) throw Error("non-finite fine-tuning loss");
      enc.params().zero_grad();
      head.params().zero_grad();
      tape.backward(loss);
      enc_opt.step(enc.params());
      head_opt.step(head.params());
      sum += loss.scalar();
      ++batches;
    }
    last = sum / static_cast<double>(batches);
  }
  return last;
}

OverheadReport measure_overhead(const Encoder& encoder, const TaskSpec& spec, const TaskBundle& bundle,
                                std::span<const PretrainDocument> documents, const OverheadOptions& options) {
  const Prepared p = prepare(spec, bundle, documents);
  OverheadReport r;
  r.samples = p.doc.size();
  r.documents = documents.size();
  r.head_epochs = options.head.max_epochs;
  r.finetune_epochs = options.finetune_epochs;

  const auto t0 = Clock::now();
  std::unordered_map<const PretrainDocument*, nn::RowVector> cache;
  Matrix x(static_cast<Eigen::Index>(p.doc.size()),
           static_cast<Eigen::Index>(encoder.config().hidden_dim + encoder.config().latent_dim));
  for (std::size_t i = 0; i < p.doc.size(); ++i) {
    auto it = cache.find(p.doc[i]);
    if (it == cache.end()) {
      const auto* d = p.doc[i];
      it = cache.emplace(d, embed_ir(encoder, d->statements, &d->graph, options.modality).concat()).first;
    }
    x.row(static_cast<Eigen::Index>(i)) = it->second;
  }
  HeadConfig hc = options.head;
  hc.seed = mix_seed(options.seed, 0xf7);
  train_head(x, p.aux, p.labels, spec.label_space.size(), hc);
  r.frozen_seconds = seconds_since(t0);

  const auto t1 = Clock::now();
  r.finetune_final_loss = finetune(encoder, spec, bundle, documents, options);
  r.finetune_seconds = seconds_since(t1);
  return r;
}

}  // namespace irembed
