// Toy pretraining setups built from generated kernels.
#pragma once
#include <filesystem>
#include <vector>

#include "irembed/corpus.hpp"
#include "irembed/graph.hpp"
#include "irembed/ir_parser.hpp"
#include "irembed/pretrain.hpp"
#include "irembed/synth.hpp"
#include "irembed/tokenizer.hpp"

namespace irembed::testing {

struct ToySetup {
  Manifest manifest;
  Vocab vocab;
  std::vector<PretrainDocument> docs;
  std::filesystem::path graph_dir;
};

// Corpus, manifest, vocab and cached graphs under `dir`.
inline ToySetup make_toy_setup(const std::filesystem::path& dir, std::size_t count, std::uint64_t seed,
                               int max_work, std::size_t vocab_size) {
  write_toy_corpus(count, seed, dir / "corpus", max_work);
  ToySetup s;
  s.manifest = read_manifest(dir / "corpus" / "manifest.jsonl");
  const auto docs = load_documents(s.manifest);
  s.vocab = train_tokenizer(docs, vocab_size);
  s.graph_dir = dir / "graphs";
  std::filesystem::create_directories(s.graph_dir);
  for (const auto& d : docs) {
    ProGraph g = build_multigraph(parse_ir(d.raw_text), s.vocab);
    save_graph(g, graph_cache_path(s.graph_dir, d.id));
    s.docs.push_back(make_pretrain_document(d, std::move(g), s.vocab));
  }
  return s;
}

inline EncoderConfig tiny_encoder(std::size_t vocab_size, std::size_t hidden = 8) {
  EncoderConfig c;
  c.vocab_size = vocab_size;
  c.hidden_dim = hidden;
  c.num_attention_heads = 2;
  c.ffn_dim = 2 * hidden;
  c.num_transformer_layers = 1;
  c.latent_dim = hidden / 2;
  c.match_hidden_dim = hidden;
  c.seed = 1;
  return c;
}

}  // namespace irembed::testing
