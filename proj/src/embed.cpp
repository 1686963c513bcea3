// SPDX-License-Identifier: Apache-2.0
#include "irembed/embed.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "irembed/errors.hpp"
#include "irembed/io.hpp"
#include "irembed/pretrain.hpp"

namespace irembed {

Modality modality_from_string(std::string_view name) {
  if (name == "text") return Modality::Text;
  if (name == "graph") return Modality::Graph;
  if (name == "both") return Modality::Both;
  throw ValidationError("unknown modality '" + std::string(name) + "' (expected text, graph or both)");
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::Text: return "text";
    case Modality::Graph: return "graph";
    case Modality::Both: return "both";
  }
  return "?";
}

nn::RowVector EmbeddingVector::concat() const {
  nn::RowVector out(text_part.size() + graph_part.size());
  out << text_part, graph_part;
  return out;
}

EmbeddingVector embed_ir(const Encoder& encoder, std::span<const TokenSeq> statements,
                         const ProGraph* graph, Modality modality) {
  const auto& cfg = encoder.config();
  EmbeddingVector v;
  v.text_part = nn::RowVector::Zero(static_cast<Eigen::Index>(cfg.hidden_dim));
  v.graph_part = nn::RowVector::Zero(static_cast<Eigen::Index>(cfg.latent_dim));
  if (modality != Modality::Graph) {
    if (statements.empty()) throw EmptyDocumentError("document has no statements to embed");
    nn::Tape tape(false);
    v.text_part = encoder.sequence_summary(tape, statements).value();
    v.text_present = true;
  }
  if (modality != Modality::Text) {
    if (!graph) throw ValidationError("graph modality requested without a graph");
    nn::Tape tape(false);
    v.graph_part = encoder.graph_pool(tape, *graph).value();
    v.graph_present = true;
  }
  if (!v.concat().allFinite()) throw Error("embedding has non-finite entries");
  return v;
}

EmbeddingVector embed_ir(const Encoder& encoder, const Vocab& vocab, const IRDocument& document,
                         const ProGraph* graph, Modality modality) {
  std::vector<TokenSeq> seqs;
  if (modality != Modality::Graph)
    for (const auto& s : document.statements) seqs.push_back(encode_statement(vocab, s));
  return embed_ir(encoder, seqs, graph, modality);
}

EmbedResult embed_corpus(const Encoder& encoder, const Vocab& vocab, const Manifest& manifest,
                         const std::filesystem::path& graph_dir, Modality modality) {
  const auto& cfg = encoder.config();
  const auto width = static_cast<Eigen::Index>(cfg.hidden_dim + cfg.latent_dim);
  EmbedResult res;
  std::vector<nn::RowVector> rows;
  for (const auto& e : manifest.entries) {
    try {
      const IRDocument doc = ingest_ir_file(e.path, e.id);
      std::optional<ProGraph> graph;
      if (modality != Modality::Text) graph = load_graph(graph_cache_path(graph_dir, e.id));
      rows.push_back(embed_ir(encoder, vocab, doc, graph ? &*graph : nullptr, modality).concat());
      res.table.ids.push_back(e.id);
    } catch (const std::exception& ex) {
      res.failures.push_back({e.id, ex.what()});
    }
  }
  res.table.rows.resize(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r) res.table.rows.row(static_cast<Eigen::Index>(r)) = rows[r];
  return res;
}

void write_embedding_table(const EmbeddingTable& table, const std::filesystem::path& csv,
                           const std::string& checkpoint_hash, Modality modality) {
  std::string out = "id";
  for (Eigen::Index j = 0; j < table.rows.cols(); ++j) out += ",dim_" + std::to_string(j);
  out += "\n";
  for (std::size_t r = 0; r < table.ids.size(); ++r) {
    out += table.ids[r];
    for (Eigen::Index j = 0; j < table.rows.cols(); ++j)
      out += "," + format_double(table.rows(static_cast<Eigen::Index>(r), j));
    out += "\n";
  }
  write_file(csv, out);
  nlohmann::ordered_json meta{{"checkpoint_hash", checkpoint_hash},
                              {"modality", to_string(modality)},
                              {"dim", table.rows.cols()},
                              {"rows", table.ids.size()}};
  auto meta_path = csv;
  meta_path += ".meta.json";
  write_file(meta_path, meta.dump(2) + "\n");
}

EmbeddingTable read_embedding_table(const std::filesystem::path& csv) {
  std::istringstream in(read_file(csv));
  std::string line;
  if (!std::getline(in, line) || line.rfind("id", 0) != 0)
    throw ValidationError(csv.string() + ": missing embedding header");
  const auto width = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  EmbeddingTable t;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string field;
    std::getline(fields, field, ',');
    t.ids.push_back(field);
    std::vector<double> row;
    while (std::getline(fields, field, ',')) row.push_back(std::stod(field));
    if (static_cast<Eigen::Index>(row.size()) != width)
      throw ValidationError(csv.string() + ": row '" + t.ids.back() + "' has the wrong width");
    rows.push_back(std::move(row));
  }
  t.rows.resize(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (Eigen::Index j = 0; j < width; ++j) t.rows(static_cast<Eigen::Index>(r), j) = rows[r][static_cast<std::size_t>(j)];
  return t;
}

}  // namespace irembed
