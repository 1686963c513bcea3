// SPDX-License-Identifier: Apache-2.0
#include "irembed/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "irembed/errors.hpp"

namespace irembed {

namespace fs = std::filesystem;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Pretrain: return "pretrain";
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "pretrain";
}

Split split_from_string(std::string_view name) {
  if (name == "pretrain") return Split::Pretrain;
  if (name == "train") return Split::Train;
  if (name == "valid") return Split::Valid;
  if (name == "test") return Split::Test;
  throw ValidationError("unknown split '" + std::string(name) + "'");
}

std::vector<const ManifestEntry*> Manifest::with_split(Split split) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(&e);
  return out;
}

std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"') in_string = !in_string;
    if (c == ';' && !in_string) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

std::optional<IRStatement> normalize_line(std::string_view line) {
  const std::string body = strip_comment(line);
  std::string out;
  out.reserve(body.size());
  bool pending_space = false;
  for (const char c : body) {
    // Locale-independent: only ASCII letters are folded.
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
        c == '\f') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  }
  if (out.empty()) return std::nullopt;
  return IRStatement{std::move(out)};
}

std::vector<IRStatement> normalize_text(std::string_view text) {
  std::vector<IRStatement> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    if (auto s = normalize_line(text.substr(start, end - start)))
      out.push_back(std::move(*s));
    start = end + 1;
  }
  return out;
}

IRDocument make_document(std::string id, std::string raw_text,
                         fs::path source_path) {
  IRDocument doc;
  doc.id = std::move(id);
  doc.source_path = std::move(source_path);
  doc.statements = normalize_text(raw_text);
  doc.raw_text = std::move(raw_text);
  if (doc.statements.empty())
    throw EmptyDocumentError("document '" + doc.id + "' has no statements");
  return doc;
}

IRDocument ingest_ir_file(const fs::path& path, std::string id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on " + path.string());
  if (id.empty()) id = path.stem().string();
  return make_document(std::move(id), buf.str(), path);
}

Manifest make_manifest(std::vector<ManifestEntry> entries, std::uint64_t seed) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].id == entries[i - 1].id)
      throw ValidationError("duplicate manifest id '" + entries[i].id + "'");
  return Manifest{std::move(entries), seed};
}

namespace {

std::vector<std::size_t> largest_remainder(const std::vector<double>& fractions,
                                           std::size_t n) {
  std::vector<std::size_t> counts(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[i];
    remainders.emplace_back(exact - static_cast<double>(counts[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned)
    ++counts[remainders[k % remainders.size()].second];
  return counts;
}

}  // namespace

Manifest build_manifest(const fs::path& root_dir,
                        const std::vector<double>& split_fractions,
                        std::uint64_t seed) {
  if (split_fractions.empty() || split_fractions.size() > 4)
    throw ValidationError("expected between one and four split fractions");
  double sum = 0.0;
  for (const double f : split_fractions) {
    if (f < 0.0) throw ValidationError("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("split fractions must sum to 1");
  if (!fs::is_directory(root_dir))
    throw IoError("not a directory: " + root_dir.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ll")
      files.push_back(entry.path());
  if (files.empty())
    throw ValidationError("no .ll files under " + root_dir.string());
  std::sort(files.begin(), files.end());

  std::mt19937_64 rng(seed);
  std::shuffle(files.begin(), files.end(), rng);
  const auto counts = largest_remainder(split_fractions, files.size());

  std::vector<ManifestEntry> entries;
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    for (std::size_t k = 0; k < counts[s]; ++k, ++cursor) {
      const fs::path& p = files[cursor];
      fs::path rel = fs::relative(p, root_dir);
      rel.replace_extension();
      entries.push_back({rel.generic_string(), p, static_cast<Split>(s)});
    }
  }
  return make_manifest(std::move(entries), seed);
}

void write_manifest(const Manifest& manifest, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  const fs::path base = fs::absolute(file).parent_path();
  for (const auto& e : manifest.entries) {
    fs::path p = e.path;
    if (p.is_absolute() || fs::exists(p)) {
      const fs::path rel = fs::relative(fs::absolute(p), base);
      if (!rel.empty()) p = rel;
    }
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["path"] = p.generic_string();
    j["split"] = std::string(to_string(e.split));
    out << j.dump() << '\n';
  }
}

Manifest read_manifest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read manifest " + file.string());
  const fs::path base = fs::absolute(file).parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      fs::path p = j.at("path").get<std::string>();
      if (p.is_relative()) p = (base / p).lexically_normal();
      entries.push_back({j.at("id").get<std::string>(), p,
                         split_from_string(j.at("split").get<std::string>())});
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(lineno, std::string("manifest: ") + ex.what());
    }
  }
  return make_manifest(std::move(entries), 0);
}

std::vector<IRDocument> sample_corpus(const Manifest& manifest, std::size_t n,
                                      std::uint64_t seed) {
  auto population = manifest.with_split(Split::Pretrain);
  if (n > population.size())
    throw ValidationError("requested " + std::to_string(n) +
                          " documents from a population of " +
                          std::to_string(population.size()));
  std::mt19937_64 rng(seed);
  std::shuffle(population.begin(), population.end(), rng);
  population.resize(n);
  std::vector<IRDocument> docs;
  docs.reserve(n);
  for (const auto* e : population) docs.push_back(ingest_ir_file(e->path, e->id));
  return docs;
}

std::vector<IRDocument> load_documents(const Manifest& manifest) {
  std::vector<IRDocument> docs;
  docs.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) docs.push_back(ingest_ir_file(e.path, e.id));
  return docs;
}

}  // namespace irembed
