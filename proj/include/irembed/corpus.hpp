// SPDX-License-Identifier: Apache-2.0
//
// Ingestion of textual LLVM IR files into normalized statement documents,
// and dataset manifests with deterministic split assignment.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace irembed {

/// One normalized physical line of IR: lowercased, single-space separated,
/// no leading or trailing whitespace, comments removed.
struct IRStatement {
  std::string text;

  friend bool operator==(const IRStatement&, const IRStatement&) = default;
};

struct IRDocument {
  std::string id;
  std::filesystem::path source_path;
  std::vector<IRStatement> statements;
  std::string raw_text;
};

enum class Split { Pretrain, Train, Valid, Test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct ManifestEntry {
  std::string id;
  std::filesystem::path path;
  Split split = Split::Pretrain;
};

struct Manifest {
  std::vector<ManifestEntry> entries;  // sorted by id
  std::uint64_t seed = 0;

  std::vector<const ManifestEntry*> with_split(Split split) const;
};

/// Removes a trailing ';' comment, honouring double-quoted strings.
std::string strip_comment(std::string_view line);

/// Comment stripping followed by whitespace collapse and ASCII lowercasing.
/// Returns an empty optional when nothing survives.
std::optional<IRStatement> normalize_line(std::string_view line);

std::vector<IRStatement> normalize_text(std::string_view text);

/// Throws IoError when the file cannot be read and EmptyDocumentError when no
/// statement survives normalization. The id defaults to the file stem.
IRDocument ingest_ir_file(const std::filesystem::path& path,
                          std::string id = {});

IRDocument make_document(std::string id, std::string raw_text,
                         std::filesystem::path source_path = {});

/// Fractions are matched, in order, to {pretrain, train, valid, test}; fewer
/// than four entries leave the remaining splits empty. Split sizes come from
/// largest-remainder rounding so they do not depend on the seed.
Manifest build_manifest(const std::filesystem::path& root_dir,
                        const std::vector<double>& split_fractions,
                        std::uint64_t seed);

/// Manifest from an explicit entry list; validates unique ids.
Manifest make_manifest(std::vector<ManifestEntry> entries, std::uint64_t seed);

/// JSON Lines, one {"id","path","split"} object per entry, ordered by id.
void write_manifest(const Manifest& manifest, const std::filesystem::path& file);
Manifest read_manifest(const std::filesystem::path& file);

/// n distinct documents from the pretrain split, deterministic under seed.
std::vector<IRDocument> sample_corpus(const Manifest& manifest, std::size_t n,
                                      std::uint64_t seed);

std::vector<IRDocument> load_documents(const Manifest& manifest);

}  // namespace irembed
