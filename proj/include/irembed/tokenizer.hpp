// SPDX-License-Identifier: Apache-2.0
//
// WordPiece subword tokenizer trained from scratch on IR statements.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "irembed/corpus.hpp"

namespace irembed {

inline constexpr std::size_t kSeqLen = 64;
inline constexpr std::string_view kContinuation = "##";

enum SpecialId : int { kPadId = 0, kUnkId = 1, kClsId = 2, kSepId = 3, kMaskId = 4 };
inline constexpr int kNumSpecial = 5;
inline constexpr std::array<std::string_view, kNumSpecial> kSpecialTokens = {
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

/// Characters split out as standalone words before subword matching.
inline constexpr std::string_view kPunctuation = "%@,=()[]{}*!<>:;\"";

class Vocab {
 public:
  Vocab() = default;
  /// Takes the non-special tokens; ids start at kNumSpecial.
  explicit Vocab(std::vector<std::string> body_tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(std::string_view token) const;
  /// Returns kUnkId for tokens not in the vocabulary.
  int id(std::string_view token) const;
  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

  void save(const std::filesystem::path& file) const;
  static Vocab load(const std::filesystem::path& file);
  std::string serialize() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Fixed-length framed statement: [CLS] body [SEP] [PAD]...
struct TokenSeq {
  std::array<int, kSeqLen> ids{};
  std::array<std::uint8_t, kSeqLen> attention_mask{};

  /// Number of non-pad positions (body + 2).
  std::size_t length() const;
  std::size_t body_length() const { return length() - 2; }

  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

std::vector<std::string> pre_tokenize(std::string_view statement);
inline std::vector<std::string> pre_tokenize(const IRStatement& s) {
  return pre_tokenize(s.text);
}

/// Pair scores follow WordPiece likelihood: count(ab) / (count(a) count(b)).
/// Ties go to the higher pair count, then to the lexicographically smaller
/// merged token, so the seed never changes the result.
Vocab train_tokenizer(std::span<const IRDocument> corpus, std::size_t vocab_size,
                      std::uint64_t seed = 0);

TokenSeq encode_statement(const Vocab& vocab, std::string_view statement);
inline TokenSeq encode_statement(const Vocab& vocab, const IRStatement& s) {
  return encode_statement(vocab, s.text);
}

/// Body token ids of a statement before framing and truncation.
std::vector<int> encode_body(const Vocab& vocab, std::string_view statement);

std::vector<std::string> decode_ids(const Vocab& vocab, std::span<const int> ids);
inline std::vector<std::string> decode_ids(const Vocab& vocab, const TokenSeq& seq) {
  return decode_ids(vocab, std::span<const int>(seq.ids));
}

/// Inverse of decode + pre_tokenize for normalized IR text.
std::string detokenize(std::span<const std::string> tokens);

struct TokenizerStats {
  std::size_t statements = 0;
  std::size_t tokens = 0;
  std::size_t unknown = 0;
  std::size_t truncated = 0;
  std::size_t round_trip_ok = 0;
  std::size_t round_trip_checked = 0;
};

TokenizerStats tokenizer_stats(const Vocab& vocab, std::span<const IRDocument> corpus);

}  // namespace irembed
