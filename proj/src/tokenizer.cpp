// SPDX-License-Identifier: Apache-2.0
#include "irembed/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "irembed/errors.hpp"

namespace irembed {

namespace {

bool is_punct(char c) { return kPunctuation.find(c) != std::string_view::npos; }

/// Splits a word into UTF-8 code point substrings.
std::vector<std::string> code_points(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const auto lead = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, word.size() - i);
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

bool starts_with_continuation(std::string_view t) { return t.starts_with(kContinuation); }

}  // namespace

// --- Vocab ---------------------------------------------------------------

Vocab::Vocab(std::vector<std::string> body_tokens) {
  tokens_.reserve(kNumSpecial + body_tokens.size());
  for (const auto s : kSpecialTokens) tokens_.emplace_back(s);
  for (auto& t : body_tokens) tokens_.push_back(std::move(t));
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty()) throw ValidationError("empty vocabulary token at id " + std::to_string(i));
    if (t.find('\n') != std::string::npos)
      throw ValidationError("vocabulary token contains a newline");
    if (!index_.emplace(t, static_cast<int>(i)).second)
      throw ValidationError("duplicate vocabulary token '" + t + "'");
  }
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw ValidationError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

int Vocab::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

std::string Vocab::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocab::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary " + file.string());
  out << serialize();
}

Vocab Vocab::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read vocabulary " + file.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.size() < kNumSpecial)
    throw ValidationError("vocabulary file shorter than the special-token header");
  for (int i = 0; i < kNumSpecial; ++i)
    if (lines[static_cast<std::size_t>(i)] != kSpecialTokens[static_cast<std::size_t>(i)])
      throw ValidationError("vocabulary special token " + std::to_string(i) + " is '" +
                            lines[static_cast<std::size_t>(i)] + "'");
  return Vocab(std::vector<std::string>(lines.begin() + kNumSpecial, lines.end()));
}

// --- TokenSeq ------------------------------------------------------------

std::size_t TokenSeq::length() const {
  std::size_t n = 0;
  while (n < kSeqLen && attention_mask[n]) ++n;
  return n;
}

// --- pre-tokenization ----------------------------------------------------

std::vector<std::string> pre_tokenize(std::string_view statement) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (const char c : statement) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      flush();
    } else if (is_punct(c)) {
      flush();
      words.emplace_back(1, c);
    } else {
      current.push_back(c);
    }
  }
  flush();
  return words;
}

// --- training ------------------------------------------------------------

Vocab train_tokenizer(std::span<const IRDocument> corpus, std::size_t vocab_size,
                      std::uint64_t /*seed*/) {
  if (corpus.empty()) throw ValidationError("tokenizer corpus is empty");

  std::map<std::string, std::uint64_t> word_counts;
  for (const auto& doc : corpus)
    for (const auto& st : doc.statements)
      for (auto& w : pre_tokenize(st.text)) ++word_counts[std::move(w)];

  // Symbol table shared by all words; a word is a sequence of symbol ids.
  std::vector<std::string> symbols;
  std::map<std::string, int> symbol_ids;
  auto intern = [&](const std::string& s) {
    auto [it, inserted] = symbol_ids.emplace(s, static_cast<int>(symbols.size()));
    if (inserted) symbols.push_back(s);
    return it->second;
  };

  struct Word {
    std::vector<int> parts;
    std::uint64_t count;
  };
  std::vector<Word> words;
  std::set<std::string> alphabet;
  for (const auto& [w, count] : word_counts) {
    Word word{{}, count};
    const auto cps = code_points(w);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      std::string unit = i == 0 ? cps[i] : std::string(kContinuation) + cps[i];
      alphabet.insert(unit);
      word.parts.push_back(intern(unit));
    }
    words.push_back(std::move(word));
  }

  if (vocab_size < kNumSpecial + alphabet.size())
    throw ValidationError("vocab_size " + std::to_string(vocab_size) +
                          " cannot hold the special tokens and " +
                          std::to_string(alphabet.size()) + " single-character units");

  std::vector<std::string> body(alphabet.begin(), alphabet.end());
  std::set<std::string> in_vocab(alphabet.begin(), alphabet.end());

  auto merged_string = [&](int a, int b) {
    const std::string& rhs = symbols[static_cast<std::size_t>(b)];
    return symbols[static_cast<std::size_t>(a)] + rhs.substr(kContinuation.size());
  };

  while (kNumSpecial + body.size() < vocab_size) {
    std::vector<std::uint64_t> sym_freq(symbols.size(), 0);
    std::map<std::pair<int, int>, std::uint64_t> pair_freq;
    for (const auto& w : words) {
      for (std::size_t i = 0; i < w.parts.size(); ++i) {
        sym_freq[static_cast<std::size_t>(w.parts[i])] += w.count;
        if (i + 1 < w.parts.size()) pair_freq[{w.parts[i], w.parts[i + 1]}] += w.count;
      }
    }
    if (pair_freq.empty()) break;

    using Wide = unsigned __int128;
    std::pair<int, int> best{-1, -1};
    std::uint64_t best_pf = 0;
    Wide best_den = 1;
    std::string best_str;
    for (const auto& [pair, pf] : pair_freq) {
      const Wide den = static_cast<Wide>(sym_freq[static_cast<std::size_t>(pair.first)]) *
                       sym_freq[static_cast<std::size_t>(pair.second)];
      bool better = false;
      if (best.first < 0) {
        better = true;
      } else {
        const Wide lhs = static_cast<Wide>(pf) * best_den;
        const Wide rhs = static_cast<Wide>(best_pf) * den;
        if (lhs != rhs) {
          better = lhs > rhs;
        } else if (pf != best_pf) {
          better = pf > best_pf;
        } else {
          better = merged_string(pair.first, pair.second) < best_str;
        }
      }
      if (better) {
        best = pair;
        best_pf = pf;
        best_den = den;
        best_str = merged_string(pair.first, pair.second);
      }
    }

    const int merged = intern(best_str);
    if (in_vocab.insert(best_str).second) body.push_back(best_str);
    for (auto& w : words) {
      if (w.parts.size() < 2) continue;
      std::vector<int> next;
      next.reserve(w.parts.size());
      for (std::size_t i = 0; i < w.parts.size(); ++i) {
        if (i + 1 < w.parts.size() && w.parts[i] == best.first && w.parts[i + 1] == best.second) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w.parts[i]);
        }
      }
      w.parts = std::move(next);
    }
  }
  return Vocab(std::move(body));
}

// --- encoding ------------------------------------------------------------

std::vector<int> encode_body(const Vocab& vocab, std::string_view statement) {
  std::vector<int> ids;
  for (const auto& word : pre_tokenize(statement)) {
    const auto cps = code_points(word);
    std::size_t start = 0;
    while (start < cps.size()) {
      std::string candidate;
      int found = -1;
      std::size_t found_end = start;
      const std::string prefix = start == 0 ? std::string() : std::string(kContinuation);
      // Greedy longest match over code points.
      std::string piece;
      for (std::size_t end = start; end < cps.size(); ++end) {
        piece += cps[end];
        const std::string key = prefix + piece;
        if (vocab.contains(key)) {
          found = vocab.id(key);
          found_end = end + 1;
        }
      }
      if (found < 0) {
        ids.push_back(kUnkId);
        start += 1;
      } else {
        ids.push_back(found);
        start = found_end;
      }
    }
  }
  return ids;
}

TokenSeq encode_statement(const Vocab& vocab, std::string_view statement) {
  auto body = encode_body(vocab, statement);
  if (body.size() > kSeqLen - 2) body.resize(kSeqLen - 2);
  TokenSeq seq;
  seq.ids.fill(kPadId);
  seq.attention_mask.fill(0);
  std::size_t pos = 0;
  seq.ids[pos++] = kClsId;
  for (const int id : body) seq.ids[pos++] = id;
  seq.ids[pos++] = kSepId;
  for (std::size_t i = 0; i < pos; ++i) seq.attention_mask[i] = 1;
  return seq;
}

std::vector<std::string> decode_ids(const Vocab& vocab, std::span<const int> ids) {
  std::vector<std::string> out;
  for (const int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size())
      throw ValidationError("token id " + std::to_string(id) + " out of range for vocabulary of " +
                            std::to_string(vocab.size()));
    if (id == kPadId) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

// --- detokenization ------------------------------------------------------

namespace {

bool is_numeric(std::string_view w) {
  if (w.empty()) return false;
  std::size_t i = (w[0] == '-') ? 1 : 0;
  if (i >= w.size()) return false;
  return std::all_of(w.begin() + static_cast<std::ptrdiff_t>(i), w.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

bool is_type_word(std::string_view w) {
  if (w == "float" || w == "double" || w == "half" || w == "ptr" || w == "void" ||
      w == "x86_fp80" || w == "fp128" || w == "label")
    return true;
  if (w.size() >= 2 && w[0] == 'i')
    return std::all_of(w.begin() + 1, w.end(), [](char c) { return c >= '0' && c <= '9'; });
  return false;
}

// Parameter attributes printed with a parenthesized argument.
bool is_attribute_call(std::string_view w) {
  static const std::set<std::string_view> kWords{"dereferenceable", "dereferenceable_or_null", "align",
                                                  "alignstack", "allocsize", "byval", "byref", "sret",
                                                  "inalloca", "elementtype", "preallocated", "vscale_range"};
  return kWords.count(w) > 0;
}

/// Re-joins pre-tokenized IR words using LLVM's printing conventions.
class Joiner {
 public:
  explicit Joiner(std::span<const std::string> words) : w_(words) {}

  std::string run() {
    std::string out;
    tight_after_.assign(w_.size(), false);
    for (std::size_t i = 0; i < w_.size(); ++i) {
      const bool before = i > 0 && tight_before(i);
      const bool glue = i > 0 && (tight_after_[i - 1] || before);
      if (i > 0 && !glue) out.push_back(' ');
      out += w_[i];
      classify_after(i);
    }
    return out;
  }

 private:
  const std::string& at(std::size_t i) const {
    static const std::string empty;
    return i < w_.size() ? w_[i] : empty;
  }

  bool opener_is_tight(std::size_t i) const {
    const std::string& open = w_[i];
    if (open == "{") return i > 0 && w_[i - 1] == "!";
    if (open == "<" && at(i + 1) == "{") return true;
    // Case tables of a multi-line switch are joined with spaces.
    if (open == "[" && w_[0] == "switch") return false;
    const std::string& next = at(i + 1);
    if (is_numeric(next) && at(i + 2) == "x") return true;
    return is_type_word(next) || next == "{" || next == "<" || next == "[";
  }

  bool tight_before(std::size_t i) {
    const std::string& cur = w_[i];
    const std::string& prev = w_[i - 1];
    if (cur == "," || cur == ")" || cur == "*" || cur == ":") return true;
    if (cur == "]" || cur == ">" || cur == "}") {
      bool tight = false;
      if (!stack_.empty()) {
        tight = stack_.back();
        stack_.pop_back();
      }
      return tight;
    }
    // Attribute values such as "+sse,+sse2" hold no spaces.
    if (value_quote_) return true;
    if (cur == "\"") {
      if (in_quote_) return true;  // closing quote
      return prev == "c" || prev == "!";
    }
    if (cur == "(") {
      const std::string& pp = i >= 2 ? w_[i - 2] : at(w_.size());
      return pp == "@" || pp == "%" || pp == "!" || is_attribute_call(prev);
    }
    if (cur == "=" && prev == "\"" && !in_quote_) {
      attr_eq_ = true;
      return true;
    }
    return false;
  }

  void classify_after(std::size_t i) {
    const std::string& cur = w_[i];
    bool tight = false;
    if (cur == "%" || cur == "@" || cur == "!" || cur == "(" || cur == ":") {
      tight = true;
    } else if (cur == "[" || cur == "<" || cur == "{") {
      tight = opener_is_tight(i);
      stack_.push_back(tight);
    } else if (cur == "\"") {
      in_quote_ = !in_quote_;
      tight = in_quote_;  // nothing separates an opening quote from its text
      value_quote_ = in_quote_ && value_next_;
      value_next_ = false;
    } else if (cur == "=" && attr_eq_) {
      attr_eq_ = false;
      value_next_ = true;
      tight = true;
    }
    tight_after_[i] = tight;
  }

  std::span<const std::string> w_;
  std::vector<bool> tight_after_;
  std::vector<bool> stack_;
  bool in_quote_ = false;
  bool attr_eq_ = false;
  bool value_next_ = false;
  bool value_quote_ = false;
};

}  // namespace

std::string detokenize(std::span<const std::string> tokens) {
  std::vector<std::string> words;
  for (const auto& t : tokens) {
    if (t == kSpecialTokens[kClsId] || t == kSpecialTokens[kSepId] ||
        t == kSpecialTokens[kPadId])
      continue;
    if (starts_with_continuation(t)) {
      if (words.empty()) throw ValidationError("continuation token '" + t + "' has no predecessor");
      words.back() += t.substr(kContinuation.size());
    } else {
      words.push_back(t);
    }
  }
  return Joiner(words).run();
}

TokenizerStats tokenizer_stats(const Vocab& vocab, std::span<const IRDocument> corpus) {
  TokenizerStats stats;
  for (const auto& doc : corpus) {
    for (const auto& st : doc.statements) {
      ++stats.statements;
      const auto body = encode_body(vocab, st.text);
      stats.tokens += body.size();
      stats.unknown += static_cast<std::size_t>(std::count(body.begin(), body.end(), kUnkId));
      if (body.size() > kSeqLen - 2) {
        ++stats.truncated;
        continue;
      }
      ++stats.round_trip_checked;
      const auto seq = encode_statement(vocab, st.text);
      if (detokenize(decode_ids(vocab, seq)) == st.text) ++stats.round_trip_ok;
    }
  }
  return stats;
}

}  // namespace irembed
