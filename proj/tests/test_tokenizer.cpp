#include <doctest.h>

#include <algorithm>
#include <cctype>

#include "irembed/corpus.hpp"
#include "irembed/errors.hpp"
#include "irembed/io.hpp"
#include "irembed/tokenizer.hpp"
#include "support.hpp"

using namespace irembed;
using irembed::testing::TempDir;

namespace {

std::vector<IRDocument> corpus_docs() {
  std::vector<IRDocument> docs;
  for (const auto& e : std::filesystem::directory_iterator(irembed::testing::data_dir() / "corpus"))
    docs.push_back(ingest_ir_file(e.path()));
  std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return docs;
}

std::vector<IRDocument> toy_docs() {
  return {make_document("t0", "%c = add i32 %a, %b\nret i32 %c\n"),
          make_document("t1", "%d = sub i32 %c, %a\nret i32 %d\n")};
}

// Splits on whitespace, then isolates every punctuation char.
std::vector<std::string> reference_split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (kPunctuation.find(c) != std::string_view::npos) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur += c;
    }
  }
  flush();
  return out;
}

}  // namespace

TEST_CASE("pre_tokenize examples") {
  CHECK(pre_tokenize("%c = add i32 %a, %b") ==
        std::vector<std::string>{"%", "c", "=", "add", "i32", "%", "a", ",", "%", "b"});
  CHECK(pre_tokenize("").empty());
  CHECK(pre_tokenize("ret i32 %c") == std::vector<std::string>{"ret", "i32", "%", "c"});
}

TEST_CASE("pre_tokenize matches a reference splitter on the corpus") {
  for (const auto& d : corpus_docs())
    for (const auto& s : d.statements) REQUIRE(pre_tokenize(s) == reference_split(s.text));
}

TEST_CASE("special tokens lead the vocabulary") {
  const Vocab v = train_tokenizer(toy_docs(), 40);
  for (int i = 0; i < kNumSpecial; ++i) CHECK(v.token(i) == kSpecialTokens[static_cast<std::size_t>(i)]);
  std::vector<std::string> sorted = v.tokens();
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  for (int i = kNumSpecial; i < static_cast<int>(v.size()); ++i) CHECK_FALSE(v.token(i).empty());
}

TEST_CASE("repeated words become whole tokens") {
  std::string text;
  for (int i = 0; i < 20; ++i) text += "add i32\n";
  const std::vector<IRDocument> docs{make_document("rep", text)};
  const Vocab v = train_tokenizer(docs, 16);
  CHECK(v.size() <= 16);
  CHECK(v.contains("add"));
  CHECK(v.contains("i32"));
  const auto seq = encode_statement(v, "add i32");
  CHECK(seq.length() == 4);
  CHECK(v.token(seq.ids[1]) == "add");
  CHECK(v.token(seq.ids[2]) == "i32");
}

TEST_CASE("vocab too small for the alphabet") {
  CHECK_THROWS_AS(train_tokenizer(toy_docs(), 5), ValidationError);
}

TEST_CASE("training is deterministic and seed-free in effect") {
  TempDir tmp;
  const auto docs = corpus_docs();
  const std::span<const IRDocument> some(docs.data(), 6);
  train_tokenizer(some, 300, 4).save(tmp / "a.txt");
  train_tokenizer(some, 300, 4).save(tmp / "b.txt");
  train_tokenizer(some, 300, 99).save(tmp / "c.txt");
  CHECK(read_file(tmp / "a.txt") == read_file(tmp / "b.txt"));
  CHECK(read_file(tmp / "a.txt") == read_file(tmp / "c.txt"));
  const Vocab back = Vocab::load(tmp / "a.txt");
  CHECK(back.serialize() == read_file(tmp / "a.txt"));
}

TEST_CASE("vocab file layout") {
  TempDir tmp;
  const Vocab v = train_tokenizer(toy_docs(), 30);
  v.save(tmp / "v.txt");
  const std::string text = read_file(tmp / "v.txt");
  CHECK(text.starts_with("[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\n"));
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == v.size());
}

TEST_CASE("encode_statement framing") {
  const Vocab v = train_tokenizer(toy_docs(), 60);
  const TokenSeq empty = encode_statement(v, "");
  CHECK(empty.ids[0] == kClsId);
  CHECK(empty.ids[1] == kSepId);
  CHECK(empty.length() == 2);
  for (std::size_t i = 2; i < kSeqLen; ++i) {
    CHECK(empty.ids[i] == kPadId);
    CHECK(empty.attention_mask[i] == 0);
  }
  CHECK(empty.attention_mask[0] == 1);
  CHECK(empty.attention_mask[1] == 1);

  const TokenSeq ret = encode_statement(v, "ret i32 %c");
  const std::vector<std::string> want{"[CLS]", "ret", "i32", "%", "c", "[SEP]"};
  CHECK(decode_ids(v, ret) == want);
  CHECK(ret.length() == 6);
}

TEST_CASE("long statements truncate with SEP kept") {
  const Vocab v = train_tokenizer(toy_docs(), 60);
  std::string s;
  for (int i = 0; i < 100; ++i) s += "%a, ";
  const TokenSeq seq = encode_statement(v, s);
  CHECK(seq.length() == kSeqLen);
  CHECK(seq.ids[kSeqLen - 1] == kSepId);
  CHECK(std::count(seq.ids.begin(), seq.ids.end(), kSepId) == 1);
}

TEST_CASE("unknown characters map to UNK") {
  const Vocab v = train_tokenizer(toy_docs(), 60);
  const TokenSeq seq = encode_statement(v, "ret i32 %q");
  CHECK(std::find(seq.ids.begin(), seq.ids.end(), kUnkId) != seq.ids.end());
}

TEST_CASE("decode examples") {
  const Vocab v = train_tokenizer(toy_docs(), 60);
  CHECK(decode_ids(v, encode_statement(v, "%c = add i32 %a, %b")) ==
        std::vector<std::string>{"[CLS]", "%", "c", "=", "add", "i32", "%", "a", ",", "%", "b", "[SEP]"});
  const std::vector<int> frame{kClsId, kSepId};
  CHECK(decode_ids(v, frame) == std::vector<std::string>{"[CLS]", "[SEP]"});
  const std::vector<int> bad{static_cast<int>(v.size())};
  CHECK_THROWS_AS(decode_ids(v, bad), ValidationError);
}

TEST_CASE("detokenize examples") {
  const std::vector<std::string> a{"[CLS]", "ret", "i32", "%", "c", "[SEP]"};
  CHECK(detokenize(a) == "ret i32 %c");
  const std::vector<std::string> b{"[CLS]", "[SEP]"};
  CHECK(detokenize(b) == "");
  const std::vector<std::string> c{"ad", "##d"};
  CHECK(detokenize(c) == "add");
  const std::vector<std::string> d{"##d"};
  CHECK_THROWS_AS(detokenize(d), ValidationError);
  // Attribute arguments hug their keyword; attribute values keep their commas tight.
  const std::vector<std::string> e{"call", "noalias", "dereferenceable_or_null", "(", "16", ")", "i8", "*", "@", "f",
                                   "(", ")"};
  CHECK(detokenize(e) == "call noalias dereferenceable_or_null(16) i8* @f()");
  const std::vector<std::string> f{"#0", "=", "{", "\"", "target-features", "\"", "=", "\"", "+sse", ",", "+sse2",
                                   "\"", "}"};
  CHECK(detokenize(f) == "#0 = { \"target-features\"=\"+sse,+sse2\" }");
}

TEST_CASE("round trip over the corpus") {
  const auto docs = corpus_docs();
  // A small vocabulary truncates many long statements; the default size keeps them.
  for (const std::size_t size : {2000, 8192}) {
    CAPTURE(size);
    const Vocab v = train_tokenizer(docs, size);
    std::size_t checked = 0;
    for (const auto& d : docs)
      for (const auto& s : d.statements) {
        const TokenSeq seq = encode_statement(v, s);
        // Only statements that fit without truncation are expected back intact.
        if (encode_body(v, s.text).size() + 2 > kSeqLen) continue;
        CHECK(std::count(seq.ids.begin(), seq.ids.end(), kUnkId) == 0);
        CHECK(detokenize(decode_ids(v, seq)) == s.text);
        ++checked;
      }
    CHECK(checked > 2000);
  }
}

TEST_CASE("every sequence is 64 long with a consistent mask") {
  const auto docs = corpus_docs();
  const Vocab v = train_tokenizer(std::span<const IRDocument>(docs.data(), 8), 500);
  for (const auto& d : docs)
    for (const auto& s : d.statements) {
      const TokenSeq seq = encode_statement(v, s);
      CHECK(seq.ids[0] == kClsId);
      const std::size_t n = seq.length();
      CHECK(seq.ids[n - 1] == kSepId);
      for (std::size_t i = 0; i < kSeqLen; ++i) CHECK((seq.attention_mask[i] == 1) == (seq.ids[i] != kPadId));
      for (std::size_t i = n; i < kSeqLen; ++i) CHECK(seq.ids[i] == kPadId);
    }
}

TEST_CASE("case-insensitive through ingestion") {
  const Vocab v = train_tokenizer(toy_docs(), 60);
  const auto upper = make_document("u", "%C = ADD I32 %A, %B\n");
  const auto lower = make_document("l", "%c = add i32 %a, %b\n");
  CHECK(encode_statement(v, upper.statements[0]) == encode_statement(v, lower.statements[0]));
}
