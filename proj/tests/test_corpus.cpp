#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "irembed/corpus.hpp"
#include "irembed/errors.hpp"
#include "irembed/io.hpp"
#include "support.hpp"

using namespace irembed;
using irembed::testing::TempDir;

namespace {

// Independent normalizer: split on whitespace, rejoin, lowercase.
std::string reference_normalize(const std::string& line) {
  std::string body = line.substr(0, line.find(';'));
  std::string out, word;
  for (char c : body + " ") {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!word.empty()) out += (out.empty() ? "" : " ") + word;
      word.clear();
    } else {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

void write_ll(const std::filesystem::path& p, const std::string& text) { write_file(p, text); }

}  // namespace

TEST_CASE("ingest lowercases and collapses whitespace") {
  TempDir tmp;
  write_ll(tmp / "one.ll", "  %C = add i32 %A, %B \n");
  const auto doc = ingest_ir_file(tmp / "one.ll");
  REQUIRE(doc.statements.size() == 1);
  CHECK(doc.statements[0].text == "%c = add i32 %a, %b");
  CHECK(doc.id == "one");
}

TEST_CASE("comment-only file is an empty document") {
  TempDir tmp;
  write_ll(tmp / "c.ll", "; comment\n\n   \n;; more\n");
  CHECK_THROWS_AS(ingest_ir_file(tmp / "c.ll"), EmptyDocumentError);
}

TEST_CASE("unreadable file is an io error") {
  TempDir tmp;
  CHECK_THROWS_AS(ingest_ir_file(tmp / "missing.ll"), IoError);
}

TEST_CASE("three line body keeps file order") {
  const auto doc = make_document("f", "entry:\n  %x = add i32 1, 2\n  ret i32 %x\n");
  REQUIRE(doc.statements.size() == 3);
  CHECK(doc.statements[0].text == "entry:");
  CHECK(doc.statements[1].text == "%x = add i32 1, 2");
  CHECK(doc.statements[2].text == "ret i32 %x");
}

TEST_CASE("trailing comments go, quoted semicolons stay") {
  CHECK(normalize_line("ret void ; done")->text == "ret void");
  CHECK(normalize_line("@s = constant [3 x i8] c\"a;b\" ; x")->text ==
        "@s = constant [3 x i8] c\"a;b\"");
  CHECK_FALSE(normalize_line("   ; nothing").has_value());
}

TEST_CASE("normalization agrees with a reference on the corpus") {
  const auto dir = irembed::testing::data_dir() / "corpus";
  std::size_t checked = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string raw = read_file(entry.path());
    std::vector<std::string> expect;
    std::size_t start = 0;
    while (start < raw.size()) {
      std::size_t end = raw.find('\n', start);
      if (end == std::string::npos) end = raw.size();
      const std::string line = raw.substr(start, end - start);
      // The reference ignores quoting, so skip lines with strings.
      if (line.find('"') == std::string::npos) {
        const auto got = normalize_line(line);
        const auto want = reference_normalize(line);
        CHECK(got.value_or(IRStatement{}).text == want);
        ++checked;
      }
      start = end + 1;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("normalized statements have no uppercase or edge spaces") {
  const auto doc = make_document("x", "  DEFINE   Void @F() {\n\tRET\tVOID\n}\n");
  for (const auto& s : doc.statements) {
    CHECK_FALSE(s.text.empty());
    CHECK(s.text.front() != ' ');
    CHECK(s.text.back() != ' ');
    CHECK(std::none_of(s.text.begin(), s.text.end(), [](char c) { return c >= 'A' && c <= 'Z'; }));
    CHECK(s.text.find("  ") == std::string::npos);
  }
}

TEST_CASE("ingest is idempotent") {
  TempDir tmp;
  const auto first = ingest_ir_file(irembed::testing::data_dir() / "corpus" / "gemm_O2.ll");
  std::string text;
  for (const auto& s : first.statements) text += s.text + "\n";
  write_ll(tmp / "again.ll", text);
  CHECK(ingest_ir_file(tmp / "again.ll").statements == first.statements);
}

TEST_CASE("manifest split sizes and stability") {
  TempDir tmp;
  for (int i = 0; i < 10; ++i) write_ll(tmp / ("f" + std::to_string(i) + ".ll"), "ret void\n");
  const auto a = build_manifest(tmp.path(), {0.8, 0.1, 0.1}, 7);
  const auto b = build_manifest(tmp.path(), {0.8, 0.1, 0.1}, 7);
  CHECK(a.with_split(Split::Pretrain).size() == 8);
  CHECK(a.with_split(Split::Train).size() == 1);
  CHECK(a.with_split(Split::Valid).size() == 1);
  CHECK(a.with_split(Split::Test).empty());
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i].split == b.entries[i].split);

  const auto c = build_manifest(tmp.path(), {0.8, 0.1, 0.1}, 8);
  CHECK(c.with_split(Split::Pretrain).size() == 8);
  CHECK(c.with_split(Split::Train).size() == 1);

  // Partition: every file lands in exactly one split.
  std::set<std::string> ids;
  for (const auto& e : a.entries) ids.insert(e.id);
  CHECK(ids.size() == 10);
}

TEST_CASE("manifest validation") {
  TempDir tmp;
  write_ll(tmp / "a.ll", "ret void\n");
  CHECK_THROWS_AS(build_manifest(tmp.path(), {0.5, 0.6}, 1), ValidationError);
  TempDir empty;
  CHECK_THROWS(build_manifest(empty.path(), {1.0}, 1));
  CHECK_THROWS_AS(make_manifest({{"x", "a", Split::Train}, {"x", "b", Split::Train}}, 0),
                  ValidationError);
}

TEST_CASE("manifest file round trip") {
  TempDir tmp;
  for (int i = 0; i < 4; ++i) write_ll(tmp / ("g" + std::to_string(i) + ".ll"), "ret void\n");
  const auto m = build_manifest(tmp.path(), {0.5, 0.5}, 3);
  write_manifest(m, tmp / "manifest.jsonl");
  const auto back = read_manifest(tmp / "manifest.jsonl");
  REQUIRE(back.entries.size() == m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(back.entries[i].id == m.entries[i].id);
    CHECK(back.entries[i].split == m.entries[i].split);
    CHECK(std::filesystem::equivalent(back.entries[i].path, m.entries[i].path));
  }
  // Ordered by id.
  CHECK(std::is_sorted(back.entries.begin(), back.entries.end(),
                       [](const auto& x, const auto& y) { return x.id < y.id; }));
}

TEST_CASE("sample_corpus") {
  TempDir tmp;
  for (int i = 0; i < 100; ++i) write_ll(tmp / ("p" + std::to_string(i) + ".ll"), "ret void\n");
  const auto m = build_manifest(tmp.path(), {1.0}, 0);
  std::set<std::string> all;
  for (const auto& d : sample_corpus(m, 100, 5)) all.insert(d.id);
  CHECK(all.size() == 100);
  const auto a = sample_corpus(m, 10, 11);
  const auto b = sample_corpus(m, 10, 11);
  REQUIRE(a.size() == 10);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
  CHECK(sample_corpus(m, 0, 1).empty());
  CHECK_THROWS_AS(sample_corpus(m, 101, 1), ValidationError);
}
