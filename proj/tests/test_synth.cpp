#include <doctest.h>

#include <set>

#include "irembed/corpus.hpp"
#include "irembed/errors.hpp"
#include "irembed/graph.hpp"
#include "irembed/io.hpp"
#include "irembed/ir_parser.hpp"
#include "irembed/synth.hpp"
#include "irembed/tasks.hpp"
#include "irembed/tokenizer.hpp"
#include "support.hpp"

using namespace irembed;
using irembed::testing::TempDir;

TEST_CASE("every family, type and size parses and builds a graph") {
  const std::vector<IRDocument> seed_docs{make_document("k", generate_kernel({"k", KernelFamily::Poly, ElemType::F32, 3, 1}))};
  const Vocab v = train_tokenizer(seed_docs, 120);
  for (int f = 0; f < kNumKernelFamilies; ++f)
    for (const ElemType e : {ElemType::F32, ElemType::F64, ElemType::I32})
      for (int w = 1; w <= 8; ++w) {
        const KernelSpec k{"kern", static_cast<KernelFamily>(f), e, w, static_cast<std::uint64_t>(f * 100 + w)};
        CAPTURE(to_string(k.family));
        CAPTURE(w);
        if (k.family == KernelFamily::Transcend && e == ElemType::I32) {
          CHECK_THROWS_AS(generate_kernel(k), ValidationError);
          continue;
        }
        const std::string text = generate_kernel(k);
        const IRModule m = parse_ir(text);
        REQUIRE(m.find_function("kern") != nullptr);
        const ProGraph g = build_multigraph(m, v);
        CHECK(check_graph_invariants(g) == "");
        CHECK(g.count(EdgeType::Data) > 0);
        CHECK(generate_kernel(k) == text);
      }
}

TEST_CASE("kernel sampling") {
  const auto a = sample_kernel_specs(50, 3);
  CHECK(a.size() == 50);
  std::set<std::string> names;
  std::set<int> fams;
  for (const auto& k : a) {
    names.insert(k.name);
    fams.insert(static_cast<int>(k.family));
    CHECK(k.work >= 1);
    CHECK(k.work <= 8);
  }
  CHECK(names.size() == 50);
  CHECK(fams.size() == kNumKernelFamilies);
  const auto b = sample_kernel_specs(50, 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(generate_kernel(a[i]) == generate_kernel(b[i]));
  for (const auto& k : sample_kernel_specs(40, 5, "t", 2)) CHECK(k.work <= 2);
  CHECK_THROWS_AS(sample_kernel_specs(3, 1, "k", 0), ValidationError);
  CHECK_THROWS_AS(sample_kernel_specs(3, 1, "k", 9), ValidationError);
}

TEST_CASE("toy corpus is a readable pretrain manifest") {
  TempDir d;
  write_toy_corpus(5, 2, d.path());
  const Manifest m = read_manifest(d / "manifest.jsonl");
  CHECK(m.entries.size() == 5);
  CHECK(m.with_split(Split::Pretrain).size() == 5);
  for (const auto& doc : load_documents(m)) CHECK_FALSE(doc.statements.empty());
}

TEST_CASE("bundles load and their labels agree with the runtimes") {
  for (const auto& name : kTaskNames) {
    CAPTURE(name);
    TempDir d;
    BundleOptions o;
    o.task = std::string(name);
    o.programs = 8;
    o.samples_per_program = 3;
    o.seed = 4;
    write_bundle(o, d.path());
    const TaskSpec spec = task_spec(name);
    const TaskBundle b = load_task_bundle(spec, d / "labels.csv", d / "runtimes.csv");
    REQUIRE(b.runtimes);
    const Manifest m = read_manifest(d / "manifest.jsonl");
    std::set<std::string> doc_ids;
    for (const auto& e : m.entries) doc_ids.insert(e.id);
    const std::size_t per = spec.name == "devmap" || spec.name == "numa" ? 3 : 1;
    CHECK(b.samples.size() == 8 * per);
    for (const auto& s : b.samples) {
      // Every sample finds a document by its own id or its program id.
      CHECK((doc_ids.count(s.sample_id) || doc_ids.count(s.program_id)));
      const std::string key = b.runtimes->has_program(s.sample_id) ? s.sample_id : s.program_id;
      CHECK(oracle_config(*b.runtimes, key, spec.label_space) == s.label);
      if (!spec.default_baseline.empty()) CHECK(b.runtimes->has(key, spec.default_baseline));
    }
    write_bundle(o, d / "again");
    CHECK(read_file(d / "labels.csv") == read_file(d / "again" / "labels.csv"));
    CHECK(read_file(d / "runtimes.csv") == read_file(d / "again" / "runtimes.csv"));
  }
  BundleOptions bad;
  bad.programs = 1;
  TempDir d;
  CHECK_THROWS_AS(write_bundle(bad, d.path()), ValidationError);
}

TEST_CASE("devmap labels carry both classes") {
  TempDir d;
  BundleOptions o;
  o.programs = 64;
  o.samples_per_program = 4;
  write_bundle(o, d.path());
  const TaskBundle b = load_task_bundle(task_spec("devmap"), d / "labels.csv", d / "runtimes.csv");
  std::size_t gpu = 0;
  for (const auto& s : b.samples) gpu += s.label == "gpu";
  CHECK(gpu > 256 / 5);
  CHECK(gpu < 256 * 4 / 5);
}
