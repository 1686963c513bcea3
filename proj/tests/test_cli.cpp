#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "irembed/cli.hpp"
#include "irembed/corpus.hpp"
#include "irembed/errors.hpp"
#include "irembed/graph.hpp"
#include "irembed/io.hpp"
#include "irembed/overhead.hpp"
#include "irembed/pretrain.hpp"
#include "golden.hpp"
#include "support.hpp"

using namespace irembed;
using irembed::testing::TempDir;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const fs::path& f) { return f.string(); }

constexpr const char* kTiny =
    "# small enough for a unit test\n"
    "[pretrain]\n"
    "epochs = 2\n"
    "batch_size = 4\n"
    "seed = 9\n"
    "[pretrain.encoder]\n"
    "hidden_dim = 8\n"
    "ffn_dim = 16\n"
    "latent_dim = 4\n"
    "num_attention_heads = 2\n"
    "num_transformer_layers = 1\n"
    "match_hidden_dim = 8\n"
    "[task.head]\n"
    "max_epochs = 40\n";

// Toy corpus, vocab and graph cache made through the CLI.
struct Pipeline {
  TempDir d;
  Pipeline() {
    write_file(d / "tiny.toml", kTiny);
    REQUIRE(call({"synth", "--out", p(d / "toy"), "--set", "synth.kind=toy", "--set", "synth.count=8", "--set",
                  "synth.max_work=1"})
                .code == 0);
    REQUIRE(call({"tokenizer-train", "--manifest", p(manifest()), "--out", p(d / "tok"), "--set",
                  "tokenizer.vocab_size=200"})
                .code == 0);
    REQUIRE(call({"graph-build", "--manifest", p(manifest()), "--vocab", p(vocab()), "--out", p(graphs())}).code == 0);
  }
  fs::path manifest() const { return d / "toy" / "manifest.jsonl"; }
  fs::path vocab() const { return d / "tok" / "vocab.txt"; }
  fs::path graphs() const { return d / "graphs"; }
  Result pretrain(const fs::path& out, std::vector<std::string> extra = {}) const {
    std::vector<std::string> a{"pretrain", "--manifest", p(manifest()), "--vocab", p(vocab()), "--graphs",
                               p(graphs()), "--out", p(out), "--config", p(d / "tiny.toml")};
    a.insert(a.end(), extra.begin(), extra.end());
    return call(a);
  }
};

}  // namespace

TEST_CASE("tokenizer-train writes a vocabulary and reruns identically") {
  Pipeline pl;
  const std::string vocab = read_file(pl.vocab());
  CHECK(std::count(vocab.begin(), vocab.end(), '\n') >= 5);
  const json stats = json::parse(read_file(pl.d / "tok" / "stats.json"));
  CHECK(stats.contains("unk_rate"));
  CHECK(fs::exists(pl.d / "tok" / "effective_config.json"));
  const Result again = call({"tokenizer-train", "--manifest", p(pl.manifest()), "--out", p(pl.d / "tok2"), "--set",
                             "tokenizer.vocab_size=200"});
  CHECK(again.code == 0);
  CHECK(again.out.find("unk rate") != std::string::npos);
  CHECK(read_file(pl.d / "tok2" / "vocab.txt") == vocab);

  const Result bad = call({"tokenizer-train", "--manifest", p(pl.d / "missing.jsonl"), "--out", p(pl.d / "x")});
  CHECK(bad.code == 2);
  CHECK_FALSE(bad.err.empty());
}

TEST_CASE("usage errors exit 2 and help exits 0") {
  CHECK(call({}).code == 2);
  CHECK(call({"no-such-command"}).code == 2);
  CHECK(call({"graph-build", "--manifest", "x"}).code == 2);  // --vocab is required
  CHECK(call({"--help"}).code == 0);
  CHECK(call({"pretrain", "--help"}).code == 0);
}

TEST_CASE("graph-build on the add function matches its golden") {
  TempDir d;
  const fs::path ir = testing::data_dir() / "golden" / "add.ll";
  write_manifest(make_manifest({{"add", ir, Split::Pretrain}}, 0), d / "m.jsonl");
  // Any vocabulary will do; node texts do not depend on it.
  write_file(d / "seed.ll", read_file(ir));
  write_manifest(make_manifest({{"seed", d / "seed.ll", Split::Pretrain}}, 0), d / "seed.jsonl");
  REQUIRE(call({"tokenizer-train", "--manifest", p(d / "seed.jsonl"), "--out", p(d / "tok"), "--set",
                "tokenizer.vocab_size=64"})
              .code == 0);
  const Result r = call({"graph-build", "--manifest", p(d / "m.jsonl"), "--vocab", p(d / "tok" / "vocab.txt"),
                         "--out", p(d / "g")});
  REQUIRE(r.code == 0);
  const ProGraph g = load_graph(graph_cache_path(d / "g", "add"));
  CHECK(testing::golden_diff(g, testing::load_golden(testing::data_dir() / "golden" / "add.golden.json")) == "");
  const json summary = json::parse(read_file(d / "g" / "summary.json"));
  CHECK(summary["built"] == 1);
  CHECK(summary["nodes"] == g.num_nodes());
  CHECK(summary["edges"] == g.edges.size());
}

TEST_CASE("graph-build: empty manifest and malformed IR") {
  Pipeline pl;
  write_manifest(make_manifest({}, 0), pl.d / "empty.jsonl");
  const Result e = call({"graph-build", "--manifest", p(pl.d / "empty.jsonl"), "--vocab", p(pl.vocab()), "--out",
                         p(pl.d / "eg")});
  CHECK(e.code == 0);
  std::size_t graphs = 0;
  for (const auto& f : fs::directory_iterator(pl.d / "eg"))
    graphs += f.path().filename() != "summary.json" && f.path().filename() != "effective_config.json";
  CHECK(graphs == 0);

  write_file(pl.d / "bad.ll", "define void @f() {\nentry:\n  br label %exit\n}\n");
  write_file(pl.d / "good.ll", testing::kAddFunction);
  write_manifest(make_manifest({{"bad", pl.d / "bad.ll", Split::Pretrain}, {"good", pl.d / "good.ll", Split::Pretrain}}, 0),
                 pl.d / "mixed.jsonl");
  const Result m = call({"graph-build", "--manifest", p(pl.d / "mixed.jsonl"), "--vocab", p(pl.vocab()), "--out",
                         p(pl.d / "mg")});
  CHECK(m.code == 1);
  CHECK(m.err.find("bad") != std::string::npos);
  const json summary = json::parse(read_file(pl.d / "mg" / "summary.json"));
  REQUIRE(summary["failures"].size() == 1);
  CHECK(summary["failures"][0]["id"] == "bad");
  CHECK(fs::exists(graph_cache_path(pl.d / "mg", "good")));
  CHECK_FALSE(fs::exists(graph_cache_path(pl.d / "mg", "bad")));
}

TEST_CASE("config layering: file, then --set, then flags") {
  Pipeline pl;
  REQUIRE(pl.pretrain(pl.d / "ck", {"--set", "pretrain.epochs=1", "--seed", "21"}).code == 0);
  const json eff = json::parse(read_file(pl.d / "ck" / "effective_config.json"));
  CHECK(eff["pretrain"]["epochs"] == 1);          // --set beats the file's 2
  CHECK(eff["pretrain"]["seed"] == 21);           // the flag beats the file's 9
  CHECK(eff["pretrain"]["encoder"]["hidden_dim"] == 8);  // from the file
  CHECK(eff["pretrain"]["encoder"]["vocab_size"] == Vocab::load(pl.vocab()).size());
  const PretrainConfig saved = json::parse(read_file(pl.d / "ck" / "config.json")).get<PretrainConfig>();
  CHECK(saved.epochs == 1);
  CHECK(saved.seed == 21);

  CHECK(pl.pretrain(pl.d / "x1", {"--set", "pretrain.bogus=1"}).code == 2);
  CHECK(pl.pretrain(pl.d / "x2", {"--set", "pretrain.epochs=many"}).code == 2);
  CHECK(pl.pretrain(pl.d / "x3", {"--set", "pretrain.encoder=3"}).code == 2);
  CHECK(pl.pretrain(pl.d / "x4", {"--set", "pretrain.epochs"}).code == 2);
  write_file(pl.d / "bad.toml", "[pretrain]\nnope = 1\n");
  CHECK(call({"pretrain", "--manifest", p(pl.manifest()), "--vocab", p(pl.vocab()), "--graphs", p(pl.graphs()),
              "--out", p(pl.d / "x5"), "--config", p(pl.d / "bad.toml")})
            .code == 2);
}

TEST_CASE("set_config_value keeps leaf types") {
  json c = cli::default_config();
  cli::set_config_value(c, "task.k", "7");
  CHECK(c["task"]["k"] == 7);
  cli::set_config_value(c, "task.baseline", "dev=cpu");
  CHECK(c["task"]["baseline"] == "dev=cpu");
  cli::set_config_value(c, "pretrain.learning_rate", "0.5");
  CHECK(c["pretrain"]["learning_rate"] == 0.5);
  cli::set_config_value(c, "pretrain.resample_masks", "false");
  CHECK(c["pretrain"]["resample_masks"] == false);
  cli::set_config_value(c, "embed.modality", "\"graph\"");
  CHECK(c["embed"]["modality"] == "graph");
  CHECK_THROWS_AS(cli::set_config_value(c, "pretrain.epochs", "-1"), ValidationError);
  CHECK_THROWS_AS(cli::set_config_value(c, "pretrain.epochs", "1.5"), ValidationError);
  CHECK_THROWS_AS(cli::set_config_value(c, "pretrain.resample_masks", "1"), ValidationError);
  CHECK_THROWS_AS(cli::set_config_value(c, "task", "x"), ValidationError);
}

TEST_CASE("pretrain: zero epochs, and resume equals one run") {
  Pipeline pl;
  REQUIRE(pl.pretrain(pl.d / "zero", {"--set", "pretrain.epochs=0"}).code == 0);
  CHECK(fs::exists(pl.d / "zero" / "params.bin"));
  CHECK(read_file(pl.d / "zero" / "trainlog.jsonl").empty());

  REQUIRE(pl.pretrain(pl.d / "full").code == 0);
  REQUIRE(pl.pretrain(pl.d / "part", {"--set", "pretrain.epochs=1"}).code == 0);
  REQUIRE(pl.pretrain(pl.d / "part", {"--resume"}).code == 0);
  CHECK(read_file(pl.d / "part" / "params.bin") == read_file(pl.d / "full" / "params.bin"));
  CHECK(read_file(pl.d / "part" / "trainlog.jsonl") == read_file(pl.d / "full" / "trainlog.jsonl"));
}

TEST_CASE("embed, task and overhead on a checkpoint") {
  Pipeline pl;
  REQUIRE(pl.pretrain(pl.d / "ck").code == 0);
  const auto embed = [&](const fs::path& out, const std::string& modality) {
    return call({"embed", "--checkpoint", p(pl.d / "ck"), "--manifest", p(pl.manifest()), "--graphs", p(pl.graphs()),
                 "--out", p(out), "--modality", modality});
  };
  REQUIRE(embed(pl.d / "e1", "both").code == 0);
  REQUIRE(embed(pl.d / "e2", "both").code == 0);
  CHECK(read_file(pl.d / "e1" / "embeddings.csv") == read_file(pl.d / "e2" / "embeddings.csv"));
  CHECK(embed(pl.d / "e3", "sideways").code == 2);

  REQUIRE(call({"synth", "--out", p(pl.d / "bundle"), "--set", "synth.programs=12", "--set",
                "synth.samples_per_program=2", "--set", "synth.max_work=1"})
              .code == 0);
  const auto task = [&](const fs::path& out, std::vector<std::string> extra) {
    std::vector<std::string> a{"task",  "--bundle", p(pl.d / "bundle"), "--checkpoint", p(pl.d / "ck"),
                               "--out", p(out),     "--config",         p(pl.d / "tiny.toml")};
    a.insert(a.end(), extra.begin(), extra.end());
    return call(a);
  };
  const Result both = task(pl.d / "t1", {"--set", "task.k=3"});
  REQUIRE(both.code == 0);
  const json metrics = json::parse(read_file(pl.d / "t1" / "metrics.json"));
  CHECK(metrics.contains("accuracy"));
  REQUIRE(task(pl.d / "t2", {"--set", "task.k=3", "--modality", "graph"}).code == 0);
  CHECK(json::parse(read_file(pl.d / "t2" / "embeddings.csv.meta.json"))["modality"] == "graph");
  REQUIRE(task(pl.d / "t3", {"--set", "task.k=3"}).code == 0);
  CHECK(read_file(pl.d / "t3" / "metrics.json") == read_file(pl.d / "t1" / "metrics.json"));

  // Omp bundle without its runtime table.
  REQUIRE(call({"synth", "--out", p(pl.d / "omp"), "--set", "synth.task=omp", "--set", "synth.programs=6", "--set",
                "synth.max_work=1"})
              .code == 0);
  fs::remove(pl.d / "omp" / "runtimes.csv");
  const Result omp = call({"task", "--task", "omp", "--bundle", p(pl.d / "omp"), "--checkpoint", p(pl.d / "ck"),
                           "--out", p(pl.d / "t4")});
  CHECK(omp.code == 1);
  CHECK(omp.err.find("runtime table") != std::string::npos);

  const Result oh = call({"overhead", "--bundle", p(pl.d / "bundle"), "--checkpoint", p(pl.d / "ck"), "--out",
                          p(pl.d / "oh"), "--config", p(pl.d / "tiny.toml")});
  REQUIRE(oh.code == 0);
  const json o = json::parse(read_file(pl.d / "oh" / "overhead.json"));
  CHECK(o["frozen_seconds"].get<double>() > 0.0);
  CHECK(o["finetune_seconds"].get<double>() > 0.0);
  CHECK(o["ratio"].get<double>() == doctest::Approx(o["finetune_seconds"].get<double>() / o["frozen_seconds"].get<double>()));

  const Result rep = call({"report", p(pl.d / "t1"), p(pl.d / "oh"), "--out", p(pl.d / "rep")});
  REQUIRE(rep.code == 0);
  const std::string csv = read_file(pl.d / "rep" / "summary.csv");
  CHECK(csv.find("t1,devmap,") != std::string::npos);
  CHECK(csv.find("oh,devmap,") != std::string::npos);
  CHECK(call({"report", p(pl.d / "nowhere"), "--out", p(pl.d / "rep2")}).code == 2);
}

TEST_CASE("a frozen run against itself has ratio one") {
  OverheadReport r;
  r.frozen_seconds = r.finetune_seconds = 2.5;
  CHECK(r.ratio() == 1.0);
}

TEST_CASE("manifest indexes a directory with seeded splits") {
  TempDir d;
  fs::create_directories(d / "ir");
  for (int i = 0; i < 4; ++i) write_file(d / "ir" / ("f" + std::to_string(i) + ".ll"), testing::kAddFunction);
  const auto splits_of = [&](const fs::path& out) {
    std::map<Split, std::size_t> n;
    for (const auto& e : read_manifest(out / "manifest.jsonl").entries) ++n[e.split];
    return n;
  };
  REQUIRE(call({"manifest", "--root", p(d / "ir"), "--out", p(d / "m1"), "--set", "corpus.splits=[0.5, 0.5]"}).code == 0);
  auto n = splits_of(d / "m1");
  CHECK(n[Split::Pretrain] == 2);
  CHECK(n[Split::Train] == 2);
  write_file(d / "c.toml", "[corpus]\nsplits = [0.25, 0.75]\nseed = 4\n");
  REQUIRE(call({"manifest", "--root", p(d / "ir"), "--out", p(d / "m2"), "--config", p(d / "c.toml")}).code == 0);
  n = splits_of(d / "m2");
  CHECK(n[Split::Pretrain] == 1);
  CHECK(n[Split::Train] == 3);
  CHECK(json::parse(read_file(d / "m2" / "effective_config.json"))["corpus"]["seed"] == 4);
  CHECK(call({"manifest", "--root", p(d / "ir"), "--out", p(d / "m3"), "--set", "corpus.splits=a,b"}).code == 2);
  CHECK(call({"manifest", "--root", p(d / "nowhere"), "--out", p(d / "m4")}).code == 2);
  // Every file defaults to the pretrain split.
  REQUIRE(call({"manifest", "--root", p(d / "ir"), "--out", p(d / "m5")}).code == 0);
  CHECK(splits_of(d / "m5")[Split::Pretrain] == 4);
}
