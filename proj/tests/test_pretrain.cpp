#include <doctest.h>

#include <map>
#include <set>

#include "fixtures.hpp"
#include "irembed/errors.hpp"
#include "irembed/io.hpp"
#include "irembed/numeric.hpp"
#include "irembed/pretrain.hpp"
#include "support.hpp"

using namespace irembed;
using irembed::testing::TempDir;

namespace {

struct Fixture {
  TempDir tmp;
  irembed::testing::ToySetup setup;
  Fixture(std::size_t count = 6) : setup(irembed::testing::make_toy_setup(tmp.path(), count, 3, 1, 200)) {}

  PretrainConfig config(std::size_t epochs = 2) const {
    PretrainConfig c;
    c.encoder = irembed::testing::tiny_encoder(setup.vocab.size());
    c.epochs = epochs;
    c.batch_size = 3;
    c.seed = 5;
    return c;
  }
  PretrainInputs inputs() const { return {setup.manifest, setup.vocab, setup.graph_dir}; }
  std::vector<BatchItem> batch(std::size_t n) const {
    std::vector<BatchItem> b;
    for (std::size_t i = 0; i < n; ++i) b.push_back({&setup.docs[i], i});
    return b;
  }
};

}  // namespace

TEST_CASE("config validation and json") {
  PretrainConfig c;
  c.encoder.vocab_size = 100;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.batch_size = 2;
  c.weights = {0, 0, 0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.weights = {-1, 1, 1};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.weights = {0.5, 2, 0};
  c.resample_masks = false;
  const nlohmann::json j = c;
  CHECK(j.get<PretrainConfig>() == c);
  for (const char* key : {"encoder", "epochs", "batch_size", "learning_rate", "loss_weights", "seed"})
    CHECK(j.contains(key));
}

TEST_CASE("learning-rate schedule") {
  PretrainConfig c;
  c.encoder.vocab_size = 100;
  c.epochs = 4;
  for (std::size_t e = 0; e < 4; ++e) CHECK(epoch_learning_rate(c, e) == c.learning_rate);
  c.lr_schedule = "linear";
  CHECK(epoch_learning_rate(c, 0) == c.learning_rate);
  CHECK(epoch_learning_rate(c, 1) == doctest::Approx(7.5e-4));
  CHECK(epoch_learning_rate(c, 3) == doctest::Approx(2.5e-4));
  const nlohmann::json j = c;
  CHECK(j.at("lr_schedule") == "linear");
  CHECK(j.get<PretrainConfig>() == c);
  c.lr_schedule = "cosine";
  CHECK_THROWS_AS(c.validate(), ValidationError);

  // The rate comes from the config each epoch, so a reload mid-run continues the decay.
  Fixture f;
  PretrainConfig lc = f.config(4);
  lc.lr_schedule = "linear";
  PretrainState full(lc);
  train_epochs(full, f.setup.docs, {});
  CHECK(full.optimizer.learning_rate() == doctest::Approx(lc.learning_rate / 4));
  PretrainState part(lc);
  train_epochs(part, f.setup.docs, [](const PretrainState& s) { return s.epochs_done < 2; });
  REQUIRE(part.epochs_done == 2);
  save_checkpoint(part, f.setup.vocab, f.tmp / "ck");
  PretrainState back = load_checkpoint(f.tmp / "ck", f.setup.vocab);
  train_epochs(back, f.setup.docs, {});
  CHECK(back.encoder.params().serialize() == full.encoder.params().serialize());
}

TEST_CASE("match pairs") {
  Fixture f(4);
  const std::span<const PretrainDocument> two(f.setup.docs.data(), 2);
  const auto forced = make_match_pairs(two, 1, [](std::size_t) { return true; });
  REQUIRE(forced.size() == 2);
  CHECK(forced[0].graph_id == two[1].id);
  CHECK(forced[1].graph_id == two[0].id);
  CHECK_FALSE(forced[0].match);
  CHECK_FALSE(forced[1].match);
  CHECK_THROWS_AS(make_match_pairs(two.first(1), 1), ValidationError);

  std::size_t mismatch = 0, total = 0;
  std::map<std::string, std::size_t> partners;
  const std::span<const PretrainDocument> all(f.setup.docs);
  for (std::uint64_t seed = 0; seed < 2500; ++seed) {
    for (const auto& p : make_match_pairs(all, seed)) {
      ++total;
      CHECK(p.match == (p.sequence_id == p.graph_id));
      if (!p.match) {
        ++mismatch;
        if (p.sequence_id == all[0].id) ++partners[p.graph_id];
      }
      CHECK(p.sequence_summary.size() == 0);
    }
  }
  CHECK(total == 10000);
  CHECK(static_cast<double>(mismatch) / static_cast<double>(total) == doctest::Approx(0.5).epsilon(0.04));
  // Mismatch partners for one document are spread over the other three.
  CHECK(partners.size() == 3);
  for (const auto& [id, n] : partners) CHECK(n == doctest::Approx(1250.0 / 3).epsilon(0.2));
}

TEST_CASE("weights (1,0,0) make the total the MLM loss") {
  Fixture f;
  PretrainConfig c = f.config();
  c.weights = {1, 0, 0};
  PretrainState s(c);
  const auto b = f.batch(3);
  const LossRecord r = pretrain_step(s, b, 0, 7);
  CHECK(r.total == r.mlm);
  CHECK(r.gae > 0);
  CHECK(r.match > 0);
}

TEST_CASE("total is the weighted sum") {
  Fixture f;
  PretrainConfig c = f.config();
  c.weights = {0.3, 1.7, 0.9};
  PretrainState s(c);
  const auto b = f.batch(4);
  for (int step = 0; step < 3; ++step) {
    const LossRecord r = pretrain_step(s, b, 0, 100 + step);
    CHECK(r.total == doctest::Approx(0.3 * r.mlm + 1.7 * r.gae + 0.9 * r.match).epsilon(1e-9));
  }
}

TEST_CASE("steps are deterministic") {
  Fixture f;
  PretrainState a(f.config()), b(f.config());
  const auto batch = f.batch(3);
  for (int step = 0; step < 2; ++step) CHECK(pretrain_step(a, batch, 0, 9 + step) == pretrain_step(b, batch, 0, 9 + step));
  CHECK(a.encoder.params().serialize() == b.encoder.params().serialize());
  CHECK(a.optimizer.steps() == 2);
}

TEST_CASE("single-document batch is rejected") {
  Fixture f;
  PretrainState s(f.config());
  const auto one = f.batch(1);
  CHECK_THROWS_AS(pretrain_step(s, one, 0, 1), ValidationError);
}

TEST_CASE("non-finite loss aborts before the update") {
  Fixture f;
  PretrainState s(f.config());
  s.encoder.params().at("mlm.output.bias").value(0, 7) = std::numeric_limits<double>::infinity();
  const std::string before = s.encoder.params().serialize();
  const auto batch = f.batch(3);
  CHECK_THROWS_AS(pretrain_step(s, batch, 0, 1), Error);
  CHECK(s.encoder.params().serialize() == before);
}

TEST_CASE("epoch batches") {
  const auto a = epoch_batches(10, 3, 4, 0);
  CHECK(a == epoch_batches(10, 3, 4, 0));
  CHECK(a != epoch_batches(10, 3, 4, 1));
  // 10 = 3 + 3 + 4: the singleton is merged.
  REQUIRE(a.size() == 3);
  CHECK(a.back().size() == 4);
  std::set<std::size_t> seen;
  for (const auto& b : a) {
    CHECK(b.size() >= 2);
    seen.insert(b.begin(), b.end());
  }
  CHECK(seen.size() == 10);
  CHECK_THROWS_AS(epoch_batches(1, 2, 0, 0), ValidationError);
}

TEST_CASE("mask plans follow the resampling switch") {
  Fixture f;
  PretrainConfig c = f.config();
  const TokenSeq& seq = f.setup.docs[0].statements[3];
  const auto p0 = training_mask_plan(c, seq, 0, 3, 0).positions;
  CHECK(training_mask_plan(c, seq, 0, 3, 0).positions == p0);
  bool differs = false;
  for (std::size_t e = 1; e < 30; ++e) differs |= training_mask_plan(c, seq, 0, 3, e).positions != p0;
  CHECK(differs);
  c.resample_masks = false;
  const auto fixed = training_mask_plan(c, seq, 0, 3, 0).positions;
  for (std::size_t e = 1; e < 30; ++e) CHECK(training_mask_plan(c, seq, 0, 3, e).positions == fixed);
}

TEST_CASE("epochs=0 writes the initial weights and an empty log") {
  Fixture f;
  TempDir out;
  const PretrainState s = pretrain(f.config(0), f.inputs(), out.path());
  CHECK(s.log.empty());
  for (const char* name : {"config.json", "vocab.sha256", "params.bin", "trainlog.jsonl"})
    CHECK(std::filesystem::exists(out / name));
  CHECK(read_file(out / "trainlog.jsonl").empty());
  CHECK(read_file(out / "params.bin") == PretrainState(f.config(0)).encoder.params().serialize());
}

TEST_CASE("checkpoint round trip") {
  Fixture f;
  TempDir out;
  const PretrainState s = pretrain(f.config(2), f.inputs(), out.path());
  REQUIRE(s.log.size() == 2);
  const PretrainState back = load_checkpoint(out.path(), f.setup.vocab);
  CHECK(back.log == s.log);
  CHECK(back.epochs_done == 2);
  CHECK(back.config == s.config);
  CHECK(back.encoder.params().serialize() == s.encoder.params().serialize());
  for (const auto& st : f.setup.docs[1].statements)
    CHECK(mlm_forward(back.encoder, st) == mlm_forward(s.encoder, st));

  // Log lines carry exactly the documented keys.
  const auto first = nlohmann::json::parse(read_file(out / "trainlog.jsonl").substr(0, read_file(out / "trainlog.jsonl").find('\n')));
  CHECK(first.size() == 5);
  CHECK(first.at("epoch").get<int>() == 1);
  CHECK(loss_record_from_json(first) == s.log[0]);
  CHECK(read_file(out / "vocab.sha256") == vocab_hash(f.setup.vocab) + "\n");
}

TEST_CASE("loading with another vocabulary fails") {
  Fixture f;
  TempDir out;
  pretrain(f.config(0), f.inputs(), out.path());
  const std::vector<IRDocument> other{make_document("o", "ret void\n")};
  CHECK_THROWS_AS(load_checkpoint(out.path(), train_tokenizer(other, 40)), ValidationError);
  TempDir empty;
  CHECK_THROWS_AS(load_checkpoint(empty.path(), f.setup.vocab), IoError);
}

TEST_CASE("missing graphs fail before training") {
  Fixture f;
  TempDir out;
  std::filesystem::remove(graph_cache_path(f.setup.graph_dir, f.setup.docs[2].id));
  CHECK_THROWS_AS(pretrain(f.config(1), f.inputs(), out / "ck"), IoError);
  CHECK_FALSE(std::filesystem::exists(out / "ck" / "params.bin"));
  PretrainConfig wrong = f.config(1);
  wrong.encoder.vocab_size += 1;
  CHECK_THROWS_AS(pretrain(wrong, f.inputs(), out / "ck"), ValidationError);
}

TEST_CASE("resume equals an uninterrupted run") {
  Fixture f;
  TempDir a, b;
  const PretrainState straight = pretrain(f.config(4), f.inputs(), a.path());
  pretrain(f.config(2), f.inputs(), b.path());
  const PretrainState resumed = pretrain(f.config(4), f.inputs(), b.path(), true);
  CHECK(resumed.log == straight.log);
  CHECK(resumed.encoder.params().serialize() == straight.encoder.params().serialize());
  CHECK(read_file(a / "trainlog.jsonl") == read_file(b / "trainlog.jsonl"));

  PretrainConfig changed = f.config(5);
  changed.learning_rate = 0.5;
  CHECK_THROWS_AS(pretrain(changed, f.inputs(), b.path(), true), ValidationError);
}

TEST_CASE("loss falls on a 20-document toy corpus") {
  Fixture f(20);
  PretrainConfig c = f.config(50);
  c.batch_size = 4;
  c.encoder = irembed::testing::tiny_encoder(f.setup.vocab.size(), 16);
  PretrainState s(c);
  train_epochs(s, f.setup.docs);
  REQUIRE(s.log.size() == 50);
  CHECK(s.log.back().total < s.log.front().total);
  CHECK(s.log.back().mlm < s.log.front().mlm);
}

TEST_CASE("diagnostics are in range") {
  Fixture f;
  const PretrainState s(f.config());
  const double acc = mlm_accuracy(s, f.setup.docs, 0);
  const double auc = gae_auc(s.encoder, f.setup.docs, 3);
  const double macc = match_accuracy(s.encoder, f.setup.docs, 3);
  CHECK(acc >= 0);
  CHECK(acc <= 1);
  CHECK(auc >= 0);
  CHECK(auc <= 1);
  CHECK(macc >= 0);
  CHECK(macc <= 1);
  CHECK(gae_auc(s.encoder, f.setup.docs, 3) == auc);
}
