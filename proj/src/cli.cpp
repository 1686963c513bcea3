// SPDX-License-Identifier: Apache-2.0
#include "irembed/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "irembed/corpus.hpp"
#include "irembed/embed.hpp"
#include "irembed/errors.hpp"
#include "irembed/graph.hpp"
#include "irembed/io.hpp"
#include "irembed/ir_parser.hpp"
#include "irembed/overhead.hpp"
#include "irembed/pretrain.hpp"
#include "irembed/synth.hpp"
#include "irembed/tasks.hpp"
#include "irembed/tokenizer.hpp"

namespace irembed::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Bad invocation or an input that does not exist; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

json head_json(const HeadConfig& h) {
  return {{"hidden1", h.hidden1},
          {"hidden2", h.hidden2},
          {"max_epochs", h.max_epochs},
          {"patience", h.patience},
          {"learning_rate", h.learning_rate}};
}

HeadConfig head_from(const json& j) {
  HeadConfig h;
  h.hidden1 = j.at("hidden1").get<std::size_t>();
  h.hidden2 = j.at("hidden2").get<std::size_t>();
  h.max_epochs = j.at("max_epochs").get<std::size_t>();
  h.patience = j.at("patience").get<std::size_t>();
  h.learning_rate = j.at("learning_rate").get<double>();
  return h;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

const fs::path& require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw UsageError(std::string("missing --") + what);
  if (!fs::exists(p)) throw UsageError(std::string(what) + " path does not exist: " + p.string());
  return p;
}

void echo_config(const json& config, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "effective_config.json", config.dump(2) + "\n");
}

std::vector<IRDocument> pretrain_documents(const Manifest& m) {
  std::vector<IRDocument> docs;
  for (const auto* e : m.with_split(Split::Pretrain)) docs.push_back(ingest_ir_file(e->path, e->id));
  return docs;
}

struct Args {
  fs::path root, manifest, vocab, checkpoint, out, graphs, bundle, embeddings, config_file;
  std::vector<std::string> sets;
  std::vector<fs::path> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> modality, task;
  bool resume = false;
};

// Layers the configuration: defaults, file, --set, then explicit flags.
json layered_config(const Args& a, const std::string& section) {
  json cfg = default_config();
  if (!a.config_file.empty()) apply_config_file(cfg, require_path(a.config_file, "config"));
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    set_config_value(cfg, trim(std::string_view(s).substr(0, eq)), trim(std::string_view(s).substr(eq + 1)));
  }
  if (a.seed) cfg[section]["seed"] = *a.seed;
  if (a.modality) {
    modality_from_string(*a.modality);
    cfg["embed"]["modality"] = *a.modality;
  }
  if (a.task) cfg["task"]["name"] = *a.task;
  return cfg;
}

// A bad key or value is the caller's mistake, not a module failure.
json effective_config(const Args& a, const std::string& section) {
  try {
    return layered_config(a, section);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

// --- commands -------------------------------------------------------------

int cmd_manifest(const Args& a, std::ostream& out) {
  const json cfg = effective_config(a, "corpus");
  const fs::path& root = require_path(a.root, "root");
  if (a.out.empty()) throw UsageError("missing --out");
  const Manifest m = build_manifest(root, cfg["corpus"]["splits"].get<std::vector<double>>(),
                                    cfg["corpus"]["seed"].get<std::uint64_t>());
  echo_config(cfg, a.out);
  write_manifest(m, a.out / "manifest.jsonl");
  std::map<std::string, std::size_t> per;
  for (const auto& e : m.entries) ++per[std::string(to_string(e.split))];
  out << m.entries.size() << " files";
  for (const auto& [k, v] : per) out << ", " << k << " " << v;
  out << "\n";
  return 0;
}

int cmd_tokenizer_train(const Args& a, std::ostream& out) {
  const json cfg = effective_config(a, "tokenizer");
  const Manifest m = read_manifest(require_path(a.manifest, "manifest"));
  if (a.out.empty()) throw UsageError("missing --out");
  const auto& t = cfg["tokenizer"];
  const auto sample = t["sample_files"].get<std::size_t>();
  const auto docs = sample ? sample_corpus(m, sample, t["seed"].get<std::uint64_t>()) : pretrain_documents(m);
  const Vocab vocab = train_tokenizer(docs, t["vocab_size"].get<std::size_t>(), t["seed"].get<std::uint64_t>());
  const TokenizerStats s = tokenizer_stats(vocab, docs);
  echo_config(cfg, a.out);
  vocab.save(a.out / "vocab.txt");
  const double unk = s.tokens ? static_cast<double>(s.unknown) / static_cast<double>(s.tokens) : 0.0;
  json stats{{"documents", docs.size()},
             {"vocab_size", vocab.size()},
             {"statements", s.statements},
             {"tokens", s.tokens},
             {"unknown", s.unknown},
             {"unk_rate", unk},
             {"truncated", s.truncated},
             {"round_trip_ok", s.round_trip_ok},
             {"round_trip_checked", s.round_trip_checked}};
  write_file(a.out / "stats.json", stats.dump(2) + "\n");
  out << "vocab " << vocab.size() << " tokens from " << docs.size() << " documents, unk rate "
      << format_double(unk) << ", round trip " << s.round_trip_ok << "/" << s.round_trip_checked << "\n";
  return 0;
}

int cmd_graph_build(const Args& a, std::ostream& out, std::ostream& err) {
  const json cfg = effective_config(a, "graph");
  const Manifest m = read_manifest(require_path(a.manifest, "manifest"));
  const Vocab vocab = Vocab::load(require_path(a.vocab, "vocab"));
  if (a.out.empty()) throw UsageError("missing --out");
  echo_config(cfg, a.out);
  json failures = json::array();
  std::map<std::string, std::size_t> totals{{"nodes", 0}, {"edges", 0}};
  std::size_t built = 0;
  for (const auto& e : m.entries) {
    try {
      const ProGraph g = build_multigraph(parse_ir(read_file(e.path)), vocab);
      const fs::path file = graph_cache_path(a.out, e.id);
      fs::create_directories(file.parent_path());
      save_graph(g, file);
      ++built;
      totals["nodes"] += g.num_nodes();
      totals["edges"] += g.edges.size();
      for (const EdgeType t : kEdgeTypes) totals[std::string(to_string(t))] += g.count(t);
    } catch (const Error& ex) {
      failures.push_back({{"id", e.id}, {"error", ex.what()}});
      err << e.id << ": " << ex.what() << "\n";
    }
  }
  json summary{{"documents", m.entries.size()}, {"built", built}, {"failures", failures}};
  for (const auto& [k, v] : totals) summary[k] = v;
  write_file(a.out / "summary.json", summary.dump(2) + "\n");
  out << built << "/" << m.entries.size() << " graphs, " << totals["nodes"] << " nodes, " << totals["edges"]
      << " edges\n";
  return failures.empty() ? 0 : 1;
}

int cmd_pretrain(const Args& a, std::ostream& out) {
  json cfg = effective_config(a, "pretrain");
  PretrainInputs in{read_manifest(require_path(a.manifest, "manifest")), Vocab::load(require_path(a.vocab, "vocab")),
                    require_path(a.graphs, "graphs")};
  if (a.out.empty()) throw UsageError("missing --out");
  // The encoder's vocabulary is whatever the tokenizer produced.
  cfg["pretrain"]["encoder"]["vocab_size"] = in.vocab.size();
  const auto pc = cfg["pretrain"].get<PretrainConfig>();
  const PretrainState s = pretrain(pc, in, a.out, a.resume);
  echo_config(cfg, a.out);
  for (const auto& r : s.log)
    out << "epoch " << r.epoch << " total " << format_double(r.total) << " mlm " << format_double(r.mlm) << " gae "
        << format_double(r.gae) << " match " << format_double(r.match) << "\n";
  out << "checkpoint " << a.out.string() << " after " << s.epochs_done << " epochs\n";
  return 0;
}

struct LoadedCheckpoint {
  Vocab vocab;
  PretrainState state;
  std::string hash;
};

LoadedCheckpoint load_ck(const Args& a) {
  const fs::path& ck = require_path(a.checkpoint, "checkpoint");
  Vocab v = a.vocab.empty() ? checkpoint_vocab(ck) : Vocab::load(require_path(a.vocab, "vocab"));
  PretrainState st = load_checkpoint(ck, v);
  const std::string hash = file_sha256(ck / "params.bin");
  return {std::move(v), std::move(st), hash};
}

int cmd_embed(const Args& a, std::ostream& out, std::ostream& err) {
  const json cfg = effective_config(a, "embed");
  const LoadedCheckpoint ck = load_ck(a);
  const Manifest m = read_manifest(require_path(a.manifest, "manifest"));
  const Modality mod = modality_from_string(cfg["embed"]["modality"].get<std::string>());
  fs::path graphs = a.graphs;
  if (mod != Modality::Text) require_path(graphs, "graphs");
  if (a.out.empty()) throw UsageError("missing --out");
  const EmbedResult r = embed_corpus(ck.state.encoder, ck.vocab, m, graphs, mod);
  echo_config(cfg, a.out);
  write_embedding_table(r.table, a.out / "embeddings.csv", ck.hash, mod);
  for (const auto& f : r.failures) err << f.id << ": " << f.message << "\n";
  out << r.table.ids.size() << " embeddings of width " << r.table.rows.cols() << ", " << r.failures.size()
      << " failures\n";
  return r.failures.empty() ? 0 : 1;
}

// Documents of a bundle manifest with graphs from the cache or built here.
std::vector<PretrainDocument> bundle_documents(const Manifest& m, const Vocab& vocab, const fs::path& graphs) {
  std::vector<PretrainDocument> docs;
  for (const auto& e : m.entries) {
    const IRDocument d = ingest_ir_file(e.path, e.id);
    ProGraph g = graphs.empty() ? build_multigraph(parse_ir(d.raw_text), vocab)
                                : load_graph(graph_cache_path(graphs, e.id));
    docs.push_back(make_pretrain_document(d, std::move(g), vocab));
  }
  return docs;
}

RunOptions run_options(const json& t) {
  RunOptions o;
  o.head = head_from(t["head"]);
  o.seed = t["seed"].get<std::uint64_t>();
  if (!t["k"].is_null()) o.k = t["k"].get<std::size_t>();
  if (!t["train_fraction"].is_null()) o.train_fraction = t["train_fraction"].get<double>();
  if (!t["baseline"].is_null()) o.baseline = t["baseline"].get<std::string>();
  return o;
}

int cmd_task(const Args& a, std::ostream& out) {
  const json cfg = effective_config(a, "task");
  const TaskSpec spec = task_spec(cfg["task"]["name"].get<std::string>());
  const fs::path& bundle_dir = require_path(a.bundle, "bundle");
  if (a.out.empty()) throw UsageError("missing --out");
  const TaskBundle bundle = load_task_bundle(spec, require_path(bundle_dir / "labels.csv", "labels"),
                                             bundle_dir / "runtimes.csv");
  EmbeddingTable emb;
  if (!a.embeddings.empty()) {
    if (!a.checkpoint.empty()) throw UsageError("give either --embeddings or --checkpoint, not both");
    emb = read_embedding_table(require_path(a.embeddings, "embeddings"));
  } else {
    const LoadedCheckpoint ck = load_ck(a);
    const Manifest m = read_manifest(require_path(bundle_dir / "manifest.jsonl", "manifest"));
    const Modality mod = modality_from_string(cfg["embed"]["modality"].get<std::string>());
    const auto docs = bundle_documents(m, ck.vocab, a.graphs.empty() ? fs::path{} : require_path(a.graphs, "graphs"));
    std::vector<nn::RowVector> rows;
    for (const auto& d : docs) {
      emb.ids.push_back(d.id);
      rows.push_back(embed_ir(ck.state.encoder, d.statements, &d.graph, mod).concat());
    }
    emb.rows.resize(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) emb.rows.row(static_cast<Eigen::Index>(r)) = rows[r];
    fs::create_directories(a.out);
    write_embedding_table(emb, a.out / "embeddings.csv", ck.hash, mod);
  }
  const Metrics m = run_task(spec, bundle, emb, run_options(cfg["task"]));
  echo_config(cfg, a.out);
  write_task_report(spec, m, a.out);
  out << spec.name << ": accuracy " << format_double(m.accuracy) << " f1 " << format_double(m.f1);
  if (m.geometric_mean_speedup)
    out << " speedup " << format_double(*m.geometric_mean_speedup) << " (oracle " << format_double(*m.oracle_speedup)
        << ")";
  if (m.mean_error_rate) out << " error rate " << format_double(*m.mean_error_rate);
  out << "\n";
  for (const auto& w : m.warnings) out << "warning: " << w << "\n";
  return 0;
}

int cmd_overhead(const Args& a, std::ostream& out) {
  const json cfg = effective_config(a, "overhead");
  const TaskSpec spec = task_spec(cfg["task"]["name"].get<std::string>());
  const fs::path& bundle_dir = require_path(a.bundle, "bundle");
  if (a.out.empty()) throw UsageError("missing --out");
  const TaskBundle bundle = load_task_bundle(spec, require_path(bundle_dir / "labels.csv", "labels"),
                                             bundle_dir / "runtimes.csv");
  const LoadedCheckpoint ck = load_ck(a);
  const Manifest m = read_manifest(require_path(bundle_dir / "manifest.jsonl", "manifest"));
  const auto docs = bundle_documents(m, ck.vocab, a.graphs.empty() ? fs::path{} : require_path(a.graphs, "graphs"));
  const auto& o = cfg["overhead"];
  OverheadOptions opt;
  opt.head = head_from(cfg["task"]["head"]);
  opt.modality = modality_from_string(cfg["embed"]["modality"].get<std::string>());
  opt.finetune_epochs = o["finetune_epochs"].get<std::size_t>();
  opt.finetune_batch = o["finetune_batch"].get<std::size_t>();
  opt.finetune_learning_rate = o["finetune_learning_rate"].get<double>();
  opt.seed = o["seed"].get<std::uint64_t>();
  const OverheadReport r = measure_overhead(ck.state.encoder, spec, bundle, docs, opt);
  echo_config(cfg, a.out);
  json j{{"task", spec.name},
         {"samples", r.samples},
         {"documents", r.documents},
         {"frozen_seconds", r.frozen_seconds},
         {"finetune_seconds", r.finetune_seconds},
         {"ratio", r.ratio()},
         {"head_max_epochs", r.head_epochs},
         {"finetune_epochs", r.finetune_epochs},
         {"finetune_final_loss", r.finetune_final_loss}};
  write_file(a.out / "overhead.json", j.dump(2) + "\n");
  out << "frozen " << format_double(r.frozen_seconds) << " s, fine-tune " << format_double(r.finetune_seconds)
      << " s, ratio " << format_double(r.ratio()) << "\n";
  return 0;
}

int cmd_report(const Args& a, std::ostream& out) {
  if (a.runs.empty()) throw UsageError("report needs at least one run directory");
  if (a.out.empty()) throw UsageError("missing --out");
  const json cfg = effective_config(a, "report");
  static const char* kCols[] = {"accuracy", "f1", "f1_macro", "geometric_mean_speedup", "oracle_speedup",
                                "mean_error_rate"};
  std::string csv = "run,task";
  for (const char* c : kCols) csv += std::string(",") + c;
  csv += ",overhead_ratio\n";
  std::string md = "| run | task |";
  for (const char* c : kCols) md += std::string(" ") + c + " |";
  md += " overhead_ratio |\n|---|---|";
  for (std::size_t i = 0; i <= std::size(kCols); ++i) md += "---|";
  md += "\n";
  for (const auto& run : a.runs) {
    require_path(run, "run");
    json metrics = json::object(), overhead = json::object();
    if (fs::exists(run / "metrics.json")) metrics = json::parse(read_file(run / "metrics.json"));
    if (fs::exists(run / "overhead.json")) overhead = json::parse(read_file(run / "overhead.json"));
    if (metrics.empty() && overhead.empty()) throw UsageError(run.string() + " holds neither metrics.json nor overhead.json");
    const std::string task = metrics.value("task", overhead.value("task", std::string()));
    std::string row = run.filename().string() + "," + task, mrow = "| " + run.filename().string() + " | " + task + " |";
    auto cell = [](const json& j, const char* key) {
      return j.contains(key) ? format_double(j.at(key).get<double>()) : std::string();
    };
    for (const char* c : kCols) {
      row += "," + cell(metrics, c);
      mrow += " " + cell(metrics, c) + " |";
    }
    row += "," + cell(overhead, "ratio") + "\n";
    mrow += " " + cell(overhead, "ratio") + " |\n";
    csv += row;
    md += mrow;
  }
  echo_config(cfg, a.out);
  write_file(a.out / "summary.csv", csv);
  write_file(a.out / "summary.md", md);
  out << md;
  return 0;
}

int cmd_synth(const Args& a, std::ostream& out) {
  if (a.out.empty()) throw UsageError("missing --out");
  const json cfg = effective_config(a, "synth");
  const auto& s = cfg["synth"];
  const std::string kind = s["kind"].get<std::string>();
  if (kind == "toy") {
    write_toy_corpus(s["count"].get<std::size_t>(), s["seed"].get<std::uint64_t>(), a.out, s["max_work"].get<int>());
  } else if (kind == "bundle") {
    BundleOptions o;
    o.task = s["task"].get<std::string>();
    o.programs = s["programs"].get<std::size_t>();
    o.samples_per_program = s["samples_per_program"].get<std::size_t>();
    o.seed = s["seed"].get<std::uint64_t>();
    o.label_noise = s["label_noise"].get<double>();
    write_bundle(o, a.out);
  } else {
    throw ValidationError("synth.kind must be 'toy' or 'bundle', got '" + kind + "'");
  }
  echo_config(cfg, a.out);
  out << "wrote " << kind << " to " << a.out.string() << "\n";
  return 0;
}

}  // namespace

json default_config() {
  PretrainConfig pc;
  json cfg;
  cfg["corpus"] = {{"splits", {1.0}}, {"seed", 0}};
  cfg["tokenizer"] = {{"vocab_size", 8192}, {"sample_files", 0}, {"seed", 0}};
  cfg["graph"] = {{"seed", 0}};
  cfg["pretrain"] = pc;
  cfg["embed"] = {{"modality", "both"}, {"seed", 0}};
  cfg["task"] = {{"name", "devmap"},           {"k", nullptr},  {"train_fraction", nullptr},
                 {"baseline", nullptr},        {"seed", 0},     {"head", head_json(HeadConfig{})}};
  cfg["overhead"] = {{"finetune_epochs", 2}, {"finetune_batch", 8}, {"finetune_learning_rate", 1e-4}, {"seed", 0}};
  cfg["report"] = {{"seed", 0}};
  cfg["synth"] = {{"kind", "bundle"}, {"task", "devmap"}, {"programs", 64},  {"samples_per_program", 4},
                  {"label_noise", 0.25}, {"count", 20},   {"max_work", 8},   {"seed", 0}};
  return cfg;
}

void set_config_value(json& config, std::string_view dotted_key, std::string_view text) {
  json* node = &config;
  std::string path;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_key.find('.', start);
    const std::string key(dotted_key.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    path += (path.empty() ? "" : ".") + key;
    if (!node->is_object() || !node->contains(key)) throw ValidationError("unknown config key '" + std::string(dotted_key) + "'");
    node = &(*node)[key];
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ValidationError("config key '" + path + "' is a section, not a value");
  std::string value = trim(text);
  if (node->is_array()) {
    // Number lists, as [a, b] or a,b.
    const std::string list = !value.empty() && value.front() == '[' ? value : "[" + value + "]";
    const json parsed = json::parse(list, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array() ||
        !std::all_of(parsed.begin(), parsed.end(), [](const json& x) { return x.is_number(); }))
      throw ValidationError("config key '" + path + "' takes a list of numbers, got '" + value + "'");
    *node = parsed;
    return;
  }
  if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
    value = value.substr(1, value.size() - 2);
  else if (!node->is_string()) {
    const json parsed = json::parse(value, nullptr, false);
    const bool ok = !parsed.is_discarded() &&
                    (node->is_null() ? !parsed.is_structured()
                     : node->is_boolean() ? parsed.is_boolean()
                     : node->is_number_unsigned() ? parsed.is_number_unsigned()
                     : node->is_number_integer() ? parsed.is_number_integer()
                     : node->is_number() ? parsed.is_number()
                     : false);
    if (ok) {
      *node = parsed;
      return;
    }
    // Nullable options that hold text, such as task.baseline.
    if (!node->is_null() || !parsed.is_discarded())
      throw ValidationError("config key '" + path + "' cannot take the value '" + value + "'");
  }
  *node = value;
}

void apply_config_file(json& config, const fs::path& file) {
  std::istringstream in(read_file(file));
  CLI::ConfigTOML parser;
  std::vector<CLI::ConfigItem> items;
  try {
    items = parser.from_config(in);
  } catch (const CLI::Error& e) {
    throw ValidationError(file.string() + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    std::string key;
    for (const auto& p : item.parents) key += p + ".";
    key += item.name;
    if (item.inputs.empty()) throw ValidationError(file.string() + ": '" + key + "' has no value");
    std::string text = item.inputs.front();
    for (std::size_t i = 1; i < item.inputs.size(); ++i) text += "," + item.inputs[i];
    set_config_value(config, key, text);
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"IR embedding pipeline: tokenizer, graphs, pretraining, embeddings, tuning tasks"};
  app.name("irembed");
  app.require_subcommand(1);
  Args a;
  auto common = [&](CLI::App* sc) {
    sc->add_option("--config", a.config_file, "key = value config file");
    sc->add_option("--set", a.sets, "override one config key, e.g. pretrain.epochs=5")->take_all();
    sc->add_option("--seed", a.seed, "seed for this command");
    sc->add_option("--out", a.out, "output directory");
  };
  auto* mf = app.add_subcommand("manifest", "index a directory of .ll files with seeded splits");
  common(mf);
  mf->add_option("--root", a.root, "directory searched recursively for .ll files")->required();

  auto* tok = app.add_subcommand("tokenizer-train", "train the WordPiece vocabulary on the pretrain split");
  common(tok);
  tok->add_option("--manifest", a.manifest)->required();

  auto* gb = app.add_subcommand("graph-build", "build and cache one graph per manifest entry");
  common(gb);
  gb->add_option("--manifest", a.manifest)->required();
  gb->add_option("--vocab", a.vocab)->required();

  auto* pt = app.add_subcommand("pretrain", "joint pretraining, checkpointed every epoch");
  common(pt);
  pt->add_option("--manifest", a.manifest)->required();
  pt->add_option("--vocab", a.vocab)->required();
  pt->add_option("--graphs", a.graphs, "graph cache from graph-build")->required();
  pt->add_flag("--resume", a.resume, "continue the checkpoint in --out");

  auto* em = app.add_subcommand("embed", "embedding table from a frozen checkpoint");
  common(em);
  em->add_option("--checkpoint", a.checkpoint)->required();
  em->add_option("--manifest", a.manifest)->required();
  em->add_option("--graphs", a.graphs);
  em->add_option("--vocab", a.vocab, "defaults to the checkpoint's copy");
  em->add_option("--modality", a.modality, "text, graph or both");

  auto* tk = app.add_subcommand("task", "cross-validated head over frozen embeddings");
  common(tk);
  tk->add_option("--task", a.task, "devmap, coarsen, vectorize, omp, numa or cudablock");
  tk->add_option("--bundle", a.bundle, "directory with labels.csv, runtimes.csv, manifest.jsonl")->required();
  tk->add_option("--embeddings", a.embeddings, "precomputed embeddings.csv");
  tk->add_option("--checkpoint", a.checkpoint, "embed the bundle with this checkpoint");
  tk->add_option("--graphs", a.graphs);
  tk->add_option("--vocab", a.vocab);
  tk->add_option("--modality", a.modality, "text, graph or both");

  auto* oh = app.add_subcommand("overhead", "wall time of frozen head training against fine-tuning");
  common(oh);
  oh->add_option("--task", a.task);
  oh->add_option("--bundle", a.bundle)->required();
  oh->add_option("--checkpoint", a.checkpoint)->required();
  oh->add_option("--graphs", a.graphs);
  oh->add_option("--vocab", a.vocab);
  oh->add_option("--modality", a.modality);

  auto* rp = app.add_subcommand("report", "summary table over task and overhead runs");
  common(rp);
  rp->add_option("runs", a.runs, "run directories")->required();

  auto* sy = app.add_subcommand("synth", "generate a toy corpus or a planted task bundle");
  common(sy);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "irembed: " << e.what() << "\n";
    return 2;
  }
  try {
    if (mf->parsed()) return cmd_manifest(a, out);
    if (tok->parsed()) return cmd_tokenizer_train(a, out);
    if (gb->parsed()) return cmd_graph_build(a, out, err);
    if (pt->parsed()) return cmd_pretrain(a, out);
    if (em->parsed()) return cmd_embed(a, out, err);
    if (tk->parsed()) return cmd_task(a, out);
    if (oh->parsed()) return cmd_overhead(a, out);
    if (rp->parsed()) return cmd_report(a, out);
    if (sy->parsed()) return cmd_synth(a, out);
  } catch (const UsageError& e) {
    err << "irembed: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "irembed: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace irembed::cli
