// SPDX-License-Identifier: Apache-2.0
#include "irembed/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "irembed/errors.hpp"
#include "irembed/io.hpp"
#include "irembed/numeric.hpp"

namespace irembed {

using nn::Matrix;
using nn::RowVector;
using nn::Tape;
using nn::Var;

// --- label spaces ---------------------------------------------------------

std::vector<std::string> coarsen_space() { return {"1", "2", "4", "8", "16", "32"}; }

std::vector<std::string> vectorize_space() {
  std::vector<std::string> out;
  for (const int vf : {1, 2, 4, 8, 16, 32, 64})
    for (const int f : {1, 2, 4, 8, 16}) out.push_back("vf" + std::to_string(vf) + "_if" + std::to_string(f));
  return out;
}

std::vector<std::string> omp_space() {
  std::vector<std::string> out;
  for (const int p : {75, 100, 120, 150})
    for (const int t : {1, 4, 8, 16, 32, 64})
      for (const char* s : {"static", "dynamic", "guided"})
        for (const int c : {1, 8, 32, 64, 128, 256, 512})
          out.push_back("p" + std::to_string(p) + "_t" + std::to_string(t) + "_" + s + "_c" + std::to_string(c));
  return out;
}

std::vector<std::string> numa_space() {
  std::vector<std::string> out;
  for (int i = 0; i < 13; ++i) out.push_back("cfg" + std::to_string(i));
  return out;
}

std::vector<std::string> cudablock_space() {
  static const std::pair<int, int> kBlocks[] = {
      {8, 8},    {16, 16},  {24, 24},  {32, 32},  {1, 64},   {1, 128},  {1, 192},
      {1, 256},  {1, 320},  {1, 384},  {1, 448},  {1, 512},  {1, 576},  {1, 640},
      {1, 704},  {1, 768},  {1, 832},  {1, 896},  {1, 960},  {1, 1024}};
  std::vector<std::string> out;
  for (const int m : {240, 496, 784, 1016, 1232, 1680, 2024})
    for (const auto& [a, b] : kBlocks)
      out.push_back("m" + std::to_string(m) + "_b" + std::to_string(a) + "x" + std::to_string(b));
  return out;
}

std::size_t TaskSpec::label_index(std::string_view label) const {
  const auto it = std::find(label_space.begin(), label_space.end(), label);
  if (it == label_space.end())
    throw ValidationError("label '" + std::string(label) + "' is not in the " + name + " label space");
  return static_cast<std::size_t>(it - label_space.begin());
}

TaskSpec task_spec(std::string_view name) {
  TaskSpec s;
  s.name = std::string(name);
  if (name == "devmap") {
    s.label_space = {"cpu", "gpu"};
    s.aux_feature_names = {"transfer_bytes", "workgroup_size"};
    s.speedup = true;
    s.default_baseline = "cpu";
  } else if (name == "coarsen") {
    s.label_space = coarsen_space();
    s.cv = CvScheme::LeaveOneOut;
    s.fold_unit = FoldUnit::Program;
    s.speedup = s.runtimes_required = true;
    s.default_baseline = "1";
  } else if (name == "vectorize") {
    s.label_space = vectorize_space();
    s.k = 5;
    s.fold_unit = FoldUnit::Program;
    s.speedup = s.runtimes_required = true;
    s.default_baseline = "default";
  } else if (name == "omp") {
    s.label_space = omp_space();
    s.cv = CvScheme::LeaveOneOut;
    s.fold_unit = FoldUnit::Program;
    s.speedup = s.runtimes_required = true;
    s.default_baseline = "default";
  } else if (name == "numa") {
    s.label_space = numa_space();
    s.fold_unit = FoldUnit::Program;
    s.error_rate = s.runtimes_required = true;
    s.train_fraction = 0.05;
  } else if (name == "cudablock") {
    s.label_space = cudablock_space();
    s.fold_unit = FoldUnit::Program;
    s.error_rate = s.runtimes_required = true;
  } else {
    throw ValidationError("unknown task '" + std::string(name) + "'");
  }
  return s;
}

// --- runtime tables ---------------------------------------------------------

void RuntimeTable::add(const std::string& program, const std::string& config, double seconds) {
  if (!(seconds > 0.0) || !std::isfinite(seconds))
    throw ValidationError("runtime for " + program + "/" + config + " must be positive");
  auto& rows = rows_[program];
  for (const auto& r : rows)
    if (r.first == config) throw ValidationError("duplicate runtime row " + program + "/" + config);
  rows.emplace_back(config, seconds);
}

bool RuntimeTable::has(const std::string& program, const std::string& config) const {
  const auto it = rows_.find(program);
  if (it == rows_.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(), [&](const auto& r) { return r.first == config; });
}

double RuntimeTable::runtime(const std::string& program, const std::string& config) const {
  for (const auto& r : rows(program))
    if (r.first == config) return r.second;
  throw ValidationError("no runtime for " + program + "/" + config);
}

const std::vector<std::pair<std::string, double>>& RuntimeTable::rows(const std::string& program) const {
  const auto it = rows_.find(program);
  if (it == rows_.end()) throw ValidationError("unknown program '" + program + "'");
  return it->second;
}

std::vector<std::string> RuntimeTable::programs() const {
  std::vector<std::string> out;
  for (const auto& [p, rows] : rows_) out.push_back(p);
  return out;
}

std::size_t RuntimeTable::size() const {
  std::size_t n = 0;
  for (const auto& [p, rows] : rows_) n += rows.size();
  return n;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(where + ": '" + s + "' is not a number");
  }
}

}  // namespace

RuntimeTable RuntimeTable::load_csv(const std::filesystem::path& file) {
  std::istringstream in(read_file(file));
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"program_id", "config_id", "runtime_seconds"})
    throw ValidationError(file.string() + ": expected header program_id,config_id,runtime_seconds");
  RuntimeTable t;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = file.string() + ":" + std::to_string(n);
    if (f.size() != 3) throw ValidationError(where + ": expected 3 fields");
    t.add(f[0], f[1], parse_double(f[2], where));
  }
  return t;
}

std::string oracle_config(const RuntimeTable& table, const std::string& program,
                          std::span<const std::string> candidates) {
  const auto& rows = table.rows(program);
  std::optional<std::pair<std::string, double>> best;
  auto consider = [&](const std::string& config, double t) {
    if (!best || t < best->second) best = {{config, t}};
  };
  if (candidates.empty()) {
    for (const auto& [c, t] : rows) consider(c, t);
  } else {
    for (const auto& c : candidates)
      if (table.has(program, c)) consider(c, table.runtime(program, c));
  }
  if (!best) throw ValidationError("program '" + program + "' has no candidate runtimes");
  return best->first;
}

double compute_speedup(const RuntimeTable& table, const std::string& baseline,
                       const std::string& predicted, const std::string& program) {
  return table.runtime(program, baseline) / table.runtime(program, predicted);
}

double compute_error_rate(const RuntimeTable& table, const std::string& predicted,
                          const std::string& program, std::span<const std::string> candidates) {
  const double best = table.runtime(program, oracle_config(table, program, candidates));
  return (table.runtime(program, predicted) - best) / best;
}

// --- folds ------------------------------------------------------------------

FoldSpec make_folds(std::span<const std::string> ids, std::span<const std::string> labels, std::size_t k,
                    std::uint64_t seed) {
  if (ids.size() != labels.size()) throw ValidationError("ids and labels differ in length");
  if (k < 2) throw ValidationError("k must be at least 2");
  if (k > ids.size())
    throw ValidationError("k = " + std::to_string(k) + " exceeds the " + std::to_string(ids.size()) + " samples");
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size())
    throw ValidationError("fold ids must be unique");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ids.size(); ++i) by_class[labels[i]].push_back(i);
  FoldSpec spec;
  spec.scheme = k == ids.size() ? CvScheme::LeaveOneOut : CvScheme::StratifiedKFold;
  std::vector<std::vector<std::size_t>> members(k);
  std::mt19937_64 rng(seed);
  std::size_t offset = 0;
  for (auto& [label, idx] : by_class) {
    if (idx.size() < k)
      spec.warnings.push_back("class '" + label + "' has " + std::to_string(idx.size()) +
                              " samples, fewer than k = " + std::to_string(k));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (const std::size_t i : idx) members[offset++ % k].push_back(i);
  }
  for (auto& m : members) {
    std::sort(m.begin(), m.end());
    std::vector<std::string> fold;
    for (const std::size_t i : m) fold.push_back(ids[i]);
    spec.folds.push_back(std::move(fold));
  }
  return spec;
}

FoldSpec leave_one_out_folds(std::span<const std::string> ids) {
  if (ids.size() < 2) throw ValidationError("leave-one-out needs at least two programs");
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size())
    throw ValidationError("fold ids must be unique");
  FoldSpec spec;
  spec.scheme = CvScheme::LeaveOneOut;
  for (const auto& id : ids) spec.folds.push_back({id});
  return spec;
}

std::vector<std::string> reduced_data_subsample(std::span<const std::string> train_ids, double fraction,
                                                std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("fraction must lie in (0, 1]");
  const auto n = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(train_ids.size())));
  if (n == 0) throw ValidationError("reduced training subset is empty");
  if (n == train_ids.size()) return {train_ids.begin(), train_ids.end()};
  std::vector<std::size_t> idx(train_ids.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  for (const std::size_t i : idx) out.push_back(train_ids[i]);
  return out;
}

// --- head ---------------------------------------------------------------

Head::Head(std::size_t feature_dim, std::size_t aux_dim, std::size_t num_classes, const HeadConfig& config)
    : feature_dim_(feature_dim), aux_dim_(aux_dim), num_classes_(num_classes) {
  if (feature_dim + aux_dim == 0) throw ValidationError("head needs at least one input column");
  if (num_classes < 2) throw ValidationError("head needs at least two classes");
  std::mt19937_64 rng(config.seed);
  const auto in = static_cast<Eigen::Index>(feature_dim + aux_dim);
  const auto h1 = static_cast<Eigen::Index>(config.hidden1), h2 = static_cast<Eigen::Index>(config.hidden2);
  const auto c = static_cast<Eigen::Index>(num_classes);
  params_.add("fc1.weight", nn::xavier_uniform(in, h1, rng));
  params_.add("fc1.bias", Matrix::Zero(1, h1));
  params_.add("fc2.weight", nn::xavier_uniform(h1, h2, rng));
  params_.add("fc2.bias", Matrix::Zero(1, h2));
  params_.add("fc3.weight", nn::xavier_uniform(h2, c, rng));
  params_.add("fc3.bias", Matrix::Zero(1, c));
  aux_mean_ = RowVector::Zero(static_cast<Eigen::Index>(aux_dim));
  aux_std_ = RowVector::Ones(static_cast<Eigen::Index>(aux_dim));
}

void Head::set_standardization(RowVector mean, RowVector std) {
  if (mean.size() != static_cast<Eigen::Index>(aux_dim_) || std.size() != mean.size())
    throw ValidationError("standardization width mismatch");
  aux_mean_ = std::move(mean);
  aux_std_ = std::move(std);
}

Var Head::forward(Tape& tape, Var features, const Matrix& aux) const {
  if (features.cols() != static_cast<Eigen::Index>(feature_dim_) ||
      aux.cols() != static_cast<Eigen::Index>(aux_dim_) || (aux_dim_ && aux.rows() != features.rows()))
    throw ValidationError("head input width mismatch");
  Var x = features;
  if (aux_dim_) {
    const Matrix z = (aux.rowwise() - aux_mean_).array().rowwise() / aux_std_.array();
    const std::vector<Var> parts{features, tape.constant(z)};
    x = feature_dim_ ? nn::concat_cols(parts) : parts[1];
  }
  x = nn::gelu(nn::linear(x, params_.at("fc1.weight"), &params_.at("fc1.bias")));
  x = nn::gelu(nn::linear(x, params_.at("fc2.weight"), &params_.at("fc2.bias")));
  return nn::linear(x, params_.at("fc3.weight"), &params_.at("fc3.bias"));
}

Matrix Head::logits(const Matrix& features, const Matrix& aux) const {
  Tape tape(false);
  return forward(tape, tape.constant(features), aux).value();
}

std::pair<RowVector, RowVector> standardization_stats(const Matrix& aux) {
  if (aux.rows() == 0) throw ValidationError("standardization of zero rows");
  RowVector mean = aux.colwise().mean();
  RowVector var = (aux.rowwise() - mean).array().square().colwise().mean();
  RowVector sd = var.array().sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (!(sd(j) > 1e-12)) sd(j) = 1.0;
  return {mean, sd};
}

Head train_head(const Matrix& features, const Matrix& aux, std::span<const int> labels,
                std::size_t num_classes, const HeadConfig& config) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size()) ||
      (aux.cols() > 0 && aux.rows() != features.rows()))
    throw ValidationError("head training inputs differ in row count");
  if (labels.empty()) throw ValidationError("head training needs at least one sample");
  for (const int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
      throw ValidationError("label index " + std::to_string(l) + " is outside the label space");
  Head head(static_cast<std::size_t>(features.cols()), static_cast<std::size_t>(aux.cols()), num_classes, config);
  if (aux.cols() > 0) {
    auto [mean, sd] = standardization_stats(aux);
    head.set_standardization(std::move(mean), std::move(sd));
  }
  nn::Adam::Options opt;
  opt.learning_rate = config.learning_rate;
  nn::Adam adam(opt);
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    Tape tape(true);
    const Var loss = nn::cross_entropy_rows(head.forward(tape, tape.constant(features), aux), labels);
    const double value = loss.scalar();
    if (!std::isfinite(value)) throw Error("non-finite head training loss");
    head.params().zero_grad();
    tape.backward(loss);
    adam.step(head.params());
    if (value < best - 1e-6) {
      best = value;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return head;
}

std::vector<int> predict_batch(const Head& head, const Matrix& features, const Matrix& aux) {
  const Matrix logits = head.logits(features, aux);
  std::vector<int> out;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) out.push_back(static_cast<int>(argmax_first(logits.row(r))));
  return out;
}

int predict_config(const Head& head, const RowVector& features, const RowVector& aux) {
  return predict_batch(head, features, aux).front();
}

// --- metrics ------------------------------------------------------------

double accuracy(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size() || truth.empty()) throw ValidationError("accuracy needs equal, non-empty inputs");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double f1_binary(std::span<const int> truth, std::span<const int> pred, int positive) {
  if (truth.size() != pred.size()) throw ValidationError("f1 needs equal-length inputs");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == positive, p = pred[i] == positive;
    tp += t && p;
    fp += !t && p;
    fn += t && !p;
  }
  return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

double f1_macro(std::span<const int> truth, std::span<const int> pred, std::size_t num_classes) {
  std::set<int> present(truth.begin(), truth.end());
  present.insert(pred.begin(), pred.end());
  if (present.empty()) throw ValidationError("f1 of no samples");
  double sum = 0;
  for (const int c : present) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) throw ValidationError("class index out of range");
    sum += f1_binary(truth, pred, c);
  }
  return sum / static_cast<double>(present.size());
}

// --- bundles ------------------------------------------------------------

TaskBundle load_task_bundle(const TaskSpec& spec, const std::filesystem::path& labels_csv,
                            const std::optional<std::filesystem::path>& runtimes_csv) {
  std::istringstream in(read_file(labels_csv));
  std::string line;
  std::vector<std::string> want{"sample_id", "program_id", "label"};
  want.insert(want.end(), spec.aux_feature_names.begin(), spec.aux_feature_names.end());
  if (!std::getline(in, line) || split_csv(line) != want) {
    std::string joined;
    for (const auto& w : want) joined += (joined.empty() ? "" : ",") + w;
    throw ValidationError(labels_csv.string() + ": expected header " + joined);
  }
  TaskBundle b;
  std::unordered_set<std::string> seen;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = labels_csv.string() + ":" + std::to_string(n);
    if (f.size() != want.size()) throw ValidationError(where + ": expected " + std::to_string(want.size()) + " fields");
    if (!seen.insert(f[0]).second) throw ValidationError(where + ": duplicate sample '" + f[0] + "'");
    spec.label_index(f[2]);
    LabeledSample s{f[0], f[1], f[2], {}};
    for (std::size_t j = 3; j < f.size(); ++j) s.aux.push_back(parse_double(f[j], where));
    b.samples.push_back(std::move(s));
  }
  if (runtimes_csv && std::filesystem::exists(*runtimes_csv)) b.runtimes = RuntimeTable::load_csv(*runtimes_csv);
  if (spec.runtimes_required && !b.runtimes)
    throw ValidationError("task '" + spec.name + "' needs a runtime table");
  return b;
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

Metrics run_task(const TaskSpec& spec, const TaskBundle& bundle, const EmbeddingTable& emb,
                 const RunOptions& options) {
  if (bundle.samples.size() < 2) throw ValidationError("task needs at least two samples");
  if ((spec.runtimes_required || spec.error_rate) && !bundle.runtimes)
    throw ValidationError("task '" + spec.name + "' needs a runtime table");
  const std::string baseline = options.baseline.value_or(spec.default_baseline);
  const bool do_speedup = spec.speedup && bundle.runtimes.has_value();
  const bool do_error = spec.error_rate && bundle.runtimes.has_value();
  const auto& samples = bundle.samples;

  std::unordered_map<std::string, std::size_t> row_of;
  for (const auto& s : samples) {
    auto r = emb.find(s.sample_id);
    if (!r) r = emb.find(s.program_id);
    if (!r) throw ValidationError("no embedding for sample '" + s.sample_id + "'");
    row_of[s.sample_id] = *r;
    if (s.aux.size() != spec.aux_feature_names.size()) throw ValidationError("aux width mismatch for " + s.sample_id);
  }
  auto runtime_key = [&](const LabeledSample& s) {
    return bundle.runtimes->has_program(s.sample_id) ? s.sample_id : s.program_id;
  };

  std::vector<std::string> units, unit_labels;
  std::unordered_map<std::string, std::size_t> unit_of_sample;
  {
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& s : samples) {
      const std::string& u = spec.fold_unit == FoldUnit::Sample ? s.sample_id : s.program_id;
      auto [it, fresh] = index.emplace(u, units.size());
      if (fresh) {
        units.push_back(u);
        unit_labels.push_back(s.label);
      }
      unit_of_sample[s.sample_id] = it->second;
    }
  }
  const std::size_t k = options.k.value_or(spec.k);
  FoldSpec folds = spec.cv == CvScheme::LeaveOneOut || k >= units.size()
                       ? leave_one_out_folds(units)
                       : make_folds(units, unit_labels, k, mix_seed(options.seed, 0xf01d));
  Metrics m;
  m.warnings = folds.warnings;
  std::vector<std::size_t> fold_of_unit(units.size());
  {
    std::unordered_map<std::string, std::size_t> uidx;
    for (std::size_t i = 0; i < units.size(); ++i) uidx[units[i]] = i;
    for (std::size_t f = 0; f < folds.folds.size(); ++f)
      for (const auto& u : folds.folds[f]) fold_of_unit[uidx.at(u)] = f;
  }
  const double fraction = options.train_fraction.value_or(spec.train_fraction);
  const auto D = emb.rows.cols();
  const auto A = static_cast<Eigen::Index>(spec.aux_feature_names.size());

  auto gather = [&](const std::vector<std::size_t>& idx, Matrix& x, Matrix& aux) {
    x.resize(static_cast<Eigen::Index>(idx.size()), D);
    aux.resize(static_cast<Eigen::Index>(idx.size()), A);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto& s = samples[idx[r]];
      x.row(static_cast<Eigen::Index>(r)) = emb.rows.row(static_cast<Eigen::Index>(row_of.at(s.sample_id)));
      for (Eigen::Index j = 0; j < A; ++j) aux(static_cast<Eigen::Index>(r), j) = s.aux[static_cast<std::size_t>(j)];
    }
  };

  std::vector<int> all_truth, all_pred;
  for (std::size_t f = 0; f < folds.folds.size(); ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < samples.size(); ++i)
      (fold_of_unit[unit_of_sample.at(samples[i].sample_id)] == f ? test : train).push_back(i);
    if (train.empty()) throw ValidationError("fold " + std::to_string(f) + " leaves no training samples");
    if (fraction < 1.0) {
      std::vector<std::string> ids;
      for (const std::size_t i : train) ids.push_back(samples[i].sample_id);
      const auto keep = reduced_data_subsample(ids, fraction, mix_seed(options.seed, 1000 + f));
      const std::unordered_set<std::string> kept(keep.begin(), keep.end());
      std::erase_if(train, [&](std::size_t i) { return !kept.count(samples[i].sample_id); });
    }
    Matrix xtr, atr, xte, ate;
    gather(train, xtr, atr);
    gather(test, xte, ate);
    std::vector<int> ytr, yte;
    for (const std::size_t i : train) ytr.push_back(static_cast<int>(spec.label_index(samples[i].label)));
    for (const std::size_t i : test) yte.push_back(static_cast<int>(spec.label_index(samples[i].label)));
    HeadConfig hc = options.head;
    hc.seed = mix_seed(options.seed, f);
    const Head head = train_head(xtr, atr, ytr, spec.label_space.size(), hc);
    const auto pred = predict_batch(head, xte, ate);
    m.fold_accuracy.push_back(accuracy(yte, pred));
    std::vector<double> fold_errors;
    for (std::size_t r = 0; r < test.size(); ++r) {
      const auto& s = samples[test[r]];
      SamplePrediction p{f, s.sample_id, s.program_id, s.label, spec.label_space[static_cast<std::size_t>(pred[r])], {}, {}, {}};
      if (do_speedup) {
        const std::string key = runtime_key(s);
        p.speedup = compute_speedup(*bundle.runtimes, baseline, p.predicted, key);
        p.oracle_speedup = compute_speedup(*bundle.runtimes, baseline,
                                           oracle_config(*bundle.runtimes, key, spec.label_space), key);
      }
      if (do_error) {
        p.error_rate = compute_error_rate(*bundle.runtimes, p.predicted, runtime_key(s), spec.label_space);
        fold_errors.push_back(*p.error_rate);
      }
      m.predictions.push_back(std::move(p));
    }
    if (do_error)
      m.fold_error_rate.push_back(std::accumulate(fold_errors.begin(), fold_errors.end(), 0.0) /
                                  static_cast<double>(fold_errors.size()));
    all_truth.insert(all_truth.end(), yte.begin(), yte.end());
    all_pred.insert(all_pred.end(), pred.begin(), pred.end());
  }
  m.accuracy = accuracy(all_truth, all_pred);
  m.f1_macro = f1_macro(all_truth, all_pred, spec.label_space.size());
  m.f1 = spec.label_space.size() == 2 ? f1_binary(all_truth, all_pred, 1) : m.f1_macro;
  if (do_speedup) {
    std::vector<double> sp, orc;
    for (const auto& p : m.predictions) {
      sp.push_back(*p.speedup);
      orc.push_back(*p.oracle_speedup);
    }
    m.geometric_mean_speedup = geometric_mean(sp);
    m.oracle_speedup = geometric_mean(orc);
  }
  if (do_error) {
    double sum = 0;
    for (const auto& p : m.predictions) sum += *p.error_rate;
    m.mean_error_rate = sum / static_cast<double>(m.predictions.size());
  }
  return m;
}

// --- reports ------------------------------------------------------------

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

/// Grouped vertical bars; one colour per series.
std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                      const std::vector<std::pair<std::string, std::vector<double>>>& series,
                      std::optional<double> reference = std::nullopt) {
  const double width = std::max(480.0, 40.0 + 18.0 * static_cast<double>(categories.size() * series.size()));
  const double height = 320, left = 50, bottom = 260, top = 40;
  double vmax = reference.value_or(0.0);
  for (const auto& [name, values] : series)
    for (const double v : values) vmax = std::max(vmax, v);
  if (vmax <= 0) vmax = 1;
  static const char* kColours[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};
  const double slot = (width - left - 10) / static_cast<double>(std::max<std::size_t>(1, categories.size()));
  const double bar = slot * 0.8 / static_cast<double>(series.size());
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0) << "\" height=\"" << fixed(height, 0)
    << "\">\n<text x=\"" << fixed(left, 0) << "\" y=\"20\" font-size=\"14\">" << xml_escape(title) << "</text>\n"
    << "<line x1=\"" << fixed(left, 0) << "\" y1=\"" << fixed(bottom, 0) << "\" x2=\"" << fixed(width - 10, 0)
    << "\" y2=\"" << fixed(bottom, 0) << "\" stroke=\"black\"/>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& values = series[s].second;
    for (std::size_t c = 0; c < values.size(); ++c) {
      const double h = (bottom - top) * values[c] / vmax;
      const double x = left + slot * static_cast<double>(c) + slot * 0.1 + bar * static_cast<double>(s);
      o << "<rect x=\"" << fixed(x, 2) << "\" y=\"" << fixed(bottom - h, 2) << "\" width=\"" << fixed(bar, 2)
        << "\" height=\"" << fixed(h, 2) << "\" fill=\"" << kColours[s % 4] << "\"><title>"
        << xml_escape(categories[c]) << " " << xml_escape(series[s].first) << " " << fixed(values[c]) << "</title></rect>\n";
    }
    o << "<text x=\"" << fixed(width - 150, 0) << "\" y=\"" << 20 + 14 * s << "\" font-size=\"11\" fill=\""
      << kColours[s % 4] << "\">" << xml_escape(series[s].first) << "</text>\n";
  }
  if (reference) {
    const double y = bottom - (bottom - top) * *reference / vmax;
    o << "<line x1=\"" << fixed(left, 0) << "\" y1=\"" << fixed(y, 2) << "\" x2=\"" << fixed(width - 10, 0) << "\" y2=\""
      << fixed(y, 2) << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
  }
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double x = left + slot * (static_cast<double>(c) + 0.5);
    o << "<text x=\"" << fixed(x, 2) << "\" y=\"" << fixed(bottom + 12, 0)
      << "\" font-size=\"8\" text-anchor=\"end\" transform=\"rotate(-60 " << fixed(x, 2) << " " << fixed(bottom + 12, 0)
      << ")\">" << xml_escape(categories[c]) << "</text>\n";
  }
  o << "<text x=\"5\" y=\"" << fixed(top, 0) << "\" font-size=\"10\">" << fixed(vmax, 2) << "</text>\n</svg>\n";
  return o.str();
}

std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

void write_task_report(const TaskSpec& spec, const Metrics& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json j;
  j["task"] = spec.name;
  j["samples"] = m.predictions.size();
  j["folds"] = m.fold_accuracy.size();
  j["accuracy"] = m.accuracy;
  j["f1"] = m.f1;
  j["f1_macro"] = m.f1_macro;
  j["fold_accuracy"] = m.fold_accuracy;
  if (m.geometric_mean_speedup) j["geometric_mean_speedup"] = *m.geometric_mean_speedup;
  if (m.oracle_speedup) j["oracle_speedup"] = *m.oracle_speedup;
  if (m.mean_error_rate) {
    j["mean_error_rate"] = *m.mean_error_rate;
    j["fold_error_rate"] = m.fold_error_rate;
  }
  j["warnings"] = m.warnings;
  write_file(dir / "metrics.json", j.dump(2) + "\n");

  std::string csv = "fold,sample_id,program_id,truth,predicted,correct,speedup,oracle_speedup,error_rate\n";
  for (const auto& p : m.predictions)
    csv += std::to_string(p.fold) + "," + p.sample_id + "," + p.program_id + "," + p.truth + "," + p.predicted + "," +
           (p.truth == p.predicted ? "1" : "0") + "," + opt_field(p.speedup) + "," + opt_field(p.oracle_speedup) +
           "," + opt_field(p.error_rate) + "\n";
  write_file(dir / "folds.csv", csv);

  std::vector<std::string> fold_names;
  for (std::size_t f = 0; f < m.fold_accuracy.size(); ++f) fold_names.push_back("fold " + std::to_string(f));
  write_file(dir / "accuracy.svg", bar_chart(spec.name + ": accuracy per fold", fold_names, {{"accuracy", m.fold_accuracy}}));
  if (m.geometric_mean_speedup) {
    // Per-program geometric means of the per-sample speedups.
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per;
    for (const auto& p : m.predictions) {
      per[p.program_id].first.push_back(*p.speedup);
      per[p.program_id].second.push_back(*p.oracle_speedup);
    }
    std::vector<std::string> names;
    std::vector<double> pred, orc;
    for (const auto& [prog, v] : per) {
      names.push_back(prog);
      pred.push_back(geometric_mean(v.first));
      orc.push_back(geometric_mean(v.second));
    }
    write_file(dir / "speedup.svg", bar_chart(spec.name + ": speedup over baseline", names,
                                              {{"predicted", pred}, {"oracle", orc}}, 1.0));
  }
  if (m.mean_error_rate)
    write_file(dir / "error_rate.svg",
               bar_chart(spec.name + ": error rate per fold", fold_names, {{"error rate", m.fold_error_rate}}));
}

}  // namespace irembed
