// SPDX-License-Identifier: Apache-2.0
//
// Downstream tuning tasks over frozen embeddings: label spaces, folds, a
// three-layer MLP head, and runtime-table metrics.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "irembed/autograd.hpp"

namespace irembed {

enum class CvScheme { StratifiedKFold, LeaveOneOut };
enum class FoldUnit { Sample, Program };

struct TaskSpec {
  std::string name;
  std::vector<std::string> label_space;
  std::vector<std::string> aux_feature_names;
  CvScheme cv = CvScheme::StratifiedKFold;
  std::size_t k = 10;
  FoldUnit fold_unit = FoldUnit::Sample;
  bool classification_metrics = true;
  bool speedup = false;
  bool error_rate = false;
  bool runtimes_required = false;
  std::string default_baseline;  // empty when the task has no baseline
  double train_fraction = 1.0;

  std::size_t label_index(std::string_view label) const;
};

inline constexpr std::array<std::string_view, 6> kTaskNames = {"devmap", "coarsen", "vectorize",
                                                               "omp",    "numa",    "cudablock"};

TaskSpec task_spec(std::string_view name);

std::vector<std::string> coarsen_space();
std::vector<std::string> vectorize_space();
std::vector<std::string> omp_space();
std::vector<std::string> numa_space();
std::vector<std::string> cudablock_space();

// --- runtime tables -------------------------------------------------------

class RuntimeTable {
 public:
  /// Throws ValidationError on a duplicate pair or a non-positive runtime.
  void add(const std::string& program, const std::string& config, double seconds);
  double runtime(const std::string& program, const std::string& config) const;
  bool has(const std::string& program, const std::string& config) const;
  bool has_program(const std::string& program) const { return rows_.count(program) > 0; }
  /// Configs of a program in insertion order.
  const std::vector<std::pair<std::string, double>>& rows(const std::string& program) const;
  std::vector<std::string> programs() const;
  std::size_t size() const;

  static RuntimeTable load_csv(const std::filesystem::path& file);

 private:
  std::map<std::string, std::vector<std::pair<std::string, double>>> rows_;
};

/// Minimum runtime among `candidates` present for the program; ties go to
/// the earliest candidate. With no candidates every row of the program is
/// eligible, in insertion order.
std::string oracle_config(const RuntimeTable& table, const std::string& program,
                          std::span<const std::string> candidates = {});
double compute_speedup(const RuntimeTable& table, const std::string& baseline,
                       const std::string& predicted, const std::string& program);
/// (t_pred - t_best) / t_best over the candidate configs.
double compute_error_rate(const RuntimeTable& table, const std::string& predicted,
                          const std::string& program, std::span<const std::string> candidates = {});

// --- folds ------------------------------------------------------------------

struct FoldSpec {
  CvScheme scheme = CvScheme::StratifiedKFold;
  std::vector<std::vector<std::string>> folds;
  std::vector<std::string> warnings;
};

/// Stratified by label: each class is shuffled and dealt round-robin, with
/// the dealing offset carried across classes so fold sizes differ by at
/// most one. A class smaller than k is reported in warnings.
FoldSpec make_folds(std::span<const std::string> ids, std::span<const std::string> labels, std::size_t k,
                    std::uint64_t seed);
FoldSpec leave_one_out_folds(std::span<const std::string> ids);

/// round(fraction * n) ids (at least one), uniformly, in input order.
std::vector<std::string> reduced_data_subsample(std::span<const std::string> train_ids, double fraction,
                                                std::uint64_t seed);

// --- head ---------------------------------------------------------------

struct HeadConfig {
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
  std::size_t max_epochs = 300;
  std::size_t patience = 30;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
};

class Head {
 public:
  Head() = default;
  Head(std::size_t feature_dim, std::size_t aux_dim, std::size_t num_classes, const HeadConfig& config);

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t aux_dim() const { return aux_dim_; }
  std::size_t num_classes() const { return num_classes_; }

  /// Raw (unstandardized) aux columns; standardization uses stored stats.
  nn::Matrix logits(const nn::Matrix& features, const nn::Matrix& aux) const;
  nn::Var forward(nn::Tape& tape, nn::Var features, const nn::Matrix& aux) const;

  nn::ParameterStore& params() const { return params_; }
  const nn::RowVector& aux_mean() const { return aux_mean_; }
  const nn::RowVector& aux_std() const { return aux_std_; }
  void set_standardization(nn::RowVector mean, nn::RowVector std);

 private:
  std::size_t feature_dim_ = 0, aux_dim_ = 0, num_classes_ = 0;
  mutable nn::ParameterStore params_;
  nn::RowVector aux_mean_, aux_std_;
};

/// z-score statistics of the columns; zero-variance columns get std 1.
std::pair<nn::RowVector, nn::RowVector> standardization_stats(const nn::Matrix& aux);

/// Full-batch Adam on cross-entropy until max_epochs, or until the training
/// loss fails to improve by 1e-6 for `patience` epochs.
Head train_head(const nn::Matrix& features, const nn::Matrix& aux, std::span<const int> labels,
                std::size_t num_classes, const HeadConfig& config);

/// Row-wise argmax of the logits; ties go to the lowest label index.
std::vector<int> predict_batch(const Head& head, const nn::Matrix& features, const nn::Matrix& aux);
int predict_config(const Head& head, const nn::RowVector& features, const nn::RowVector& aux);

// --- metrics ------------------------------------------------------------

double accuracy(std::span<const int> truth, std::span<const int> pred);
/// F1 of class `positive`; 0 when it is never predicted nor present.
double f1_binary(std::span<const int> truth, std::span<const int> pred, int positive);
double f1_macro(std::span<const int> truth, std::span<const int> pred, std::size_t num_classes);

// --- bundles and runs ---------------------------------------------------

struct LabeledSample {
  std::string sample_id;
  std::string program_id;
  std::string label;
  std::vector<double> aux;
};

struct TaskBundle {
  std::vector<LabeledSample> samples;
  std::optional<RuntimeTable> runtimes;
};

/// labels.csv: sample_id,program_id,label,aux...; its aux header must match
/// the task's aux feature names. runtimes.csv is optional.
TaskBundle load_task_bundle(const TaskSpec& spec, const std::filesystem::path& labels_csv,
                            const std::optional<std::filesystem::path>& runtimes_csv);

/// Embedding rows keyed by document id.
struct EmbeddingTable {
  std::vector<std::string> ids;
  nn::Matrix rows;
  std::optional<std::size_t> find(const std::string& id) const;
};

struct RunOptions {
  HeadConfig head;
  std::uint64_t seed = 0;
  std::optional<std::size_t> k;                 // overrides spec.k
  std::optional<double> train_fraction;         // overrides spec.train_fraction
  std::optional<std::string> baseline;          // overrides spec.default_baseline
};

struct SamplePrediction {
  std::size_t fold = 0;
  std::string sample_id;
  std::string program_id;
  std::string truth;
  std::string predicted;
  std::optional<double> speedup;
  std::optional<double> oracle_speedup;
  std::optional<double> error_rate;
};

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;        // binary for two-class tasks, else macro
  double f1_macro = 0.0;
  std::vector<double> fold_accuracy;
  std::optional<double> geometric_mean_speedup;
  std::optional<double> oracle_speedup;
  std::optional<double> mean_error_rate;
  std::vector<double> fold_error_rate;
  std::vector<SamplePrediction> predictions;
  std::vector<std::string> warnings;
};

/// Looks up each sample's embedding by sample id, falling back to its
/// program id. Fresh head per fold, seeded by mix_seed(seed, fold).
Metrics run_task(const TaskSpec& spec, const TaskBundle& bundle, const EmbeddingTable& embeddings,
                 const RunOptions& options);

/// metrics.json, folds.csv and SVG bar charts.
void write_task_report(const TaskSpec& spec, const Metrics& metrics, const std::filesystem::path& dir);

}  // namespace irembed
