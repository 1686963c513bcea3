// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records each operation's output and a closure that propagates the
// output gradient to its inputs. Learnable weights live in a ParameterStore;
// operations that consume a Parameter accumulate straight into its grad, so
// a forward pass never copies weights onto the tape.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace irembed::nn {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

class ParameterStore {
 public:
  Parameter& add(std::string name, Matrix init);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t scalar_count() const;
  void zero_grad();
  Scalar grad_norm() const;

  /// Binary blob: count, then per parameter name, rows, cols, raw values.
  std::string serialize() const;
  /// Overwrites values of an identically shaped store.
  void deserialize(std::string_view bytes);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
Matrix normal_init(Eigen::Index rows, Eigen::Index cols, Scalar stddev, std::mt19937_64& rng);

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Scalar scalar() const { return value()(0, 0); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// With recording off the tape only evaluates; backward() is unavailable.
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  /// Leaf that reads a parameter by reference and feeds its gradient back.
  Var param(Parameter& p);

  const Matrix& value(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  void accumulate(std::size_t id, const Matrix& g);

  using Backward = std::function<void(Tape&, const Matrix& grad)>;
  Var push(Matrix value, bool needs_grad, Backward backward);

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and runs all closures.
  void backward(Var out);

 private:
  struct Node {
    Matrix own;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
  bool record_;
};

// Elementwise / shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, Scalar s);
Var hadamard(Var a, Var b);
Var gelu(Var a);
Var sigmoid(Var a);
Var transpose(Var a);
Var matmul(Var a, Var b);
Var col_block(Var a, Eigen::Index start, Eigen::Index count);
Var row_block(Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(Var a, std::span<const Eigen::Index> rows);
Var mean_rows(Var a);
Var mean_of(std::span<const Var> rows);
Var rowwise_dot(Var a, Var b);
/// Softmax over each row; columns with key_mask[j] == 0 get zero weight.
Var masked_softmax_rows(Var a, std::span<const std::uint8_t> key_mask);
Var spmm(const SparseMatrix& lhs, Var rhs);
Var weighted_sum(std::span<const Var> scalars, std::span<const Scalar> weights);

// Parameter-consuming operations.
Var linear(Var x, Parameter& weight, Parameter* bias);
Var embedding(Tape& tape, Parameter& table, std::span<const int> ids);
/// lhs (rows x vocab) times the table, e.g. a masked mean of token rows.
Var sparse_embed(Tape& tape, const SparseMatrix& lhs, Parameter& table);
Var layer_norm(Var x, Parameter& gamma, Parameter& beta, Scalar eps = 1e-5);
/// Adds a 1 x cols parameter row to every row of x.
Var add_row_param(Var x, Parameter& row);

// Losses (mean-reduced, 1x1 outputs).
Var cross_entropy_rows(Var logits, std::span<const int> targets);
Var bce_with_logits(Var logits, std::span<const Scalar> labels);

class Adam {
 public:
  struct Options {
    Scalar learning_rate = 1e-3;
    Scalar beta1 = 0.9;
    Scalar beta2 = 0.999;
    Scalar epsilon = 1e-8;
    Scalar clip_norm = 1.0;  // <= 0 disables clipping
  };

  Adam() : Adam(Options{}) {}
  explicit Adam(Options options);
  void step(ParameterStore& params);

  std::size_t steps() const { return t_; }
  Scalar learning_rate() const { return opt_.learning_rate; }
  void set_learning_rate(Scalar rate) { opt_.learning_rate = rate; }
  std::string serialize() const;
  void deserialize(std::string_view bytes);

 private:
  Options opt_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace irembed::nn
