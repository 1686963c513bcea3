#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "irembed/autograd.hpp"
#include "irembed/errors.hpp"

using namespace irembed;
using namespace irembed::nn;
using irembed::testing::gradcheck;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return normal_init(r, c, 1.0, rng);
}

// Reduces any output to a scalar through a fixed random projection so every
// element contributes with a different weight.
Var scalarize(Tape& tape, Var v, std::uint64_t seed = 99) {
  Var rows_mean = mean_rows(v);
  return matmul(rows_mean, tape.constant(random_matrix(v.cols(), 1, seed)));
}

// Checks d/dx of an op built from one or two parameters.
void check_op(const std::function<Var(Tape&, ParameterStore&)>& op,
              std::vector<std::pair<std::string, Matrix>> inputs) {
  ParameterStore store;
  for (auto& [name, value] : inputs) store.add(name, value);
  const auto res = gradcheck(store, [&](bool record) {
    Tape tape(record);
    const Var out = scalarize(tape, op(tape, store));
    if (record) tape.backward(out);
    return out.scalar();
  });
  CHECK(res.checked > 0);
  CHECK(res.ok == res.checked);
}

}  // namespace

TEST_CASE("elementwise ops") {
  const Matrix a = random_matrix(3, 4, 1), b = random_matrix(3, 4, 2);
  check_op([](Tape& t, ParameterStore& s) { return add(t.param(s.at("a")), t.param(s.at("b"))); },
           {{"a", a}, {"b", b}});
  check_op([](Tape& t, ParameterStore& s) { return sub(t.param(s.at("a")), t.param(s.at("b"))); },
           {{"a", a}, {"b", b}});
  check_op([](Tape& t, ParameterStore& s) { return hadamard(t.param(s.at("a")), t.param(s.at("b"))); },
           {{"a", a}, {"b", b}});
  check_op([](Tape& t, ParameterStore& s) { return scale(t.param(s.at("a")), -2.5); }, {{"a", a}});
  check_op([](Tape& t, ParameterStore& s) { return gelu(t.param(s.at("a"))); }, {{"a", a}});
  check_op([](Tape& t, ParameterStore& s) { return sigmoid(t.param(s.at("a"))); }, {{"a", a}});
  check_op([](Tape& t, ParameterStore& s) { return transpose(t.param(s.at("a"))); }, {{"a", a}});
}

TEST_CASE("matrix and shape ops") {
  const Matrix a = random_matrix(3, 4, 3), b = random_matrix(4, 5, 4);
  check_op([](Tape& t, ParameterStore& s) { return matmul(t.param(s.at("a")), t.param(s.at("b"))); },
           {{"a", a}, {"b", b}});
  check_op([](Tape& t, ParameterStore& s) { return col_block(t.param(s.at("a")), 1, 2); }, {{"a", a}});
  check_op([](Tape& t, ParameterStore& s) { return row_block(t.param(s.at("a")), 1, 2); }, {{"a", a}});
  check_op(
      [](Tape& t, ParameterStore& s) {
        const std::vector<Var> parts{t.param(s.at("a")), t.param(s.at("c"))};
        return concat_cols(parts);
      },
      {{"a", a}, {"c", random_matrix(3, 2, 5)}});
  check_op(
      [](Tape& t, ParameterStore& s) {
        const std::vector<Var> parts{t.param(s.at("a")), t.param(s.at("c"))};
        return concat_rows(parts);
      },
      {{"a", a}, {"c", random_matrix(2, 4, 6)}});
  check_op(
      [](Tape& t, ParameterStore& s) {
        const std::vector<Eigen::Index> rows{2, 0, 2};
        return gather_rows(t.param(s.at("a")), rows);
      },
      {{"a", a}});
  check_op(
      [](Tape& t, ParameterStore& s) {
        const std::vector<Var> rows{row_block(t.param(s.at("a")), 0, 1), row_block(t.param(s.at("a")), 2, 1)};
        return mean_of(rows);
      },
      {{"a", a}});
  check_op([](Tape& t, ParameterStore& s) { return rowwise_dot(t.param(s.at("a")), t.param(s.at("c"))); },
           {{"a", a}, {"c", random_matrix(3, 4, 7)}});
}

TEST_CASE("masked softmax, sparse products, norm, linear") {
  const Matrix a = random_matrix(3, 5, 8);
  check_op(
      [](Tape& t, ParameterStore& s) {
        const std::vector<std::uint8_t> mask{1, 1, 0, 1, 0};
        return masked_softmax_rows(t.param(s.at("a")), mask);
      },
      {{"a", a}});
  check_op(
      [](Tape& t, ParameterStore& s) {
        SparseMatrix m(2, 3);
        m.insert(0, 0) = 0.5;
        m.insert(0, 2) = -1.0;
        m.insert(1, 1) = 2.0;
        m.makeCompressed();
        return spmm(m, t.param(s.at("a")));
      },
      {{"a", a}});
  check_op(
      [](Tape& t, ParameterStore& s) {
        return layer_norm(t.param(s.at("a")), s.at("g"), s.at("b"));
      },
      {{"a", a}, {"g", random_matrix(1, 5, 9)}, {"b", random_matrix(1, 5, 10)}});
  check_op([](Tape& t, ParameterStore& s) { return linear(t.param(s.at("a")), s.at("w"), &s.at("bias")); },
           {{"a", a}, {"w", random_matrix(5, 2, 11)}, {"bias", random_matrix(1, 2, 12)}});
  check_op([](Tape& t, ParameterStore& s) { return add_row_param(t.param(s.at("a")), s.at("r")); },
           {{"a", a}, {"r", random_matrix(1, 5, 13)}});
  check_op(
      [](Tape& t, ParameterStore& s) {
        const std::vector<int> ids{3, 1, 3};
        return embedding(t, s.at("table"), ids);
      },
      {{"table", random_matrix(5, 4, 14)}});
}

TEST_CASE("losses match hand formulas") {
  Tape tape(false);
  Matrix logits(2, 3);
  logits << 1.0, 2.0, 0.5, -1.0, 0.0, 3.0;
  const std::vector<int> targets{1, 0};
  // Row-wise log-sum-exp minus the target logit, averaged.
  const double l0 = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5)) - 2.0;
  const double l1 = std::log(std::exp(-1.0) + std::exp(0.0) + std::exp(3.0)) + 1.0;
  CHECK(cross_entropy_rows(tape.constant(logits), targets).scalar() == doctest::Approx((l0 + l1) / 2).epsilon(1e-12));

  Matrix z(3, 1);
  z << 0.3, -2.0, 4.0;
  const std::vector<double> y{1.0, 0.0, 1.0};
  auto sig = [](double x) { return 1 / (1 + std::exp(-x)); };
  const double want = -(std::log(sig(0.3)) + std::log(1 - sig(-2.0)) + std::log(sig(4.0))) / 3;
  CHECK(bce_with_logits(tape.constant(z), y).scalar() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("loss gradients") {
  for (const bool ce : {true, false}) {
    ParameterStore store;
    store.add("z", random_matrix(3, ce ? 4 : 1, 15));
    const auto res = gradcheck(store, [&](bool record) {
      Tape tape(record);
      const std::vector<int> targets{1, 0, 3};
      const std::vector<double> labels{1.0, 0.0, 1.0};
      const Var z = tape.param(store.at("z"));
      const Var loss = ce ? cross_entropy_rows(z, targets) : bce_with_logits(z, labels);
      if (record) tape.backward(loss);
      return loss.scalar();
    });
    CHECK(res.ok == res.checked);
    CHECK(res.checked == (ce ? 12u : 3u));
  }
}

TEST_CASE("gelu and sigmoid values") {
  Tape tape(false);
  Matrix x(1, 3);
  x << -1.0, 0.0, 2.0;
  const Matrix g = gelu(tape.constant(x)).value();
  // tanh form of GELU.
  for (int i = 0; i < 3; ++i) {
    const double v = x(0, i);
    const double want = 0.5 * v * (1 + std::tanh(std::sqrt(2 / M_PI) * (v + 0.044715 * v * v * v)));
    CHECK(g(0, i) == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK(sigmoid(tape.constant(x)).value()(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("adam step against the update rule") {
  ParameterStore store;
  Parameter& p = store.add("w", Matrix::Constant(1, 2, 1.0));
  Adam::Options o;
  o.learning_rate = 0.1;
  o.clip_norm = 0;
  Adam adam(o);
  p.grad = Matrix(1, 2);
  p.grad << 0.5, -2.0;
  adam.step(store);
  // First step: m/(1-b1) = g and v/(1-b2) = g^2, so the update is lr * sign(g).
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
  CHECK(p.value(0, 1) == doctest::Approx(1.0 + 0.1 * 2.0 / (2.0 + 1e-8)));
  CHECK(adam.steps() == 1);
}

TEST_CASE("gradient clipping bounds the global norm") {
  ParameterStore store;
  Parameter& p = store.add("w", Matrix::Zero(1, 2));
  Adam::Options o;
  o.learning_rate = 1.0;
  o.clip_norm = 1.0;
  Adam adam(o);
  p.grad = Matrix(1, 2);
  p.grad << 30.0, 40.0;
  CHECK(store.grad_norm() == doctest::Approx(50.0));
  adam.step(store);
  // Adam is scale-free on the first step, so the direction survives.
  CHECK(p.value(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(p.value(0, 1) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("parameter and optimizer serialization round trip") {
  ParameterStore a;
  a.add("x", random_matrix(2, 3, 20));
  a.add("y", random_matrix(1, 4, 21));
  ParameterStore b;
  b.add("x", Matrix::Zero(2, 3));
  b.add("y", Matrix::Zero(1, 4));
  b.deserialize(a.serialize());
  CHECK(b.at("x").value == a.at("x").value);
  CHECK(b.at("y").value == a.at("y").value);
  ParameterStore wrong;
  wrong.add("x", Matrix::Zero(3, 3));
  CHECK_THROWS_AS(wrong.deserialize(a.serialize()), ValidationError);

  Adam adam;
  a.at("x").grad = random_matrix(2, 3, 22);
  a.at("y").grad = random_matrix(1, 4, 23);
  adam.step(a);
  Adam back;
  back.deserialize(adam.serialize());
  CHECK(back.serialize() == adam.serialize());
  CHECK(back.steps() == 1);
}

TEST_CASE("encoder gradient check") {
  const auto res = irembed::testing::encoder_gradchecks();
  for (const auto* g : {&res.mlm, &res.gae, &res.match}) {
    CHECK(g->checked > 20);
    CHECK(g->fraction() >= 0.95);
  }
}
