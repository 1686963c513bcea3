// SPDX-License-Identifier: Apache-2.0
#include "irembed/autograd.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "irembed/errors.hpp"

namespace irembed::nn {

// --- parameters ----------------------------------------------------------

Parameter& ParameterStore::add(std::string name, Matrix init) {
  if (contains(name)) throw ValidationError("duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  params_.push_back(std::move(p));
  return *params_.back();
}

bool ParameterStore::contains(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return true;
  return false;
}

Parameter& ParameterStore::at(std::string_view name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw ValidationError("no parameter named " + std::string(name));
}

const Parameter& ParameterStore::at(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->at(name);
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

Scalar ParameterStore::grad_norm() const {
  Scalar sq = 0;
  for (const auto& p : params_) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

namespace {

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::string_view& in) {
  if (in.size() < sizeof(T)) throw ValidationError("truncated parameter blob");
  T v;
  std::memcpy(&v, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return v;
}

void put_matrix(std::string& out, const Matrix& m) {
  put<std::int64_t>(out, m.rows());
  put<std::int64_t>(out, m.cols());
  out.append(reinterpret_cast<const char*>(m.data()),
             static_cast<std::size_t>(m.size()) * sizeof(Scalar));
}

void get_matrix(std::string_view& in, Matrix& m, bool resize = false) {
  const auto rows = get<std::int64_t>(in);
  const auto cols = get<std::int64_t>(in);
  if (resize) {
    if (rows < 0 || cols < 0) throw ValidationError("negative matrix shape");
    m.resize(rows, cols);
  }
  if (rows != m.rows() || cols != m.cols()) throw ValidationError("parameter shape mismatch");
  const std::size_t bytes = static_cast<std::size_t>(m.size()) * sizeof(Scalar);
  if (in.size() < bytes) throw ValidationError("truncated parameter blob");
  std::memcpy(m.data(), in.data(), bytes);
  in.remove_prefix(bytes);
}

constexpr std::uint32_t kParamMagic = 0x49524550;  // "PERI"
constexpr std::uint32_t kAdamMagic = 0x4d414441;   // "ADAM"

}  // namespace

std::string ParameterStore::serialize() const {
  std::string out;
  put(out, kParamMagic);
  put<std::uint64_t>(out, params_.size());
  for (const auto& p : params_) {
    put<std::uint64_t>(out, p->name.size());
    out += p->name;
    put_matrix(out, p->value);
  }
  return out;
}

void ParameterStore::deserialize(std::string_view in) {
  if (get<std::uint32_t>(in) != kParamMagic) throw ValidationError("not a parameter blob");
  const auto count = get<std::uint64_t>(in);
  if (count != params_.size()) throw ValidationError("parameter count mismatch");
  for (auto& p : params_) {
    const auto len = get<std::uint64_t>(in);
    if (in.size() < len) throw ValidationError("truncated parameter blob");
    if (in.substr(0, len) != p->name)
      throw ValidationError("parameter order mismatch at " + p->name);
    in.remove_prefix(len);
    get_matrix(in, p->value);
  }
  if (!in.empty()) throw ValidationError("trailing bytes in parameter blob");
}

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const Scalar limit = std::sqrt(6.0 / static_cast<Scalar>(rows + cols));
  std::uniform_real_distribution<Scalar> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

Matrix normal_init(Eigen::Index rows, Eigen::Index cols, Scalar stddev, std::mt19937_64& rng) {
  std::normal_distribution<Scalar> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

// --- tape ----------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(id_); }

const Matrix& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.own;
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::param(Parameter& p) {
  Node n;
  n.ref = &p.value;
  n.needs_grad = record_;
  if (record_) {
    Parameter* target = &p;
    n.backward = [target](Tape&, const Matrix& g) { target->grad += g; };
  }
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::push(Matrix value, bool needs_grad, Backward backward) {
  Node n;
  n.own = std::move(value);
  n.needs_grad = record_ && needs_grad;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::backward(Var out) {
  if (!record_) throw Error("backward() on a non-recording tape");
  if (out.rows() != 1 || out.cols() != 1) throw Error("backward() needs a scalar output");
  accumulate(out.id(), Matrix::Ones(1, 1));
  for (std::size_t i = out.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

// --- operations ----------------------------------------------------------

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw Error("operands live on different tapes");
  return *a.tape();
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError(std::string(op) + ": shape mismatch");
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "add");
  const auto ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape& tp, const Matrix& g) {
                  tp.accumulate(ia, g);
                  tp.accumulate(ib, g);
                });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  const auto ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape& tp, const Matrix& g) {
                  tp.accumulate(ia, g);
                  tp.accumulate(ib, -g);
                });
}

Var scale(Var a, Scalar s) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  return t.push(a.value() * s, t.needs_grad(ia),
                [ia, s](Tape& tp, const Matrix& g) { tp.accumulate(ia, g * s); });
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "hadamard");
  const auto ia = a.id(), ib = b.id();
  return t.push(a.value().cwiseProduct(b.value()), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape& tp, const Matrix& g) {
                  if (tp.needs_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
                  if (tp.needs_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
                });
}

Var gelu(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  static constexpr Scalar c = 0.7978845608028654;  // sqrt(2/pi)
  static constexpr Scalar k = 0.044715;
  const Matrix& x = a.value();
  const Matrix th = (c * (x.array() + k * x.array().cube())).tanh().matrix();
  Matrix y = (0.5 * x.array() * (1.0 + th.array())).matrix();
  return t.push(std::move(y), t.needs_grad(ia), [ia, th](Tape& tp, const Matrix& g) {
    const auto xa = tp.value(ia).array();
    const auto d = 0.5 * (1.0 + th.array()) +
                   0.5 * xa * (1.0 - th.array().square()) * c * (1.0 + 3.0 * k * xa.square());
    tp.accumulate(ia, (g.array() * d).matrix());
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  Matrix saved = y;
  return t.push(std::move(y), t.needs_grad(ia), [ia, saved](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, (g.array() * saved.array() * (1.0 - saved.array())).matrix());
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  return t.push(a.value().transpose(), t.needs_grad(ia),
                [ia](Tape& tp, const Matrix& g) { tp.accumulate(ia, g.transpose()); });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) throw ValidationError("matmul: inner dimension mismatch");
  const auto ia = a.id(), ib = b.id();
  return t.push(a.value() * b.value(), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape& tp, const Matrix& g) {
                  if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
                  if (tp.needs_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
                });
}

Var col_block(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape();
  if (start < 0 || start + count > a.cols()) throw ValidationError("col_block out of range");
  const auto ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.push(a.value().middleCols(start, count), t.needs_grad(ia),
                [=](Tape& tp, const Matrix& g) {
                  Matrix full = Matrix::Zero(rows, cols);
                  full.middleCols(start, count) = g;
                  tp.accumulate(ia, full);
                });
}

Var row_block(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape();
  if (start < 0 || start + count > a.rows()) throw ValidationError("row_block out of range");
  const auto ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.push(a.value().middleRows(start, count), t.needs_grad(ia),
                [=](Tape& tp, const Matrix& g) {
                  Matrix full = Matrix::Zero(rows, cols);
                  full.middleRows(start, count) = g;
                  tp.accumulate(ia, full);
                });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ValidationError("concat_cols of nothing");
  Tape& t = *parts[0].tape();
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  bool needs = false;
  std::vector<std::pair<std::size_t, Eigen::Index>> layout;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ValidationError("concat_cols: row mismatch");
    layout.emplace_back(p.id(), p.cols());
    cols += p.cols();
    needs = needs || t.needs_grad(p.id());
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.push(std::move(out), needs, [layout](Tape& tp, const Matrix& g) {
    Eigen::Index off = 0;
    for (const auto& [id, w] : layout) {
      if (tp.needs_grad(id)) tp.accumulate(id, g.middleCols(off, w));
      off += w;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ValidationError("concat_rows of nothing");
  Tape& t = *parts[0].tape();
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  bool needs = false;
  std::vector<std::pair<std::size_t, Eigen::Index>> layout;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ValidationError("concat_rows: column mismatch");
    layout.emplace_back(p.id(), p.rows());
    rows += p.rows();
    needs = needs || t.needs_grad(p.id());
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return t.push(std::move(out), needs, [layout](Tape& tp, const Matrix& g) {
    Eigen::Index off = 0;
    for (const auto& [id, h] : layout) {
      if (tp.needs_grad(id)) tp.accumulate(id, g.middleRows(off, h));
      off += h;
    }
  });
}

Var gather_rows(Var a, std::span<const Eigen::Index> rows) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  const Matrix& src = a.value();
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), src.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= src.rows()) throw ValidationError("gather_rows out of range");
    out.row(static_cast<Eigen::Index>(r)) = src.row(idx[r]);
  }
  const Eigen::Index src_rows = src.rows();
  return t.push(std::move(out), t.needs_grad(ia), [ia, idx, src_rows](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(src_rows, g.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) full.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
    tp.accumulate(ia, full);
  });
}

Var mean_rows(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  const Eigen::Index m = a.rows();
  if (m == 0) throw ValidationError("mean_rows of an empty matrix");
  return t.push(a.value().colwise().mean(), t.needs_grad(ia), [ia, m](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g.replicate(m, 1) / static_cast<Scalar>(m));
  });
}

Var mean_of(std::span<const Var> rows) {
  if (rows.empty()) throw ValidationError("mean_of an empty list");
  Tape& t = *rows[0].tape();
  Matrix acc = rows[0].value();
  bool needs = t.needs_grad(rows[0].id());
  std::vector<std::size_t> ids{rows[0].id()};
  for (std::size_t k = 1; k < rows.size(); ++k) {
    check_same_shape(acc, rows[k].value(), "mean_of");
    acc += rows[k].value();
    ids.push_back(rows[k].id());
    needs = needs || t.needs_grad(rows[k].id());
  }
  const Scalar inv = 1.0 / static_cast<Scalar>(rows.size());
  acc *= inv;
  return t.push(std::move(acc), needs, [ids, inv](Tape& tp, const Matrix& g) {
    const Matrix share = g * inv;
    for (const auto id : ids) tp.accumulate(id, share);
  });
}

Var rowwise_dot(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "rowwise_dot");
  const auto ia = a.id(), ib = b.id();
  Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
  return t.push(std::move(out), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape& tp, const Matrix& g) {
                  const auto w = g.col(0).array();
                  if (tp.needs_grad(ia))
                    tp.accumulate(ia, (tp.value(ib).array().colwise() * w).matrix());
                  if (tp.needs_grad(ib))
                    tp.accumulate(ib, (tp.value(ia).array().colwise() * w).matrix());
                });
}

Var masked_softmax_rows(Var a, std::span<const std::uint8_t> key_mask) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  const Matrix& x = a.value();
  if (!key_mask.empty() && static_cast<Eigen::Index>(key_mask.size()) != x.cols())
    throw ValidationError("softmax mask width mismatch");
  Matrix p = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (key_mask.empty() || key_mask[static_cast<std::size_t>(j)]) mx = std::max(mx, x(i, j));
    if (!std::isfinite(mx)) continue;
    Scalar z = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (key_mask.empty() || key_mask[static_cast<std::size_t>(j)]) {
        p(i, j) = std::exp(x(i, j) - mx);
        z += p(i, j);
      }
    p.row(i) /= z;
  }
  Matrix saved = p;
  return t.push(std::move(p), t.needs_grad(ia), [ia, saved](Tape& tp, const Matrix& g) {
    const Vector inner = g.cwiseProduct(saved).rowwise().sum();
    tp.accumulate(ia, (saved.array() * (g.colwise() - inner).array()).matrix());
  });
}

Var spmm(const SparseMatrix& lhs, Var rhs) {
  Tape& t = *rhs.tape();
  if (lhs.cols() != rhs.rows()) throw ValidationError("spmm: dimension mismatch");
  const auto ir = rhs.id();
  Matrix out = lhs * rhs.value();
  SparseMatrix lt = lhs.transpose();
  return t.push(std::move(out), t.needs_grad(ir), [ir, lt](Tape& tp, const Matrix& g) {
    tp.accumulate(ir, lt * g);
  });
}

Var weighted_sum(std::span<const Var> scalars, std::span<const Scalar> weights) {
  if (scalars.empty() || scalars.size() != weights.size())
    throw ValidationError("weighted_sum: size mismatch");
  Tape& t = *scalars[0].tape();
  Scalar total = 0;
  bool needs = false;
  std::vector<std::pair<std::size_t, Scalar>> terms;
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    total += weights[k] * scalars[k].scalar();
    terms.emplace_back(scalars[k].id(), weights[k]);
    needs = needs || t.needs_grad(scalars[k].id());
  }
  return t.push(Matrix::Constant(1, 1, total), needs, [terms](Tape& tp, const Matrix& g) {
    for (const auto& [id, w] : terms)
      if (w != 0) tp.accumulate(id, g * w);
  });
}

Var linear(Var x, Parameter& weight, Parameter* bias) {
  Tape& t = *x.tape();
  if (x.cols() != weight.value.rows()) throw ValidationError("linear: width mismatch for " + weight.name);
  Matrix y = x.value() * weight.value;
  if (bias) y.rowwise() += bias->value.row(0);
  const auto ix = x.id();
  Parameter* w = &weight;
  Parameter* b = bias;
  return t.push(std::move(y), true, [ix, w, b](Tape& tp, const Matrix& g) {
    w->grad.noalias() += tp.value(ix).transpose() * g;
    if (b) b->grad.row(0) += g.colwise().sum();
    if (tp.needs_grad(ix)) tp.accumulate(ix, g * w->value.transpose());
  });
}

Var embedding(Tape& tape, Parameter& table, std::span<const int> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.value.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= table.value.rows())
      throw ValidationError("embedding id " + std::to_string(ids[r]) + " out of range");
    out.row(static_cast<Eigen::Index>(r)) = table.value.row(ids[r]);
  }
  std::vector<int> saved(ids.begin(), ids.end());
  Parameter* p = &table;
  return tape.push(std::move(out), true, [saved, p](Tape&, const Matrix& g) {
    for (std::size_t r = 0; r < saved.size(); ++r)
      p->grad.row(saved[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var sparse_embed(Tape& tape, const SparseMatrix& lhs, Parameter& table) {
  if (lhs.cols() != table.value.rows()) throw ValidationError("sparse_embed: width mismatch");
  Matrix out = lhs * table.value;
  SparseMatrix lt = lhs.transpose();
  Parameter* p = &table;
  return tape.push(std::move(out), true, [lt, p](Tape&, const Matrix& g) {
    p->grad += lt * g;
  });
}

Var layer_norm(Var x, Parameter& gamma, Parameter& beta, Scalar eps) {
  Tape& t = *x.tape();
  const Matrix& v = x.value();
  const Eigen::Index n = v.cols();
  if (gamma.value.cols() != n || beta.value.cols() != n)
    throw ValidationError("layer_norm: width mismatch");
  const Vector mean = v.rowwise().mean();
  Matrix centered = v.colwise() - mean;
  const Vector inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<Scalar>(n)) + eps).rsqrt().matrix();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix y = (xhat.array().rowwise() * gamma.value.row(0).array()).matrix();
  y.rowwise() += beta.value.row(0);
  const auto ix = x.id();
  Parameter* g_p = &gamma;
  Parameter* b_p = &beta;
  return t.push(std::move(y), true, [ix, xhat, inv_std, g_p, b_p, n](Tape& tp, const Matrix& g) {
    g_p->grad.row(0) += g.cwiseProduct(xhat).colwise().sum();
    b_p->grad.row(0) += g.colwise().sum();
    if (!tp.needs_grad(ix)) return;
    const Matrix dxhat = (g.array().rowwise() * g_p->value.row(0).array()).matrix();
    const Vector s1 = dxhat.rowwise().sum();
    const Vector s2 = dxhat.cwiseProduct(xhat).rowwise().sum();
    Matrix dx = (static_cast<Scalar>(n) * dxhat.array() - (xhat.array().colwise() * s2.array()))
                    .matrix();
    dx.colwise() -= s1;
    dx = (dx.array().colwise() * (inv_std.array() / static_cast<Scalar>(n))).matrix();
    tp.accumulate(ix, dx);
  });
}

Var add_row_param(Var x, Parameter& row) {
  Tape& t = *x.tape();
  if (row.value.cols() != x.cols()) throw ValidationError("add_row_param: width mismatch");
  Matrix y = x.value();
  y.rowwise() += row.value.row(0);
  const auto ix = x.id();
  Parameter* p = &row;
  return t.push(std::move(y), true, [ix, p](Tape& tp, const Matrix& g) {
    p->grad.row(0) += g.colwise().sum();
    tp.accumulate(ix, g);
  });
}

Var cross_entropy_rows(Var logits, std::span<const int> targets) {
  Tape& t = *logits.tape();
  const Matrix& z = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != z.rows())
    throw ValidationError("cross_entropy_rows: target count mismatch");
  if (targets.empty()) throw ValidationError("cross_entropy_rows: no targets");
  const Eigen::Index m = z.rows();
  Matrix probs(z.rows(), z.cols());
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int target = targets[static_cast<std::size_t>(i)];
    if (target < 0 || target >= z.cols()) throw ValidationError("cross-entropy target out of range");
    const Scalar mx = z.row(i).maxCoeff();
    probs.row(i) = (z.row(i).array() - mx).exp().matrix();
    const Scalar sum = probs.row(i).sum();
    probs.row(i) /= sum;
    loss += std::log(sum) + mx - z(i, target);
  }
  loss /= static_cast<Scalar>(m);
  std::vector<int> saved(targets.begin(), targets.end());
  const auto il = logits.id();
  return t.push(Matrix::Constant(1, 1, loss), t.needs_grad(il),
                [il, probs, saved, m](Tape& tp, const Matrix& g) {
                  Matrix d = probs;
                  for (Eigen::Index i = 0; i < m; ++i) d(i, saved[static_cast<std::size_t>(i)]) -= 1.0;
                  tp.accumulate(il, d * (g(0, 0) / static_cast<Scalar>(m)));
                });
}

Var bce_with_logits(Var logits, std::span<const Scalar> labels) {
  Tape& t = *logits.tape();
  const Matrix& z = logits.value();
  if (z.cols() != 1 || static_cast<Eigen::Index>(labels.size()) != z.rows())
    throw ValidationError("bce_with_logits: expects an m x 1 logit column and m labels");
  if (labels.empty()) throw ValidationError("bce_with_logits: no labels");
  const Eigen::Index m = z.rows();
  Scalar loss = 0;
  Matrix d(m, 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Scalar x = z(i, 0), y = labels[static_cast<std::size_t>(i)];
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    d(i, 0) = 1.0 / (1.0 + std::exp(-x)) - y;
  }
  loss /= static_cast<Scalar>(m);
  const auto il = logits.id();
  return t.push(Matrix::Constant(1, 1, loss), t.needs_grad(il), [il, d, m](Tape& tp, const Matrix& g) {
    tp.accumulate(il, d * (g(0, 0) / static_cast<Scalar>(m)));
  });
}

// --- optimizer -----------------------------------------------------------

Adam::Adam(Options options) : opt_(options) {}

void Adam::step(ParameterStore& params) {
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
      v_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    }
  }
  Scalar factor = 1.0;
  if (opt_.clip_norm > 0) {
    const Scalar norm = params.grad_norm();
    if (norm > opt_.clip_norm) factor = opt_.clip_norm / norm;
  }
  ++t_;
  const Scalar bc1 = 1.0 - std::pow(opt_.beta1, static_cast<Scalar>(t_));
  const Scalar bc2 = 1.0 - std::pow(opt_.beta2, static_cast<Scalar>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    const Matrix g = p.grad * factor;
    m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g;
    v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g.cwiseProduct(g);
    p.value.array() -= opt_.learning_rate * (m_[i].array() / bc1) /
                       ((v_[i].array() / bc2).sqrt() + opt_.epsilon);
  }
}

std::string Adam::serialize() const {
  std::string out;
  put(out, kAdamMagic);
  put<std::uint64_t>(out, t_);
  put<std::uint64_t>(out, m_.size());
  for (std::size_t i = 0; i < m_.size(); ++i) {
    put_matrix(out, m_[i]);
    put_matrix(out, v_[i]);
  }
  return out;
}

void Adam::deserialize(std::string_view in) {
  if (get<std::uint32_t>(in) != kAdamMagic) throw ValidationError("not an optimizer blob");
  t_ = get<std::uint64_t>(in);
  const auto count = get<std::uint64_t>(in);
  m_.assign(count, Matrix());
  v_.assign(count, Matrix());
  for (std::size_t i = 0; i < count; ++i) {
    get_matrix(in, m_[i], true);
    get_matrix(in, v_[i], true);
  }
}

}  // namespace irembed::nn
