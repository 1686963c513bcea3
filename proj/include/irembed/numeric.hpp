// SPDX-License-Identifier: Apache-2.0
//
// Scalar-generic numeric helpers shared by the model and the evaluation
// harness.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "irembed/errors.hpp"

namespace irembed {

/// SplitMix64 finalizer; derives independent stream seeds from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// D^-1/2 (A + I) D^-1/2 with A the symmetrized 0/1 adjacency of `edges`.
template <typename Scalar>
Eigen::SparseMatrix<Scalar, Eigen::RowMajor> normalized_adjacency(
    Eigen::Index num_nodes, std::span<const std::pair<Eigen::Index, Eigen::Index>> edges) {
  std::vector<std::vector<Eigen::Index>> nbrs(static_cast<std::size_t>(num_nodes));
  for (Eigen::Index i = 0; i < num_nodes; ++i) nbrs[static_cast<std::size_t>(i)].push_back(i);
  for (const auto& [s, d] : edges) {
    if (s == d) continue;
    nbrs[static_cast<std::size_t>(s)].push_back(d);
    nbrs[static_cast<std::size_t>(d)].push_back(s);
  }
  std::vector<Scalar> inv_sqrt_deg(static_cast<std::size_t>(num_nodes));
  for (auto& list : nbrs) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  for (std::size_t i = 0; i < nbrs.size(); ++i)
    inv_sqrt_deg[i] = Scalar(1) / std::sqrt(static_cast<Scalar>(nbrs[i].size()));
  std::vector<Eigen::Triplet<Scalar>> trips;
  for (std::size_t i = 0; i < nbrs.size(); ++i)
    for (const auto j : nbrs[i])
      trips.emplace_back(static_cast<Eigen::Index>(i), j,
                         inv_sqrt_deg[i] * inv_sqrt_deg[static_cast<std::size_t>(j)]);
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> a(num_nodes, num_nodes);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

/// Element-wise arithmetic mean of equally wide row vectors.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic> mean_of_rows(
    std::span<const Derived> rows) {
  using Row = Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic>;
  if (rows.empty()) throw ValidationError("cannot aggregate an empty list of vectors");
  Row acc = rows.front();
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].size() != acc.size()) throw ValidationError("vectors differ in width");
    acc += rows[k];
  }
  return acc / static_cast<typename Derived::Scalar>(rows.size());
}

/// exp(mean(log v)); every entry must be strictly positive.
template <typename Derived>
typename Derived::Scalar geometric_mean(const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  if (values.size() == 0) throw ValidationError("geometric mean of no values");
  Scalar log_sum = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const Scalar v = values.derived().coeff(i);
    if (!(v > Scalar(0))) throw ValidationError("geometric mean needs positive values");
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<Scalar>(values.size()));
}

inline double geometric_mean(std::span<const double> values) {
  return geometric_mean(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                          static_cast<Eigen::Index>(values.size())));
}

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax_first(const Eigen::DenseBase<Derived>& values) {
  if (values.size() == 0) throw ValidationError("argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i)
    if (values.derived().coeff(i) > values.derived().coeff(best)) best = i;
  return best;
}

}  // namespace irembed
