// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rvesurr/datastore.hpp"

namespace rvesurr {

/// Symmetric eigen-decomposition by Householder tridiagonalization followed
/// by the implicit QL algorithm. Eigenvalues are returned in descending order
/// with matching eigenvector columns.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};
SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& m);

/// Either a fixed number of retained components or a residual tolerance.
struct Retention {
  std::optional<int> p;
  std::optional<double> delta;

  static Retention fixed(int p) { return {p, std::nullopt}; }
  static Retention tolerance(double delta) { return {std::nullopt, delta}; }
};

struct PcaModel {
  Eigen::VectorXd mean;        // a_mu, length d
  Eigen::MatrixXd components;  // V, d x p, orthonormal columns
  Eigen::VectorXd eigenvalues; // of M = A A^T, length d, descending
  int retained_p = 0;
  std::optional<double> delta;
  std::uint64_t n_samples = 0;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }

  /// xi = V^T (x - a_mu). Throws DimensionMismatch.
  Eigen::VectorXd project(std::span<const double> x) const;
  /// x = V xi + a_mu. Throws DimensionMismatch.
  Eigen::VectorXd reconstruct(std::span<const double> xi) const;

  /// Copy restricted to the leading p components.
  PcaModel truncated(int p) const;
};

struct PcaFitOptions {
  double subsample_fraction = 1.0;
  Retention retention = Retention::tolerance(0.0);
  std::uint64_t seed = 0;
  std::size_t max_dim = 10000;
};

/// Indices of the snapshots picked for the fit (sorted, no repeats).
std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed);

/// Fits on the rows of `snapshots` (one snapshot per row).
PcaModel fit_pca(const Block& snapshots, const PcaFitOptions& options);

/// 1 - sum_{i<=p} Lambda_i / sum_k Lambda_k  (0 when the spectrum is zero).
double residual_fraction(const PcaModel& model, int p);

/// Smallest p whose residual fraction is <= delta.
int retained_for(const Eigen::VectorXd& eigenvalues, double delta);

void write_pca(const std::filesystem::path& file, const PcaModel& model);
PcaModel read_pca(const std::filesystem::path& file);

}  // namespace rvesurr
