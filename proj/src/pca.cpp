// SPDX-License-Identifier: Apache-2.0
#include "rvesurr/pca.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "rvesurr/error.hpp"
#include "rvesurr/rng.hpp"

namespace rvesurr {

namespace {

// Householder reduction of the symmetric matrix held in v to tridiagonal
// form. On exit d holds the diagonal, e the sub-diagonal (e[0] = 0) and v the
// accumulated orthogonal transformation.
void tridiagonalize(Eigen::MatrixXd& v, Eigen::VectorXd& d, Eigen::VectorXd& e) {
  const Eigen::Index n = v.rows();
  for (Eigen::Index j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (Eigen::Index i = n - 1; i > 0; --i) {
    double scale = 0.0, h = 0.0;
    for (Eigen::Index k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (Eigen::Index j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (Eigen::Index k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (Eigen::Index j = 0; j < i; ++j) e[j] = 0.0;

      for (Eigen::Index j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (Eigen::Index k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (Eigen::Index j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (Eigen::Index j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (Eigen::Index j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (Eigen::Index k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (Eigen::Index i = 0; i < n - 1; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (Eigen::Index k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (Eigen::Index j = 0; j <= i; ++j) {
        double g = 0.0;
        for (Eigen::Index k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (Eigen::Index k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (Eigen::Index k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL iterations on the tridiagonal (d, e), accumulating into v.
void implicit_ql(Eigen::MatrixXd& v, Eigen::VectorXd& d, Eigen::VectorXd& e) {
  const Eigen::Index n = v.rows();
  for (Eigen::Index i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0, tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (Eigen::Index l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    Eigen::Index m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m == n) m = n - 1;

    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 60) throw Error("symmetric_eigen: QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (Eigen::Index i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = c, c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (Eigen::Index i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (Eigen::Index k = 0; k < n; ++k) {
            h = v(k, i + 1);
            v(k, i + 1) = s * v(k, i) + c * h;
            v(k, i) = c * v(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace

SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("symmetric_eigen: matrix is not square");
  if (!m.allFinite()) throw InvalidInput("symmetric_eigen: non-finite entry");
  const Eigen::Index n = m.rows();
  SymmetricEigen out;
  if (n == 0) return out;

  Eigen::MatrixXd v = m;
  Eigen::VectorXd d(n), e(n);
  tridiagonalize(v, d, e);
  implicit_ql(v, d, e);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return d[a] > d[b]; });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values[k] = d[order[k]];
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

// ------------------------------------------------------------------- model

Eigen::VectorXd PcaModel::project(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionMismatch("pca project: expected length " + std::to_string(dim()));
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  return components.transpose() * (xv - mean);
}

Eigen::VectorXd PcaModel::reconstruct(std::span<const double> xi) const {
  if (xi.size() != static_cast<std::size_t>(components.cols()))
    throw DimensionMismatch("pca reconstruct: expected " + std::to_string(components.cols()) +
                            " coefficients");
  const Eigen::Map<const Eigen::VectorXd> c(xi.data(), static_cast<Eigen::Index>(xi.size()));
  return components * c + mean;
}

PcaModel PcaModel::truncated(int p) const {
  if (p < 0 || p > components.cols()) throw InvalidInput("pca truncated: p out of range");
  PcaModel m = *this;
  m.components = components.leftCols(p);
  m.retained_p = p;
  return m;
}

std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw InvalidInput("subsample fraction must lie in (0, 1]");
  const auto k = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (k == n) return idx;
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

int retained_for(const Eigen::VectorXd& eigenvalues, double delta) {
  const double total = eigenvalues.sum();
  if (!(total > 0.0)) return 0;
  double kept = 0.0;
  for (Eigen::Index p = 0; p < eigenvalues.size(); ++p) {
    if (1.0 - kept / total <= delta) return static_cast<int>(p);
    kept += eigenvalues[p];
  }
  return static_cast<int>(eigenvalues.size());
}

PcaModel fit_pca(const Block& snapshots, const PcaFitOptions& options) {
  const std::size_t d = snapshots.cols;
  if (d > options.max_dim)
    throw InvalidInput("pca fit: dimension " + std::to_string(d) + " exceeds the cap of " +
                       std::to_string(options.max_dim) +
                       "; use a snapshot-space (n x n) decomposition instead");
  const auto idx = subsample_indices(snapshots.rows, options.subsample_fraction, options.seed);
  if (idx.size() < 2) throw InvalidInput("pca fit needs at least 2 snapshots after subsampling");
  if (options.retention.p && (*options.retention.p < 0 || *options.retention.p > static_cast<int>(d)))
    throw InvalidInput("pca fit: retained p must lie in [0, d]");

  const auto n = static_cast<Eigen::Index>(idx.size());
  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd a(dd, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < dd; ++i) a(i, j) = snapshots(idx[j], i);

  PcaModel model;
  model.n_samples = idx.size();
  model.mean = a.rowwise().mean();
  a.colwise() -= model.mean;
  Eigen::MatrixXd m(dd, dd);
  m.setZero();
  m.selfadjointView<Eigen::Lower>().rankUpdate(a);
  m.triangularView<Eigen::StrictlyUpper>() = m.transpose();

  SymmetricEigen eig = symmetric_eigen(m);
  const double floor = 1e-12 * std::max(0.0, eig.values.size() ? eig.values[0] : 0.0);
  for (Eigen::Index k = 0; k < eig.values.size(); ++k)
    if (eig.values[k] < floor || eig.values[k] < 0.0) eig.values[k] = 0.0;

  model.eigenvalues = eig.values;
  model.delta = options.retention.delta;
  model.retained_p = options.retention.p ? *options.retention.p
                                         : retained_for(eig.values, options.retention.delta.value_or(0.0));
  model.components = eig.vectors.leftCols(model.retained_p);
  return model;
}

double residual_fraction(const PcaModel& model, int p) {
  const auto& ev = model.eigenvalues;
  if (p < 0 || p > ev.size()) throw InvalidInput("residual_fraction: p out of range");
  const double total = ev.sum();
  if (!(total > 0.0)) return 0.0;
  const double kept = ev.head(p).sum();
  return std::max(0.0, 1.0 - kept / total);
}

// ------------------------------------------------------------------- files

namespace {
constexpr char kPcaMagic[8] = {'R', 'V', 'E', 'P', 'C', 'A', '1', '\0'};
constexpr std::uint32_t kPcaVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void get(std::istream& is, T& v) {
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("truncated pca file");
}
}  // namespace

void write_pca(const std::filesystem::path& file, const PcaModel& model) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw InvalidInput("cannot open " + file.string() + " for writing");
  const auto d = static_cast<std::uint32_t>(model.dim());
  const auto p = static_cast<std::uint32_t>(model.components.cols());
  os.write(kPcaMagic, sizeof(kPcaMagic));
  put(os, kPcaVersion);
  put(os, d);
  put(os, p);
  put(os, model.n_samples);
  put(os, model.delta.value_or(std::numeric_limits<double>::quiet_NaN()));
  for (std::uint32_t i = 0; i < d; ++i) put(os, model.mean[i]);
  for (std::uint32_t i = 0; i < d; ++i) put(os, model.eigenvalues[i]);
  for (std::uint32_t i = 0; i < d; ++i)
    for (std::uint32_t k = 0; k < p; ++k) put(os, model.components(i, k));
  if (!os) throw InvalidInput("failed writing " + file.string());
}

PcaModel read_pca(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw MissingArtifact("cannot open " + file.string(), "pca-fit");
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kPcaMagic, sizeof(magic)) != 0)
    throw FormatError(file.string() + ": not a pca model file");
  std::uint32_t version = 0, d = 0, p = 0;
  get(is, version);
  if (version != kPcaVersion) throw FormatError(file.string() + ": unsupported pca version");
  get(is, d);
  get(is, p);
  PcaModel m;
  get(is, m.n_samples);
  double delta = 0;
  get(is, delta);
  if (!std::isnan(delta)) m.delta = delta;
  m.mean.resize(d);
  m.eigenvalues.resize(d);
  m.components.resize(d, p);
  for (std::uint32_t i = 0; i < d; ++i) get(is, m.mean[i]);
  for (std::uint32_t i = 0; i < d; ++i) get(is, m.eigenvalues[i]);
  for (std::uint32_t i = 0; i < d; ++i)
    for (std::uint32_t k = 0; k < p; ++k) get(is, m.components(i, k));
  m.retained_p = static_cast<int>(p);
  return m;
}

}  // namespace rvesurr
