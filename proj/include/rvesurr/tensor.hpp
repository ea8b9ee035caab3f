// SPDX-License-Identifier: Apache-2.0
//
// Small dense 3x3 tensor algebra used by the constitutive models and the
// loading-path generator. Plane strain is carried with full 3x3 storage.
#pragma once

#include <array>
#include <cmath>

namespace rvesurr {

struct SymTensor2;

/// General second-order tensor, row-major.
struct Tensor2 {
  std::array<double, 9> c{};

  static Tensor2 identity() {
    Tensor2 t;
    t(0, 0) = t(1, 1) = t(2, 2) = 1.0;
    return t;
  }
  static Tensor2 zero() { return Tensor2{}; }
  static Tensor2 from_sym(const SymTensor2& s);

  double& operator()(int i, int j) { return c[3 * i + j]; }
  double operator()(int i, int j) const { return c[3 * i + j]; }

  Tensor2 transpose() const;
  /// Symmetric part, (T + T^T) / 2.
  SymTensor2 sym() const;
  bool is_finite() const;

  Tensor2& operator+=(const Tensor2& o);
  Tensor2& operator-=(const Tensor2& o);
  Tensor2& operator*=(double s);

  friend bool operator==(const Tensor2&, const Tensor2&) = default;
};

Tensor2 operator+(Tensor2 a, const Tensor2& b);
Tensor2 operator-(Tensor2 a, const Tensor2& b);
Tensor2 operator*(Tensor2 a, double s);
Tensor2 operator*(double s, Tensor2 a);
/// Single contraction A . B.
Tensor2 operator*(const Tensor2& a, const Tensor2& b);

/// Symmetric second-order tensor with one storage slot per component pair.
struct SymTensor2 {
  double xx = 0, yy = 0, zz = 0, xy = 0, yz = 0, xz = 0;

  static SymTensor2 identity() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }
  static SymTensor2 zero() { return {}; }
  static SymTensor2 diag(double a, double b, double c) { return {a, b, c, 0, 0, 0}; }

  double operator()(int i, int j) const;
  bool is_finite() const;

  SymTensor2& operator+=(const SymTensor2& o);
  SymTensor2& operator-=(const SymTensor2& o);
  SymTensor2& operator*=(double s);

  friend bool operator==(const SymTensor2&, const SymTensor2&) = default;
};

SymTensor2 operator+(SymTensor2 a, const SymTensor2& b);
SymTensor2 operator-(SymTensor2 a, const SymTensor2& b);
SymTensor2 operator*(SymTensor2 a, double s);
SymTensor2 operator*(double s, SymTensor2 a);

/// Eigenvalues in descending order; eigenvectors stored as the columns of
/// `vectors` (vectors(i, k) is component i of eigenvector k).
struct SpectralDecomp {
  std::array<double, 3> values{};
  Tensor2 vectors = Tensor2::identity();

  /// sum_k f(lambda_k) n_k (x) n_k
  template <class F>
  SymTensor2 reassemble(F&& f) const;
  SymTensor2 reassemble() const;
};

/// Cyclic Jacobi eigen-decomposition of a symmetric 3x3 tensor.
/// Throws InvalidInput on non-finite entries.
SpectralDecomp sym_eig(const SymTensor2& s);

/// Logarithm of a symmetric positive definite tensor. Throws DomainError
/// naming the first non-positive eigenvalue.
SymTensor2 log_spd(const SymTensor2& s);
SymTensor2 exp_sym(const SymTensor2& s);
/// Principal square root of an SPD tensor.
SymTensor2 sqrt_spd(const SymTensor2& s);

SymTensor2 dev(const SymTensor2& s);
Tensor2 dev(const Tensor2& t);
double trace(const SymTensor2& s);
double trace(const Tensor2& t);
double det(const Tensor2& t);
double det(const SymTensor2& s);
/// Throws DomainError for a singular argument.
Tensor2 inverse(const Tensor2& t);

/// A : B
double ddot(const SymTensor2& a, const SymTensor2& b);
double ddot(const Tensor2& a, const Tensor2& b);
double norm(const SymTensor2& s);
double norm(const Tensor2& t);

/// A^T . A
SymTensor2 gram(const Tensor2& a);
/// A . S . A^T
SymTensor2 push_forward(const Tensor2& a, const SymTensor2& s);
/// S . S
SymTensor2 square(const SymTensor2& s);

template <class F>
SymTensor2 SpectralDecomp::reassemble(F&& f) const {
  SymTensor2 out;
  for (int k = 0; k < 3; ++k) {
    const double fk = f(values[k]);
    const double n0 = vectors(0, k), n1 = vectors(1, k), n2 = vectors(2, k);
    out.xx += fk * n0 * n0;
    out.yy += fk * n1 * n1;
    out.zz += fk * n2 * n2;
    out.xy += fk * n0 * n1;
    out.yz += fk * n1 * n2;
    out.xz += fk * n0 * n2;
  }
  return out;
}

}  // namespace rvesurr
