// SPDX-License-Identifier: Apache-2.0
#include "rvesurr/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "rvesurr/error.hpp"

namespace rvesurr {

// ---------------------------------------------------------------- Tensor2

Tensor2 Tensor2::from_sym(const SymTensor2& s) {
  Tensor2 t;
  t(0, 0) = s.xx;
  t(1, 1) = s.yy;
  t(2, 2) = s.zz;
  t(0, 1) = t(1, 0) = s.xy;
  t(1, 2) = t(2, 1) = s.yz;
  t(0, 2) = t(2, 0) = s.xz;
  return t;
}

Tensor2 Tensor2::transpose() const {
  Tensor2 t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t(i, j) = (*this)(j, i);
  return t;
}

SymTensor2 Tensor2::sym() const {
  const auto& a = *this;
  return {a(0, 0),
          a(1, 1),
          a(2, 2),
          0.5 * (a(0, 1) + a(1, 0)),
          0.5 * (a(1, 2) + a(2, 1)),
          0.5 * (a(0, 2) + a(2, 0))};
}

bool Tensor2::is_finite() const {
  return std::all_of(c.begin(), c.end(), [](double v) { return std::isfinite(v); });
}

Tensor2& Tensor2::operator+=(const Tensor2& o) {
  for (int k = 0; k < 9; ++k) c[k] += o.c[k];
  return *this;
}
Tensor2& Tensor2::operator-=(const Tensor2& o) {
  for (int k = 0; k < 9; ++k) c[k] -= o.c[k];
  return *this;
}
Tensor2& Tensor2::operator*=(double s) {
  for (auto& v : c) v *= s;
  return *this;
}

Tensor2 operator+(Tensor2 a, const Tensor2& b) { return a += b; }
Tensor2 operator-(Tensor2 a, const Tensor2& b) { return a -= b; }
Tensor2 operator*(Tensor2 a, double s) { return a *= s; }
Tensor2 operator*(double s, Tensor2 a) { return a *= s; }

Tensor2 operator*(const Tensor2& a, const Tensor2& b) {
  Tensor2 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
  return r;
}

// ------------------------------------------------------------- SymTensor2

double SymTensor2::operator()(int i, int j) const {
  if (i == j) return i == 0 ? xx : (i == 1 ? yy : zz);
  const int k = i + j;  // 1 -> xy, 2 -> xz, 3 -> yz
  return k == 1 ? xy : (k == 2 ? xz : yz);
}

bool SymTensor2::is_finite() const {
  return std::isfinite(xx) && std::isfinite(yy) && std::isfinite(zz) && std::isfinite(xy) &&
         std::isfinite(yz) && std::isfinite(xz);
}

SymTensor2& SymTensor2::operator+=(const SymTensor2& o) {
  xx += o.xx, yy += o.yy, zz += o.zz, xy += o.xy, yz += o.yz, xz += o.xz;
  return *this;
}
SymTensor2& SymTensor2::operator-=(const SymTensor2& o) {
  xx -= o.xx, yy -= o.yy, zz -= o.zz, xy -= o.xy, yz -= o.yz, xz -= o.xz;
  return *this;
}
SymTensor2& SymTensor2::operator*=(double s) {
  xx *= s, yy *= s, zz *= s, xy *= s, yz *= s, xz *= s;
  return *this;
}

SymTensor2 operator+(SymTensor2 a, const SymTensor2& b) { return a += b; }
SymTensor2 operator-(SymTensor2 a, const SymTensor2& b) { return a -= b; }
SymTensor2 operator*(SymTensor2 a, double s) { return a *= s; }
SymTensor2 operator*(double s, SymTensor2 a) { return a *= s; }

SymTensor2 SpectralDecomp::reassemble() const {
  return reassemble([](double v) { return v; });
}

// ------------------------------------------------------- eigen-solver

SpectralDecomp sym_eig(const SymTensor2& s) {
  if (!s.is_finite()) throw InvalidInput("sym_eig: non-finite tensor component");

  double a[3][3] = {{s.xx, s.xy, s.xz}, {s.xy, s.yy, s.yz}, {s.xz, s.yz, s.zz}};
  double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  const double scale = std::max({std::abs(s.xx), std::abs(s.yy), std::abs(s.zz),
                                 std::abs(s.xy), std::abs(s.yz), std::abs(s.xz)});
  constexpr int kMaxSweeps = 50;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
    if (off == 0.0 || off <= 1e-300 + 1e-17 * scale) break;

    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const double apq = a[p][q];
        if (apq == 0.0) continue;
        // Rotation annihilating a[p][q] (smaller-angle root).
        const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;

        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - sn * akq;
          a[k][q] = sn * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - sn * aqk;
          a[q][k] = sn * apk + c * aqk;
        }
        a[p][q] = a[q][p] = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - sn * vkq;
          v[k][q] = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return a[i][i] > a[j][j]; });

  SpectralDecomp out;
  for (int k = 0; k < 3; ++k) {
    out.values[k] = a[order[k]][order[k]];
    for (int i = 0; i < 3; ++i) out.vectors(i, k) = v[i][order[k]];
  }
  return out;
}

SymTensor2 log_spd(const SymTensor2& s) {
  const auto e = sym_eig(s);
  for (int k = 0; k < 3; ++k) {
    if (!(e.values[k] > 0.0)) {
      std::ostringstream msg;
      msg << "log_spd: eigenvalue " << k << " = " << e.values[k] << " is not positive";
      throw DomainError(msg.str());
    }
  }
  return e.reassemble([](double l) { return std::log(l); });
}

SymTensor2 exp_sym(const SymTensor2& s) {
  return sym_eig(s).reassemble([](double l) { return std::exp(l); });
}

SymTensor2 sqrt_spd(const SymTensor2& s) {
  const auto e = sym_eig(s);
  if (!(e.values[2] > 0.0)) throw DomainError("sqrt_spd: tensor is not positive definite");
  return e.reassemble([](double l) { return std::sqrt(l); });
}

// ---------------------------------------------------------- invariants

double trace(const SymTensor2& s) { return s.xx + s.yy + s.zz; }
double trace(const Tensor2& t) { return t(0, 0) + t(1, 1) + t(2, 2); }

SymTensor2 dev(const SymTensor2& s) {
  const double m = trace(s) / 3.0;
  SymTensor2 d = s;
  d.xx -= m;
  d.yy -= m;
  d.zz -= m;
  return d;
}

Tensor2 dev(const Tensor2& t) {
  const double m = trace(t) / 3.0;
  Tensor2 d = t;
  d(0, 0) -= m;
  d(1, 1) -= m;
  d(2, 2) -= m;
  return d;
}

double det(const Tensor2& t) {
  return t(0, 0) * (t(1, 1) * t(2, 2) - t(1, 2) * t(2, 1)) -
         t(0, 1) * (t(1, 0) * t(2, 2) - t(1, 2) * t(2, 0)) +
         t(0, 2) * (t(1, 0) * t(2, 1) - t(1, 1) * t(2, 0));
}

double det(const SymTensor2& s) { return det(Tensor2::from_sym(s)); }

Tensor2 inverse(const Tensor2& t) {
  const double d = det(t);
  if (d == 0.0 || !std::isfinite(d)) throw DomainError("inverse: singular tensor");
  Tensor2 r;
  r(0, 0) = t(1, 1) * t(2, 2) - t(1, 2) * t(2, 1);
  r(0, 1) = t(0, 2) * t(2, 1) - t(0, 1) * t(2, 2);
  r(0, 2) = t(0, 1) * t(1, 2) - t(0, 2) * t(1, 1);
  r(1, 0) = t(1, 2) * t(2, 0) - t(1, 0) * t(2, 2);
  r(1, 1) = t(0, 0) * t(2, 2) - t(0, 2) * t(2, 0);
  r(1, 2) = t(0, 2) * t(1, 0) - t(0, 0) * t(1, 2);
  r(2, 0) = t(1, 0) * t(2, 1) - t(1, 1) * t(2, 0);
  r(2, 1) = t(0, 1) * t(2, 0) - t(0, 0) * t(2, 1);
  r(2, 2) = t(0, 0) * t(1, 1) - t(0, 1) * t(1, 0);
  return r * (1.0 / d);
}

double ddot(const SymTensor2& a, const SymTensor2& b) {
  return a.xx * b.xx + a.yy * b.yy + a.zz * b.zz + 2.0 * (a.xy * b.xy + a.yz * b.yz + a.xz * b.xz);
}

double ddot(const Tensor2& a, const Tensor2& b) {
  double s = 0.0;
  for (int k = 0; k < 9; ++k) s += a.c[k] * b.c[k];
  return s;
}

double norm(const SymTensor2& s) { return std::sqrt(ddot(s, s)); }
double norm(const Tensor2& t) { return std::sqrt(ddot(t, t)); }

SymTensor2 gram(const Tensor2& a) { return (a.transpose() * a).sym(); }

SymTensor2 push_forward(const Tensor2& a, const SymTensor2& s) {
  return (a * Tensor2::from_sym(s) * a.transpose()).sym();
}

SymTensor2 square(const SymTensor2& s) {
  const Tensor2 t = Tensor2::from_sym(s);
  return (t * t).sym();
}

}  // namespace rvesurr
