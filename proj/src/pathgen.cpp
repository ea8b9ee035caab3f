// SPDX-License-Identifier: Apache-2.0
#include "rvesurr/pathgen.hpp"

#include <algorithm>
#include <numbers>

#include "rvesurr/error.hpp"

namespace rvesurr {

void RandomWalkConfig::validate() const {
  if (!(delta_r_min >= 0.0 && delta_r_min < delta_r && delta_r < r_max))
    throw InvalidInput("random walk config requires 0 <= delta_r_min < delta_r < r_max");
  if (max_steps <= 0) throw InvalidInput("random walk config requires max_steps > 0");
}

void CyclicConfig::validate() const {
  if (n_reversals < 1) throw InvalidInput("cyclic path requires n_reversals >= 1");
  if (!(step_size > 0.0 && step_size < amplitude_max))
    throw InvalidInput("cyclic path requires 0 < step_size < amplitude_max");
  if (amplitude_max >= 1.0)
    throw InvalidInput("cyclic path amplitude must stay below 1 to keep U positive definite");
}

std::string to_string(PathKind kind) {
  return kind == PathKind::random_walk ? "random_walk" : "cyclic";
}

namespace {

SymTensor2 in_plane(double l1, double l2, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  // n1 = (c, s), n2 = (-s, c)
  SymTensor2 d;
  d.xx = l1 * c * c + l2 * s * s;
  d.yy = l1 * s * s + l2 * c * c;
  d.xy = (l1 - l2) * c * s;
  return d;
}

/// Random in-plane split of a squared radius into two signed eigenvalues.
void split_radius(Rng& rng, double r2, double& l1, double& l2) {
  const double share = rng.uniform();
  l1 = rng.sign() * std::sqrt(share * r2);
  l2 = rng.sign() * std::sqrt((1.0 - share) * r2);
}

}  // namespace

Increment random_increment(Rng& rng, const RandomWalkConfig& cfg) {
  Increment inc;
  inc.angle = rng.uniform() * std::numbers::pi;
  const double hi = cfg.delta_r * cfg.delta_r;
  const double lo = cfg.delta_r_min * cfg.delta_r_min;
  // 1 - u is in (0, 1], so r2 lands in (lo, hi].
  const double r2 = lo + (1.0 - rng.uniform()) * (hi - lo);
  split_radius(rng, r2, inc.lambda1, inc.lambda2);
  inc.delta_u = in_plane(inc.lambda1, inc.lambda2, inc.angle);
  return inc;
}

double stretch_deviation(const SymTensor2& u) {
  const auto e = sym_eig(u);
  double m = 0.0;
  for (double l : e.values) m = std::max(m, std::abs(l - 1.0));
  return m;
}

LoadingPath generate_random_path(const RandomWalkConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  LoadingPath path;
  path.kind = PathKind::random_walk;
  path.steps.push_back(SymTensor2::identity());
  path.strains.push_back(SymTensor2::zero());

  SymTensor2 u = SymTensor2::identity();
  for (int n = 0; n < cfg.max_steps; ++n) {
    u += random_increment(rng, cfg).delta_u;
    path.steps.push_back(u);
    path.strains.push_back(u_to_e(u));
    if (stretch_deviation(u) > cfg.r_max) return path;
  }
  path.hit_step_cap = true;
  return path;
}

CyclicPlan plan_cyclic_path(const CyclicConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  CyclicPlan plan;
  const double angle = rng.uniform() * std::numbers::pi;
  double l1 = 0, l2 = 0;
  split_radius(rng, 1.0, l1, l2);
  plan.direction = in_plane(l1, l2, angle);
  plan.amplitudes.reserve(cfg.n_reversals);
  for (int i = 0; i < cfg.n_reversals; ++i)
    plan.amplitudes.push_back(rng.uniform(-cfg.amplitude_max, cfg.amplitude_max));
  return plan;
}

LoadingPath generate_cyclic_path(const CyclicConfig& cfg) {
  const CyclicPlan plan = plan_cyclic_path(cfg);
  LoadingPath path;
  path.kind = PathKind::cyclic;

  auto emit = [&](double s) {
    const SymTensor2 u = SymTensor2::identity() + s * plan.direction;
    path.steps.push_back(u);
    path.strains.push_back(u_to_e(u));
  };

  emit(0.0);
  std::vector<double> targets = plan.amplitudes;
  targets.push_back(0.0);
  double s = 0.0;
  for (double target : targets) {
    const double span = target - s;
    const int n = static_cast<int>(std::ceil(std::abs(span) / cfg.step_size - 1e-12));
    const double start = s;
    for (int k = 1; k <= n; ++k) emit(k == n ? target : start + span * k / n);
    s = target;
  }
  return path;
}

Tensor2 u_to_f(const SymTensor2& u) { return Tensor2::from_sym(u); }

SymTensor2 u_to_e(const SymTensor2& u) {
  SymTensor2 e = square(u) - SymTensor2::identity();
  return 0.5 * e;
}

}  // namespace rvesurr
