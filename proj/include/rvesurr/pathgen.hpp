// SPDX-License-Identifier: Apache-2.0
//
// Macro loading paths: random walks and proportional cyclic paths in the
// space of right stretch tensors, restricted to in-plane (2D) loading.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rvesurr/rng.hpp"
#include "rvesurr/tensor.hpp"

namespace rvesurr {

struct RandomWalkConfig {
  double delta_r_min = 5e-4;
  double delta_r = 5e-3;
  double r_max = 0.1;
  int max_steps = 5000;
  std::uint64_t seed = 0;

  /// Throws InvalidInput unless 0 <= delta_r_min < delta_r < r_max and
  /// max_steps > 0.
  void validate() const;
};

enum class PathKind : std::uint8_t { random_walk = 0, cyclic = 1 };

std::string to_string(PathKind kind);

struct LoadingPath {
  PathKind kind = PathKind::random_walk;
  std::vector<SymTensor2> steps;    // U_M per step, steps[0] = I
  std::vector<SymTensor2> strains;  // E_M per step
  /// True when a random walk stopped at max_steps instead of at r_max.
  bool hit_step_cap = false;

  std::size_t size() const { return steps.size(); }
};

/// One random increment together with the draws that produced it.
struct Increment {
  SymTensor2 delta_u;
  double lambda1 = 0, lambda2 = 0;
  /// In-plane angle of n1, in [0, pi).
  double angle = 0;

  double eigen_norm() const { return std::sqrt(lambda1 * lambda1 + lambda2 * lambda2); }
};

/// Draws dU = l1 n1(x)n1 + l2 n2(x)n2 with l1^2 + l2^2 a random split of
/// R uniform in (delta_r_min^2, delta_r^2] and independent random signs.
Increment random_increment(Rng& rng, const RandomWalkConfig& cfg);

/// Accumulates increments until max_i |lambda_i(U) - 1| > r_max or until
/// max_steps increments were taken.
LoadingPath generate_random_path(const RandomWalkConfig& cfg);

struct CyclicConfig {
  std::uint64_t seed = 0;
  int n_reversals = 2;
  double amplitude_max = 0.1;
  double step_size = 2.5e-3;

  void validate() const;
};

/// Proportional path U(t) = I + s(t) D, with D a random in-plane direction of
/// unit eigen-norm and s(t) ramping 0 -> a_1 -> ... -> a_n -> 0.
LoadingPath generate_cyclic_path(const CyclicConfig& cfg);

/// Random direction and reversal amplitudes used by generate_cyclic_path;
/// exposed so the scalar ramp can be checked independently.
struct CyclicPlan {
  SymTensor2 direction;
  std::vector<double> amplitudes;
};
CyclicPlan plan_cyclic_path(const CyclicConfig& cfg);

/// F_M = R_M . U_M with R_M = I.
Tensor2 u_to_f(const SymTensor2& u);
/// E_M = (U^2 - I) / 2.
SymTensor2 u_to_e(const SymTensor2& u);

/// Largest stretch deviation max_i |lambda_i(U) - 1|.
double stretch_deviation(const SymTensor2& u);

}  // namespace rvesurr
