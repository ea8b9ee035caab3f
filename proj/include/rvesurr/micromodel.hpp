// SPDX-License-Identifier: Apache-2.0
//
// Constitutive point models (hyperelastic fiber, finite strain J2 matrix) and
// a point-ensemble stand-in for the finite element RVE.
//
// Stresses are in MPa. Moduli given in GPa are converted on construction.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rvesurr/pathgen.hpp"
#include "rvesurr/tensor.hpp"

namespace rvesurr {

struct FiberParams {
  double k_fib = 16.67e3;  // MPa
  double mu_fib = 12.50e3;  // MPa

  static FiberParams from_gpa(double k_gpa, double mu_gpa) { return {k_gpa * 1e3, mu_gpa * 1e3}; }
  void validate() const;
};

struct MatrixParams {
  double k_mat = 2.50e3;   // MPa
  double mu_mat = 1.15e3;  // MPa
  double tau_y0 = 100.0;   // MPa
  double y_hard = 20.0;    // MPa, saturation of R(gamma)
  double k_hard = 30.0;    // hardening exponent

  void validate() const;
  /// R(gamma) = Y (1 - exp(-k gamma))
  double hardening(double gamma) const;
  double hardening_slope(double gamma) const;
};

struct PlasticState {
  Tensor2 fp = Tensor2::identity();
  double gamma = 0.0;

  friend bool operator==(const PlasticState&, const PlasticState&) = default;
};

struct StressPoint {
  Tensor2 p;  // first Piola-Kirchhoff stress
  double tau_eq = 0.0;
};

/// Hencky-type hyperelastic fiber:
///   P = K F^-T ln J + F^-T [mu (ln C)^dev]
/// Throws DomainError if det F <= 0.
StressPoint fiber_stress(const Tensor2& f, const FiberParams& params);

/// Elastic energy of the fiber at F (used for diagnostics).
double fiber_energy(const Tensor2& f, const FiberParams& params);

/// Elastic stress of the matrix for a given plastic state, no flow.
StressPoint matrix_elastic_stress(const Tensor2& f, const Tensor2& fp, const MatrixParams& params);

struct ReturnMappingOptions {
  int max_newton_iterations = 50;
  /// Newton stops when |residual| <= tolerance * tau_y0.
  double tolerance = 1e-12;
};

struct MatrixUpdate {
  StressPoint stress;
  PlasticState state;
  double delta_gamma = 0.0;
  /// Trial equivalent stress and yield function before the return.
  double trial_tau_eq = 0.0;
  double trial_yield = 0.0;
  /// Yield function evaluated on the returned state (0 if elastic).
  double yield_after = 0.0;
  int newton_iterations = 0;
  bool used_bisection = false;
  bool renormalized_fp = false;
};

/// Scalar return residual g(dg) = tau_tr - 3 mu dg - tau_y0 - R(gamma + dg).
double return_residual(double trial_tau_eq, double gamma, double delta_gamma,
                       const MatrixParams& params);

/// Elastic predictor / plastic corrector with the exponential map
///   F^p <- exp(dg N) F^p,  N = 3/2 M^dev / tau_eq^tr
/// where M is the stress in the intermediate configuration.
MatrixUpdate matrix_update(const Tensor2& f, const PlasticState& state, const MatrixParams& params,
                           const ReturnMappingOptions& options = {});

/// Linear map acting on the in-plane displacement gradient (H11, H12, H21, H22)
/// of H = F - I.
using ConcentrationMap = std::array<double, 16>;

ConcentrationMap identity_map();
/// F_local = I + A (F_macro - I), in-plane components only.
Tensor2 localize(const ConcentrationMap& a, const Tensor2& f_macro);

struct RveEnsemble {
  std::vector<ConcentrationMap> matrix_maps;
  std::vector<PlasticState> matrix_states;
  std::vector<ConcentrationMap> fiber_maps;
  double perturbation_amplitude = 0.0;
  std::uint64_t seed = 0;
  FiberParams fiber;
  MatrixParams matrix;

  std::size_t d_gamma() const { return matrix_maps.size(); }
  std::size_t d_tau() const { return matrix_maps.size() + fiber_maps.size(); }
  /// Every map, matrix points first then fibers.
  ConcentrationMap mean_map() const;
  void reset_states();
};

/// Each point receives A_p = I + B_p with B_p random, recentered to zero mean
/// and scaled so the largest Frobenius norm (an upper bound of the operator
/// norm) equals perturbation_amplitude.
RveEnsemble build_ensemble(int d_gamma, int n_fiber, double perturbation_amplitude,
                           std::uint64_t seed, const FiberParams& fiber = {},
                           const MatrixParams& matrix = {});

struct FieldSnapshot {
  std::vector<double> gamma_field;  // matrix points
  std::vector<double> tau_field;    // matrix points then fiber points, MPa
  Tensor2 p_hom;                    // volume average of P, MPa
};

struct SequenceRun {
  std::vector<FieldSnapshot> snapshots;
  bool truncated = false;
  /// Number of steps that needed sub-stepping, and of F^p renormalizations.
  int substepped_steps = 0;
  int fp_renormalizations = 0;
};

struct SequenceOptions {
  int max_halvings = 8;
  ReturnMappingOptions return_mapping;
};

/// Drives the ensemble along the path. The ensemble is taken by value so the
/// caller's plastic states are untouched.
SequenceRun run_sequence(const LoadingPath& path, RveEnsemble ensemble,
                         const SequenceOptions& options = {});

}  // namespace rvesurr
