// SPDX-License-Identifier: Apache-2.0
#include "rvesurr/micromodel.hpp"

#include <algorithm>
#include <iostream>
#include <sstream>

#include "rvesurr/error.hpp"
#include "rvesurr/rng.hpp"

namespace rvesurr {

void FiberParams::validate() const {
  if (!(k_fib > 0 && mu_fib > 0)) throw InvalidInput("fiber moduli must be positive");
}

void MatrixParams::validate() const {
  if (!(k_mat > 0 && mu_mat > 0 && tau_y0 > 0 && y_hard > 0 && k_hard > 0))
    throw InvalidInput("matrix parameters must be positive");
}

double MatrixParams::hardening(double gamma) const {
  return y_hard * (1.0 - std::exp(-k_hard * gamma));
}

double MatrixParams::hardening_slope(double gamma) const {
  return y_hard * k_hard * std::exp(-k_hard * gamma);
}

namespace {

struct HenckyResponse {
  StressPoint stress;
  SymTensor2 m_dev;  // deviatoric stress in the intermediate configuration
};

/// Stress of the potential K/2 ln^2 J + mu/4 (ln Ce)^dev : (ln Ce)^dev
/// evaluated at the elastic part fe; P is pulled back with the total f.
HenckyResponse hencky_response(const Tensor2& fe, const Tensor2& f, double bulk, double shear) {
  const double j = det(fe);
  if (!(j > 0.0)) {
    std::ostringstream msg;
    msg << "invalid deformation: det F = " << j;
    throw DomainError(msg.str());
  }
  const double log_j = std::log(j);
  const auto eig = sym_eig(gram(fe));
  std::array<double, 3> log_c{};
  for (int k = 0; k < 3; ++k) {
    if (!(eig.values[k] > 0.0)) throw DomainError("invalid deformation: C is not positive definite");
    log_c[k] = std::log(eig.values[k]);
  }
  const double mean_log = (log_c[0] + log_c[1] + log_c[2]) / 3.0;

  // S = Ce^-1 [K ln J I + mu (ln Ce)^dev], coaxial with Ce.
  SymTensor2 s_int;
  SymTensor2 m_dev;
  for (int k = 0; k < 3; ++k) {
    const double dl = log_c[k] - mean_log;
    const double sk = (bulk * log_j + shear * dl) / eig.values[k];
    const double mk = shear * dl;
    const double n0 = eig.vectors(0, k), n1 = eig.vectors(1, k), n2 = eig.vectors(2, k);
    s_int += SymTensor2{sk * n0 * n0, sk * n1 * n1, sk * n2 * n2, sk * n0 * n1, sk * n1 * n2, sk * n0 * n2};
    m_dev += SymTensor2{mk * n0 * n0, mk * n1 * n1, mk * n2 * n2, mk * n0 * n1, mk * n1 * n2, mk * n0 * n2};
  }

  const SymTensor2 kappa = push_forward(fe, s_int);
  HenckyResponse out;
  out.stress.p = Tensor2::from_sym(kappa) * inverse(f).transpose();
  out.stress.tau_eq = std::sqrt(1.5) * norm(dev(kappa));
  out.m_dev = m_dev;
  return out;
}

}  // namespace

StressPoint fiber_stress(const Tensor2& f, const FiberParams& params) {
  return hencky_response(f, f, params.k_fib, params.mu_fib).stress;
}

double fiber_energy(const Tensor2& f, const FiberParams& params) {
  const double j = det(f);
  if (!(j > 0.0)) throw DomainError("invalid deformation: det F <= 0");
  const SymTensor2 lc = dev(log_spd(gram(f)));
  const double lj = std::log(j);
  return 0.5 * params.k_fib * lj * lj + 0.25 * params.mu_fib * ddot(lc, lc);
}

StressPoint matrix_elastic_stress(const Tensor2& f, const Tensor2& fp, const MatrixParams& params) {
  return hencky_response(f * inverse(fp), f, params.k_mat, params.mu_mat).stress;
}

double return_residual(double trial_tau_eq, double gamma, double delta_gamma,
                       const MatrixParams& params) {
  return trial_tau_eq - 3.0 * params.mu_mat * delta_gamma - params.tau_y0 -
         params.hardening(gamma + delta_gamma);
}

namespace {

struct ScalarReturn {
  double delta_gamma = 0.0;
  int iterations = 0;
  bool bisection = false;
};

ScalarReturn solve_return(double trial_tau, double gamma, const MatrixParams& params,
                          const ReturnMappingOptions& options) {
  const double tol = options.tolerance * params.tau_y0;
  const double upper = trial_tau / (3.0 * params.mu_mat);
  ScalarReturn out;

  // g is decreasing and convex in dg, so Newton from dg = 0 increases
  // monotonically towards the root without overshooting.
  double dg = 0.0;
  for (int it = 0; it < options.max_newton_iterations; ++it) {
    const double g = return_residual(trial_tau, gamma, dg, params);
    out.iterations = it + 1;
    if (std::abs(g) <= tol) {
      out.delta_gamma = dg;
      return out;
    }
    const double slope = -3.0 * params.mu_mat - params.hardening_slope(gamma + dg);
    const double next = dg - g / slope;
    if (!std::isfinite(next) || next < 0.0 || next > upper) break;
    if (next == dg) {
      out.delta_gamma = dg;
      return out;
    }
    dg = next;
  }

  out.bisection = true;
  double lo = 0.0, hi = upper;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (return_residual(trial_tau, gamma, mid, params) > 0.0 ? lo : hi) = mid;
  }
  out.delta_gamma = 0.5 * (lo + hi);
  return out;
}

}  // namespace

MatrixUpdate matrix_update(const Tensor2& f, const PlasticState& state, const MatrixParams& params,
                           const ReturnMappingOptions& options) {
  const Tensor2 fe_trial = f * inverse(state.fp);
  const HenckyResponse trial = hencky_response(fe_trial, f, params.k_mat, params.mu_mat);

  MatrixUpdate out;
  out.trial_tau_eq = trial.stress.tau_eq;
  out.trial_yield = trial.stress.tau_eq - params.tau_y0 - params.hardening(state.gamma);
  out.state = state;

  if (out.trial_yield <= 0.0) {
    out.stress = trial.stress;
    return out;
  }

  const ScalarReturn ret = solve_return(trial.stress.tau_eq, state.gamma, params, options);
  out.delta_gamma = ret.delta_gamma;
  out.newton_iterations = ret.iterations;
  out.used_bisection = ret.bisection;

  // Flow direction in the intermediate configuration, coaxial with Ce^trial.
  const SymTensor2 normal = (1.5 / trial.stress.tau_eq) * trial.m_dev;
  Tensor2 fp = Tensor2::from_sym(exp_sym(ret.delta_gamma * normal)) * state.fp;

  const double jp = det(fp);
  if (std::abs(jp - 1.0) > 1e-6) {
    std::clog << "warning: det(F^p) drifted to " << jp << ", renormalizing\n";
    fp *= std::cbrt(1.0 / jp);
    out.renormalized_fp = true;
  }

  out.state.fp = fp;
  out.state.gamma = state.gamma + ret.delta_gamma;
  out.stress = hencky_response(f * inverse(fp), f, params.k_mat, params.mu_mat).stress;
  out.yield_after = out.stress.tau_eq - params.tau_y0 - params.hardening(out.state.gamma);
  return out;
}

// ------------------------------------------------------------- ensemble

ConcentrationMap identity_map() {
  ConcentrationMap a{};
  for (int i = 0; i < 4; ++i) a[5 * i] = 1.0;
  return a;
}

Tensor2 localize(const ConcentrationMap& a, const Tensor2& f_macro) {
  const std::array<double, 4> h{f_macro(0, 0) - 1.0, f_macro(0, 1), f_macro(1, 0),
                                f_macro(1, 1) - 1.0};
  std::array<double, 4> hl{};
  for (int i = 0; i < 4; ++i)
    hl[i] = a[4 * i] * h[0] + a[4 * i + 1] * h[1] + a[4 * i + 2] * h[2] + a[4 * i + 3] * h[3];
  Tensor2 f = Tensor2::identity();
  f(0, 0) += hl[0];
  f(0, 1) = hl[1];
  f(1, 0) = hl[2];
  f(1, 1) += hl[3];
  return f;
}

ConcentrationMap RveEnsemble::mean_map() const {
  ConcentrationMap m{};
  const std::size_t n = d_tau();
  for (const auto* group : {&matrix_maps, &fiber_maps})
    for (const auto& a : *group)
      for (int k = 0; k < 16; ++k) m[k] += a[k];
  for (auto& v : m) v /= static_cast<double>(n);
  return m;
}

void RveEnsemble::reset_states() {
  std::fill(matrix_states.begin(), matrix_states.end(), PlasticState{});
}

RveEnsemble build_ensemble(int d_gamma, int n_fiber, double perturbation_amplitude,
                           std::uint64_t seed, const FiberParams& fiber,
                           const MatrixParams& matrix) {
  if (d_gamma < 1) throw InvalidInput("build_ensemble: d_gamma must be >= 1");
  if (n_fiber < 0) throw InvalidInput("build_ensemble: n_fiber must be >= 0");
  if (!(perturbation_amplitude >= 0.0 && perturbation_amplitude < 1.0))
    throw InvalidInput("build_ensemble: perturbation amplitude must lie in [0, 1)");
  fiber.validate();
  matrix.validate();

  const std::size_t n = static_cast<std::size_t>(d_gamma + n_fiber);
  std::vector<ConcentrationMap> pert(n);
  Rng rng(seed);
  for (auto& b : pert)
    for (auto& v : b) v = rng.uniform(-1.0, 1.0);

  ConcentrationMap mean{};
  for (const auto& b : pert)
    for (int k = 0; k < 16; ++k) mean[k] += b[k];
  for (auto& v : mean) v /= static_cast<double>(n);
  double max_norm = 0.0;
  for (auto& b : pert) {
    double s = 0.0;
    for (int k = 0; k < 16; ++k) {
      b[k] -= mean[k];
      s += b[k] * b[k];
    }
    max_norm = std::max(max_norm, std::sqrt(s));
  }
  const double scale = max_norm > 0.0 ? perturbation_amplitude / max_norm : 0.0;

  RveEnsemble ens;
  ens.perturbation_amplitude = perturbation_amplitude;
  ens.seed = seed;
  ens.fiber = fiber;
  ens.matrix = matrix;
  const ConcentrationMap eye = identity_map();
  for (std::size_t p = 0; p < n; ++p) {
    ConcentrationMap a = eye;
    for (int k = 0; k < 16; ++k) a[k] += scale * pert[p][k];
    (p < static_cast<std::size_t>(d_gamma) ? ens.matrix_maps : ens.fiber_maps).push_back(a);
  }
  ens.matrix_states.assign(ens.matrix_maps.size(), PlasticState{});
  return ens;
}

// ------------------------------------------------------------- sequences

namespace {

struct PointAdvance {
  MatrixUpdate last;
  bool substepped = false;
  int renormalizations = 0;
};

bool acceptable(const MatrixUpdate& u) {
  return !u.used_bisection && u.stress.p.is_finite() && std::isfinite(u.stress.tau_eq) &&
         u.state.fp.is_finite();
}

/// Advances one matrix point from f_prev to f_new, halving the increment
/// when the return mapping fails. Returns false when the halving budget is
/// exhausted.
bool advance_matrix_point(const Tensor2& f_prev, const Tensor2& f_new, PlasticState& state,
                          const MatrixParams& params, const SequenceOptions& options,
                          PointAdvance& out) {
  for (int halvings = 0; halvings <= options.max_halvings; ++halvings) {
    const int n_sub = 1 << halvings;
    PlasticState trial_state = state;
    bool ok = true;
    int renorm = 0;
    MatrixUpdate upd;
    for (int s = 1; s <= n_sub && ok; ++s) {
      const double w = static_cast<double>(s) / n_sub;
      const Tensor2 f = s == n_sub ? f_new : f_prev * (1.0 - w) + f_new * w;
      try {
        upd = matrix_update(f, trial_state, params, options.return_mapping);
      } catch (const DomainError&) {
        ok = false;
        break;
      }
      ok = acceptable(upd);
      trial_state = upd.state;
      renorm += upd.renormalized_fp ? 1 : 0;
    }
    if (ok) {
      state = trial_state;
      out.last = upd;
      out.substepped = halvings > 0;
      out.renormalizations = renorm;
      return true;
    }
  }
  return false;
}

}  // namespace

SequenceRun run_sequence(const LoadingPath& path, RveEnsemble ensemble,
                         const SequenceOptions& options) {
  SequenceRun run;
  const std::size_t n_mat = ensemble.matrix_maps.size();
  const std::size_t n_fib = ensemble.fiber_maps.size();
  const double inv_n = 1.0 / static_cast<double>(n_mat + n_fib);
  if (ensemble.matrix_states.size() != n_mat) ensemble.matrix_states.assign(n_mat, PlasticState{});
  run.snapshots.reserve(path.size());

  Tensor2 f_macro_prev = Tensor2::identity();
  for (std::size_t t = 0; t < path.size(); ++t) {
    const Tensor2 f_macro = u_to_f(path.steps[t]);
    FieldSnapshot snap;
    snap.gamma_field.resize(n_mat);
    snap.tau_field.resize(n_mat + n_fib);
    bool step_ok = true;
    bool any_sub = false;
    std::vector<PlasticState> next_states = ensemble.matrix_states;

    for (std::size_t p = 0; p < n_mat && step_ok; ++p) {
      const auto& a = ensemble.matrix_maps[p];
      PointAdvance adv;
      step_ok = advance_matrix_point(localize(a, f_macro_prev), localize(a, f_macro),
                                     next_states[p], ensemble.matrix, options, adv);
      if (!step_ok) break;
      any_sub = any_sub || adv.substepped;
      run.fp_renormalizations += adv.renormalizations;
      snap.gamma_field[p] = next_states[p].gamma;
      snap.tau_field[p] = adv.last.stress.tau_eq;
      snap.p_hom += adv.last.stress.p * inv_n;
    }
    for (std::size_t q = 0; q < n_fib && step_ok; ++q) {
      try {
        const StressPoint s = fiber_stress(localize(ensemble.fiber_maps[q], f_macro), ensemble.fiber);
        snap.tau_field[n_mat + q] = s.tau_eq;
        snap.p_hom += s.p * inv_n;
      } catch (const DomainError&) {
        step_ok = false;
      }
    }
    if (!step_ok) {
      run.truncated = true;
      break;
    }
    ensemble.matrix_states = std::move(next_states);
    run.substepped_steps += any_sub ? 1 : 0;
    run.snapshots.push_back(std::move(snap));
    f_macro_prev = f_macro;
  }
  return run;
}

}  // namespace rvesurr
