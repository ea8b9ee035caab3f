// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion.
//
// Criteria 6, 7 and 10 train desk-scale surrogates and take tens of minutes
// on one core. Pass --only=N[,M...] to run a subset.
//
// --expect-fail=N marks a criterion whose failure is known and analysed; it
// is still reported as FAIL but does not set the exit status. An expected
// failure that passes is reported and does set it.

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "reference_values.hpp"
#include "rvesurr/micromodel.hpp"
#include "rvesurr/neural.hpp"
#include "rvesurr/pathgen.hpp"
#include "rvesurr/pca.hpp"
#include "rvesurr/pipeline.hpp"
#include "rvesurr/surrogate.hpp"

using namespace rvesurr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ----------------------------------------------------------------- 1

Outcome gradient_check() {
  const auto t0 = Clock::now();
  RnnArchitecture a;
  a.nnw_in = {2, 4};
  a.n_hidden = 4;
  a.nnw_out = {4, 3};
  RnnModel m = make_rnn(a, 101);
  Rng rng(7);
  for (auto b : m.blocks())
    for (double& v : b) v += rng.uniform(-0.2, 0.2);
  const std::size_t B = 2, T = 3;
  Eigen::MatrixXd x(2, B * T), y(3, B * T);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.uniform(-1, 1);

  const RnnModel g = bptt_gradients(m, forward_sequence(m, x, B), y);
  const auto gb = g.blocks();
  auto pb = m.blocks();
  const double h = 1e-6;
  std::size_t bad = 0, n = 0;
  double worst = 0;
  for (std::size_t k = 0; k < pb.size(); ++k)
    for (std::size_t i = 0; i < pb[k].size(); ++i) {
      const double keep = pb[k][i];
      pb[k][i] = keep + h;
      const double lp = mse_loss(forward_sequence(m, x, B).outputs(), y);
      pb[k][i] = keep - h;
      const double lm = mse_loss(forward_sequence(m, x, B).outputs(), y);
      pb[k][i] = keep;
      const double fd = (lp - lm) / (2 * h);
      const double err = std::abs(fd - gb[k][i]);
      const bool ok = err <= 1e-8 || err <= 1e-5 * std::abs(fd);
      if (!ok) ++bad;
      worst = std::max(worst, std::abs(fd) > 0 ? err / std::abs(fd) : err);
      ++n;
    }
  const double dt = seconds_since(t0);
  return {bad == 0 && dt < 1.0, std::to_string(n) + " parameters, " + std::to_string(bad) + " mismatches, worst rel " +
                                    fmt("%.2e", worst) + ", " + fmt("%.3f", dt) + " s"};
}

// ----------------------------------------------------------------- 2

Outcome parameter_counts() {
  struct Row {
    const char* name;
    int n_h;
    int o1, o2;
  };
  const Row rows[] = {{"gamma I", 100, 800, 1607},  {"gamma I", 200, 800, 1607},  {"gamma I", 400, 800, 1607},
                      {"gamma II", 100, 800, 180},  {"gamma II", 200, 800, 180},  {"gamma II", 400, 800, 180},
                      {"gamma III", 100, 100, 10},  {"gamma III", 200, 100, 10},  {"gamma III", 400, 100, 10},
                      {"tau I", 600, 1200, 2237},   {"tau III", 600, 200, 20}};
  bool ok = gru_parameters(100, 70) == 51600 && make_gru(70, 100).count_parameters() == 51600;
  std::ostringstream os;
  os << "GRU(100,70)=" << make_gru(70, 100).count_parameters();
  for (const Row& r : rows) {
    RnnArchitecture a;
    a.nnw_in = {3, 70};
    a.n_hidden = r.n_h;
    a.nnw_out = {r.o1, r.o2};
    const RnnModel m = make_rnn(a);
    std::size_t audit = 0;
    for (const auto* net : {&m.nnw_in, &m.nnw_out})
      for (const auto& l : net->layers) audit += std::size_t(l.weights.size() + l.bias.size());
    const GruCell& g = m.gru;
    for (const auto* w : {&g.w_xu, &g.w_xr, &g.w_xc, &g.w_hu, &g.w_hr, &g.w_hc}) audit += std::size_t(w->size());
    for (const auto* b : {&g.b_xu, &g.b_hu, &g.b_xr, &g.b_hr, &g.b_xc, &g.b_hc}) audit += std::size_t(b->size());
    const std::size_t nh = std::size_t(r.n_h);
    const std::size_t formula = dense_pair_parameters(3, 70) + gru_parameters(nh, 70) +
                                dense_pair_parameters(nh, std::size_t(r.o1)) +
                                dense_pair_parameters(std::size_t(r.o1), std::size_t(r.o2));
    ok = ok && audit == formula && m.count_parameters() == formula;
  }
  // whole III bundles: Q copies of the per-group RNN
  SurrogateSpec s;
  s.nnw_in = {3, 70};
  s.n_hidden = 400;
  s.nnw_out_hidden = {100};
  s.p = 180;
  s.q = 18;
  const SurrogateBundle b = build_surrogate(s, 1607, Family::gamma);
  ok = ok && b.count_parameters() == 18 * (dense_pair_parameters(3, 70) + gru_parameters(400, 70) +
                                           dense_pair_parameters(400, 100) + dense_pair_parameters(100, 10));
  os << ", " << std::size(rows) << " table architectures audited, III(n_h=400,Q=18) total " << b.count_parameters();
  return {ok, os.str()};
}

// ----------------------------------------------------------------- 3

Outcome pca_oracle() {
  const auto t0 = Clock::now();
  const std::size_t n = 50, d = 30;
  Rng rng(2024);
  Block snaps(n, d);
  for (double& v : snaps.data) v = rng.uniform(-1, 1);
  PcaFitOptions opt;
  opt.retention = Retention::fixed(int(d));
  const PcaModel m = fit_pca(snaps, opt);

  Eigen::MatrixXd a(d, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) a(Eigen::Index(j), Eigen::Index(i)) = snaps(i, j);
  a = a.colwise() - a.rowwise().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a * a.transpose());
  double val_err = 0, vec_err = 0;
  for (std::size_t k = 0; k < d; ++k) {
    const auto kr = Eigen::Index(d - 1 - k);
    val_err = std::max(val_err, std::abs(m.eigenvalues(Eigen::Index(k)) - ref.eigenvalues()(kr)));
    Eigen::VectorXd v = ref.eigenvectors().col(kr);
    if (v.dot(m.components.col(Eigen::Index(k))) < 0) v = -v;
    vec_err = std::max(vec_err, (v - m.components.col(Eigen::Index(k))).cwiseAbs().maxCoeff());
  }

  const double total = m.eigenvalues.sum();
  double ident_err = 0;
  bool monotone = true;
  double prev = 1.0;
  for (int p = 0; p <= int(d); ++p) {
    const PcaModel t = m.truncated(p);
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = t.project(snaps.row(i));
      const Eigen::VectorXd r = t.reconstruct(std::span<const double>(xi.data(), std::size_t(p)));
      for (std::size_t j = 0; j < d; ++j) sse += std::pow(r(Eigen::Index(j)) - snaps(i, j), 2);
    }
    const double mse = sse / double(n * d);
    const double trailing = m.eigenvalues.tail(Eigen::Index(d) - p).sum() / double(n * d);
    // relative, with an absolute floor at the full-rank end where both are rounding noise
    ident_err = std::max(ident_err, std::abs(mse - trailing) / std::max(trailing, 1e-6 * total / double(n * d)));
    const double rf = residual_fraction(m, p);
    monotone = monotone && rf <= prev;
    prev = rf;
  }
  const bool zero_at_d = residual_fraction(m, int(d)) == 0.0;
  const double dt = seconds_since(t0);
  const bool ok = val_err <= 1e-8 && vec_err <= 1e-8 && ident_err <= 1e-8 && monotone && zero_at_d && dt < 5.0;
  return {ok, "eigenvalue err " + fmt("%.1e", val_err) + ", eigenvector err " + fmt("%.1e", vec_err) +
                  ", trailing-sum rel err " + fmt("%.1e", ident_err) + (monotone ? ", residual non-increasing" : ", residual NOT monotone") +
                  (zero_at_d ? ", 0 at p=d" : ", nonzero at p=d") + ", " + fmt("%.3f", dt) + " s"};
}

// ----------------------------------------------------------------- 4

Tensor2 random_f(Rng& rng, double s) {
  Tensor2 f = Tensor2::identity();
  for (double& v : f.c) v += rng.uniform(-s, s);
  return f;
}

Outcome return_mapping() {
  const auto t0 = Clock::now();
  const MatrixParams mp;
  Rng rng(4242);
  auto bisect = [&](double tau_tr, double gamma) {
    auto g = [&](double x) { return tau_tr - 3 * mp.mu_mat * x - mp.tau_y0 - mp.y_hard * (1 - std::exp(-mp.k_hard * (gamma + x))); };
    double lo = 0.0, hi = tau_tr / (3 * mp.mu_mat);
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  int states = 0, plastic = 0;
  double dg_err = 0, f_err = 0;
  while (states < 1000) {
    PlasticState st;
    st.gamma = rng.uniform(0.0, 0.3);
    st.fp = Tensor2::from_sym(exp_sym(dev(SymTensor2{rng.uniform(-.02, .02), rng.uniform(-.02, .02), 0, rng.uniform(-.02, .02), 0, 0})));
    // small and large perturbations, so both branches are exercised
    const Tensor2 f = random_f(rng, rng.uniform(0.002, 0.3));
    if (det(f) <= 0.2) continue;
    ++states;
    const MatrixUpdate u = matrix_update(f, st, mp);
    if (u.delta_gamma == 0.0) {
      if (u.trial_tau_eq - mp.tau_y0 - mp.hardening(st.gamma) > 0) dg_err = 1.0;
      continue;
    }
    ++plastic;
    dg_err = std::max(dg_err, std::abs(u.delta_gamma - bisect(u.trial_tau_eq, st.gamma)));
    const StressPoint s = matrix_elastic_stress(f, u.state.fp, mp);
    f_err = std::max(f_err, std::abs(s.tau_eq - mp.tau_y0 - mp.hardening(u.state.gamma)));
  }
  // monotonic simple shear of the matrix
  PlasticState st;
  double tau = 0;
  for (int i = 1; i <= 1000; ++i) {
    Tensor2 f = Tensor2::identity();
    f(0, 1) = 0.5 * i / 1000.0;
    const MatrixUpdate u = matrix_update(f, st, mp);
    st = u.state;
    tau = u.stress.tau_eq;
  }
  const double dt = seconds_since(t0);
  const bool ok = dg_err <= 1e-10 && f_err <= 1e-8 * mp.tau_y0 && std::abs(tau - 120.0) <= 0.5 && plastic > 0 && dt < 10.0;
  return {ok, std::to_string(states) + " states (" + std::to_string(plastic) + " plastic), max |dgamma err| " +
                  fmt("%.1e", dg_err) + ", max |f| " + fmt("%.1e", f_err) + " MPa, shear saturation tau_eq " +
                  fmt("%.3f", tau) + " MPa at gamma " + fmt("%.3f", st.gamma) + ", " + fmt("%.2f", dt) + " s"};
}

// ----------------------------------------------------------------- 5

Outcome kinematics() {
  const bool zero = u_to_e(SymTensor2::identity()) == SymTensor2::zero();
  const SymTensor2 e = u_to_e(SymTensor2::diag(1.1, 1.0, 1.0));
  // 1.1 is not a binary fraction; 0.105 is met to within one ulp
  const double exx_err = std::abs(e.xx - 0.105);
  const bool exx_ok = exx_err <= 1e-15 && e.yy == 0.0 && e.zz == 0.0 && e.xy == 0.0;
  Rng rng(55);
  double rt = 0;
  for (int n = 0; n < 100; ++n) {
    SymTensor2 s{rng.uniform(-.3, .3), rng.uniform(-.3, .3), rng.uniform(-.3, .3),
                 rng.uniform(-.3, .3), rng.uniform(-.3, .3), rng.uniform(-.3, .3)};
    const SymTensor2 a = exp_sym(s);
    const SymTensor2 b = exp_sym(log_spd(a));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) rt = std::max(rt, std::abs(a(i, j) - b(i, j)));
  }
  return {zero && exx_ok && rt <= 1e-9, std::string(zero ? "u_to_e(I)=0" : "u_to_e(I)!=0") + ", E_xx=" +
                                            fmt("%.17g", e.xx) + " (|E_xx-0.105|=" + fmt("%.1e", exx_err) +
                                            "), exp(log) max err " + fmt("%.1e", rt)};
}

// ------------------------------------------------------------ desk data

struct Desk {
  PipelineConfig cfg;
  std::vector<LoadingPath> paths;
  std::vector<SequenceRecord> raw, trimmed;
  NormalizationSpec in_norm, field_norm;
  PcaModel pca;
  double floor = 0;
  double build_seconds = 0;
};

Desk& desk() {
  static Desk d = [] {
    const auto t0 = Clock::now();
    Desk k;
    k.paths = generate_paths(k.cfg.paths);
    k.raw = generate_dataset(k.paths, k.cfg.ensemble, 1);
    for (const auto& r : k.raw) k.trimmed.push_back(pre_trim(r, k.cfg.dataset.gamma_crit, Family::gamma));
    k.in_norm = fit_input_norm(k.trimmed);
    k.field_norm = fit_field_norm(k.trimmed, Family::gamma);
    PcaFitOptions opt;
    opt.retention = Retention::fixed(40);
    opt.seed = k.cfg.pca.seed;
    k.pca = fit_pca(normalized_snapshots(k.trimmed, Family::gamma, k.field_norm), opt);
    k.floor = pca_floor_mse(k.pca, 40, k.trimmed, Family::gamma, k.field_norm);
    k.build_seconds = seconds_since(t0);
    std::size_t steps = 0;
    for (const auto& r : k.trimmed) steps += r.length();
    std::cout << "  desk dataset: " << k.paths.size() << " paths, " << steps << " steps, d_gamma "
              << k.cfg.ensemble.d_gamma << ", PCA floor(p=40) " << fmt("%.3e", k.floor) << ", built in "
              << fmt("%.1f", k.build_seconds) << " s" << std::endl;
    return k;
  }();
  return d;
}

struct DeskRun {
  SurrogateBundle bundle;
  TrainReport report;
  double train_mse = 0;
  double seconds = 0;
};

constexpr int kDeskBatches = 2000;
constexpr double kDeskLearningRate = 3e-3;

DeskRun train_desk(SurrogateKind kind, int n_h, int q, int batches) {
  Desk& d = desk();
  const auto t0 = Clock::now();
  SurrogateSpec spec;
  spec.kind = kind;
  spec.nnw_in = d.cfg.train.nnw_in;
  spec.n_hidden = n_h;
  spec.nnw_out_hidden = d.cfg.train.nnw_out_hidden;
  spec.p = 40;
  spec.q = q;
  spec.seed = derive_seed(d.cfg.train.seed, 0);
  DeskRun r;
  r.bundle = build_surrogate(spec, d.field_norm.size(), Family::gamma);
  attach_reduction(r.bundle, d.in_norm, d.field_norm,
                   kind == SurrogateKind::I ? std::nullopt : std::optional<PcaModel>(d.pca));
  SurrogateTrainOptions opt;
  opt.train.learning_rate = kDeskLearningRate;
  opt.train.n_batches = batches;
  opt.train.batch_size = d.cfg.dataset.batch_size;
  opt.train.seed = derive_seed(d.cfg.train.seed, 1);
  opt.lengths = d.cfg.dataset.lengths;
  r.report = train(r.bundle, d.trimmed, opt);
  r.train_mse = evaluate(r.bundle, d.trimmed).mse_full_dim;
  r.seconds = seconds_since(t0);
  std::cout << "  trained " << to_string(kind) << " n_h=" << n_h << " Q=" << q << " N=" << batches << ": loss "
            << fmt("%.3e", r.report.final_loss) << ", mse_full_dim " << fmt("%.3e", r.train_mse) << ", "
            << fmt("%.0f", r.seconds) << " s" << std::endl;
  return r;
}

// Runs shared between criteria 6, 7 and 10.
DeskRun& desk_run(SurrogateKind kind, int n_h) {
  static std::map<std::pair<int, int>, DeskRun> cache;
  const auto key = std::make_pair(int(kind), n_h);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, train_desk(kind, n_h, kind == SurrogateKind::III ? 8 : 1, kDeskBatches)).first;
  return it->second;
}

// ----------------------------------------------------------------- 6

Outcome floor_property() {
  const auto t0 = Clock::now();
  Desk& d = desk();
  const DeskRun& iii = desk_run(SurrogateKind::III, 64);
  const DeskRun& ii = desk_run(SurrogateKind::II, 64);
  const bool above = iii.train_mse >= d.floor - 1e-9 && ii.train_mse >= d.floor - 1e-9;
  const double ratio = iii.train_mse / d.floor;
  const bool close = ratio <= 3.0;
  const double dt = seconds_since(t0) + d.build_seconds;
  std::ostringstream os;
  os << "floor " << fmt("%.3e", d.floor) << "; II " << fmt("%.3e", ii.train_mse) << ", III " << fmt("%.3e", iii.train_mse)
     << (above ? " (both >= floor)" : " (BELOW floor)") << "; III/floor = " << fmt("%.1f", ratio)
     << (close ? " <= 3" : " > 3 (3x bound not met)") << "; " << fmt("%.0f", dt) << " s";
  return {above && close && dt < 7200.0, os.str()};
}

// ----------------------------------------------------------------- 7

Outcome hidden_size_trend() {
  const double m16 = desk_run(SurrogateKind::III, 16).train_mse;
  const double m32 = desk_run(SurrogateKind::III, 32).train_mse;
  const double m64 = desk_run(SurrogateKind::III, 64).train_mse;
  int inversions = 0;
  bool small = true;
  for (auto [a, b] : {std::pair{m16, m32}, std::pair{m32, m64}})
    if (b > a) {
      ++inversions;
      small = small && (b - a) / a <= 0.05;
    }
  const bool ok = inversions == 0 || (inversions == 1 && small);
  return {ok, "train mse_full_dim n_h=16 " + fmt("%.3e", m16) + ", 32 " + fmt("%.3e", m32) + ", 64 " + fmt("%.3e", m64) +
                  ", inversions " + std::to_string(inversions)};
}

// ----------------------------------------------------------------- 8

Outcome kind_equivalence() {
  const DeskRun ii = train_desk(SurrogateKind::II, 16, 1, 100);
  const DeskRun iii = train_desk(SurrogateKind::III, 16, 1, 100);
  bool same = parameter_checksum(ii.bundle.rnns[0]) == parameter_checksum(iii.bundle.rnns[0]);
  same = same && ii.report.history.size() == iii.report.history.size();
  for (std::size_t i = 0; same && i < ii.report.history.size(); ++i)
    same = ii.report.history[i].loss == iii.report.history[i].loss;
  const auto& d = desk();
  for (std::size_t i = 0; same && i < d.trimmed.size(); i += 17)
    if (d.trimmed[i].length() > 0)
      same = predict_fields(ii.bundle, d.trimmed[i].inputs).fields == predict_fields(iii.bundle, d.trimmed[i].inputs).fields;
  same = same && ii.train_mse == iii.train_mse;
  return {same, same ? "parameters, loss history, predictions and mse_full_dim identical (" + fmt("%.6e", ii.train_mse) + ")"
                     : "II and III(Q=1) differ"};
}

// ----------------------------------------------------------------- 9

Outcome irreversibility() {
  Desk& d = desk();
  std::size_t checked = 0, bad_gamma = 0, increments = 0, bad_inc = 0, over = 0, trimmed_by_low = 0;
  for (const auto& r : d.raw)
    for (std::size_t t = 1; t < r.length(); ++t)
      for (std::size_t j = 0; j < r.gamma.cols; ++j) {
        ++checked;
        if (r.gamma(t, j) < r.gamma(t - 1, j) || r.gamma(t, j) < 0.0) ++bad_gamma;
      }
  for (const auto& p : d.paths) {
    if (p.kind != PathKind::random_walk) continue;
    for (std::size_t i = 1; i < p.size(); ++i) {
      const auto ev = sym_eig(p.steps[i] - p.steps[i - 1]).values;
      const double r = std::sqrt(ev[0] * ev[0] + ev[1] * ev[1] + ev[2] * ev[2]);
      ++increments;
      if (!(r > d.cfg.paths.delta_r_min * (1 - 1e-9) && r <= d.cfg.paths.delta_r * (1 + 1e-9))) ++bad_inc;
    }
  }
  auto check_trim = [&](double crit) {
    std::size_t cut = 0;
    for (const auto& r : d.raw) {
      const SequenceRecord t = pre_trim(r, crit, Family::gamma);
      if (t.length() < r.length()) ++cut;
      for (double v : t.gamma.data)
        if (v > crit) ++over;
    }
    return cut;
  };
  check_trim(6.0);
  // a low threshold so trimming actually cuts sequences
  trimmed_by_low = check_trim(0.05);
  const bool ok = bad_gamma == 0 && bad_inc == 0 && over == 0 && checked > 0 && increments > 0;
  return {ok, std::to_string(checked) + " gamma increments (" + std::to_string(bad_gamma) + " decreasing), " +
                  std::to_string(increments) + " walk increments (" + std::to_string(bad_inc) + " out of bounds), " +
                  std::to_string(over) + " trimmed values above crit (" + std::to_string(trimmed_by_low) +
                  " sequences cut at crit 0.05)"};
}

// ---------------------------------------------------------------- 10

Outcome paper_numbers() {
  using namespace reference;
  std::ostringstream os;
  os << "reference only (not reproducible at desk scale): gamma MSE I/II/III " << kGammaMseSurrogateI << "/"
     << kGammaMseSurrogateII << "/" << kGammaMseSurrogateIII << ", tau I/III " << kTauMseSurrogateI << "/"
     << kTauMseSurrogateIII << ", trial n_h " << kTrialHiddenSize << " at p " << kTrialTargetP;
  const bool paper_order = kGammaMseSurrogateIII < kGammaMseSurrogateI && kGammaMseSurrogateI < kGammaMseSurrogateII;
  const double i = desk_run(SurrogateKind::I, 64).train_mse;
  const double ii = desk_run(SurrogateKind::II, 64).train_mse;
  const double iii = desk_run(SurrogateKind::III, 64).train_mse;
  const bool desk_order = iii < i && i < ii;
  os << "; desk n_h=64 I/II/III " << fmt("%.3e", i) << "/" << fmt("%.3e", ii) << "/" << fmt("%.3e", iii)
     << (desk_order ? ", ordering III < I < II holds" : ", ordering III < I < II does NOT hold (soft, logged only)");
  return {paper_order, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, expected;
  auto parse_list = [](const std::string& v, std::set<int>& out) {
    std::stringstream ss(v);
    for (std::string tok; std::getline(ss, tok, ',');) out.insert(std::stoi(tok));
  };
  for (int a = 1; a < argc; ++a) {
    const std::string s = argv[a];
    if (s.rfind("--only=", 0) == 0) {
      parse_list(s.substr(7), only);
    } else if (s.rfind("--expect-fail=", 0) == 0) {
      parse_list(s.substr(14), expected);
    } else {
      std::cerr << "usage: " << argv[0] << " [--only=N[,M...]] [--expect-fail=N[,M...]]\n";
      return 2;
    }
  }
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, gradient_check}, {2, parameter_counts}, {3, pca_oracle},        {4, return_mapping},
      {5, kinematics},     {8, kind_equivalence}, {9, irreversibility},   {6, floor_property},
      {7, hidden_size_trend}, {10, paper_numbers}};
  std::map<int, Outcome> results;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail << std::endl;
    results[id] = o;
  }
  int failed = 0, xfail = 0, xpass = 0;
  for (const auto& [id, o] : results) {
    if (o.pass) {
      xpass += expected.count(id) ? 1 : 0;
    } else if (expected.count(id)) {
      ++xfail;
    } else {
      ++failed;
    }
  }
  std::cout << "summary: " << results.size() - std::size_t(failed + xfail) << "/" << results.size()
            << " criteria passed";
  if (xfail) std::cout << ", " << xfail << " expected failure(s)";
  if (xpass) std::cout << ", " << xpass << " expected failure(s) passed; drop them from --expect-fail";
  std::cout << std::endl;
  return failed == 0 && xpass == 0 ? 0 : 1;
}
