// SPDX-License-Identifier: Apache-2.0
#include "rvesurr/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "rvesurr/error.hpp"
#include "rvesurr/micromodel.hpp"
#include "rvesurr/pathgen.hpp"
#include "rvesurr/pca.hpp"

namespace rvesurr {

namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------- config

namespace {

/// Reads keys from one JSON object and rejects whatever was not consumed.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw InvalidInput("config: '" + name_ + "' must be an object");
  }
  ~Section() = default;

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidInput("config: " + name_ + "." + key + ": " + e.what());
    }
  }
  template <class T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }
  const json& sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return j_.contains(key) ? j_.at(key) : empty;
  }
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw InvalidInput("config: unknown key '" + name_ + "." + k + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInput("config: " + msg);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  Section top(j, "config");
  top.get("output_root", c.output_root);
  {
    Section s(top.sub("paths"), "paths");
    auto& p = c.paths;
    s.get("n_random", p.n_random);
    s.get("n_cyclic", p.n_cyclic);
    s.get("delta_r", p.delta_r);
    s.get("delta_r_min", p.delta_r_min);
    s.get("r_max", p.r_max);
    s.get("max_steps", p.max_steps);
    s.get("cyclic_amplitude", p.cyclic_amplitude);
    s.get("cyclic_step", p.cyclic_step);
    s.get("min_reversals", p.min_reversals);
    s.get("max_reversals", p.max_reversals);
    s.get("seed", p.seed);
    s.finish();
  }
  {
    Section s(top.sub("ensemble"), "ensemble");
    auto& e = c.ensemble;
    s.get("d_gamma", e.d_gamma);
    s.get("n_fiber", e.n_fiber);
    s.get("perturbation", e.perturbation);
    s.get("max_halvings", e.max_halvings);
    s.get("seed", e.seed);
    s.finish();
  }
  {
    Section s(top.sub("dataset"), "dataset");
    auto& d = c.dataset;
    s.get("lengths", d.lengths);
    s.get("gamma_crit", d.gamma_crit);
    s.get("batch_size", d.batch_size);
    s.finish();
  }
  {
    Section s(top.sub("pca"), "pca");
    auto& p = c.pca;
    std::string fam = to_string(p.family);
    s.get("family", fam);
    p.family = family_from_string(fam);
    s.get_optional("p", p.p);
    s.get_optional("delta", p.delta);
    if (j.contains("pca") && j.at("pca").contains("delta") && !j.at("pca").contains("p")) p.p.reset();
    s.get("subsample", p.subsample);
    s.get("seed", p.seed);
    s.finish();
  }
  {
    Section s(top.sub("train"), "train");
    auto& t = c.train;
    std::string kind = to_string(t.kind);
    s.get("kind", kind);
    t.kind = surrogate_kind_from_string(kind);
    s.get("nnw_in", t.nnw_in);
    s.get("n_hidden", t.n_hidden);
    s.get("nnw_out_hidden", t.nnw_out_hidden);
    s.get_optional("p", t.p);
    s.get("q", t.q);
    s.get("trained_group_count", t.trained_group_count);
    s.get("n_batches", t.optimizer.n_batches);
    s.get("n_epoch", t.optimizer.n_epoch);
    s.get("seed", t.seed);
    {
      Section o(s.sub("optimizer"), "train.optimizer");
      o.get("learning_rate", t.optimizer.learning_rate);
      o.get("beta1", t.optimizer.beta1);
      o.get("beta2", t.optimizer.beta2);
      o.get("epsilon", t.optimizer.epsilon);
      o.get("weight_decay", t.optimizer.weight_decay);
      o.get("clip_norm", t.optimizer.clip_norm);
      o.finish();
    }
    s.finish();
  }
  {
    Section s(top.sub("trial"), "trial");
    auto& t = c.trial;
    s.get("target_p", t.target_p);
    s.get("start_n_h", t.start_n_h);
    s.get("increment", t.increment);
    s.get("max_n_h", t.max_n_h);
    s.get("n_batches", t.n_batches);
    s.get("threshold", t.threshold);
    s.get("nnw_in", t.nnw_in);
    s.get("nnw_out_hidden", t.nnw_out_hidden);
    s.get("seed", t.seed);
    s.finish();
  }
  {
    Section s(top.sub("eval"), "eval");
    auto& e = c.eval;
    s.get("snapshot_steps", e.snapshot_steps);
    s.get("output_dir", e.output_dir);
    s.get_optional("dataset", e.dataset);
    s.get("max_snapshot_sequences", e.max_snapshot_sequences);
    s.finish();
  }
  top.finish();
  c.train.optimizer.batch_size = c.dataset.batch_size;
  c.validate();
  return c;
}

json PipelineConfig::to_json() const {
  json j;
  j["output_root"] = output_root;
  j["paths"] = {{"n_random", paths.n_random},       {"n_cyclic", paths.n_cyclic},
                {"delta_r", paths.delta_r},         {"delta_r_min", paths.delta_r_min},
                {"r_max", paths.r_max},             {"max_steps", paths.max_steps},
                {"cyclic_amplitude", paths.cyclic_amplitude},
                {"cyclic_step", paths.cyclic_step}, {"min_reversals", paths.min_reversals},
                {"max_reversals", paths.max_reversals}, {"seed", paths.seed}};
  j["ensemble"] = {{"d_gamma", ensemble.d_gamma},
                   {"n_fiber", ensemble.n_fiber},
                   {"perturbation", ensemble.perturbation},
                   {"max_halvings", ensemble.max_halvings},
                   {"seed", ensemble.seed}};
  j["dataset"] = {{"lengths", dataset.lengths},
                  {"gamma_crit", dataset.gamma_crit},
                  {"batch_size", dataset.batch_size}};
  j["pca"] = {{"family", to_string(pca.family)},
              {"p", pca.p ? json(*pca.p) : json(nullptr)},
              {"delta", pca.delta ? json(*pca.delta) : json(nullptr)},
              {"subsample", pca.subsample},
              {"seed", pca.seed}};
  const auto& o = train.optimizer;
  j["train"] = {{"kind", to_string(train.kind)},
                {"nnw_in", train.nnw_in},
                {"n_hidden", train.n_hidden},
                {"nnw_out_hidden", train.nnw_out_hidden},
                {"p", train.p ? json(*train.p) : json(nullptr)},
                {"q", train.q},
                {"trained_group_count", train.trained_group_count},
                {"n_batches", o.n_batches},
                {"n_epoch", o.n_epoch},
                {"seed", train.seed},
                {"optimizer",
                 {{"learning_rate", o.learning_rate},
                  {"beta1", o.beta1},
                  {"beta2", o.beta2},
                  {"epsilon", o.epsilon},
                  {"weight_decay", o.weight_decay},
                  {"clip_norm", o.clip_norm}}}};
  j["trial"] = {{"target_p", trial.target_p},   {"start_n_h", trial.start_n_h},
                {"increment", trial.increment}, {"max_n_h", trial.max_n_h},
                {"n_batches", trial.n_batches}, {"threshold", trial.threshold},
                {"nnw_in", trial.nnw_in},       {"nnw_out_hidden", trial.nnw_out_hidden},
                {"seed", trial.seed}};
  j["eval"] = {{"snapshot_steps", eval.snapshot_steps},
               {"output_dir", eval.output_dir},
               {"dataset", eval.dataset ? json(*eval.dataset) : json(nullptr)},
               {"max_snapshot_sequences", eval.max_snapshot_sequences}};
  return j;
}

void PipelineConfig::validate() const {
  require(!output_root.empty(), "output_root must not be empty");
  require(paths.n_random >= 0 && paths.n_cyclic >= 0 && paths.n_random + paths.n_cyclic > 0,
          "paths: need at least one path");
  RandomWalkConfig rw{paths.delta_r_min, paths.delta_r, paths.r_max, paths.max_steps, paths.seed};
  rw.validate();
  CyclicConfig cc{paths.seed, paths.min_reversals, paths.cyclic_amplitude, paths.cyclic_step};
  cc.validate();
  require(paths.min_reversals >= 1 && paths.max_reversals >= paths.min_reversals,
          "paths: reversal range must satisfy 1 <= min_reversals <= max_reversals");
  require(ensemble.d_gamma >= 1 && ensemble.n_fiber >= 0, "ensemble: d_gamma >= 1, n_fiber >= 0");
  require(ensemble.perturbation >= 0.0 && ensemble.perturbation < 1.0,
          "ensemble: perturbation must lie in [0, 1)");
  require(ensemble.max_halvings >= 0 && ensemble.max_halvings <= 30, "ensemble: max_halvings in [0, 30]");
  require(!dataset.lengths.empty(), "dataset: at least one training length");
  for (auto L : dataset.lengths) require(L > 0, "dataset: lengths must be positive");
  require(dataset.gamma_crit > 0.0, "dataset: gamma_crit must be positive");
  require(dataset.batch_size >= 1, "dataset: batch_size >= 1");
  require(pca.p.has_value() != pca.delta.has_value(), "pca: give exactly one of p or delta");
  if (pca.p) require(*pca.p >= 1, "pca: p >= 1");
  if (pca.delta) require(*pca.delta >= 0.0 && *pca.delta < 1.0, "pca: delta in [0, 1)");
  require(pca.subsample > 0.0 && pca.subsample <= 1.0, "pca: subsample in (0, 1]");
  const int d = pca.family == Family::gamma ? ensemble.d_gamma : ensemble.d_gamma + ensemble.n_fiber;
  if (pca.p) require(*pca.p <= d, "pca: p exceeds the field dimension");
  require(train.nnw_in.size() >= 2 && train.nnw_in.front() == 3, "train: nnw_in must be (3, ..., n_I)");
  require(train.n_hidden >= 1, "train: n_hidden >= 1");
  const std::optional<int> p = train.p ? train.p : pca.p;
  if (train.kind != SurrogateKind::I && p) {
    if (pca.p) require(*p <= *pca.p, "train: p exceeds the retained PCA dimension");
    if (train.kind == SurrogateKind::III)
      require(train.q >= 1 && *p % train.q == 0, "train: p must be divisible by q");
  }
  train.optimizer.validate();
  require(trial.start_n_h >= 1 && trial.increment >= 1 && trial.max_n_h >= trial.start_n_h,
          "trial: invalid hidden-size schedule");
  require(trial.n_batches >= 1, "trial: n_batches >= 1");
  require(trial.target_p >= 1, "trial: target_p >= 1");
  if (pca.p) require(trial.target_p <= *pca.p, "trial: target_p exceeds the retained PCA dimension");
  require(trial.nnw_in.size() >= 2 && trial.nnw_in.front() == 3, "trial: nnw_in must be (3, ..., n_I)");
  require(!eval.output_dir.empty(), "eval: output_dir must not be empty");
}

void PipelineConfig::override_seeds(std::uint64_t seed) {
  paths.seed = derive_seed(seed, 1);
  ensemble.seed = derive_seed(seed, 2);
  pca.seed = derive_seed(seed, 3);
  train.seed = derive_seed(seed, 4);
  trial.seed = derive_seed(seed, 5);
}

PipelineConfig load_config(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw InvalidInput("cannot read config " + file.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw InvalidInput("config " + file.string() + ": " + e.what());
  }
  return PipelineConfig::from_json(j);
}

fs::path resolve_output_root(const PipelineConfig& cfg) {
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return fs::path(env);
  return fs::path(cfg.output_root);
}

// ------------------------------------------------------------ hashing

std::string sha256_file(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw MissingArtifact("cannot hash " + file.string(), "");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256: digest init failed");
  }
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

// -------------------------------------------------------------- data gen

std::vector<LoadingPath> generate_paths(const PathsSection& cfg) {
  std::vector<LoadingPath> out;
  for (int i = 0; i < cfg.n_random; ++i) {
    RandomWalkConfig rw{cfg.delta_r_min, cfg.delta_r, cfg.r_max, cfg.max_steps,
                        derive_seed(cfg.seed, static_cast<std::uint64_t>(i))};
    out.push_back(generate_random_path(rw));
  }
  for (int i = 0; i < cfg.n_cyclic; ++i) {
    const std::uint64_t s = derive_seed(cfg.seed, 0x10000000ull + static_cast<std::uint64_t>(i));
    Rng rng(derive_seed(s, 1));
    const int span = cfg.max_reversals - cfg.min_reversals + 1;
    CyclicConfig cc{s, cfg.min_reversals + static_cast<int>(rng.below(static_cast<std::uint64_t>(span))),
                    cfg.cyclic_amplitude, cfg.cyclic_step};
    out.push_back(generate_cyclic_path(cc));
  }
  return out;
}

namespace {

SequenceRecord simulate(const LoadingPath& path, const RveEnsemble& ensemble, int max_halvings) {
  SequenceOptions opt;
  opt.max_halvings = max_halvings;
  const SequenceRun run = run_sequence(path, ensemble, opt);
  const std::size_t n = run.snapshots.size();
  SequenceRecord rec;
  rec.inputs = strain_features(std::vector<SymTensor2>(path.strains.begin(), path.strains.begin() + static_cast<std::ptrdiff_t>(n)));
  rec.gamma = Block(n, ensemble.d_gamma());
  rec.tau = Block(n, ensemble.d_tau());
  for (std::size_t t = 0; t < n; ++t) {
    std::copy(run.snapshots[t].gamma_field.begin(), run.snapshots[t].gamma_field.end(), rec.gamma.row(t).begin());
    std::copy(run.snapshots[t].tau_field.begin(), run.snapshots[t].tau_field.end(), rec.tau.row(t).begin());
  }
  if (run.truncated) rec.flags |= record_flags::kTruncated;
  if (path.kind == PathKind::cyclic) rec.flags |= record_flags::kCyclic;
  return rec;
}

}  // namespace

std::vector<SequenceRecord> generate_dataset(std::span<const LoadingPath> paths,
                                             const EnsembleSection& cfg, int jobs) {
  const RveEnsemble ensemble = build_ensemble(cfg.d_gamma, cfg.n_fiber, cfg.perturbation, cfg.seed);
  std::vector<SequenceRecord> out(paths.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < paths.size(); i = next++) out[i] = simulate(paths[i], ensemble, cfg.max_halvings);
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(paths.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < n; ++k) pool.emplace_back(worker);
  }
  return out;
}

std::vector<SequenceRecord> load_trimmed(const fs::path& file, double gamma_crit) {
  auto recs = read_records(file);
  for (auto& r : recs) r = pre_trim(r, gamma_crit, Family::gamma);
  return recs;
}

// --------------------------------------------------------------- stages

namespace {

std::ostream& log_of(const RunContext& ctx) { return ctx.log ? *ctx.log : std::clog; }

fs::path paths_file(const RunContext& c) { return c.root / "paths" / "paths.rveseq"; }
fs::path data_file(const RunContext& c) { return c.root / "data" / "data.rveseq"; }
fs::path pca_dir(const RunContext& c) { return c.root / "pca"; }
fs::path pca_file(const RunContext& c) { return pca_dir(c) / ("pca_" + to_string(c.config.pca.family) + ".bin"); }
fs::path normspec_file(const RunContext& c) { return pca_dir(c) / "normspec.json"; }
fs::path bundle_dir(const RunContext& c) { return c.root / "train" / "bundle"; }

void need(const fs::path& file, const std::string& stage) {
  if (!fs::exists(file))
    throw MissingArtifact("missing " + file.string() + "; run `" + stage + "` first", stage);
}

void write_manifest(const RunContext& ctx, const fs::path& dir, const std::string& stage,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                    json extra = json::object()) {
  json m;
  m["stage"] = stage;
  m["tool"] = "rvesurr";
  m["version"] = "0.1.0";
  m["rng"] = Rng::kAlgorithm;
  m["config"] = ctx.config.to_json();
  m["seeds"] = {{"paths", ctx.config.paths.seed},
                {"ensemble", ctx.config.ensemble.seed},
                {"pca", ctx.config.pca.seed},
                {"train", ctx.config.train.seed},
                {"trial", ctx.config.trial.seed}};
  auto hashes = [&](const std::vector<fs::path>& files) {
    json a = json::array();
    for (const auto& f : files)
      a.push_back({{"path", fs::relative(f, ctx.root).generic_string()}, {"sha256", sha256_file(f)}});
    return a;
  };
  m["inputs"] = hashes(inputs);
  m["outputs"] = hashes(outputs);
  for (auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  os << m.dump(2) << '\n';
  if (!os) throw Error("cannot write " + (dir / "manifest.json").string());
}

std::ofstream open_csv(const fs::path& file) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw Error("cannot write " + file.string());
  os << std::setprecision(17);
  return os;
}

std::vector<fs::path> bundle_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

struct Reduction {
  NormalizationSpec input_norm, field_norm;
  PcaModel pca;
};

Reduction load_reduction(const RunContext& ctx) {
  need(pca_file(ctx), "pca-fit");
  need(normspec_file(ctx), "pca-fit");
  std::ifstream is(normspec_file(ctx));
  const json j = json::parse(is);
  if (j.at("family").get<std::string>() != to_string(ctx.config.pca.family))
    throw InvalidInput("normspec.json was fitted for another family; rerun pca-fit");
  return {NormalizationSpec::from_json(j.at("input")), NormalizationSpec::from_json(j.at("field")),
          read_pca(pca_file(ctx))};
}

}  // namespace

void stage_gen_paths(const RunContext& ctx) {
  const auto dir = ctx.root / "paths";
  fs::create_directories(dir);
  const auto paths = generate_paths(ctx.config.paths);
  std::size_t capped = 0;
  for (const auto& p : paths) capped += p.hit_step_cap;
  write_paths(paths_file(ctx), paths);
  write_manifest(ctx, dir, "gen-paths", {}, {paths_file(ctx)},
                 {{"paths", paths.size()}, {"hit_step_cap", capped}});
  log_of(ctx) << "gen-paths: " << paths.size() << " paths (" << capped << " hit the step cap)\n";
}

void stage_gen_data(const RunContext& ctx) {
  need(paths_file(ctx), "gen-paths");
  const auto dir = ctx.root / "data";
  fs::create_directories(dir);
  const auto paths = read_paths(paths_file(ctx));
  const auto recs = generate_dataset(paths, ctx.config.ensemble, ctx.jobs);
  // postconditions: non-negative fields, per-point monotone gamma
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& g = recs[i].gamma;
    for (std::size_t t = 0; t < g.rows; ++t)
      for (std::size_t j = 0; j < g.cols; ++j) {
        if (g(t, j) < 0.0 || (t > 0 && g(t, j) < g(t - 1, j)))
          throw Error("gen-data: gamma field of sequence " + std::to_string(i) + " is not monotone");
      }
    for (double v : recs[i].tau.data)
      if (!(v >= 0.0)) throw Error("gen-data: negative or non-finite tau_eq in sequence " + std::to_string(i));
  }
  write_records(data_file(ctx), recs);
  const auto& e = ctx.config.ensemble;
  const MatrixParams mp;
  const FiberParams fp;
  json extra = {{"stats", dataset_stats(recs)},
                {"material",
                 {{"k_fib_mpa", fp.k_fib},
                  {"mu_fib_mpa", fp.mu_fib},
                  {"k_mat_mpa", mp.k_mat},
                  {"mu_mat_mpa", mp.mu_mat},
                  {"tau_y0_mpa", mp.tau_y0},
                  {"y_hard_mpa", mp.y_hard},
                  {"k_hard", mp.k_hard}}},
                {"ensemble_seed", e.seed},
                {"field_points", "one ensemble point stands in for one element average"}};
  write_manifest(ctx, dir, "gen-data", {paths_file(ctx)}, {data_file(ctx)}, extra);
  log_of(ctx) << "gen-data: " << recs.size() << " sequences\n";
}

void stage_pca_fit(const RunContext& ctx) {
  need(data_file(ctx), "gen-data");
  const auto& cfg = ctx.config;
  const auto dir = pca_dir(ctx);
  fs::create_directories(dir);
  const auto recs = load_trimmed(data_file(ctx), cfg.dataset.gamma_crit);
  const auto in_norm = fit_input_norm(recs);
  const auto field_norm = fit_field_norm(recs, cfg.pca.family);
  const Block snaps = normalized_snapshots(recs, cfg.pca.family, field_norm);

  PcaFitOptions opt;
  opt.subsample_fraction = cfg.pca.subsample;
  opt.seed = cfg.pca.seed;
  opt.retention = cfg.pca.p ? Retention::fixed(*cfg.pca.p) : Retention::tolerance(*cfg.pca.delta);
  const PcaModel model = fit_pca(snaps, opt);
  write_pca(pca_file(ctx), model);

  {
    std::ofstream os(normspec_file(ctx), std::ios::trunc);
    os << json{{"family", to_string(cfg.pca.family)}, {"input", in_norm.to_json()}, {"field", field_norm.to_json()}}.dump(2)
       << '\n';
  }
  const auto csv_path = dir / ("residual_" + to_string(cfg.pca.family) + ".csv");
  {
    auto os = open_csv(csv_path);
    os << "p,residual_fraction,eigenvalue\n";
    double prev = 1.0;
    for (int p = 0; p <= static_cast<int>(model.dim()); ++p) {
      const double r = residual_fraction(model, p);
      if (r > prev + 1e-12) throw Error("pca-fit: residual fraction increased at p = " + std::to_string(p));
      prev = r;
      os << p << ',' << r << ',' << (p > 0 ? model.eigenvalues(p - 1) : 0.0) << '\n';
    }
  }
  write_manifest(ctx, dir, "pca-fit", {data_file(ctx)}, {pca_file(ctx), normspec_file(ctx), csv_path},
                 {{"retained_p", model.retained_p},
                  {"residual_fraction", residual_fraction(model, model.retained_p)},
                  {"n_snapshots", model.n_samples}});
  log_of(ctx) << "pca-fit: d = " << model.dim() << ", p = " << model.retained_p
              << ", residual fraction " << residual_fraction(model, model.retained_p) << '\n';
}

void stage_train(const RunContext& ctx) {
  need(data_file(ctx), "gen-data");
  const auto& cfg = ctx.config;
  const Reduction red = load_reduction(ctx);
  const auto recs = load_trimmed(data_file(ctx), cfg.dataset.gamma_crit);

  SurrogateSpec spec;
  spec.kind = cfg.train.kind;
  spec.nnw_in = cfg.train.nnw_in;
  spec.n_hidden = cfg.train.n_hidden;
  spec.nnw_out_hidden = cfg.train.nnw_out_hidden;
  spec.p = cfg.train.p.value_or(red.pca.retained_p);
  spec.q = cfg.train.q;
  spec.trained_group_count = cfg.train.trained_group_count;
  spec.seed = derive_seed(cfg.train.seed, 0);
  SurrogateBundle bundle = build_surrogate(spec, red.field_norm.size(), cfg.pca.family);
  attach_reduction(bundle, red.input_norm, red.field_norm,
                   cfg.train.kind == SurrogateKind::I ? std::nullopt : std::optional<PcaModel>(red.pca));

  SurrogateTrainOptions opt;
  opt.train = cfg.train.optimizer;
  opt.train.batch_size = cfg.dataset.batch_size;
  opt.train.seed = derive_seed(cfg.train.seed, 1);
  opt.lengths = cfg.dataset.lengths;
  log_of(ctx) << "train: surrogate " << to_string(bundle.kind) << ", " << bundle.rnns.size()
              << " RNN(s), " << bundle.count_parameters() << " parameters\n";
  const TrainReport rep = train(bundle, recs, opt);

  const auto dir = ctx.root / "train";
  fs::create_directories(dir);
  fs::remove_all(bundle_dir(ctx));
  write_bundle(bundle_dir(ctx), bundle);
  const auto loss_csv = dir / "loss.csv";
  {
    auto os = open_csv(loss_csv);
    os << "batch,group,length,loss\n";
    for (const auto& e : rep.history) os << e.batch << ',' << e.group << ',' << e.length << ',' << e.loss << '\n';
  }
  // The full-dimensional error is logged next to the coefficient-space loss.
  const EvaluationReport ev = evaluate(bundle, recs);
  if (!std::isfinite(ev.mse_full_dim)) throw Error("train: non-finite full-dimensional MSE");
  std::vector<fs::path> outs = bundle_files(bundle_dir(ctx));
  outs.push_back(loss_csv);
  write_manifest(ctx, dir, "train", {data_file(ctx), pca_file(ctx), normspec_file(ctx)}, outs,
                 {{"final_loss", rep.final_loss},
                  {"train_mse_full_dim", ev.mse_full_dim},
                  {"parameters", bundle.count_parameters()}});
  log_of(ctx) << "train: final loss " << rep.final_loss << ", full-dimensional MSE " << ev.mse_full_dim << '\n';
}

void stage_trial(const RunContext& ctx) {
  need(data_file(ctx), "gen-data");
  const auto& cfg = ctx.config;
  const Reduction red = load_reduction(ctx);
  const auto recs = load_trimmed(data_file(ctx), cfg.dataset.gamma_crit);
  TrialConfig tc;
  tc.target_p = cfg.trial.target_p;
  tc.start_n_h = cfg.trial.start_n_h;
  tc.increment = cfg.trial.increment;
  tc.max_n_h = cfg.trial.max_n_h;
  tc.nnw_in = cfg.trial.nnw_in;
  tc.nnw_out_hidden = cfg.trial.nnw_out_hidden;
  tc.threshold = cfg.trial.threshold;
  tc.train.lengths = cfg.dataset.lengths;
  tc.train.train = cfg.train.optimizer;
  tc.train.train.batch_size = cfg.dataset.batch_size;
  tc.train.train.n_batches = cfg.trial.n_batches;
  tc.train.train.seed = cfg.trial.seed;
  const TrialReport rep = hidden_size_trial(recs, cfg.pca.family, red.input_norm, red.field_norm, red.pca, tc);

  const auto dir = ctx.root / "trial";
  fs::create_directories(dir);
  const auto csv = dir / "trial.csv";
  {
    auto os = open_csv(csv);
    os << "n_h,score,final_loss,passed\n";
    for (const auto& e : rep.entries) os << e.n_h << ',' << e.score << ',' << e.final_loss << ',' << (e.score >= tc.threshold) << '\n';
  }
  write_manifest(ctx, dir, "trial", {data_file(ctx), pca_file(ctx), normspec_file(ctx)}, {csv},
                 {{"recommended_n_h", rep.recommended_n_h ? json(*rep.recommended_n_h) : json(nullptr)},
                  {"best_n_h", rep.best.n_h},
                  {"best_score", rep.best.score},
                  {"threshold", tc.threshold}});
  if (rep.recommended_n_h)
    log_of(ctx) << "trial: n_h = " << *rep.recommended_n_h << " passes (r >= " << tc.threshold << ")\n";
  else
    log_of(ctx) << "trial: budget exhausted; best n_h = " << rep.best.n_h << " with r = " << rep.best.score << '\n';
}

void stage_eval(const RunContext& ctx) {
  const auto& cfg = ctx.config;
  need(bundle_dir(ctx) / "bundle.json", "train");
  const SurrogateBundle bundle = read_bundle(bundle_dir(ctx));
  const fs::path data = cfg.eval.dataset ? fs::path(*cfg.eval.dataset) : data_file(ctx);
  need(data, "gen-data");
  const auto recs = load_trimmed(data, cfg.dataset.gamma_crit);
  const EvaluationReport rep = evaluate(bundle, recs, cfg.eval.snapshot_steps);
  if (!std::isfinite(rep.mse_full_dim)) throw Error("eval: non-finite MSE");

  const fs::path dir = ctx.root / cfg.eval.output_dir;
  fs::create_directories(dir);
  std::vector<fs::path> outs;
  {
    outs.push_back(dir / "report.csv");
    auto os = open_csv(outs.back());
    os << "sequence,steps,mse\n";
    for (std::size_t i = 0; i < rep.sequences.size(); ++i)
      os << i << ',' << rep.sequences[i].steps << ',' << rep.sequences[i].mse << '\n';
  }
  {
    outs.push_back(dir / "max_traces.csv");
    auto os = open_csv(outs.back());
    os << "sequence,step,max_pred,max_pred_clamped,max_true\n";
    for (std::size_t i = 0; i < rep.sequences.size(); ++i) {
      const auto& s = rep.sequences[i];
      for (std::size_t t = 0; t < s.steps; ++t)
        os << i << ',' << t << ',' << s.max_pred[t] << ',' << std::max(s.max_pred[t], 0.0) << ',' << s.max_true[t] << '\n';
    }
  }
  for (const auto& sn : rep.snapshots) {
    if (sn.sequence >= cfg.eval.max_snapshot_sequences) continue;
    outs.push_back(dir / ("snapshot_" + std::to_string(sn.sequence) + "_" + std::to_string(sn.step) + ".csv"));
    auto os = open_csv(outs.back());
    os << "point_index,value,value_clamped,reference\n";
    for (std::size_t k = 0; k < sn.predicted.size(); ++k)
      os << k << ',' << sn.predicted[k] << ',' << std::max(sn.predicted[k], 0.0) << ',' << sn.reference[k] << '\n';
  }
  double floor = 0.0;
  if (bundle.pca) floor = pca_floor_mse(*bundle.pca, bundle.spec.p, recs, bundle.family, bundle.field_norm);
  {
    outs.push_back(dir / "summary.json");
    std::ofstream os(outs.back(), std::ios::trunc);
    os << json{{"kind", to_string(bundle.kind)},
               {"family", to_string(bundle.family)},
               {"mse_full_dim", rep.mse_full_dim},
               {"pca_floor_mse", bundle.pca ? json(floor) : json(nullptr)},
               {"sequences", rep.sequences.size()},
               {"optimizer", {{"name", "adam"},
                              {"learning_rate", cfg.train.optimizer.learning_rate},
                              {"clip_norm", cfg.train.optimizer.clip_norm}}}}
              .dump(2)
       << '\n';
  }
  std::vector<fs::path> ins = bundle_files(bundle_dir(ctx));
  ins.push_back(data);
  write_manifest(ctx, dir, "eval", ins, outs, {{"mse_full_dim", rep.mse_full_dim}});
  log_of(ctx) << "eval: mse_full_dim " << rep.mse_full_dim;
  if (bundle.pca) log_of(ctx) << " (PCA floor " << floor << ")";
  log_of(ctx) << '\n';
}

void run_stage(const RunContext& ctx, const std::string& stage) {
  if (stage == "all") {
    for (const auto& s : stage_names()) run_stage(ctx, s);
    return;
  }
  if (stage == "gen-paths") return stage_gen_paths(ctx);
  if (stage == "gen-data") return stage_gen_data(ctx);
  if (stage == "pca-fit") return stage_pca_fit(ctx);
  if (stage == "train") return stage_train(ctx);
  if (stage == "trial") return stage_trial(ctx);
  if (stage == "eval") return stage_eval(ctx);
  throw InvalidInput("unknown stage '" + stage + "'");
}

}  // namespace rvesurr
