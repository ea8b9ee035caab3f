// SPDX-License-Identifier: Apache-2.0
#include "rvesurr/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rvesurr/error.hpp"

namespace rvesurr {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Stream tag for the mini-batch sampler, kept apart from initialization seeds.
constexpr std::uint64_t kBatchStream = 0xBA7C4ull;

Eigen::Map<const RowMat> as_matrix(const Block& b) {
  return {b.data.data(), static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols)};
}

Block from_matrix(const RowMat& m) {
  Block b(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  Eigen::Map<RowMat>(b.data.data(), m.rows(), m.cols()) = m;
  return b;
}
}  // namespace

std::string to_string(SurrogateKind k) {
  switch (k) {
    case SurrogateKind::I: return "I";
    case SurrogateKind::II: return "II";
    case SurrogateKind::III: return "III";
  }
  return "?";
}

SurrogateKind surrogate_kind_from_string(const std::string& s) {
  if (s == "I" || s == "1") return SurrogateKind::I;
  if (s == "II" || s == "2") return SurrogateKind::II;
  if (s == "III" || s == "3") return SurrogateKind::III;
  throw InvalidInput("unknown surrogate kind '" + s + "' (expected I, II or III)");
}

// ---------------------------------------------------------------- groups

std::vector<GroupRange> group_ranges(int p, int q) {
  if (p <= 0 || q <= 0) throw InvalidInput("p and Q must be positive");
  if (p % q != 0)
    throw InvalidInput("p = " + std::to_string(p) + " is not divisible by Q = " + std::to_string(q));
  const auto k = static_cast<std::size_t>(p / q);
  std::vector<GroupRange> g;
  for (std::size_t i = 0; i < static_cast<std::size_t>(q); ++i) g.push_back({i * k, (i + 1) * k});
  return g;
}

std::vector<std::vector<double>> split_outputs(std::span<const double> coefficients, int q) {
  std::vector<std::vector<double>> out;
  for (const auto& r : group_ranges(static_cast<int>(coefficients.size()), q))
    out.emplace_back(coefficients.begin() + static_cast<std::ptrdiff_t>(r.begin),
                     coefficients.begin() + static_cast<std::ptrdiff_t>(r.end));
  return out;
}

std::vector<double> concat_groups(std::span<const std::vector<double>> groups) {
  std::vector<double> out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

// ------------------------------------------------------------------ spec

nlohmann::json SurrogateSpec::to_json() const {
  return {{"kind", to_string(kind)},
          {"nnw_in", nnw_in},
          {"n_hidden", n_hidden},
          {"nnw_out_hidden", nnw_out_hidden},
          {"p", p},
          {"q", q},
          {"trained_group_count", trained_group_count},
          {"h0", h0},
          {"seed", seed}};
}

SurrogateSpec SurrogateSpec::from_json(const nlohmann::json& j) {
  SurrogateSpec s;
  s.kind = surrogate_kind_from_string(j.at("kind").get<std::string>());
  s.nnw_in = j.at("nnw_in").get<std::vector<int>>();
  s.n_hidden = j.at("n_hidden").get<int>();
  s.nnw_out_hidden = j.at("nnw_out_hidden").get<std::vector<int>>();
  s.p = j.at("p").get<int>();
  s.q = j.at("q").get<int>();
  s.trained_group_count = j.at("trained_group_count").get<int>();
  s.h0 = j.at("h0").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

// ---------------------------------------------------------------- bundle

std::size_t SurrogateBundle::output_dim() const {
  return kind == SurrogateKind::I ? field_dim : static_cast<std::size_t>(spec.p);
}

std::vector<std::size_t> SurrogateBundle::parameter_counts() const {
  std::vector<std::size_t> c;
  for (const auto& r : rnns) c.push_back(r.count_parameters());
  return c;
}

std::size_t SurrogateBundle::count_parameters() const {
  std::size_t n = 0;
  for (auto c : parameter_counts()) n += c;
  return n;
}

SurrogateBundle build_surrogate(const SurrogateSpec& spec, std::size_t field_dim, Family family) {
  if (field_dim == 0) throw InvalidInput("field dimension must be positive");
  if (spec.nnw_in.empty() || spec.nnw_in.front() != 3)
    throw InvalidInput("NNW_I must start with the 3 strain features");
  SurrogateBundle b;
  b.kind = spec.kind;
  b.family = family;
  b.spec = spec;
  b.field_dim = field_dim;

  std::size_t out_width = field_dim;
  switch (spec.kind) {
    case SurrogateKind::I:
      b.groups = {{0, field_dim}};
      b.spec.q = 1;
      b.spec.p = 0;
      break;
    case SurrogateKind::II:
      if (spec.p <= 0) throw InvalidInput("kind II needs p > 0");
      if (static_cast<std::size_t>(spec.p) > field_dim) throw InvalidInput("p exceeds the field dimension");
      b.groups = {{0, static_cast<std::size_t>(spec.p)}};
      b.spec.q = 1;
      out_width = static_cast<std::size_t>(spec.p);
      break;
    case SurrogateKind::III:
      if (static_cast<std::size_t>(spec.p) > field_dim) throw InvalidInput("p exceeds the field dimension");
      b.groups = group_ranges(spec.p, spec.q);
      out_width = b.groups.front().size();
      break;
  }
  const int n_groups = static_cast<int>(b.groups.size());
  int trained = spec.trained_group_count < 0 ? n_groups : spec.trained_group_count;
  if (spec.kind != SurrogateKind::III) trained = spec.trained_group_count == 0 ? 0 : n_groups;
  if (trained > n_groups) throw InvalidInput("trained_group_count exceeds Q");

  RnnArchitecture arch;
  arch.nnw_in = spec.nnw_in;
  arch.n_hidden = spec.n_hidden;
  arch.nnw_out = spec.nnw_out_hidden;
  arch.nnw_out.push_back(static_cast<int>(out_width));
  arch.h0 = spec.h0;
  for (int g = 0; g < n_groups; ++g) {
    b.rnns.push_back(make_rnn(arch, derive_seed(spec.seed, static_cast<std::uint64_t>(g))));
    b.untrained.push_back(g >= trained);
  }
  return b;
}

// ------------------------------------------------------------ data prep

std::vector<const SequenceRecord*> usable_records(std::span<const SequenceRecord> records) {
  std::vector<const SequenceRecord*> out;
  for (const auto& r : records)
    if (!r.excluded() && r.length() > 0) out.push_back(&r);
  return out;
}

NormalizationSpec fit_input_norm(std::span<const SequenceRecord> records) {
  std::vector<const Block*> blocks;
  for (const auto* r : usable_records(records)) blocks.push_back(&r->inputs);
  return fit_normalization(blocks);
}

NormalizationSpec fit_field_norm(std::span<const SequenceRecord> records, Family family) {
  std::vector<const Block*> blocks;
  for (const auto* r : usable_records(records)) blocks.push_back(&r->family(family));
  return fit_normalization(blocks);
}

Block normalized_snapshots(std::span<const SequenceRecord> records, Family family,
                           const NormalizationSpec& field_norm) {
  const auto use = usable_records(records);
  std::size_t rows = 0;
  for (const auto* r : use) rows += r->length();
  Block out(rows, field_norm.size());
  std::size_t at = 0;
  for (const auto* r : use) {
    const Block& f = r->family(family);
    if (f.cols != field_norm.size()) throw DimensionMismatch("field width differs from the normalization");
    std::copy(f.data.begin(), f.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(at * f.cols));
    at += f.rows;
  }
  field_norm.normalize(out);
  return out;
}

void attach_reduction(SurrogateBundle& bundle, const NormalizationSpec& input_norm,
                      const NormalizationSpec& field_norm, const std::optional<PcaModel>& pca) {
  if (input_norm.size() != 3) throw DimensionMismatch("input normalization must cover 3 features");
  if (field_norm.size() != bundle.field_dim)
    throw DimensionMismatch("field normalization width differs from the bundle field dimension");
  bundle.input_norm = input_norm;
  bundle.field_norm = field_norm;
  if (bundle.kind == SurrogateKind::I) {
    bundle.pca.reset();
    return;
  }
  if (!pca) throw MissingArtifact("surrogate " + to_string(bundle.kind) + " needs a PCA basis", "pca-fit");
  if (pca->dim() != bundle.field_dim) throw DimensionMismatch("PCA dimension differs from the field dimension");
  if (pca->components.cols() < bundle.spec.p)
    throw InvalidInput("PCA retains " + std::to_string(pca->components.cols()) +
                       " components but p = " + std::to_string(bundle.spec.p));
  bundle.pca = pca->truncated(bundle.spec.p);
}

namespace {

Block normalized_inputs(const SurrogateBundle& bundle, const Block& inputs) {
  if (inputs.cols != 3 || bundle.input_norm.size() != 3)
    throw DimensionMismatch("strain inputs must have 3 features (E_xx, E_yy, E_xy)");
  Block x = inputs;
  bundle.input_norm.normalize(x);
  return x;
}

Block normalized_field(const SurrogateBundle& bundle, const SequenceRecord& rec) {
  Block f = rec.family(bundle.family);
  if (f.cols != bundle.field_dim) throw DimensionMismatch("record field width differs from the bundle");
  bundle.field_norm.normalize(f);
  return f;
}

/// Raw PCA coefficients, one row per step.
Block raw_coefficients(const PcaModel& pca, const Block& normalized) {
  const RowMat centered = as_matrix(normalized).rowwise() - pca.mean.transpose();
  return from_matrix(centered * pca.components);
}

}  // namespace

Block target_block(const SurrogateBundle& bundle, const SequenceRecord& rec) {
  Block f = normalized_field(bundle, rec);
  if (bundle.kind == SurrogateKind::I) return f;
  if (!bundle.pca) throw MissingArtifact("bundle has no PCA basis", "pca-fit");
  Block xi = raw_coefficients(*bundle.pca, f);
  bundle.coef_norm.normalize(xi);
  return xi;
}

namespace {

/// Every record joins the shortest group; a longer group L_i additionally
/// takes the records longer than L_{i-1}.
std::vector<std::size_t> lengths_for(std::size_t n, std::vector<std::size_t> lengths) {
  std::sort(lengths.begin(), lengths.end());
  std::vector<std::size_t> out{lengths.front()};
  for (std::size_t i = 1; i < lengths.size(); ++i)
    if (n > lengths[i - 1]) out.push_back(lengths[i]);
  return out;
}

/// The shared mini-batch flow: for each batch, every trained model in turn.
void minibatch_flow(std::vector<RnnModel>& rnns, const std::vector<bool>& untrained,
                    const std::vector<GroupRange>& ranges, const LengthGroups& data,
                    const TrainConfig& cfg, std::vector<LossEntry>& history) {
  cfg.validate();
  std::vector<std::size_t> lengths = data.lengths();
  if (lengths.empty()) throw InvalidInput("no training sequences");
  std::vector<AdamOptimizer> opts;
  for (const auto& r : rnns) opts.emplace_back(r);

  Rng rng(derive_seed(cfg.seed, kBatchStream));
  for (int n = 0; n < cfg.n_batches; ++n) {
    const std::size_t L = lengths.size() == 1 ? lengths.front() : lengths[rng.below(lengths.size())];
    const MiniBatch mb = sample_minibatch(data, cfg.batch_size, L, rng);
    const Eigen::MatrixXd x = batch_inputs(mb);
    for (std::size_t g = 0; g < rnns.size(); ++g) {
      if (untrained[g]) continue;
      const Eigen::MatrixXd y = batch_targets(mb, ranges[g].begin, ranges[g].size());
      RnnModel checkpoint = rnns[g];
      double loss = 0.0;
      bool ok = true;
      try {
        loss = train_on_batch(rnns[g], opts[g], x, y, mb.batch, cfg);
      } catch (const Error&) {
        ok = false;
      }
      if (ok)
        for (auto b : std::as_const(rnns[g]).blocks())
          for (double v : b)
            if (!std::isfinite(v)) ok = false;
      if (!ok) {
        rnns[g] = std::move(checkpoint);
        throw Error("training diverged at mini-batch " + std::to_string(n) + ", group " +
                    std::to_string(g) + "; parameters restored to the last good state");
      }
      history.push_back({n, static_cast<int>(g), L, loss});
    }
  }
}

double tail_loss(const std::vector<LossEntry>& h, int n_batches) {
  const int from = std::max(0, n_batches - 50);
  double sum = 0.0;
  std::size_t cnt = 0;
  for (const auto& e : h)
    if (e.batch >= from) {
      sum += e.loss;
      ++cnt;
    }
  return cnt ? sum / static_cast<double>(cnt) : 0.0;
}

}  // namespace

TrainReport train(SurrogateBundle& bundle, std::span<const SequenceRecord> records,
                  const SurrogateTrainOptions& options) {
  const auto use = usable_records(records);
  if (use.empty()) throw InvalidInput("training needs at least one non-empty record");
  if (options.lengths.empty()) throw InvalidInput("at least one training length is required");
  if (bundle.input_norm.size() == 0) bundle.input_norm = fit_input_norm(records);
  if (bundle.field_norm.size() == 0) bundle.field_norm = fit_field_norm(records, bundle.family);

  // Targets; for II/III also the coefficient normalization and means.
  std::vector<Block> targets;
  if (bundle.kind == SurrogateKind::I) {
    for (const auto* r : use) targets.push_back(normalized_field(bundle, *r));
  } else {
    if (!bundle.pca) throw MissingArtifact("surrogate " + to_string(bundle.kind) + " needs a PCA basis", "pca-fit");
    std::vector<const Block*> ptrs;
    for (const auto* r : use) targets.push_back(raw_coefficients(*bundle.pca, normalized_field(bundle, *r)));
    for (const auto& t : targets) ptrs.push_back(&t);
    bundle.coef_norm = fit_normalization(ptrs);
    const auto p = static_cast<std::size_t>(bundle.spec.p);
    bundle.coef_mean.assign(p, 0.0);
    std::size_t rows = 0;
    for (const auto& t : targets) {
      for (std::size_t i = 0; i < t.rows; ++i)
        for (std::size_t j = 0; j < p; ++j) bundle.coef_mean[j] += t(i, j);
      rows += t.rows;
    }
    for (auto& m : bundle.coef_mean) m /= static_cast<double>(rows);
    for (auto& t : targets) bundle.coef_norm.normalize(t);
  }

  LengthGroups data;
  for (std::size_t i = 0; i < use.size(); ++i) {
    const Block x = normalized_inputs(bundle, use[i]->inputs);
    for (auto L : lengths_for(use[i]->length(), options.lengths))
      data.add({pad_or_trim(x, L), pad_or_trim(targets[i], L)});
  }

  TrainReport report;
  minibatch_flow(bundle.rnns, bundle.untrained, bundle.groups, data, options.train, report.history);
  report.final_loss = tail_loss(report.history, options.train.n_batches);
  bundle.trained = true;
  return report;
}

// ------------------------------------------------------------ prediction

Block FieldPrediction::clamped() const {
  Block c = fields;
  for (double& v : c.data) v = std::max(v, 0.0);
  return c;
}

FieldPrediction predict_fields(const SurrogateBundle& bundle, const Block& strain_inputs) {
  if (!bundle.trained) throw InvalidInput("surrogate bundle has not been trained");
  const Block x = normalized_inputs(bundle, strain_inputs);
  FieldPrediction out;
  if (bundle.kind == SurrogateKind::I) {
    out.normalized = from_matrix(predict_sequence(bundle.rnns.front(), x));
  } else {
    const auto p = static_cast<std::size_t>(bundle.spec.p);
    RowMat xi(static_cast<Eigen::Index>(x.rows), static_cast<Eigen::Index>(p));
    for (std::size_t g = 0; g < bundle.groups.size(); ++g) {
      const auto& r = bundle.groups[g];
      if (bundle.untrained[g]) {
        for (std::size_t j = r.begin; j < r.end; ++j)
          xi.col(static_cast<Eigen::Index>(j)).setConstant(bundle.coef_mean[j]);
        continue;
      }
      const Eigen::MatrixXd y = predict_sequence(bundle.rnns[g], x);
      for (std::size_t j = 0; j < r.size(); ++j)
        for (Eigen::Index t = 0; t < y.rows(); ++t)
          xi(t, static_cast<Eigen::Index>(r.begin + j)) = bundle.coef_norm.denormalize(r.begin + j, y(t, static_cast<Eigen::Index>(j)));
    }
    const RowMat fields = (xi * bundle.pca->components.transpose()).rowwise() + bundle.pca->mean.transpose();
    out.normalized = from_matrix(fields);
  }
  out.fields = out.normalized;
  bundle.field_norm.denormalize(out.fields);
  return out;
}

// ------------------------------------------------------------ evaluation

EvaluationReport evaluate(const SurrogateBundle& bundle, std::span<const SequenceRecord> records,
                          std::span<const std::size_t> snapshot_steps) {
  EvaluationReport rep;
  double sse = 0.0;
  std::size_t count = 0;
  std::size_t seq_index = 0;
  for (const auto* r : usable_records(records)) {
    const FieldPrediction pred = predict_fields(bundle, r->inputs);
    const Block truth_n = normalized_field(bundle, *r);
    const Block& truth = r->family(bundle.family);
    SequenceEvaluation se;
    se.steps = r->length();
    double s = 0.0;
    for (std::size_t i = 0; i < truth_n.data.size(); ++i) {
      const double e = pred.normalized.data[i] - truth_n.data[i];
      s += e * e;
    }
    se.mse = s / static_cast<double>(truth_n.data.size());
    sse += s;
    count += truth_n.data.size();
    for (std::size_t t = 0; t < se.steps; ++t) {
      const auto pr = pred.fields.row(t);
      const auto tr = truth.row(t);
      se.max_pred.push_back(*std::max_element(pr.begin(), pr.end()));
      se.max_true.push_back(*std::max_element(tr.begin(), tr.end()));
    }
    for (auto step : snapshot_steps) {
      if (step >= se.steps) continue;
      const auto pr = pred.fields.row(step);
      const auto tr = truth.row(step);
      rep.snapshots.push_back({seq_index, step, {pr.begin(), pr.end()}, {tr.begin(), tr.end()}});
    }
    rep.sequences.push_back(std::move(se));
    ++seq_index;
  }
  rep.mse_full_dim = count ? sse / static_cast<double>(count) : 0.0;
  return rep;
}

double pca_floor_mse(const PcaModel& pca, int p, std::span<const SequenceRecord> records,
                     Family family, const NormalizationSpec& field_norm) {
  const PcaModel tp = pca.truncated(p);
  const Block snaps = normalized_snapshots(records, family, field_norm);
  if (snaps.rows == 0) return 0.0;
  const auto a = as_matrix(snaps);
  const RowMat centered = a.rowwise() - tp.mean.transpose();
  const RowMat recon = (centered * tp.components) * tp.components.transpose();
  return (centered - recon).squaredNorm() / static_cast<double>(snaps.data.size());
}

// ------------------------------------------------------------------ trial

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("pearson: length mismatch");
  const auto n = static_cast<double>(a.size());
  if (a.empty()) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

TrialReport hidden_size_trial(std::span<const SequenceRecord> records, Family family,
                              const NormalizationSpec& input_norm,
                              const NormalizationSpec& field_norm, const PcaModel& pca,
                              const TrialConfig& config) {
  if (config.target_p < 1 || config.target_p > pca.components.cols())
    throw InvalidInput("target_p = " + std::to_string(config.target_p) + " exceeds the retained PCA dimension");
  if (config.start_n_h < 1 || config.increment < 1 || config.max_n_h < config.start_n_h)
    throw InvalidInput("invalid hidden-size schedule");
  if (config.validation_stride < 2) throw InvalidInput("validation stride must be >= 2");

  const auto use = usable_records(records);
  const auto col = static_cast<Eigen::Index>(config.target_p - 1);
  std::vector<Block> xs, ys;
  std::vector<bool> held_out;
  for (std::size_t i = 0; i < use.size(); ++i) {
    Block x = use[i]->inputs;
    input_norm.normalize(x);
    Block f = use[i]->family(family);
    field_norm.normalize(f);
    const Eigen::VectorXd c =
        (as_matrix(f).rowwise() - pca.mean.transpose()) * pca.components.col(col);
    Block y(f.rows, 1);
    for (std::size_t t = 0; t < f.rows; ++t) y(t, 0) = c(static_cast<Eigen::Index>(t));
    xs.push_back(std::move(x));
    ys.push_back(std::move(y));
    held_out.push_back(i % config.validation_stride == config.validation_stride - 1);
  }
  std::vector<const Block*> train_y;
  for (std::size_t i = 0; i < ys.size(); ++i)
    if (!held_out[i]) train_y.push_back(&ys[i]);
  if (train_y.empty() || train_y.size() == ys.size())
    throw InvalidInput("hidden-size trial needs both training and validation records");
  const NormalizationSpec ynorm = fit_normalization(train_y);

  LengthGroups data;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (held_out[i]) continue;
    Block y = ys[i];
    ynorm.normalize(y);
    for (auto L : lengths_for(xs[i].rows, config.train.lengths))
      data.add({pad_or_trim(xs[i], L), pad_or_trim(y, L)});
  }

  TrialReport rep;
  rep.best.score = -2.0;
  for (int n_h = config.start_n_h; n_h <= config.max_n_h; n_h += config.increment) {
    RnnArchitecture arch;
    arch.nnw_in = config.nnw_in;
    arch.n_hidden = n_h;
    arch.nnw_out = config.nnw_out_hidden;
    arch.nnw_out.push_back(1);
    std::vector<RnnModel> rnns{make_rnn(arch, derive_seed(config.train.train.seed, static_cast<std::uint64_t>(n_h)))};
    std::vector<LossEntry> hist;
    minibatch_flow(rnns, {false}, {{0, 1}}, data, config.train.train, hist);

    std::vector<double> pred, truth;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!held_out[i]) continue;
      const Eigen::MatrixXd out = predict_sequence(rnns.front(), xs[i]);
      for (Eigen::Index t = 0; t < out.rows(); ++t) pred.push_back(out(t, 0));
      for (std::size_t t = 0; t < ys[i].rows; ++t) truth.push_back(ynorm.normalize(0, ys[i](t, 0)));
    }
    TrialEntry e{n_h, pearson(pred, truth), tail_loss(hist, config.train.train.n_batches)};
    rep.entries.push_back(e);
    if (e.score > rep.best.score) rep.best = e;
    if (e.score >= config.threshold) {
      rep.recommended_n_h = n_h;
      break;
    }
  }
  return rep;
}

// ------------------------------------------------------------------ files

namespace {
constexpr int kBundleVersion = 1;
}

void write_bundle(const std::filesystem::path& dir, const SurrogateBundle& b) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["format"] = "rvesurr-bundle";
  j["version"] = kBundleVersion;
  j["kind"] = to_string(b.kind);
  j["family"] = to_string(b.family);
  j["spec"] = b.spec.to_json();
  j["field_dim"] = b.field_dim;
  j["trained"] = b.trained;
  j["input_norm"] = b.input_norm.to_json();
  j["field_norm"] = b.field_norm.to_json();
  j["coef_norm"] = b.coef_norm.size() ? b.coef_norm.to_json() : nlohmann::json(nullptr);
  j["coef_mean"] = b.coef_mean;
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t g = 0; g < b.groups.size(); ++g)
    groups.push_back({{"begin", b.groups[g].begin},
                      {"end", b.groups[g].end},
                      {"trained", !b.untrained[g]},
                      {"model", "rnn_" + std::to_string(g) + ".bin"},
                      {"parameters", b.rnns[g].count_parameters()}});
  j["groups"] = groups;
  if (b.pca) {
    write_pca(dir / "pca.bin", *b.pca);
    j["pca"] = "pca.bin";
  } else {
    j["pca"] = nullptr;
  }
  for (std::size_t g = 0; g < b.rnns.size(); ++g) write_rnn(dir / ("rnn_" + std::to_string(g) + ".bin"), b.rnns[g]);
  std::ofstream os(dir / "bundle.json", std::ios::trunc);
  if (!os) throw InvalidInput("cannot write " + (dir / "bundle.json").string());
  os << j.dump(2) << '\n';
}

SurrogateBundle read_bundle(const std::filesystem::path& dir) {
  std::ifstream is(dir / "bundle.json");
  if (!is) throw MissingArtifact("no surrogate bundle at " + dir.string(), "train");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bundle.json: ") + e.what());
  }
  if (j.value("format", "") != "rvesurr-bundle" || j.value("version", 0) != kBundleVersion)
    throw FormatError(dir.string() + ": unsupported bundle format or version");
  SurrogateBundle b;
  b.kind = surrogate_kind_from_string(j.at("kind").get<std::string>());
  b.family = family_from_string(j.at("family").get<std::string>());
  b.spec = SurrogateSpec::from_json(j.at("spec"));
  b.field_dim = j.at("field_dim").get<std::size_t>();
  b.trained = j.at("trained").get<bool>();
  b.input_norm = NormalizationSpec::from_json(j.at("input_norm"));
  b.field_norm = NormalizationSpec::from_json(j.at("field_norm"));
  if (!j.at("coef_norm").is_null()) b.coef_norm = NormalizationSpec::from_json(j.at("coef_norm"));
  b.coef_mean = j.at("coef_mean").get<std::vector<double>>();
  for (const auto& g : j.at("groups")) {
    b.groups.push_back({g.at("begin").get<std::size_t>(), g.at("end").get<std::size_t>()});
    b.untrained.push_back(!g.at("trained").get<bool>());
    b.rnns.push_back(read_rnn(dir / g.at("model").get<std::string>()));
  }
  if (!j.at("pca").is_null()) b.pca = read_pca(dir / j.at("pca").get<std::string>());
  if (b.kind != SurrogateKind::I && !b.pca) throw FormatError("bundle of kind " + to_string(b.kind) + " lacks pca");
  return b;
}

}  // namespace rvesurr
