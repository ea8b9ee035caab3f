// SPDX-License-Identifier: Apache-2.0
#include "rvesurr/datastore.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "rvesurr/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "the binary formats are written with native little-endian layout");

namespace rvesurr {

void Block::truncate_rows(std::size_t n) {
  n = std::min(n, rows);
  rows = n;
  data.resize(rows * cols);
}

std::string to_string(Family f) { return f == Family::gamma ? "gamma" : "tau"; }

Family family_from_string(const std::string& s) {
  if (s == "gamma") return Family::gamma;
  if (s == "tau") return Family::tau;
  throw InvalidInput("unknown state-variable family '" + s + "' (expected gamma or tau)");
}

void SequenceRecord::validate() const {
  const bool ok = (gamma.cols == 0 || gamma.rows == inputs.rows) &&
                  (tau.cols == 0 || tau.rows == inputs.rows);
  if (!ok) throw InvalidInput("sequence record blocks disagree on the step count");
}

Block strain_features(const std::vector<SymTensor2>& strains) {
  Block b(strains.size(), 3);
  for (std::size_t t = 0; t < strains.size(); ++t) {
    b(t, 0) = strains[t].xx;
    b(t, 1) = strains[t].yy;
    b(t, 2) = strains[t].xy;
  }
  return b;
}

// ------------------------------------------------------------ normalization

void NormalizationSpec::normalize(std::span<double> row) const {
  if (row.size() != size()) throw DimensionMismatch("normalize: feature count mismatch");
  for (std::size_t f = 0; f < row.size(); ++f) row[f] = normalize(f, row[f]);
}

void NormalizationSpec::denormalize(std::span<double> row) const {
  if (row.size() != size()) throw DimensionMismatch("denormalize: feature count mismatch");
  for (std::size_t f = 0; f < row.size(); ++f) row[f] = denormalize(f, row[f]);
}

void NormalizationSpec::normalize(Block& b) const {
  for (std::size_t i = 0; i < b.rows; ++i) normalize(b.row(i));
}

void NormalizationSpec::denormalize(Block& b) const {
  for (std::size_t i = 0; i < b.rows; ++i) denormalize(b.row(i));
}

NormalizationSpec NormalizationSpec::from_bounds(std::vector<double> lo, std::vector<double> hi) {
  if (lo.size() != hi.size()) throw DimensionMismatch("normalization bounds differ in size");
  NormalizationSpec spec;
  const std::size_t n = lo.size();
  spec.chi_mu.resize(n);
  spec.chi_s.resize(n);
  spec.degenerate.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    spec.chi_mu[f] = 0.5 * (lo[f] + hi[f]);
    const double s = 0.5 * (hi[f] - lo[f]);
    spec.degenerate[f] = !(s > 0.0);
    spec.chi_s[f] = spec.degenerate[f] ? 1.0 : s;
  }
  spec.chi_min = std::move(lo);
  spec.chi_max = std::move(hi);
  return spec;
}

nlohmann::json NormalizationSpec::to_json() const {
  return {{"features", size()},
          {"chi_min", chi_min},
          {"chi_max", chi_max},
          {"chi_mu", chi_mu},
          {"chi_s", chi_s},
          {"degenerate", degenerate}};
}

NormalizationSpec NormalizationSpec::from_json(const nlohmann::json& j) {
  try {
    NormalizationSpec spec;
    spec.chi_min = j.at("chi_min").get<std::vector<double>>();
    spec.chi_max = j.at("chi_max").get<std::vector<double>>();
    spec.chi_mu = j.at("chi_mu").get<std::vector<double>>();
    spec.chi_s = j.at("chi_s").get<std::vector<double>>();
    spec.degenerate = j.at("degenerate").get<std::vector<bool>>();
    const std::size_t n = spec.chi_min.size();
    if (spec.chi_max.size() != n || spec.chi_mu.size() != n || spec.chi_s.size() != n ||
        spec.degenerate.size() != n)
      throw FormatError("normalization spec arrays differ in length");
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed normalization spec: ") + e.what());
  }
}

NormalizationSpec fit_normalization(std::span<const Block* const> blocks) {
  std::size_t width = 0;
  bool any = false;
  std::vector<double> lo, hi;
  for (const Block* b : blocks) {
    if (b->rows == 0) continue;
    if (!any) {
      width = b->cols;
      lo.assign(width, std::numeric_limits<double>::infinity());
      hi.assign(width, -std::numeric_limits<double>::infinity());
      any = true;
    } else if (b->cols != width) {
      throw DimensionMismatch("fit_normalization: blocks have different widths");
    }
    for (std::size_t i = 0; i < b->rows; ++i) {
      const auto r = b->row(i);
      for (std::size_t f = 0; f < width; ++f) {
        lo[f] = std::min(lo[f], r[f]);
        hi[f] = std::max(hi[f], r[f]);
      }
    }
  }
  if (!any) throw InvalidInput("fit_normalization needs at least one non-empty record");
  return NormalizationSpec::from_bounds(std::move(lo), std::move(hi));
}

NormalizationSpec fit_normalization(const Block& block) {
  const Block* p = &block;
  return fit_normalization(std::span<const Block* const>(&p, 1));
}

// -------------------------------------------------------------- trimming

SequenceRecord pre_trim(const SequenceRecord& record, double y_crit, Family family) {
  if (!(y_crit > 0.0)) throw InvalidInput("pre_trim requires y_crit > 0");
  const Block& mon = record.family(family);
  std::size_t keep = record.length();
  for (std::size_t t = 0; t < mon.rows; ++t) {
    const auto r = mon.row(t);
    if (std::any_of(r.begin(), r.end(), [&](double v) { return v > y_crit; })) {
      keep = t;
      break;
    }
  }
  SequenceRecord out = record;
  if (keep == record.length()) return out;
  out.inputs.truncate_rows(keep);
  out.gamma.truncate_rows(keep);
  out.tau.truncate_rows(keep);
  if (keep == 0) out.flags |= record_flags::kExcluded;
  return out;
}

PadSplit pad_split(std::size_t length, std::size_t target_len) {
  if (length >= target_len) return {};
  const std::size_t m = target_len - length;
  return {m / 2, m - m / 2};
}

Block pad_or_trim(const Block& b, std::size_t target_len) {
  if (target_len == 0) throw InvalidInput("pad_or_trim requires target_len >= 1");
  if (b.cols == 0) return Block(target_len, 0);
  if (b.rows == 0) throw InvalidInput("pad_or_trim cannot pad an empty sequence");
  if (b.rows >= target_len) {
    Block out = b;
    out.truncate_rows(target_len);
    return out;
  }
  const PadSplit split = pad_split(b.rows, target_len);
  Block out(target_len, b.cols);
  std::size_t r = 0;
  for (std::size_t i = 0; i < split.front; ++i, ++r)
    std::copy_n(b.row(0).begin(), b.cols, out.row(r).begin());
  for (std::size_t i = 0; i < b.rows; ++i, ++r)
    std::copy_n(b.row(i).begin(), b.cols, out.row(r).begin());
  for (std::size_t i = 0; i < split.back; ++i, ++r)
    std::copy_n(b.row(b.rows - 1).begin(), b.cols, out.row(r).begin());
  return out;
}

SequenceRecord pad_or_trim(const SequenceRecord& record, std::size_t target_len) {
  SequenceRecord out;
  out.flags = record.flags;
  out.inputs = pad_or_trim(record.inputs, target_len);
  out.gamma = pad_or_trim(record.gamma, target_len);
  out.tau = pad_or_trim(record.tau, target_len);
  return out;
}

// ------------------------------------------------------------ batching

void LengthGroups::add(Sequence seq) {
  if (seq.inputs.rows != seq.outputs.rows)
    throw DimensionMismatch("sequence inputs and outputs differ in length");
  groups_[seq.inputs.rows].push_back(std::move(seq));
}

const std::vector<Sequence>& LengthGroups::group(std::size_t length) const {
  auto it = groups_.find(length);
  if (it == groups_.end() || it->second.empty())
    throw InvalidInput("no sequences in length group " + std::to_string(length));
  return it->second;
}

std::vector<std::size_t> LengthGroups::lengths() const {
  std::vector<std::size_t> out;
  for (const auto& [len, seqs] : groups_)
    if (!seqs.empty()) out.push_back(len);
  return out;
}

std::size_t LengthGroups::total() const {
  std::size_t n = 0;
  for (const auto& [len, seqs] : groups_) n += seqs.size();
  return n;
}

MiniBatch make_batch(std::span<const Sequence* const> seqs) {
  MiniBatch mb;
  if (seqs.empty()) return mb;
  mb.batch = seqs.size();
  mb.steps = seqs.front()->inputs.rows;
  mb.n_in = seqs.front()->inputs.cols;
  mb.n_out = seqs.front()->outputs.cols;
  mb.inputs.reserve(mb.batch * mb.steps * mb.n_in);
  mb.outputs.reserve(mb.batch * mb.steps * mb.n_out);
  for (const Sequence* s : seqs) {
    if (s->inputs.rows != mb.steps || s->inputs.cols != mb.n_in || s->outputs.cols != mb.n_out)
      throw DimensionMismatch("make_batch: sequences differ in shape");
    mb.inputs.insert(mb.inputs.end(), s->inputs.data.begin(), s->inputs.data.end());
    mb.outputs.insert(mb.outputs.end(), s->outputs.data.begin(), s->outputs.data.end());
  }
  return mb;
}

MiniBatch sample_minibatch(const LengthGroups& data, std::size_t batch_size, std::size_t length,
                           Rng& rng) {
  if (batch_size == 0) throw InvalidInput("sample_minibatch: batch_size must be positive");
  const auto& group = data.group(length);
  std::vector<const Sequence*> picked;
  std::vector<std::size_t> idx;
  for (std::size_t b = 0; b < batch_size; ++b) {
    idx.push_back(rng.below(group.size()));
    picked.push_back(&group[idx.back()]);
  }
  MiniBatch mb = make_batch(picked);
  mb.picks = std::move(idx);
  return mb;
}

// ------------------------------------------------------------------ files

namespace {

constexpr char kSeqMagic[8] = {'R', 'V', 'E', 'S', 'E', 'Q', '1', '\0'};
constexpr std::uint32_t kSeqVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
bool get(std::istream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

void put_block(std::ostream& os, const Block& b) {
  os.write(reinterpret_cast<const char*>(b.data.data()),
           static_cast<std::streamsize>(b.data.size() * sizeof(double)));
}

Block get_block(std::istream& is, std::size_t rows, std::size_t cols) {
  Block b(rows, cols);
  if (!is.read(reinterpret_cast<char*>(b.data.data()),
               static_cast<std::streamsize>(b.data.size() * sizeof(double))))
    throw FormatError("truncated .rveseq data block");
  return b;
}

}  // namespace

void write_records(const std::filesystem::path& file, std::span<const SequenceRecord> records) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw InvalidInput("cannot open " + file.string() + " for writing");
  for (const auto& r : records) {
    r.validate();
    os.write(kSeqMagic, sizeof(kSeqMagic));
    put(os, kSeqVersion);
    put(os, static_cast<std::uint32_t>(r.inputs.cols));
    put(os, static_cast<std::uint32_t>(r.gamma.cols));
    put(os, static_cast<std::uint32_t>(r.tau.cols));
    put(os, static_cast<std::uint32_t>(r.length()));
    put(os, r.flags);
    put_block(os, r.inputs);
    put_block(os, r.gamma);
    put_block(os, r.tau);
  }
  if (!os) throw InvalidInput("failed writing " + file.string());
}

std::vector<SequenceRecord> read_records(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw MissingArtifact("cannot open " + file.string(), "");
  std::vector<SequenceRecord> out;
  char magic[8];
  while (is.read(magic, sizeof(magic))) {
    if (std::memcmp(magic, kSeqMagic, sizeof(magic)) != 0)
      throw FormatError(file.string() + ": bad record magic");
    std::uint32_t version = 0, w0 = 0, w1 = 0, w2 = 0, len = 0;
    std::uint8_t flags = 0;
    if (!(get(is, version) && get(is, w0) && get(is, w1) && get(is, w2) && get(is, len) &&
          get(is, flags)))
      throw FormatError(file.string() + ": truncated record header");
    if (version != kSeqVersion)
      throw FormatError(file.string() + ": unsupported version " + std::to_string(version));
    SequenceRecord r;
    r.flags = flags;
    r.inputs = get_block(is, len, w0);
    r.gamma = get_block(is, len, w1);
    r.tau = get_block(is, len, w2);
    out.push_back(std::move(r));
  }
  if (!is.eof()) throw FormatError(file.string() + ": read error");
  if (is.gcount() != 0) throw FormatError(file.string() + ": trailing bytes after last record");
  return out;
}

SequenceRecord path_to_record(const LoadingPath& path) {
  SequenceRecord r;
  r.flags = record_flags::kPathRecord;
  if (path.kind == PathKind::cyclic) r.flags |= record_flags::kCyclic;
  if (path.hit_step_cap) r.flags |= record_flags::kTruncated;
  r.inputs = strain_features(path.strains);
  r.gamma = Block(path.size(), 3);
  for (std::size_t t = 0; t < path.size(); ++t) {
    r.gamma(t, 0) = path.steps[t].xx;
    r.gamma(t, 1) = path.steps[t].yy;
    r.gamma(t, 2) = path.steps[t].xy;
  }
  return r;
}

LoadingPath record_to_path(const SequenceRecord& rec) {
  if (!(rec.flags & record_flags::kPathRecord) || rec.gamma.cols != 3 || rec.inputs.cols != 3)
    throw FormatError("record is not a loading-path record");
  LoadingPath p;
  p.kind = (rec.flags & record_flags::kCyclic) ? PathKind::cyclic : PathKind::random_walk;
  p.hit_step_cap = rec.flags & record_flags::kTruncated;
  for (std::size_t t = 0; t < rec.length(); ++t) {
    SymTensor2 u = SymTensor2::identity();
    u.xx = rec.gamma(t, 0);
    u.yy = rec.gamma(t, 1);
    u.xy = rec.gamma(t, 2);
    SymTensor2 e;
    e.xx = rec.inputs(t, 0);
    e.yy = rec.inputs(t, 1);
    e.xy = rec.inputs(t, 2);
    p.steps.push_back(u);
    p.strains.push_back(e);
  }
  return p;
}

void write_paths(const std::filesystem::path& file, std::span<const LoadingPath> paths) {
  std::vector<SequenceRecord> recs;
  recs.reserve(paths.size());
  for (const auto& p : paths) recs.push_back(path_to_record(p));
  write_records(file, recs);
}

std::vector<LoadingPath> read_paths(const std::filesystem::path& file) {
  std::vector<LoadingPath> out;
  for (const auto& r : read_records(file)) out.push_back(record_to_path(r));
  return out;
}

nlohmann::json dataset_stats(std::span<const SequenceRecord> records) {
  std::size_t n_trunc = 0, n_excl = 0, n_cyc = 0, steps = 0;
  std::size_t min_len = std::numeric_limits<std::size_t>::max(), max_len = 0;
  double max_gamma = 0.0, max_tau = 0.0;
  for (const auto& r : records) {
    n_trunc += r.truncated();
    n_excl += r.excluded();
    n_cyc += (r.flags & record_flags::kCyclic) ? 1 : 0;
    steps += r.length();
    min_len = std::min(min_len, r.length());
    max_len = std::max(max_len, r.length());
    for (double v : r.gamma.data) max_gamma = std::max(max_gamma, v);
    for (double v : r.tau.data) max_tau = std::max(max_tau, v);
  }
  nlohmann::json j;
  j["records"] = records.size();
  j["cyclic"] = n_cyc;
  j["truncated"] = n_trunc;
  j["excluded"] = n_excl;
  j["total_steps"] = steps;
  j["min_length"] = records.empty() ? 0 : min_len;
  j["max_length"] = max_len;
  j["max_gamma"] = max_gamma;
  j["max_tau"] = max_tau;
  if (!records.empty()) {
    j["d_gamma"] = records.front().gamma.cols;
    j["d_tau"] = records.front().tau.cols;
  }
  return j;
}

}  // namespace rvesurr
