// SPDX-License-Identifier: Apache-2.0
//
// Sequence datasets: records, per-feature normalization, pre-trimming,
// pad/trim to fixed lengths, mini-batch sampling and the .rveseq format.
//
// .rveseq layout (little-endian), one or more records back to back:
//   char[8]  magic "RVESEQ1\0"
//   u32      version (1)
//   u32 x3   block widths (w0, w1, w2)
//   u32      length (steps)
//   u8       flags
//   f64[length * w0], f64[length * w1], f64[length * w2]   row-major
//
// Sequence records use widths (3, d_gamma, d_tau) with blocks
// (E_xx E_yy E_xy | gamma field | tau_eq field). Path records set
// kPathRecord and use widths (3, 3, 0) with blocks (E | U_xx U_yy U_xy).
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rvesurr/pathgen.hpp"
#include "rvesurr/rng.hpp"

namespace rvesurr {

/// Dense row-major block: one row per time step (or per sample).
struct Block {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Block() = default;
  Block(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  /// Keeps rows [0, n).
  void truncate_rows(std::size_t n);

  friend bool operator==(const Block&, const Block&) = default;
};

enum class Family : std::uint8_t { gamma = 0, tau = 1 };
std::string to_string(Family f);
Family family_from_string(const std::string& s);

namespace record_flags {
inline constexpr std::uint8_t kTruncated = 1u << 0;  // generator stopped early
inline constexpr std::uint8_t kExcluded = 1u << 1;   // emptied by pre-trimming
inline constexpr std::uint8_t kCyclic = 1u << 2;
inline constexpr std::uint8_t kPathRecord = 1u << 3;
}  // namespace record_flags

struct SequenceRecord {
  Block inputs;  // steps x 3
  Block gamma;   // steps x d_gamma
  Block tau;     // steps x d_tau
  std::uint8_t flags = 0;

  std::size_t length() const { return inputs.rows; }
  bool truncated() const { return flags & record_flags::kTruncated; }
  bool excluded() const { return flags & record_flags::kExcluded; }
  const Block& family(Family f) const { return f == Family::gamma ? gamma : tau; }
  Block& family(Family f) { return f == Family::gamma ? gamma : tau; }

  /// Throws InvalidInput if the blocks disagree on the step count.
  void validate() const;

  friend bool operator==(const SequenceRecord&, const SequenceRecord&) = default;
};

/// Input features (E_xx, E_yy, E_xy) of a strain history.
Block strain_features(const std::vector<SymTensor2>& strains);

// ------------------------------------------------------------ normalization

/// Per-feature affine map x -> (x - mu) / s onto [-1, 1] over the fit data.
struct NormalizationSpec {
  std::vector<double> chi_min, chi_max, chi_mu, chi_s;
  /// Constant features: chi_s is forced to 1 so the map is a pure shift.
  std::vector<bool> degenerate;

  std::size_t size() const { return chi_mu.size(); }

  double normalize(std::size_t feature, double x) const { return (x - chi_mu[feature]) / chi_s[feature]; }
  double denormalize(std::size_t feature, double x) const { return x * chi_s[feature] + chi_mu[feature]; }

  void normalize(Block& b) const;
  void denormalize(Block& b) const;
  void normalize(std::span<double> row) const;
  void denormalize(std::span<double> row) const;

  nlohmann::json to_json() const;
  static NormalizationSpec from_json(const nlohmann::json& j);
  /// Recomputes mu, s and the degenerate flags from min/max.
  static NormalizationSpec from_bounds(std::vector<double> lo, std::vector<double> hi);

  friend bool operator==(const NormalizationSpec&, const NormalizationSpec&) = default;
};

/// Fits min/max over every row of every block. Throws InvalidInput when no
/// rows are supplied or the widths disagree.
NormalizationSpec fit_normalization(std::span<const Block* const> blocks);
NormalizationSpec fit_normalization(const Block& block);

// -------------------------------------------------------------- trimming

/// Keeps the longest prefix whose monitored family stays <= y_crit. A record
/// whose first step already exceeds comes back empty with kExcluded set.
SequenceRecord pre_trim(const SequenceRecord& record, double y_crit, Family family);

/// Split of the padding count: m1 copies of step 0 in front, m2 copies of
/// the last step at the end, |m1 - m2| <= 1 with m2 >= m1.
struct PadSplit {
  std::size_t front = 0, back = 0;
};
PadSplit pad_split(std::size_t length, std::size_t target_len);

Block pad_or_trim(const Block& b, std::size_t target_len);
SequenceRecord pad_or_trim(const SequenceRecord& record, std::size_t target_len);

// ------------------------------------------------------------ batching

/// Training sequence with normalized input/output blocks of equal length.
struct Sequence {
  Block inputs;
  Block outputs;
};

/// Sequences grouped by their (fixed) length.
class LengthGroups {
 public:
  void add(Sequence seq);
  const std::vector<Sequence>& group(std::size_t length) const;
  bool has(std::size_t length) const { return groups_.count(length) > 0; }
  std::vector<std::size_t> lengths() const;
  std::size_t total() const;
  const std::map<std::size_t, std::vector<Sequence>>& all() const { return groups_; }

 private:
  std::map<std::size_t, std::vector<Sequence>> groups_;
};

/// Batch-major block: value(b, t, f) = data[(b * steps + t) * width + f].
struct MiniBatch {
  std::size_t batch = 0, steps = 0, n_in = 0, n_out = 0;
  std::vector<double> inputs, outputs;
  std::vector<std::size_t> picks;  // indices into the length group
};

/// Draws batch_size sequences uniformly with replacement from one group.
/// Throws InvalidInput for an empty or missing group.
MiniBatch sample_minibatch(const LengthGroups& data, std::size_t batch_size, std::size_t length,
                           Rng& rng);

/// Packs the given sequences (all the same length) into a batch.
MiniBatch make_batch(std::span<const Sequence* const> seqs);

// ------------------------------------------------------------------ files

void write_records(const std::filesystem::path& file, std::span<const SequenceRecord> records);
std::vector<SequenceRecord> read_records(const std::filesystem::path& file);

SequenceRecord path_to_record(const LoadingPath& path);
LoadingPath record_to_path(const SequenceRecord& rec);
void write_paths(const std::filesystem::path& file, std::span<const LoadingPath> paths);
std::vector<LoadingPath> read_paths(const std::filesystem::path& file);

/// Basic statistics of a record set, as printed by `dataset stats`.
nlohmann::json dataset_stats(std::span<const SequenceRecord> records);

}  // namespace rvesurr
