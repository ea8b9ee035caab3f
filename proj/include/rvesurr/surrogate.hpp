// SPDX-License-Identifier: Apache-2.0
//
// Surrogates I (direct), II (PCA coefficients) and III (PCA coefficients
// broken down into Q groups, one RNN per group).
//
// Spaces:
//   raw fields  --field_norm-->  normalized fields  --pca-->  xi  --coef_norm-->  RNN targets
// The PCA basis lives in the normalized field space, which is also where
// evaluate() measures errors for every kind.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rvesurr/datastore.hpp"
#include "rvesurr/neural.hpp"
#include "rvesurr/pca.hpp"

namespace rvesurr {

enum class SurrogateKind : std::uint8_t { I = 1, II = 2, III = 3 };
std::string to_string(SurrogateKind k);
SurrogateKind surrogate_kind_from_string(const std::string& s);

/// Half-open coefficient index range [begin, end).
struct GroupRange {
  std::size_t begin = 0, end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const GroupRange&, const GroupRange&) = default;
};

/// Q contiguous blocks of k = p / Q. Throws InvalidInput when Q does not divide p.
std::vector<GroupRange> group_ranges(int p, int q);
std::vector<std::vector<double>> split_outputs(std::span<const double> coefficients, int q);
std::vector<double> concat_groups(std::span<const std::vector<double>> groups);

struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::III;
  std::vector<int> nnw_in{3, 32};
  int n_hidden = 32;
  /// Hidden layers of NNW_O; the output width (d, p or k) is appended.
  std::vector<int> nnw_out_hidden{};
  int p = 40;
  int q = 8;
  /// Number of leading groups that are trained (kind III); -1 means all.
  int trained_group_count = -1;
  double h0 = -1.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static SurrogateSpec from_json(const nlohmann::json& j);
};

struct SurrogateBundle {
  SurrogateKind kind = SurrogateKind::III;
  Family family = Family::gamma;
  SurrogateSpec spec;
  std::size_t field_dim = 0;
  NormalizationSpec input_norm;   // over (E_xx, E_yy, E_xy)
  NormalizationSpec field_norm;   // over the state-variable field
  NormalizationSpec coef_norm;    // over PCA coefficients (II, III)
  std::optional<PcaModel> pca;    // truncated to p
  std::vector<RnnModel> rnns;
  std::vector<GroupRange> groups;
  std::vector<bool> untrained;    // per group
  std::vector<double> coef_mean;  // training-set mean of raw xi, length p
  bool trained = false;

  std::size_t output_dim() const;
  std::size_t count_parameters() const;
  /// Per-RNN parameter counts.
  std::vector<std::size_t> parameter_counts() const;
};

/// Initialized bundle for a field of dimension `field_dim`.
SurrogateBundle build_surrogate(const SurrogateSpec& spec, std::size_t field_dim, Family family);

/// Records actually used for fitting: excluded or empty records are dropped.
std::vector<const SequenceRecord*> usable_records(std::span<const SequenceRecord> records);

/// Input (strain) and field normalizations, each fitted over every step.
NormalizationSpec fit_input_norm(std::span<const SequenceRecord> records);
NormalizationSpec fit_field_norm(std::span<const SequenceRecord> records, Family family);

/// Every step of every usable record, normalized with `field_norm`, one per row.
Block normalized_snapshots(std::span<const SequenceRecord> records, Family family,
                           const NormalizationSpec& field_norm);

/// Attaches normalizations and (for II/III) the PCA basis truncated to p.
void attach_reduction(SurrogateBundle& bundle, const NormalizationSpec& input_norm,
                      const NormalizationSpec& field_norm, const std::optional<PcaModel>& pca);

struct SurrogateTrainOptions {
  TrainConfig train;
  /// Fixed training lengths (one length group each).
  std::vector<std::size_t> lengths{200};
};

struct LossEntry {
  int batch = 0;
  int group = 0;
  std::size_t length = 0;
  double loss = 0.0;
};

struct TrainReport {
  std::vector<LossEntry> history;
  /// Mean of the last min(50, N) batch losses averaged over trained groups.
  double final_loss = 0.0;
};

/// RNN targets for one record: normalized fields (I) or normalized
/// coefficients (II, III). Requires the bundle's normalizations.
Block target_block(const SurrogateBundle& bundle, const SequenceRecord& rec);

/// Mini-batch flow. For kind III every trained group is updated on each
/// batch in turn; untrained groups are never touched. Throws Error on a
/// non-finite loss after restoring the last good parameters.
TrainReport train(SurrogateBundle& bundle, std::span<const SequenceRecord> records,
                  const SurrogateTrainOptions& options);

struct FieldPrediction {
  Block normalized;  // steps x d, normalized field space
  Block fields;      // steps x d, physical units
  /// Copy of `fields` with negative values set to 0 (rendering view, gamma).
  Block clamped() const;
};

/// Inputs: steps x 3 raw strain features.
FieldPrediction predict_fields(const SurrogateBundle& bundle, const Block& strain_inputs);

struct SequenceEvaluation {
  std::size_t steps = 0;
  double mse = 0.0;
  std::vector<double> max_pred, max_true;  // per-step field maxima, physical units
};

struct Snapshot {
  std::size_t sequence = 0, step = 0;
  std::vector<double> predicted, reference;
};

struct EvaluationReport {
  double mse_full_dim = 0.0;
  std::vector<SequenceEvaluation> sequences;
  std::vector<Snapshot> snapshots;
};

EvaluationReport evaluate(const SurrogateBundle& bundle, std::span<const SequenceRecord> records,
                          std::span<const std::size_t> snapshot_steps = {});

/// MSE of the rank-p PCA reconstruction in the normalized field space.
double pca_floor_mse(const PcaModel& pca, int p, std::span<const SequenceRecord> records,
                     Family family, const NormalizationSpec& field_norm);

struct TrialConfig {
  int target_p = 10;          // 1-based coefficient index
  int start_n_h = 8;
  int increment = 8;
  int max_n_h = 64;
  std::vector<int> nnw_in{3, 32};
  std::vector<int> nnw_out_hidden{30};
  double threshold = 0.9;     // Pearson r on validation traces
  std::size_t validation_stride = 5;  // every k-th usable record is held out
  SurrogateTrainOptions train;
};

struct TrialEntry {
  int n_h = 0;
  double score = 0.0;
  double final_loss = 0.0;
};

struct TrialReport {
  std::optional<int> recommended_n_h;
  std::vector<TrialEntry> entries;
  TrialEntry best;
};

/// Increases n_h until the predicted trace of xi_{target_p} correlates with
/// the reference at r >= threshold.
TrialReport hidden_size_trial(std::span<const SequenceRecord> records, Family family,
                              const NormalizationSpec& input_norm,
                              const NormalizationSpec& field_norm, const PcaModel& pca,
                              const TrialConfig& config);

double pearson(std::span<const double> a, std::span<const double> b);

// ------------------------------------------------------------------ files

/// Directory with bundle.json, pca.bin and rnn_<q>.bin.
void write_bundle(const std::filesystem::path& dir, const SurrogateBundle& bundle);
SurrogateBundle read_bundle(const std::filesystem::path& dir);

}  // namespace rvesurr
