// SPDX-License-Identifier: Apache-2.0
//
// End-to-end pipeline stages behind the command-line tool.
//
// Layout under the output root:
//   paths/paths.rveseq            gen-paths
//   data/data.rveseq              gen-data
//   pca/pca_<family>.bin, pca/normspec.json, pca/residual_<family>.csv
//   train/bundle/, train/loss.csv
//   trial/trial.csv
//   eval/report.csv, eval/summary.json, eval/max_traces.csv, eval/snapshot_*.csv
// Each stage directory also holds manifest.json (config echo, seeds, input
// and output hashes).
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rvesurr/datastore.hpp"
#include "rvesurr/surrogate.hpp"

namespace rvesurr {

inline constexpr const char* kOutputRootEnv = "RVESURR_OUTPUT_ROOT";

struct PathsSection {
  int n_random = 200;
  int n_cyclic = 40;
  double delta_r = 1e-2;
  double delta_r_min = 1e-3;
  double r_max = 0.1;
  int max_steps = 5000;
  double cyclic_amplitude = 0.1;
  double cyclic_step = 2.5e-3;
  int min_reversals = 2;
  int max_reversals = 6;
  std::uint64_t seed = 1;
};

struct EnsembleSection {
  int d_gamma = 200;
  int n_fiber = 80;
  double perturbation = 0.3;
  int max_halvings = 8;
  std::uint64_t seed = 2;
};

struct DatasetSection {
  std::vector<std::size_t> lengths{200, 400};
  double gamma_crit = 6.0;
  std::size_t batch_size = 16;
};

struct PcaSection {
  Family family = Family::gamma;
  std::optional<int> p = 40;
  std::optional<double> delta;
  double subsample = 1.0;
  std::uint64_t seed = 3;
};

struct TrainSection {
  SurrogateKind kind = SurrogateKind::III;
  std::vector<int> nnw_in{3, 32};
  int n_hidden = 64;
  std::vector<int> nnw_out_hidden{};
  std::optional<int> p;  // defaults to the PCA retained dimension
  int q = 8;
  int trained_group_count = -1;
  TrainConfig optimizer;  // learning rate, moments, clip, N, n_epoch
  std::uint64_t seed = 4;
};

struct TrialSection {
  int target_p = 10;
  int start_n_h = 8;
  int increment = 8;
  int max_n_h = 64;
  int n_batches = 300;
  double threshold = 0.9;
  std::vector<int> nnw_in{3, 32};
  std::vector<int> nnw_out_hidden{30};
  std::uint64_t seed = 5;
};

struct EvalSection {
  std::vector<std::size_t> snapshot_steps{50, 100};
  std::string output_dir = "eval";
  std::optional<std::string> dataset;  // defaults to the generated data
  std::size_t max_snapshot_sequences = 3;
};

struct PipelineConfig {
  std::string output_root = "rvesurr_out";
  PathsSection paths;
  EnsembleSection ensemble;
  DatasetSection dataset;
  PcaSection pca;
  TrainSection train;
  TrialSection trial;
  EvalSection eval;

  /// Parses and validates; unknown keys are rejected with InvalidInput.
  static PipelineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
  /// Replaces every section seed by a stream derived from `seed`.
  void override_seeds(std::uint64_t seed);
};

PipelineConfig load_config(const std::filesystem::path& file);

struct RunContext {
  PipelineConfig config;
  std::filesystem::path root;
  int jobs = 1;
  std::ostream* log = nullptr;
};

/// Output root: env var when set, else the config value (relative paths are
/// taken relative to the working directory).
std::filesystem::path resolve_output_root(const PipelineConfig& cfg);

std::string sha256_file(const std::filesystem::path& file);

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"gen-paths", "gen-data", "pca-fit", "train", "trial", "eval"};
  return names;
}

void stage_gen_paths(const RunContext& ctx);
void stage_gen_data(const RunContext& ctx);
void stage_pca_fit(const RunContext& ctx);
void stage_train(const RunContext& ctx);
void stage_trial(const RunContext& ctx);
void stage_eval(const RunContext& ctx);

/// Runs one stage by name; "all" runs every stage in order.
void run_stage(const RunContext& ctx, const std::string& stage);

/// n_random random walks followed by n_cyclic cyclic paths.
std::vector<LoadingPath> generate_paths(const PathsSection& cfg);

/// Runs every path through the ensemble (parallel over paths, output order
/// fixed). Truncated runs keep their converged prefix and the kTruncated flag.
std::vector<SequenceRecord> generate_dataset(std::span<const LoadingPath> paths,
                                             const EnsembleSection& cfg, int jobs = 1);

/// Generated records, pre-trimmed with the configured gamma_crit.
std::vector<SequenceRecord> load_trimmed(const std::filesystem::path& file, double gamma_crit);

}  // namespace rvesurr
