// SPDX-License-Identifier: Apache-2.0
//
// Recurrent surrogate network: input feed-forward net -> one GRU layer ->
// output feed-forward net, with full backpropagation through time.
//
// Batched quantities are stored column-wise with column index t * B + b
// (step-major), so each time step is a contiguous block of B columns.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rvesurr/datastore.hpp"
#include "rvesurr/rng.hpp"

namespace rvesurr {

enum class Activation : std::uint8_t { none = 0, leaky_relu = 1 };

/// max(0, x) + min(0, x) / 100
inline double leaky_relu(double x) { return x >= 0.0 ? x : 0.01 * x; }
inline double leaky_relu_slope(double x) { return x >= 0.0 ? 1.0 : 0.01; }

struct DenseLayer {
  Eigen::MatrixXd weights;  // n_in x n_out
  Eigen::VectorXd bias;     // n_out
  Activation activation = Activation::none;

  Eigen::Index n_in() const { return weights.rows(); }
  Eigen::Index n_out() const { return weights.cols(); }
};

struct FeedForwardNet {
  std::vector<DenseLayer> layers;

  /// Layer-size signature (n_0, ..., n_N).
  std::vector<int> sizes() const;
  std::size_t count_parameters() const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
};

/// Builds a net with the given sizes. Every layer uses Leaky ReLU except the
/// last one when `linear_output` is set.
FeedForwardNet make_feedforward(std::span<const int> sizes, bool linear_output);

/// GRU with input-side and hidden-side biases on every gate path.
struct GruCell {
  Eigen::MatrixXd w_xu, w_xr, w_xc;  // n_I x n_h
  Eigen::MatrixXd w_hu, w_hr, w_hc;  // n_h x n_h
  Eigen::VectorXd b_xu, b_hu, b_xr, b_hr, b_xc, b_hc;

  Eigen::Index n_in() const { return w_xu.rows(); }
  Eigen::Index n_hidden() const { return w_hu.rows(); }
  std::size_t count_parameters() const;
};

GruCell make_gru(int n_in, int n_hidden);

struct GateValues {
  Eigen::VectorXd reset, update, candidate, hidden;
};

/// One step: r, u = sigma(...), c = tanh(W_x'c x + b_xc + r . (W_hc h + b_hc)),
/// h_new = u . h + (1 - u) . c.
GateValues gru_step(const GruCell& cell, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev);

struct RnnArchitecture {
  std::vector<int> nnw_in;   // (n_x, ..., n_I)
  int n_hidden = 0;
  std::vector<int> nnw_out;  // hidden and output sizes after the GRU, (..., n_y)
  double h0 = -1.0;

  int n_x() const { return nnw_in.front(); }
  int n_y() const { return nnw_out.back(); }
  void validate() const;
};

struct RnnModel {
  FeedForwardNet nnw_in;
  GruCell gru;
  FeedForwardNet nnw_out;
  double h0 = -1.0;

  RnnArchitecture architecture() const;
  std::size_t count_parameters() const;
  /// Every parameter block in canonical order (serialization, optimizer).
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
};

/// Zero-initialized model with the given architecture.
RnnModel make_rnn(const RnnArchitecture& arch);
/// Weights uniform in +-1/sqrt(fan_in) of their matrix.
void initialize(RnnModel& model, std::uint64_t seed);
RnnModel make_rnn(const RnnArchitecture& arch, std::uint64_t seed);

/// Closed-form parameter counts.
constexpr std::size_t dense_pair_parameters(std::size_t n_i, std::size_t n_next) {
  return (n_i + 1) * n_next;
}
constexpr std::size_t gru_parameters(std::size_t n_hidden, std::size_t n_in) {
  return 3 * n_hidden * (n_hidden + n_in + 2);
}
std::size_t count_parameters(const RnnModel& model);

// ---------------------------------------------------------------- forward

/// Converts batch-major MiniBatch storage to the step-major column layout.
Eigen::MatrixXd batch_inputs(const MiniBatch& mb);
/// Targets restricted to output columns [offset, offset + width).
Eigen::MatrixXd batch_targets(const MiniBatch& mb, std::size_t offset, std::size_t width);

struct DenseTrace {
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
  std::vector<Eigen::MatrixXd> post;  // outputs per layer
};

struct ForwardTrace {
  std::size_t batch = 0, steps = 0;
  Eigen::MatrixXd inputs;  // n_x x TB
  DenseTrace in_trace;     // NNW_I
  Eigen::MatrixXd hidden;  // n_h x (T + 1) B, first block is h0
  Eigen::MatrixXd reset, update, candidate, hidden_lin;  // n_h x TB
  DenseTrace out_trace;    // NNW_O
  const Eigen::MatrixXd& outputs() const { return out_trace.post.back(); }
};

/// Runs the model over `steps` steps for `batch` sequences.
ForwardTrace forward_sequence(const RnnModel& model, const Eigen::MatrixXd& inputs,
                              std::size_t batch);

/// Single-sequence convenience form: inputs steps x n_x, returns steps x n_y.
Eigen::MatrixXd predict_sequence(const RnnModel& model, const Block& inputs);

/// Mean of squared differences over every entry. Throws DimensionMismatch.
double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

/// Gradient of the batch MSE with respect to every parameter, shaped like
/// the model itself.
RnnModel bptt_gradients(const RnnModel& model, const ForwardTrace& trace,
                        const Eigen::MatrixXd& targets);

// -------------------------------------------------------------- training

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  int n_epoch = 1;           // passes over each mini-batch, <= 10
  int n_batches = 100;       // N
  std::size_t batch_size = 16;
  double clip_norm = 1.0;    // global gradient norm clip, 0 disables
  std::uint64_t seed = 0;

  void validate() const;
};

/// Adaptive-moment optimizer with bias correction and decoupled weight decay.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const RnnModel& shape);

  void step(RnnModel& params, const RnnModel& grads, const TrainConfig& cfg);
  std::uint64_t steps_taken() const { return t_; }

 private:
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

/// Scales gradients so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_gradients(RnnModel& grads, double max_norm);

/// n_epoch forward/backward/update passes on one batch. Returns the loss of
/// the first pass.
double train_on_batch(RnnModel& model, AdamOptimizer& opt, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets, std::size_t batch, const TrainConfig& cfg);

// ------------------------------------------------------------------ files

/// RNNMDL1 binary: magic, version, h0, architecture signature, parameters.
void write_rnn(const std::filesystem::path& file, const RnnModel& model);
RnnModel read_rnn(const std::filesystem::path& file);

/// FNV-1a over the raw parameter bytes; used to detect parameter changes.
std::uint64_t parameter_checksum(const RnnModel& model);

}  // namespace rvesurr
