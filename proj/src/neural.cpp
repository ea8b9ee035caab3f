// SPDX-License-Identifier: Apache-2.0
#include "rvesurr/neural.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "rvesurr/error.hpp"

namespace rvesurr {

// ------------------------------------------------------------- feed-forward

std::vector<int> FeedForwardNet::sizes() const {
  std::vector<int> s;
  if (layers.empty()) return s;
  s.push_back(static_cast<int>(layers.front().n_in()));
  for (const auto& l : layers) s.push_back(static_cast<int>(l.n_out()));
  return s;
}

std::size_t FeedForwardNet::count_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

namespace {

void apply_activation(Activation act, const Eigen::MatrixXd& pre, Eigen::MatrixXd& post) {
  if (act == Activation::none)
    post = pre;
  else
    post = pre.unaryExpr([](double v) { return leaky_relu(v); });
}

void dense_forward(const FeedForwardNet& net, const Eigen::MatrixXd& x, DenseTrace& trace) {
  trace.pre.resize(net.layers.size());
  trace.post.resize(net.layers.size());
  const Eigen::MatrixXd* in = &x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    trace.pre[i].noalias() = l.weights.transpose() * *in;
    trace.pre[i].colwise() += l.bias;
    apply_activation(l.activation, trace.pre[i], trace.post[i]);
    in = &trace.post[i];
  }
}

/// Accumulates parameter gradients into `grad` and returns d loss / d input.
Eigen::MatrixXd dense_backward(const FeedForwardNet& net, const Eigen::MatrixXd& x,
                               const DenseTrace& trace, Eigen::MatrixXd d_out,
                               FeedForwardNet& grad) {
  for (std::size_t ii = net.layers.size(); ii-- > 0;) {
    const auto& l = net.layers[ii];
    if (l.activation == Activation::leaky_relu)
      d_out.array() *= trace.pre[ii].unaryExpr([](double v) { return leaky_relu_slope(v); }).array();
    const Eigen::MatrixXd& in = ii == 0 ? x : trace.post[ii - 1];
    grad.layers[ii].weights.noalias() += in * d_out.transpose();
    grad.layers[ii].bias += d_out.rowwise().sum();
    Eigen::MatrixXd d_in;
    d_in.noalias() = l.weights * d_out;
    d_out = std::move(d_in);
  }
  return d_out;
}

}  // namespace

Eigen::MatrixXd FeedForwardNet::forward(const Eigen::MatrixXd& x) const {
  DenseTrace t;
  dense_forward(*this, x, t);
  return t.post.empty() ? x : t.post.back();
}

FeedForwardNet make_feedforward(std::span<const int> sizes, bool linear_output) {
  if (sizes.size() < 2) throw InvalidInput("a feed-forward net needs at least two layer sizes");
  FeedForwardNet net;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    if (sizes[i] <= 0 || sizes[i + 1] <= 0) throw InvalidInput("layer sizes must be positive");
    DenseLayer l;
    l.weights = Eigen::MatrixXd::Zero(sizes[i], sizes[i + 1]);
    l.bias = Eigen::VectorXd::Zero(sizes[i + 1]);
    const bool last = i + 2 == sizes.size();
    l.activation = (last && linear_output) ? Activation::none : Activation::leaky_relu;
    net.layers.push_back(std::move(l));
  }
  return net;
}

// -------------------------------------------------------------------- GRU

std::size_t GruCell::count_parameters() const {
  return static_cast<std::size_t>(w_xu.size() + w_xr.size() + w_xc.size() + w_hu.size() +
                                  w_hr.size() + w_hc.size() + b_xu.size() + b_hu.size() +
                                  b_xr.size() + b_hr.size() + b_xc.size() + b_hc.size());
}

GruCell make_gru(int n_in, int n_hidden) {
  if (n_in <= 0 || n_hidden <= 0) throw InvalidInput("GRU sizes must be positive");
  GruCell g;
  for (auto* w : {&g.w_xu, &g.w_xr, &g.w_xc}) *w = Eigen::MatrixXd::Zero(n_in, n_hidden);
  for (auto* w : {&g.w_hu, &g.w_hr, &g.w_hc}) *w = Eigen::MatrixXd::Zero(n_hidden, n_hidden);
  for (auto* b : {&g.b_xu, &g.b_hu, &g.b_xr, &g.b_hr, &g.b_xc, &g.b_hc})
    *b = Eigen::VectorXd::Zero(n_hidden);
  return g;
}

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

GateValues gru_step(const GruCell& cell, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev) {
  if (x.size() != cell.n_in() || h_prev.size() != cell.n_hidden())
    throw DimensionMismatch("gru_step: input or hidden size mismatch");
  GateValues g;
  g.reset = (cell.w_xr.transpose() * x + cell.b_xr + cell.w_hr.transpose() * h_prev + cell.b_hr)
                .unaryExpr([](double v) { return sigmoid(v); });
  g.update = (cell.w_xu.transpose() * x + cell.b_xu + cell.w_hu.transpose() * h_prev + cell.b_hu)
                 .unaryExpr([](double v) { return sigmoid(v); });
  const Eigen::VectorXd hl = cell.w_hc.transpose() * h_prev + cell.b_hc;
  g.candidate = (cell.w_xc.transpose() * x + cell.b_xc + g.reset.cwiseProduct(hl)).array().tanh();
  g.hidden = g.update.cwiseProduct(h_prev) +
             (Eigen::VectorXd::Ones(h_prev.size()) - g.update).cwiseProduct(g.candidate);
  return g;
}

// ------------------------------------------------------------------ model

void RnnArchitecture::validate() const {
  if (nnw_in.size() < 2) throw InvalidInput("NNW_I needs at least (n_x, n_I)");
  if (nnw_out.empty()) throw InvalidInput("NNW_O needs at least the output size");
  if (n_hidden <= 0) throw InvalidInput("n_h must be positive");
  for (int s : nnw_in)
    if (s <= 0) throw InvalidInput("NNW_I sizes must be positive");
  for (int s : nnw_out)
    if (s <= 0) throw InvalidInput("NNW_O sizes must be positive");
  if (!std::isfinite(h0)) throw InvalidInput("h0 must be finite");
}

RnnArchitecture RnnModel::architecture() const {
  RnnArchitecture a;
  a.nnw_in = nnw_in.sizes();
  a.n_hidden = static_cast<int>(gru.n_hidden());
  const auto out = nnw_out.sizes();
  a.nnw_out.assign(out.begin() + 1, out.end());
  a.h0 = h0;
  return a;
}

std::size_t RnnModel::count_parameters() const {
  return nnw_in.count_parameters() + gru.count_parameters() + nnw_out.count_parameters();
}

std::size_t count_parameters(const RnnModel& model) { return model.count_parameters(); }

namespace {

template <class Model, class Span>
std::vector<Span> collect_blocks(Model& m) {
  std::vector<Span> out;
  auto add = [&](auto& mat) { out.emplace_back(mat.data(), static_cast<std::size_t>(mat.size())); };
  for (auto& l : m.nnw_in.layers) {
    add(l.weights);
    add(l.bias);
  }
  add(m.gru.w_xu);
  add(m.gru.w_xr);
  add(m.gru.w_xc);
  add(m.gru.w_hu);
  add(m.gru.w_hr);
  add(m.gru.w_hc);
  add(m.gru.b_xu);
  add(m.gru.b_hu);
  add(m.gru.b_xr);
  add(m.gru.b_hr);
  add(m.gru.b_xc);
  add(m.gru.b_hc);
  for (auto& l : m.nnw_out.layers) {
    add(l.weights);
    add(l.bias);
  }
  return out;
}

}  // namespace

std::vector<std::span<double>> RnnModel::blocks() {
  return collect_blocks<RnnModel, std::span<double>>(*this);
}

std::vector<std::span<const double>> RnnModel::blocks() const {
  return collect_blocks<const RnnModel, std::span<const double>>(*this);
}

RnnModel make_rnn(const RnnArchitecture& arch) {
  arch.validate();
  RnnModel m;
  m.nnw_in = make_feedforward(arch.nnw_in, false);
  m.gru = make_gru(arch.nnw_in.back(), arch.n_hidden);
  std::vector<int> out_sizes{arch.n_hidden};
  out_sizes.insert(out_sizes.end(), arch.nnw_out.begin(), arch.nnw_out.end());
  if (out_sizes.size() < 2) throw InvalidInput("NNW_O needs at least one layer");
  m.nnw_out = make_feedforward(out_sizes, true);
  m.h0 = arch.h0;
  return m;
}

void initialize(RnnModel& model, std::uint64_t seed) {
  Rng rng(seed);
  auto fill = [&](auto& mat, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < mat.size(); ++i) mat.data()[i] = rng.uniform(-bound, bound);
  };
  for (auto& l : model.nnw_in.layers) {
    fill(l.weights, static_cast<double>(l.n_in()));
    fill(l.bias, static_cast<double>(l.n_in()));
  }
  auto& g = model.gru;
  const double n_in = static_cast<double>(g.n_in()), n_h = static_cast<double>(g.n_hidden());
  fill(g.w_xu, n_in);
  fill(g.w_xr, n_in);
  fill(g.w_xc, n_in);
  fill(g.w_hu, n_h);
  fill(g.w_hr, n_h);
  fill(g.w_hc, n_h);
  fill(g.b_xu, n_in);
  fill(g.b_hu, n_h);
  fill(g.b_xr, n_in);
  fill(g.b_hr, n_h);
  fill(g.b_xc, n_in);
  fill(g.b_hc, n_h);
  for (auto& l : model.nnw_out.layers) {
    fill(l.weights, static_cast<double>(l.n_in()));
    fill(l.bias, static_cast<double>(l.n_in()));
  }
}

RnnModel make_rnn(const RnnArchitecture& arch, std::uint64_t seed) {
  RnnModel m = make_rnn(arch);
  initialize(m, seed);
  return m;
}

// ---------------------------------------------------------------- forward

Eigen::MatrixXd batch_inputs(const MiniBatch& mb) {
  Eigen::MatrixXd x(mb.n_in, mb.steps * mb.batch);
  for (std::size_t b = 0; b < mb.batch; ++b)
    for (std::size_t t = 0; t < mb.steps; ++t)
      for (std::size_t f = 0; f < mb.n_in; ++f)
        x(f, t * mb.batch + b) = mb.inputs[(b * mb.steps + t) * mb.n_in + f];
  return x;
}

Eigen::MatrixXd batch_targets(const MiniBatch& mb, std::size_t offset, std::size_t width) {
  if (offset + width > mb.n_out) throw DimensionMismatch("batch_targets: slice exceeds outputs");
  Eigen::MatrixXd y(width, mb.steps * mb.batch);
  for (std::size_t b = 0; b < mb.batch; ++b)
    for (std::size_t t = 0; t < mb.steps; ++t)
      for (std::size_t f = 0; f < width; ++f)
        y(f, t * mb.batch + b) = mb.outputs[(b * mb.steps + t) * mb.n_out + offset + f];
  return y;
}

ForwardTrace forward_sequence(const RnnModel& model, const Eigen::MatrixXd& inputs,
                              std::size_t batch) {
  if (batch == 0 || inputs.cols() % static_cast<Eigen::Index>(batch) != 0)
    throw DimensionMismatch("forward_sequence: column count is not a multiple of the batch");
  if (inputs.rows() != model.nnw_in.layers.front().n_in())
    throw DimensionMismatch("forward_sequence: input feature count mismatch");

  const auto B = static_cast<Eigen::Index>(batch);
  const Eigen::Index TB = inputs.cols();
  const auto& g = model.gru;
  const Eigen::Index nh = g.n_hidden();

  ForwardTrace tr;
  tr.batch = batch;
  tr.steps = static_cast<std::size_t>(TB / B);
  tr.inputs = inputs;
  dense_forward(model.nnw_in, inputs, tr.in_trace);
  const Eigen::MatrixXd& xp = tr.in_trace.post.back();

  // Input-side gate contributions for every step at once.
  Eigen::MatrixXd gx_r = g.w_xr.transpose() * xp;
  gx_r.colwise() += g.b_xr + g.b_hr;
  Eigen::MatrixXd gx_u = g.w_xu.transpose() * xp;
  gx_u.colwise() += g.b_xu + g.b_hu;
  Eigen::MatrixXd gx_c = g.w_xc.transpose() * xp;
  gx_c.colwise() += g.b_xc;

  tr.hidden.resize(nh, TB + B);
  tr.hidden.leftCols(B).setConstant(model.h0);
  tr.reset.resize(nh, TB);
  tr.update.resize(nh, TB);
  tr.candidate.resize(nh, TB);
  tr.hidden_lin.resize(nh, TB);

  Eigen::MatrixXd tmp(nh, B);
  for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(tr.steps); ++t) {
    const auto hp = tr.hidden.middleCols(t * B, B);
    auto r = tr.reset.middleCols(t * B, B);
    auto u = tr.update.middleCols(t * B, B);
    auto c = tr.candidate.middleCols(t * B, B);
    auto hl = tr.hidden_lin.middleCols(t * B, B);

    tmp.noalias() = g.w_hr.transpose() * hp;
    r = (tmp + gx_r.middleCols(t * B, B)).unaryExpr([](double v) { return sigmoid(v); });
    tmp.noalias() = g.w_hu.transpose() * hp;
    u = (tmp + gx_u.middleCols(t * B, B)).unaryExpr([](double v) { return sigmoid(v); });
    hl.noalias() = g.w_hc.transpose() * hp;
    hl.colwise() += g.b_hc;
    c = (gx_c.middleCols(t * B, B).array() + r.array() * hl.array()).tanh();
    tr.hidden.middleCols((t + 1) * B, B) =
        u.array() * hp.array() + (1.0 - u.array()) * c.array();
  }

  dense_forward(model.nnw_out, tr.hidden.rightCols(TB), tr.out_trace);
  return tr;
}

Eigen::MatrixXd predict_sequence(const RnnModel& model, const Block& inputs) {
  Eigen::MatrixXd x(inputs.cols, inputs.rows);
  for (std::size_t t = 0; t < inputs.rows; ++t)
    for (std::size_t f = 0; f < inputs.cols; ++f) x(f, t) = inputs(t, f);
  return forward_sequence(model, x, 1).outputs().transpose();
}

double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw DimensionMismatch("mse_loss: shape mismatch");
  if (pred.size() == 0) return 0.0;
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

RnnModel bptt_gradients(const RnnModel& model, const ForwardTrace& tr,
                        const Eigen::MatrixXd& targets) {
  const Eigen::MatrixXd& y = tr.outputs();
  if (y.rows() != targets.rows() || y.cols() != targets.cols())
    throw DimensionMismatch("bptt_gradients: target shape mismatch");

  RnnModel grad = make_rnn(model.architecture());
  const auto B = static_cast<Eigen::Index>(tr.batch);
  const Eigen::Index TB = y.cols();
  const auto& g = model.gru;
  const Eigen::Index nh = g.n_hidden();

  Eigen::MatrixXd d_y = (2.0 / static_cast<double>(y.size())) * (y - targets);
  const Eigen::MatrixXd d_hidden_out =
      dense_backward(model.nnw_out, tr.hidden.rightCols(TB), tr.out_trace, std::move(d_y), grad.nnw_out);

  // Pre-activation gradients of the three gate paths, for every step.
  Eigen::MatrixXd d_ar(nh, TB), d_au(nh, TB), d_ac(nh, TB), d_hl(nh, TB);
  Eigen::MatrixXd d_h_next = Eigen::MatrixXd::Zero(nh, B);
  Eigen::MatrixXd d_hp(nh, B);
  for (Eigen::Index t = static_cast<Eigen::Index>(tr.steps); t-- > 0;) {
    const auto hp = tr.hidden.middleCols(t * B, B).array();
    const auto r = tr.reset.middleCols(t * B, B).array();
    const auto u = tr.update.middleCols(t * B, B).array();
    const auto c = tr.candidate.middleCols(t * B, B).array();
    const auto hl = tr.hidden_lin.middleCols(t * B, B).array();

    const Eigen::ArrayXXd dh = d_hidden_out.middleCols(t * B, B).array() + d_h_next.array();
    const Eigen::ArrayXXd dac = dh * (1.0 - u) * (1.0 - c.square());
    d_ac.middleCols(t * B, B) = dac.matrix();
    d_hl.middleCols(t * B, B) = (dac * r).matrix();
    d_ar.middleCols(t * B, B) = (dac * hl * r * (1.0 - r)).matrix();
    d_au.middleCols(t * B, B) = (dh * (hp - c) * u * (1.0 - u)).matrix();

    d_hp = (dh * u).matrix();
    d_hp.noalias() += g.w_hc * d_hl.middleCols(t * B, B);
    d_hp.noalias() += g.w_hr * d_ar.middleCols(t * B, B);
    d_hp.noalias() += g.w_hu * d_au.middleCols(t * B, B);
    d_h_next.swap(d_hp);
  }

  const auto h_prev = tr.hidden.leftCols(TB);
  auto& gg = grad.gru;
  gg.w_hr.noalias() = h_prev * d_ar.transpose();
  gg.w_hu.noalias() = h_prev * d_au.transpose();
  gg.w_hc.noalias() = h_prev * d_hl.transpose();
  gg.b_hr = d_ar.rowwise().sum();
  gg.b_hu = d_au.rowwise().sum();
  gg.b_hc = d_hl.rowwise().sum();

  const Eigen::MatrixXd& xp = tr.in_trace.post.back();
  gg.w_xr.noalias() = xp * d_ar.transpose();
  gg.w_xu.noalias() = xp * d_au.transpose();
  gg.w_xc.noalias() = xp * d_ac.transpose();
  gg.b_xr = gg.b_hr;
  gg.b_xu = gg.b_hu;
  gg.b_xc = d_ac.rowwise().sum();

  Eigen::MatrixXd d_xp(g.n_in(), TB);
  d_xp.noalias() = g.w_xr * d_ar;
  d_xp.noalias() += g.w_xu * d_au;
  d_xp.noalias() += g.w_xc * d_ac;
  dense_backward(model.nnw_in, tr.inputs, tr.in_trace, std::move(d_xp), grad.nnw_in);
  return grad;
}

// -------------------------------------------------------------- training

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw InvalidInput("moment decay rates must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  if (weight_decay < 0.0) throw InvalidInput("weight decay must be non-negative");
  if (n_epoch < 1 || n_epoch > 10) throw InvalidInput("n_epoch must lie in [1, 10]");
  if (n_batches < 1) throw InvalidInput("the number of mini-batches must be >= 1");
  if (batch_size < 1) throw InvalidInput("batch size must be >= 1");
  if (clip_norm < 0.0) throw InvalidInput("clip norm must be non-negative");
}

AdamOptimizer::AdamOptimizer(const RnnModel& shape) {
  for (auto b : shape.blocks()) {
    m_.emplace_back(b.size(), 0.0);
    v_.emplace_back(b.size(), 0.0);
  }
}

void AdamOptimizer::step(RnnModel& params, const RnnModel& grads, const TrainConfig& cfg) {
  auto pb = params.blocks();
  const auto gb = grads.blocks();
  if (pb.size() != m_.size() || gb.size() != m_.size())
    throw DimensionMismatch("optimizer state does not match the model");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < pb.size(); ++k) {
    auto p = pb[k];
    auto gk = gb[k];
    auto& m = m_[k];
    auto& v = v_[k];
    if (p.size() != m.size() || gk.size() != m.size())
      throw DimensionMismatch("optimizer block size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gk[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gk[i] * gk[i];
      const double mh = m[i] / c1, vh = v[i] / c2;
      p[i] -= cfg.learning_rate * (mh / (std::sqrt(vh) + cfg.epsilon) + cfg.weight_decay * p[i]);
    }
  }
}

double clip_gradients(RnnModel& grads, double max_norm) {
  double sq = 0.0;
  for (auto b : grads.blocks())
    for (double v : b) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto b : grads.blocks())
      for (double& v : b) v *= s;
  }
  return norm;
}

double train_on_batch(RnnModel& model, AdamOptimizer& opt, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets, std::size_t batch, const TrainConfig& cfg) {
  double first = 0.0;
  for (int e = 0; e < cfg.n_epoch; ++e) {
    const ForwardTrace tr = forward_sequence(model, inputs, batch);
    const double loss = mse_loss(tr.outputs(), targets);
    if (!std::isfinite(loss)) throw Error("training diverged: loss is not finite");
    if (e == 0) first = loss;
    RnnModel grads = bptt_gradients(model, tr, targets);
    clip_gradients(grads, cfg.clip_norm);
    opt.step(model, grads, cfg);
  }
  return first;
}

// ------------------------------------------------------------------ files

namespace {
constexpr char kRnnMagic[8] = {'R', 'N', 'N', 'M', 'D', 'L', '1', '\0'};
constexpr std::uint32_t kRnnVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("truncated model file");
  return v;
}

void put_net(std::ostream& os, const FeedForwardNet& net) {
  const auto sizes = net.sizes();
  put(os, static_cast<std::uint32_t>(net.layers.size()));
  for (int s : sizes) put(os, static_cast<std::uint32_t>(s));
  for (const auto& l : net.layers) put(os, static_cast<std::uint8_t>(l.activation));
}

FeedForwardNet get_net(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  if (n == 0 || n > 64) throw FormatError("model file: implausible layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i <= n; ++i) sizes.push_back(static_cast<int>(get<std::uint32_t>(is)));
  FeedForwardNet net = make_feedforward(sizes, false);
  for (auto& l : net.layers) {
    const auto a = get<std::uint8_t>(is);
    if (a > 1) throw FormatError("model file: unknown activation");
    l.activation = static_cast<Activation>(a);
  }
  return net;
}
}  // namespace

void write_rnn(const std::filesystem::path& file, const RnnModel& model) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw InvalidInput("cannot open " + file.string() + " for writing");
  os.write(kRnnMagic, sizeof(kRnnMagic));
  put(os, kRnnVersion);
  put(os, model.h0);
  put_net(os, model.nnw_in);
  put(os, static_cast<std::uint32_t>(model.gru.n_in()));
  put(os, static_cast<std::uint32_t>(model.gru.n_hidden()));
  put_net(os, model.nnw_out);
  for (auto b : model.blocks())
    os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size_bytes()));
  if (!os) throw InvalidInput("failed writing " + file.string());
}

RnnModel read_rnn(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw MissingArtifact("cannot open " + file.string(), "train");
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kRnnMagic, sizeof(magic)) != 0)
    throw FormatError(file.string() + ": not an RNNMDL1 model");
  if (get<std::uint32_t>(is) != kRnnVersion) throw FormatError(file.string() + ": unsupported version");
  RnnModel m;
  m.h0 = get<double>(is);
  m.nnw_in = get_net(is);
  const auto n_in = get<std::uint32_t>(is);
  const auto n_h = get<std::uint32_t>(is);
  m.gru = make_gru(static_cast<int>(n_in), static_cast<int>(n_h));
  m.nnw_out = get_net(is);
  if (m.nnw_in.layers.back().n_out() != n_in || m.nnw_out.layers.front().n_in() != n_h)
    throw FormatError(file.string() + ": inconsistent architecture signature");
  for (auto b : m.blocks())
    if (!is.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size_bytes())))
      throw FormatError(file.string() + ": truncated parameter block");
  return m;
}

std::uint64_t parameter_checksum(const RnnModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : model.blocks()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(b.data());
    for (std::size_t i = 0; i < b.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

}  // namespace rvesurr
