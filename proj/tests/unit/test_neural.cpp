// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "rvesurr/error.hpp"
#include "rvesurr/neural.hpp"

using namespace rvesurr;

namespace {

RnnArchitecture small_arch() {
  RnnArchitecture a;
  a.nnw_in = {2, 4};
  a.n_hidden = 4;
  a.nnw_out = {4, 3};
  return a;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double s = 1.0) {
  Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-s, s);
  return m;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Scalar-loop GRU following the gate algebra directly.
std::vector<double> scripted_step(const GruCell& c, const std::vector<double>& x, const std::vector<double>& h) {
  const auto ni = std::size_t(c.n_in()), nh = std::size_t(c.n_hidden());
  std::vector<double> out(nh);
  for (std::size_t j = 0; j < nh; ++j) {
    double r = c.b_xr[j] + c.b_hr[j], u = c.b_xu[j] + c.b_hu[j], cx = c.b_xc[j], ch = c.b_hc[j];
    for (std::size_t i = 0; i < ni; ++i) {
      r += c.w_xr(i, j) * x[i];
      u += c.w_xu(i, j) * x[i];
      cx += c.w_xc(i, j) * x[i];
    }
    for (std::size_t i = 0; i < nh; ++i) {
      r += c.w_hr(i, j) * h[i];
      u += c.w_hu(i, j) * h[i];
      ch += c.w_hc(i, j) * h[i];
    }
    r = sig(r);
    u = sig(u);
    const double cand = std::tanh(cx + r * ch);
    out[j] = u * h[j] + (1 - u) * cand;
  }
  return out;
}

double loss_of(const RnnModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::size_t batch) {
  return mse_loss(forward_sequence(m, x, batch).outputs(), y);
}

}  // namespace

TEST(FeedForward, LeakyReluShape) {
  EXPECT_EQ(leaky_relu(2.0), 2.0);
  EXPECT_EQ(leaky_relu(-2.0), -0.02);
  const std::vector<int> sizes{3, 5, 2};
  const FeedForwardNet n = make_feedforward(sizes, true);
  EXPECT_EQ(n.layers[0].activation, Activation::leaky_relu);
  EXPECT_EQ(n.layers[1].activation, Activation::none);
  EXPECT_EQ(n.sizes(), sizes);
  EXPECT_EQ(n.count_parameters(), dense_pair_parameters(3, 5) + dense_pair_parameters(5, 2));
}

TEST(Gru, MatchesScriptedOracle) {
  RnnArchitecture a;
  a.nnw_in = {3, 5};
  a.n_hidden = 6;
  a.nnw_out = {2};
  const RnnModel m = make_rnn(a, 42);
  std::vector<double> h(6, m.h0);
  Rng rng(1);
  for (int t = 0; t < 5; ++t) {
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(-1, 1);
    const GateValues g = gru_step(m.gru, Eigen::Map<Eigen::VectorXd>(x.data(), 5), Eigen::Map<Eigen::VectorXd>(h.data(), 6));
    const std::vector<double> want = scripted_step(m.gru, x, h);
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(g.hidden[j], want[std::size_t(j)], 1e-14);
    h = want;
  }
}

TEST(Gru, SequenceForwardMatchesStepwise) {
  RnnArchitecture a = small_arch();
  const RnnModel m = make_rnn(a, 7);
  const Eigen::MatrixXd x = random_matrix(2, 5, 3);
  const ForwardTrace tr = forward_sequence(m, x, 1);
  Eigen::VectorXd h = Eigen::VectorXd::Constant(4, m.h0);
  for (int t = 0; t < 5; ++t) {
    const Eigen::VectorXd xi = m.nnw_in.forward(x.col(t));
    h = gru_step(m.gru, xi, h).hidden;
    const Eigen::VectorXd y = m.nnw_out.forward(h);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(tr.outputs()(k, t), y(k), 1e-13);
  }
}

TEST(Gru, BatchMatchesSingleSequences) {
  RnnArchitecture a;
  a.nnw_in = {3, 8};
  a.n_hidden = 10;
  a.nnw_out = {6, 4};
  const RnnModel m = make_rnn(a, 11);
  const std::size_t B = 5, T = 12;
  const Eigen::MatrixXd x = random_matrix(3, Eigen::Index(B * T), 9);
  const Eigen::MatrixXd out = forward_sequence(m, x, B).outputs();
  for (std::size_t b = 0; b < B; ++b) {
    Eigen::MatrixXd xs(3, Eigen::Index(T));
    for (std::size_t t = 0; t < T; ++t) xs.col(Eigen::Index(t)) = x.col(Eigen::Index(t * B + b));
    const Eigen::MatrixXd single = forward_sequence(m, xs, 1).outputs();
    for (std::size_t t = 0; t < T; ++t)
      for (int k = 0; k < 4; ++k) EXPECT_NEAR(out(k, Eigen::Index(t * B + b)), single(k, Eigen::Index(t)), 1e-12);
  }
}

TEST(Gradients, MatchCentralDifferences) {
  RnnModel m = make_rnn(small_arch(), 3);
  // nonzero biases everywhere so every gradient path is exercised
  Rng rng(8);
  for (auto blk : m.blocks())
    for (double& v : blk) v += rng.uniform(-0.2, 0.2);
  const std::size_t B = 2, T = 3;
  const Eigen::MatrixXd x = random_matrix(2, Eigen::Index(B * T), 5);
  const Eigen::MatrixXd y = random_matrix(3, Eigen::Index(B * T), 6);
  const RnnModel g = bptt_gradients(m, forward_sequence(m, x, B), y);
  const auto gb = g.blocks();
  auto pb = m.blocks();
  const double h = 1e-6;
  int checked = 0;
  for (std::size_t k = 0; k < pb.size(); ++k)
    for (std::size_t i = 0; i < pb[k].size(); ++i) {
      const double keep = pb[k][i];
      pb[k][i] = keep + h;
      const double lp = loss_of(m, x, y, B);
      pb[k][i] = keep - h;
      const double lm = loss_of(m, x, y, B);
      pb[k][i] = keep;
      const double fd = (lp - lm) / (2 * h);
      const double err = std::abs(fd - gb[k][i]);
      EXPECT_TRUE(err <= 1e-8 || err <= 1e-5 * std::abs(fd)) << "block " << k << " entry " << i << " fd " << fd
                                                             << " bptt " << gb[k][i];
      ++checked;
    }
  EXPECT_EQ(std::size_t(checked), m.count_parameters());
}

TEST(ParameterCount, ClosedForms) {
  EXPECT_EQ(gru_parameters(100, 70), 51600u);
  EXPECT_EQ(make_gru(70, 100).count_parameters(), 51600u);
  EXPECT_EQ(dense_pair_parameters(3, 70), 280u);
}

TEST(ParameterCount, AllocationAudit) {
  // Surrogate I, II, III rows for gamma, and I, III for tau
  struct Row {
    int n_h;
    std::vector<int> out;
  };
  const std::vector<Row> rows{{100, {800, 1607}}, {200, {800, 1607}}, {400, {800, 1607}}, {100, {800, 180}},
                              {200, {800, 180}},  {400, {800, 180}},  {100, {100, 10}},   {200, {100, 10}},
                              {400, {100, 10}},   {600, {1200, 2237}}, {600, {200, 20}}};
  for (const Row& r : rows) {
    RnnArchitecture a;
    a.nnw_in = {3, 70};
    a.n_hidden = r.n_h;
    a.nnw_out = r.out;
    const RnnModel m = make_rnn(a);
    std::size_t audit = 0;
    for (const auto& l : m.nnw_in.layers) audit += std::size_t(l.weights.size() + l.bias.size());
    for (const auto& l : m.nnw_out.layers) audit += std::size_t(l.weights.size() + l.bias.size());
    const GruCell& g = m.gru;
    for (const auto* w : {&g.w_xu, &g.w_xr, &g.w_xc, &g.w_hu, &g.w_hr, &g.w_hc}) audit += std::size_t(w->size());
    for (const auto* b : {&g.b_xu, &g.b_hu, &g.b_xr, &g.b_hr, &g.b_xc, &g.b_hc}) audit += std::size_t(b->size());
    const std::size_t n_h = std::size_t(r.n_h);
    const std::size_t formula = dense_pair_parameters(3, 70) + gru_parameters(n_h, 70) +
                                dense_pair_parameters(n_h, std::size_t(r.out[0])) +
                                dense_pair_parameters(std::size_t(r.out[0]), std::size_t(r.out[1]));
    EXPECT_EQ(audit, formula) << "n_h " << r.n_h;
    EXPECT_EQ(m.count_parameters(), formula);
    std::size_t blocks = 0;
    for (auto b : m.blocks()) blocks += b.size();
    EXPECT_EQ(blocks, formula);
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  RnnArchitecture a = small_arch();
  RnnModel p = make_rnn(a, 1), g = make_rnn(a);
  const RnnModel before = p;
  Rng rng(2);
  for (auto b : g.blocks())
    for (double& v : b) v = rng.uniform(-3, 3);
  AdamOptimizer opt(p);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  opt.step(p, g, cfg);
  const auto pb = p.blocks();
  const auto bb = before.blocks();
  const auto gb = g.blocks();
  for (std::size_t k = 0; k < pb.size(); ++k)
    for (std::size_t i = 0; i < pb[k].size(); ++i) {
      const double want = -cfg.learning_rate * gb[k][i] / (std::abs(gb[k][i]) + cfg.epsilon);
      EXPECT_NEAR(pb[k][i] - bb[k][i], want, 1e-15);
    }
  EXPECT_EQ(opt.steps_taken(), 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  RnnModel p = make_rnn(small_arch(), 1);
  const RnnModel before = p;
  AdamOptimizer opt(p);
  opt.step(p, make_rnn(small_arch()), TrainConfig{});
  EXPECT_EQ(parameter_checksum(p), parameter_checksum(before));
}

TEST(Clip, ScalesToMaxNorm) {
  RnnModel g = make_rnn(small_arch());
  for (auto b : g.blocks())
    for (double& v : b) v = 1.0;
  const double n0 = clip_gradients(g, 1.0);
  EXPECT_NEAR(n0, std::sqrt(double(g.count_parameters())), 1e-12);
  double s = 0;
  for (auto b : g.blocks())
    for (double v : b) s += v * v;
  EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
}

TEST(Training, LinearTaskSanity) {
  // y = A x on 4 outputs, driven through the full recurrent model
  RnnArchitecture a;
  a.nnw_in = {3, 16};
  a.n_hidden = 16;
  a.nnw_out = {4};
  RnnModel m = make_rnn(a, 5);
  AdamOptimizer opt(m);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.n_epoch = 5;
  const Eigen::MatrixXd A = random_matrix(4, 3, 12, 0.5);
  Rng rng(13);
  const std::size_t B = 16, T = 10;
  double last = 1.0;
  for (int k = 0; k < 200; ++k) {
    Eigen::MatrixXd x(3, Eigen::Index(B * T));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
    const Eigen::MatrixXd y = A * x;
    train_on_batch(m, opt, x, y, B, cfg);
    last = loss_of(m, x, y, B);
  }
  EXPECT_LT(last, 1e-4);
}

TEST(Training, DeterministicUpdates) {
  auto run = [] {
    RnnModel m = make_rnn(small_arch(), 21);
    AdamOptimizer opt(m);
    for (int k = 0; k < 5; ++k) {
      const Eigen::MatrixXd x = random_matrix(2, 8, std::uint64_t(k));
      train_on_batch(m, opt, x, random_matrix(3, 8, std::uint64_t(k + 100)), 2, TrainConfig{});
    }
    return parameter_checksum(m);
  };
  EXPECT_EQ(run(), run());
}

TEST(Training, NonFiniteLossThrows) {
  RnnModel m = make_rnn(small_arch(), 1);
  AdamOptimizer opt(m);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(3, 2);
  y(0, 0) = std::nan("");
  EXPECT_THROW(train_on_batch(m, opt, Eigen::MatrixXd::Zero(2, 2), y, 2, TrainConfig{}), Error);
}

TEST(Files, RnnRoundTripIsBitExact) {
  RnnArchitecture a;
  a.nnw_in = {3, 7};
  a.n_hidden = 5;
  a.nnw_out = {6, 2};
  a.h0 = -0.5;
  const RnnModel m = make_rnn(a, 77);
  const auto f = std::filesystem::temp_directory_path() / "rvesurr_unit_model.bin";
  write_rnn(f, m);
  const RnnModel b = read_rnn(f);
  EXPECT_EQ(parameter_checksum(b), parameter_checksum(m));
  EXPECT_EQ(b.h0, -0.5);
  EXPECT_EQ(b.architecture().nnw_out, a.nnw_out);
  Block x(4, 3);
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = 0.1 * double(i);
  EXPECT_EQ(predict_sequence(b, x), predict_sequence(m, x));
  EXPECT_THROW(read_rnn(f.string() + ".nope"), MissingArtifact);
}

TEST(Architecture, Validation) {
  RnnArchitecture a = small_arch();
  a.n_hidden = 0;
  EXPECT_THROW(make_rnn(a), InvalidInput);
  TrainConfig c;
  c.n_epoch = 11;
  EXPECT_THROW(c.validate(), InvalidInput);
  const RnnModel m = make_rnn(small_arch(), 1);
  EXPECT_THROW(forward_sequence(m, Eigen::MatrixXd::Zero(3, 4), 2), DimensionMismatch);
  EXPECT_THROW(forward_sequence(m, Eigen::MatrixXd::Zero(2, 5), 2), DimensionMismatch);
}
