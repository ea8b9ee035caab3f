// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rvesurr/datastore.hpp"
#include "rvesurr/error.hpp"

using namespace rvesurr;
namespace fs = std::filesystem;

namespace {

SequenceRecord ramp_record(std::size_t steps, std::size_t dg, std::size_t dt, double slope) {
  SequenceRecord r;
  r.inputs = Block(steps, 3);
  r.gamma = Block(steps, dg);
  r.tau = Block(steps, dt);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t f = 0; f < 3; ++f) r.inputs(t, f) = 1e-3 * double(t) * double(f + 1);
    for (std::size_t j = 0; j < dg; ++j) r.gamma(t, j) = slope * double(t) * double(j + 1) / double(dg);
    for (std::size_t j = 0; j < dt; ++j) r.tau(t, j) = 10.0 * double(t + j);
  }
  return r;
}

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "rvesurr_unit";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Normalization, MapsOntoUnitInterval) {
  Block b(3, 2);
  b(0, 0) = 1;
  b(1, 0) = 3;
  b(2, 0) = 5;
  b(0, 1) = b(1, 1) = b(2, 1) = 7;  // constant feature
  const NormalizationSpec n = fit_normalization(b);
  EXPECT_DOUBLE_EQ(n.chi_mu[0], 3.0);
  EXPECT_DOUBLE_EQ(n.chi_s[0], 2.0);
  EXPECT_TRUE(n.degenerate[1]);
  EXPECT_DOUBLE_EQ(n.chi_s[1], 1.0);
  Block c = b;
  n.normalize(c);
  EXPECT_DOUBLE_EQ(c(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(c(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(c(1, 1), 0.0);
  n.denormalize(c);
  for (std::size_t i = 0; i < b.data.size(); ++i) EXPECT_NEAR(c.data[i], b.data[i], 1e-15);
}

TEST(Normalization, JsonRoundTripIsExact) {
  Block b(4, 3);
  for (std::size_t i = 0; i < b.data.size(); ++i) b.data[i] = std::sin(double(i)) / 3.0;
  const NormalizationSpec n = fit_normalization(b);
  EXPECT_EQ(NormalizationSpec::from_json(nlohmann::json::parse(n.to_json().dump())), n);
}

TEST(Normalization, RejectsEmptyAndMismatched) {
  EXPECT_THROW(fit_normalization(Block{}), InvalidInput);
  Block a(2, 2), b(2, 3);
  const Block* ptrs[] = {&a, &b};
  EXPECT_THROW(fit_normalization(ptrs), DimensionMismatch);
}

TEST(PreTrim, CutsBeforeFirstCrossing) {
  SequenceRecord r = ramp_record(800, 4, 2, 0.0);
  for (std::size_t t = 0; t < 800; ++t) r.gamma(t, 2) = t >= 412 ? 6.5 : 1.0;
  const SequenceRecord out = pre_trim(r, 6.0, Family::gamma);
  EXPECT_EQ(out.length(), 412u);
  EXPECT_EQ(out.tau.rows, 412u);
  for (double v : out.gamma.data) EXPECT_LE(v, 6.0);
  EXPECT_FALSE(out.excluded());
}

TEST(PreTrim, ExcludesWhenFirstStepExceeds) {
  SequenceRecord r = ramp_record(10, 2, 2, 0.0);
  r.gamma(0, 0) = 7.0;
  const SequenceRecord out = pre_trim(r, 6.0, Family::gamma);
  EXPECT_EQ(out.length(), 0u);
  EXPECT_TRUE(out.excluded());
}

TEST(PreTrim, NeverExceedsCritical) {
  for (double slope : {0.001, 0.01, 0.05, 0.2}) {
    const SequenceRecord out = pre_trim(ramp_record(300, 8, 1, slope), 6.0, Family::gamma);
    for (double v : out.gamma.data) EXPECT_LE(v, 6.0);
  }
}

TEST(Padding, SplitRule) {
  const PadSplit s = pad_split(600, 800);
  EXPECT_EQ(s.front + s.back, 200u);
  EXPECT_EQ(s.front, 100u);
  const PadSplit o = pad_split(599, 800);
  EXPECT_EQ(o.front, 100u);
  EXPECT_EQ(o.back, 101u);
}

TEST(Padding, PadRepeatsEndsAndTrimDropsTail) {
  Block b(5, 1);
  for (std::size_t t = 0; t < 5; ++t) b(t, 0) = double(t + 1);
  const Block p = pad_or_trim(b, 9);
  ASSERT_EQ(p.rows, 9u);
  const std::vector<double> want{1, 1, 1, 2, 3, 4, 5, 5, 5};
  for (std::size_t t = 0; t < 9; ++t) EXPECT_EQ(p(t, 0), want[t]);
  const Block tr = pad_or_trim(b, 3);
  ASSERT_EQ(tr.rows, 3u);
  EXPECT_EQ(tr(2, 0), 3.0);
  EXPECT_EQ(pad_or_trim(b, 5), b);
  EXPECT_EQ(pad_or_trim(ramp_record(1000, 2, 2, 0.01), 800).length(), 800u);
}

TEST(Batching, SampleFromOneGroup) {
  LengthGroups g;
  for (int i = 0; i < 5; ++i) {
    Sequence s{Block(8, 3, double(i)), Block(8, 2, -double(i))};
    g.add(s);
  }
  g.add({Block(12, 3), Block(12, 2)});
  Rng rng(1);
  const MiniBatch mb = sample_minibatch(g, 16, 8, rng);
  EXPECT_EQ(mb.batch, 16u);
  EXPECT_EQ(mb.steps, 8u);
  EXPECT_EQ(mb.n_in, 3u);
  EXPECT_EQ(mb.n_out, 2u);
  for (std::size_t b = 0; b < mb.batch; ++b)
    EXPECT_EQ(mb.inputs[(b * 8 + 3) * 3 + 1], double(mb.picks[b]));
  EXPECT_THROW(sample_minibatch(g, 4, 10, rng), InvalidInput);
  EXPECT_EQ(g.total(), 6u);
}

TEST(Batching, UniformWithReplacement) {
  LengthGroups g;
  for (int i = 0; i < 4; ++i) g.add({Block(2, 1), Block(2, 1)});
  Rng rng(5);
  std::array<int, 4> counts{};
  const int n = 4000;
  for (int k = 0; k < n / 8; ++k)
    for (auto p : sample_minibatch(g, 8, 2, rng).picks) ++counts[p];
  double chi2 = 0;
  for (int c : counts) chi2 += (c - n / 4.0) * (c - n / 4.0) / (n / 4.0);
  EXPECT_LT(chi2, 16.27);  // 99.9% quantile, 3 dof
}

TEST(Files, RecordRoundTripIsBitExact) {
  std::vector<SequenceRecord> recs{ramp_record(7, 5, 3, 0.1), ramp_record(3, 5, 3, 0.2)};
  recs[1].flags = record_flags::kTruncated | record_flags::kCyclic;
  recs[0].gamma(2, 1) = std::nextafter(1.0, 2.0);
  const auto f = temp_file("round.rveseq");
  write_records(f, recs);
  EXPECT_EQ(read_records(f), recs);
}

TEST(Files, PathRoundTrip) {
  LoadingPath p;
  p.steps = {SymTensor2::identity(), {1.01, 0.99, 1.0, 0.003, 0, 0}};
  for (const auto& u : p.steps) p.strains.push_back(u_to_e(u));
  p.kind = PathKind::cyclic;
  const auto f = temp_file("paths.rveseq");
  write_paths(f, std::vector<LoadingPath>{p});
  const auto back = read_paths(f);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].steps, p.steps);
  EXPECT_EQ(back[0].strains, p.strains);
  EXPECT_EQ(back[0].kind, PathKind::cyclic);
}

TEST(Files, MissingAndCorrupt) {
  EXPECT_THROW(read_records(temp_file("does_not_exist.rveseq")), MissingArtifact);
  const auto f = temp_file("bad.rveseq");
  {
    std::ofstream os(f, std::ios::binary);
    os << "NOTAFILE";
  }
  EXPECT_THROW(read_records(f), FormatError);
}

TEST(Files, StatsCountFlags) {
  std::vector<SequenceRecord> recs{ramp_record(7, 5, 3, 0.1), ramp_record(3, 5, 3, 0.2)};
  recs[1].flags = record_flags::kCyclic;
  const auto j = dataset_stats(recs);
  EXPECT_EQ(j["records"], 2);
  EXPECT_EQ(j["cyclic"], 1);
  EXPECT_EQ(j["total_steps"], 10);
}
