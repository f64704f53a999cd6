#include "oracles.hpp"

#include "refocus/ekpb.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

using namespace refocus;

TEST(PickStrategy, ParseRoundTrip) {
  for (auto s : {PickStrategy::Softmax, PickStrategy::Max, PickStrategy::Min})
    EXPECT_EQ(parse_pick_strategy(to_string(s)), s);
  EXPECT_THROW(parse_pick_strategy("argmax"), std::invalid_argument);
}

TEST(CrossChannelSoftmax, ColumnsSumToOne) {
  const RowMatrix e{{0.0, 5.0, 1.0}, {1.0, 5.0, 0.0}, {2.0, 5.0, 0.5}};
  const RowMatrix p = cross_channel_softmax(e);
  for (Index j = 0; j < 3; ++j) EXPECT_NEAR(p.col(j).sum(), 1.0, 1e-15);
  EXPECT_NEAR(p(0, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p(2, 0) / p(1, 0), std::exp(1.0), 1e-12);
  EXPECT_THROW(cross_channel_softmax(RowMatrix{{-1.0}}), ContractError);
}

TEST(PickKey, MaxAndMinPreferLowestIndexOnTies) {
  const RowMatrix re{{1, 2}, {3, 2}, {3, 0}};
  const RowMatrix im = RowMatrix::Zero(3, 2);
  const RowMatrix energies = re.cwiseAbs2();
  const RowMatrix probs = cross_channel_softmax(energies);
  Rng rng(1);
  const auto mx = pick_key_frequency(re, im, probs, PickStrategy::Max, rng);
  EXPECT_EQ(mx.trace.chosen_channel, (std::vector<Index>{1, 0}));
  EXPECT_EQ(mx.re[0], 3);
  const auto mn = pick_key_frequency(re, im, probs, PickStrategy::Min, rng);
  EXPECT_EQ(mn.trace.chosen_channel, (std::vector<Index>{0, 2}));
  EXPECT_EQ(mn.re[1], 0);
}

TEST(PickKey, RejectsUnnormalizedProbabilities) {
  const RowMatrix re = RowMatrix::Ones(2, 2), im = RowMatrix::Zero(2, 2);
  const RowMatrix probs{{0.5, 0.5}, {0.5, 0.6}};
  Rng rng(2);
  EXPECT_THROW(pick_key_frequency(re, im, probs, PickStrategy::Softmax, rng), ContractError);
}

TEST(PickKey, SamplingFrequenciesFollowProbabilities) {
  const RowMatrix probs{{0.1, 0.7}, {0.6, 0.2}, {0.3, 0.1}};
  RowMatrix re(3, 2);
  re << 0, 0, 1, 1, 2, 2;
  const RowMatrix im = RowMatrix::Zero(3, 2);
  Rng rng(3);
  RowMatrix counts = RowMatrix::Zero(3, 2);
  const int draws = 40000;
  for (int i = 0; i < draws; ++i) {
    const auto k = pick_key_frequency(re, im, probs, PickStrategy::Softmax, rng);
    for (Index j = 0; j < 2; ++j) counts(k.trace.chosen_channel[std::size_t(j)], j) += 1;
    EXPECT_EQ(k.re[0], double(k.trace.chosen_channel[0]));
  }
  EXPECT_LT((counts / draws - probs).cwiseAbs().maxCoeff(), 0.01);
}

TEST(PickTrace, JsonCarriesProbabilitiesAndChoices) {
  PickTrace t;
  t.probabilities = RowMatrix{{0.25, 1.0}, {0.75, 0.0}};
  t.chosen_channel = {1, 0};
  const auto j = nlohmann::json::parse(pick_trace_json(t));
  EXPECT_EQ(j["channels"], 2);
  EXPECT_EQ(j["bins"], 2);
  EXPECT_DOUBLE_EQ(j["probabilities"][1][0].get<double>(), 0.75);
  EXPECT_EQ(j["chosen_channel"][0], 1);
}

class EkpbBlockTest : public ::testing::Test {
 protected:
  static constexpr Index kB = 2, kC = 3, kD = 8, kQ = 6;
  Rng rng{41};
  EkpbBlock block = EkpbBlock::init(kD, kQ, PickStrategy::Softmax, Activation::Gelu, rng);
  std::mt19937_64 data_rng{42};
  Tensor h = Tensor::from({kB * kC, kD}, oracle::random_vector(kB * kC * kD, data_rng), true);
};

TEST_F(EkpbBlockTest, ShapesAndTraces) {
  const auto out = ekpb_forward(h, kC, block, rng);
  EXPECT_EQ(out.out.shape(), (Shape{kB * kC, kD}));
  ASSERT_EQ(out.traces.size(), std::size_t(kB));
  EXPECT_EQ(out.traces[0].probabilities.rows(), kC);
  EXPECT_EQ(out.traces[0].probabilities.cols(), kQ / 2 + 1);
  EXPECT_EQ(out.choices.size(), std::size_t(kB * (kQ / 2 + 1)));
  for (const auto& t : out.traces)
    for (Index j = 0; j < t.probabilities.cols(); ++j) EXPECT_NEAR(t.probabilities.col(j).sum(), 1.0, 1e-12);
  EXPECT_THROW(ekpb_forward(h, 4, block, rng), DimensionError);
}

TEST_F(EkpbBlockTest, ForcedChoicesReplay) {
  const auto first = ekpb_forward(h, kC, block, rng);
  EkpbOptions opt;
  opt.forced_choices = first.choices;
  Rng other(12345);
  const auto replay = ekpb_forward(h, kC, block, other, opt);
  EXPECT_EQ(replay.choices, first.choices);
  EXPECT_TRUE(replay.out.as_matrix().isApprox(first.out.as_matrix(), 0.0));
}

TEST_F(EkpbBlockTest, MaxStrategyMatchesEntryEnergies) {
  EkpbOptions opt;
  opt.strategy = PickStrategy::Max;
  const auto out = ekpb_forward(h, kC, block, rng, opt);
  const auto spec = rfft_rows(block.entry_map(h.detach()));
  const RowMatrix e = spec.re.as_matrix().cwiseAbs2() + spec.im.as_matrix().cwiseAbs2();
  for (Index b = 0; b < kB; ++b)
    for (Index j = 0; j <= kQ / 2; ++j) {
      Index best = 0;
      e.col(j).segment(b * kC, kC).maxCoeff(&best);
      EXPECT_EQ(out.choices[std::size_t(b * (kQ / 2 + 1) + j)], best);
    }
}

TEST_F(EkpbBlockTest, GradientWithFrozenSelection) {
  const auto base = ekpb_forward(h, kC, block, rng);
  const std::vector<Index> frozen = base.choices;
  ParameterList params;
  block.collect(params, "b");
  std::vector<Tensor> tensors{h};
  for (auto& p : params) tensors.push_back(p.tensor);
  const Tensor w = Tensor::from({kB * kC, kD}, oracle::random_vector(kB * kC * kD, data_rng));
  EkpbOptions opt;
  opt.forced_choices = frozen;
  opt.keep_traces = false;
  EXPECT_LT(grad_check([&] { return sum(mul(ekpb_forward(h, kC, block, rng, opt).out, w)); }, tensors), 1e-6);
}
