#include "fedsim/model.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fedsim/data.hpp"
#include "fedsim/error.hpp"
#include "oracles.hpp"

namespace fedsim {
namespace {

ModelSpec LogReg(std::size_t d, std::size_t c) {
  return ModelSpec{ModelKind::kLogisticRegression, d, c, 1};
}
ModelSpec Mlp(std::size_t d, std::size_t h, std::size_t c) {
  return ModelSpec{ModelKind::kMlp1, d, c, h};
}

std::vector<LabeledExample> RandomBatch(std::mt19937_64& gen, const ModelSpec& spec,
                                        std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> label(0, spec.num_classes - 1);
  std::vector<LabeledExample> batch(n);
  for (auto& ex : batch) {
    ex.features.resize(spec.input_dim);
    for (double& x : ex.features) x = normal(gen);
    ex.label = label(gen);
  }
  return batch;
}

ModelParameters RandomParams(std::mt19937_64& gen, const ModelSpec& spec, double scale) {
  ModelParameters p = init_params(spec, gen());
  std::normal_distribution<double> normal(0.0, scale);
  for (double& v : p.values) v = normal(gen);
  return p;
}

TEST(InitParams, LogisticRegressionHasZeroBiases) {
  const auto p = init_params(LogReg(2, 2), 7);
  ASSERT_EQ(p.size(), 6u);
  EXPECT_EQ(p.values[4], 0.0);
  EXPECT_EQ(p.values[5], 0.0);
  EXPECT_NO_THROW(p.validate());
}

TEST(InitParams, DeterministicPerSeed) {
  const auto spec = Mlp(4, 3, 5);
  EXPECT_EQ(init_params(spec, 11), init_params(spec, 11));
  EXPECT_NE(init_params(spec, 11), init_params(spec, 12));
}

TEST(InitParams, MlpParameterCountMatchesFormula) {
  const auto spec = Mlp(4, 3, 5);
  const auto p = init_params(spec, 1);
  EXPECT_EQ(p.size(), 35u);  // (4+1)*3 + (3+1)*5
  EXPECT_EQ(spec.param_count(), 35u);
}

TEST(InitParams, WeightsWithinGlorotBound) {
  const auto spec = Mlp(8, 16, 8);
  const auto p = init_params(spec, 3);
  std::size_t offset = 0;
  for (const auto& t : p.layout) {
    const std::size_t n = t.element_count();
    const double bound = t.dims.size() == 2 ? std::sqrt(6.0 / double(t.dims[0] + t.dims[1])) : 0.0;
    for (std::size_t i = 0; i < n; ++i) EXPECT_LE(std::abs(p.values[offset + i]), bound);
    offset += n;
  }
}

TEST(ModelSpec, RejectsDegenerateShapes) {
  EXPECT_THROW(LogReg(0, 2).validate(), ContractError);
  EXPECT_THROW(LogReg(3, 1).validate(), ContractError);
  EXPECT_THROW(Mlp(3, 0, 2).validate(), ContractError);
}

TEST(ForwardLossGrad, ZeroParamsGiveLogTwo) {
  const auto spec = LogReg(2, 2);
  ModelParameters zero = init_params(spec, 0);
  std::fill(zero.values.begin(), zero.values.end(), 0.0);
  const std::vector<LabeledExample> batch{{{0.3, -1.2}, 0}, {{2.0, 5.0}, 1}};
  EXPECT_NEAR(forward_loss_grad(spec, zero, batch).loss, std::log(2.0), 1e-15);
}

TEST(ForwardLossGrad, HandEvaluatedBiasGradient) {
  const auto spec = LogReg(2, 2);
  ModelParameters zero = init_params(spec, 0);
  std::fill(zero.values.begin(), zero.values.end(), 0.0);
  const std::vector<LabeledExample> batch{{{1.0, 0.0}, 0}};
  const auto g = forward_loss_grad(spec, zero, batch).grad.values;
  // Layout: weight[2x2] then bias[2]; softmax is (0.5, 0.5).
  EXPECT_DOUBLE_EQ(g[4], -0.5);
  EXPECT_DOUBLE_EQ(g[5], 0.5);
  EXPECT_DOUBLE_EQ(g[0], -0.5);  // d/dW[0][0] = (p0 - 1) * x0
  EXPECT_DOUBLE_EQ(g[1], 0.0);
  EXPECT_DOUBLE_EQ(g[2], 0.5);
}

TEST(ForwardLossGrad, MatchesFiniteDifferencesOnRandomCases) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 100; ++trial) {
    for (const auto& spec : {LogReg(1 + trial % 5, 2 + trial % 4), Mlp(1 + trial % 4, 1 + trial % 6, 2 + trial % 3)}) {
      const auto params = RandomParams(gen, spec, 0.7);
      const auto batch = RandomBatch(gen, spec, 1 + trial % 7);
      const auto analytic = forward_loss_grad(spec, params, batch);
      EXPECT_NEAR(analytic.loss, testing::reference_loss(spec, params, batch), 1e-12);
      const auto numeric = testing::finite_difference_gradient(spec, params, batch, 1e-5);
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        ASSERT_LE(testing::gradient_relative_error(analytic.grad.values[i], numeric[i]), 1e-4)
            << "trial " << trial << " component " << i;
      }
    }
  }
}

TEST(ForwardLossGrad, RejectsDimensionMismatch) {
  const auto spec = LogReg(3, 2);
  const auto p = init_params(spec, 1);
  const std::vector<LabeledExample> wrong_dim{{{1.0, 2.0}, 0}};
  const std::vector<LabeledExample> wrong_label{{{1.0, 2.0, 3.0}, 2}};
  EXPECT_THROW(forward_loss_grad(spec, p, wrong_dim), ContractError);
  EXPECT_THROW(forward_loss_grad(spec, p, wrong_label), ContractError);
  EXPECT_THROW(forward_loss_grad(spec, p, std::vector<LabeledExample>{}), ContractError);
  EXPECT_THROW(forward_loss_grad(Mlp(3, 2, 2), p, wrong_label), ContractError);
}

TEST(ProximalStep, ScalarWorkedExample) {
  // grad 3, mu 1, w - anchor = 2: effective grad 5, lr 0.1 moves w by -0.5.
  std::vector<double> w{2.0};
  const std::vector<double> grad{3.0};
  const std::vector<double> anchor{0.0};
  proximal_sgd_step(w, grad, anchor, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(w[0], 1.5);
}

class LocalTrainTest : public ::testing::Test {
 protected:
  ModelSpec spec_ = Mlp(4, 5, 3);
  std::vector<LabeledExample> data_ =
      generate_synthetic(SyntheticSpec{3, 4, 7, 0.3, 99});  // 21 examples
  ModelParameters start_ = init_params(spec_, 5);
};

TEST_F(LocalTrainTest, ZeroMuIsPlainSgdBitwise) {
  const LocalTrainOptions opts{3, 4, 0.05, 0.0, 17};
  const auto trained = local_train(spec_, start_, data_, opts, init_params(spec_, 6));
  const auto reference = testing::plain_sgd(spec_, start_, data_, 3, 4, 0.05, 17);
  EXPECT_EQ(trained.params.values, reference.values);
}

TEST_F(LocalTrainTest, ProximalTermVanishesAtAnchorOnFirstStep) {
  // One full-batch step: w == anchor so the proximal term contributes nothing.
  const LocalTrainOptions plain{1, data_.size(), 0.05, 0.0, 3};
  LocalTrainOptions prox = plain;
  prox.prox_mu = 12.5;
  EXPECT_EQ(local_train(spec_, start_, data_, plain, start_).params.values,
            local_train(spec_, start_, data_, prox, start_).params.values);
}

TEST_F(LocalTrainTest, Deterministic) {
  const LocalTrainOptions opts{4, 3, 0.02, 0.1, 1234};
  const auto a = local_train(spec_, start_, data_, opts, start_);
  const auto b = local_train(spec_, start_, data_, opts, start_);
  EXPECT_EQ(a.params.values, b.params.values);
  EXPECT_EQ(a.final_loss, b.final_loss);
}

TEST_F(LocalTrainTest, ShortFinalBatchIsKept) {
  // 21 examples with batch 20: the second batch has one example. Dropping it
  // would equal training on the first 20 shuffled examples only.
  const LocalTrainOptions opts{1, 20, 0.1, 0.0, 8};
  const auto trained = local_train(spec_, start_, data_, opts, start_);
  const auto order = shuffled_indices(data_.size(), derive_seed(8, {0}));
  std::vector<LabeledExample> first20;
  for (std::size_t i = 0; i < 20; ++i) first20.push_back(data_[order[i]]);
  ModelParameters dropped = start_;
  const auto g = forward_loss_grad(spec_, dropped, first20).grad.values;
  for (std::size_t i = 0; i < g.size(); ++i) dropped.values[i] -= 0.1 * g[i];
  EXPECT_NE(trained.params.values, dropped.values);
  EXPECT_EQ(trained.params.values, testing::plain_sgd(spec_, start_, data_, 1, 20, 0.1, 8).values);
}

TEST_F(LocalTrainTest, RejectsBadArguments) {
  const LocalTrainOptions ok{1, 4, 0.1, 0.0, 0};
  EXPECT_THROW(local_train(spec_, start_, std::vector<LabeledExample>{}, ok, start_), ContractError);
  LocalTrainOptions bad = ok;
  bad.epochs = 0;
  EXPECT_THROW(local_train(spec_, start_, data_, bad, start_), ContractError);
  bad = ok;
  bad.batch_size = 0;
  EXPECT_THROW(local_train(spec_, start_, data_, bad, start_), ContractError);
  bad = ok;
  bad.prox_mu = -1.0;
  EXPECT_THROW(local_train(spec_, start_, data_, bad, start_), ContractError);
  EXPECT_THROW(local_train(spec_, start_, data_, ok, init_params(LogReg(4, 3), 0)), ContractError);
}

TEST(LocalTrain, LossDecreasesOnSeparableDataForAlmostAllSeeds) {
  int decreased = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ModelSpec spec = seed % 2 ? Mlp(5, 8, 4) : LogReg(5, 4);
    const auto data = generate_synthetic(SyntheticSpec{4, 5, 10, 0.05, seed});
    const auto start = init_params(spec, seed + 1000);
    const double initial = forward_loss_grad(spec, start, data).loss;
    const auto trained = local_train(spec, start, data, {10, 4, 0.05, 0.0, seed}, start);
    if (trained.final_loss < initial) ++decreased;
  }
  EXPECT_GE(decreased, 95);
}

TEST(LocalTrain, LargeMuPullsTowardAnchor) {
  const ModelSpec spec = Mlp(4, 6, 3);
  const auto data = generate_synthetic(SyntheticSpec{3, 4, 20, 0.2, 5});
  const auto anchor = init_params(spec, 1);
  auto distance = [&](const ModelParameters& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::pow(p.values[i] - anchor.values[i], 2);
    return std::sqrt(s);
  };
  const auto free = local_train(spec, anchor, data, {5, 4, 0.005, 0.0, 2}, anchor);
  const auto pulled = local_train(spec, anchor, data, {5, 4, 0.005, 100.0, 2}, anchor);
  EXPECT_LT(distance(pulled.params), distance(free.params));
}

TEST(Evaluate, PerfectModelScoresOne) {
  // Weight = 10 * identity separates one-hot features perfectly.
  const auto spec = LogReg(3, 3);
  ModelParameters p = init_params(spec, 0);
  std::fill(p.values.begin(), p.values.end(), 0.0);
  for (std::size_t c = 0; c < 3; ++c) p.values[c * 3 + c] = 10.0;
  const std::vector<LabeledExample> data{{{1, 0, 0}, 0}, {{0, 1, 0}, 1}, {{0, 0, 1}, 2}};
  EXPECT_EQ(evaluate_classifier(spec, p, data), 1.0);
}

TEST(Evaluate, ZeroParamsTieBreakToClassZero) {
  // Enumerated: every example ties, predicts class 0; half are labeled 0.
  const auto spec = LogReg(2, 2);
  ModelParameters zero = init_params(spec, 0);
  std::fill(zero.values.begin(), zero.values.end(), 0.0);
  const auto data = generate_synthetic(SyntheticSpec{2, 2, 10, 0.5, 4});
  EXPECT_EQ(evaluate_classifier(spec, zero, data), 0.5);
}

TEST(Evaluate, SingleWrongPredictionScoresZero) {
  const auto spec = LogReg(1, 2);
  ModelParameters p = init_params(spec, 0);
  p.values = {0.0, 0.0, 0.0, 1.0};  // bias favours class 1
  EXPECT_EQ(evaluate_classifier(spec, p, std::vector<LabeledExample>{{{3.0}, 0}}), 0.0);
}

TEST(ModelParameters, ValidateCatchesLayoutAndNonFinite) {
  ModelParameters p = init_params(LogReg(2, 2), 1);
  EXPECT_NO_THROW(p.validate());
  p.values[0] = std::nan("");
  EXPECT_THROW(p.validate(), ContractError);
  p.values[0] = 0.0;
  p.values.pop_back();
  EXPECT_THROW(p.validate(), ContractError);
}

}  // namespace
}  // namespace fedsim
