// Copyright 2026 The Gradleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <gtest/gtest.h>
#include "gradleak/errors.h"
#include "gradleak/ndcore/adam.h"
#include "gradleak/ndcore/graph.h"
#include "gradleak/ndcore/mlp.h"
#include "gradleak/ndcore/rng.h"
#include "gradleak/ndcore/tensor.h"
#include "testing/finite_difference.h"

namespace gradleak::ndcore {
namespace {

using ::gradleak::testing::CentralDifference;
using ::gradleak::testing::MaxRelativeError;

Tensor RandomTensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.Normal();
  return t;
}

TEST(TensorTest, RejectsInconsistentData) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor({0, 2}), DimensionError);
  EXPECT_EQ(Tensor({3, 4}).size(), 12u);
}

TEST(MlpForwardTest, IdentityWeightsPassInputThrough) {
  Mlp mlp({{2, 2}, Activation::kRelu, Activation::kIdentity},
          {Tensor({2, 2}, {1, 0, 0, 1}), Tensor({1, 2})});
  const Tensor out = mlp.Forward(Tensor::Row({1, 2}));
  EXPECT_EQ(out, Tensor::Row({1, 2}));
}

TEST(MlpForwardTest, ZeroWeightsReturnBias) {
  Mlp mlp = Mlp::Zeros({{3, 4, 2}, Activation::kRelu, Activation::kIdentity});
  mlp.bias(1) = Tensor::Row({0.5, -1.25});
  Rng rng(7);
  const Tensor out = mlp.Forward(RandomTensor({5, 3}, rng));
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(out(r, 0), 0.5);
    EXPECT_EQ(out(r, 1), -1.25);
  }
}

TEST(MlpForwardTest, MatchesHandRolledLoops) {
  Rng rng(2024);
  Mlp mlp = Mlp::Initialized({{2, 3, 1}, Activation::kRelu,
                              Activation::kIdentity},
                             rng);
  mlp.bias(0) = Tensor::Row({0.1, -0.2, 0.3});
  mlp.bias(1) = Tensor::Row({-0.05});
  const Tensor input = RandomTensor({4, 2}, rng);
  const Tensor out = mlp.Forward(input);

  for (std::size_t n = 0; n < 4; ++n) {
    double hidden[3];
    for (int j = 0; j < 3; ++j) {
      double z = mlp.bias(0)[j];
      for (int i = 0; i < 2; ++i) z += input(n, i) * mlp.weight(0)(i, j);
      hidden[j] = z > 0 ? z : 0.0;
    }
    double y = mlp.bias(1)[0];
    for (int j = 0; j < 3; ++j) y += hidden[j] * mlp.weight(1)(j, 0);
    EXPECT_NEAR(out(n, 0), y, 1e-12);
  }
}

TEST(MlpForwardTest, ShapeMismatchNamesLayer) {
  Mlp mlp = Mlp::Zeros({{3, 4, 2}, Activation::kRelu, Activation::kIdentity});
  try {
    mlp.Forward(Tensor({2, 5}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
}

TEST(MlpTest, ParameterCountFormula) {
  Rng rng(1);
  Mlp mlp = Mlp::Initialized({{30, 200, 200, 5}}, rng);
  EXPECT_EQ(mlp.ParameterCount(), 31u * 200 + 201u * 200 + 201u * 5);
  EXPECT_EQ(mlp.Flatten().size(), mlp.ParameterCount());
  for (std::size_t l = 0; l < mlp.num_layers(); ++l) {
    EXPECT_EQ(mlp.weight(l).shape(),
              (Shape{mlp.spec().layer_dims[l], mlp.spec().layer_dims[l + 1]}));
  }
}

TEST(MlpTest, GlorotInitStaysInBounds) {
  Rng rng(3);
  Mlp mlp = Mlp::Initialized({{10, 6}}, rng);
  const double limit = std::sqrt(6.0 / 16.0);
  for (double w : mlp.weight(0).values()) {
    EXPECT_LE(std::abs(w), limit);
  }
  for (double b : mlp.bias(0).values()) EXPECT_EQ(b, 0.0);
}

TEST(BackwardTest, SquareAtThree) {
  Graph g;
  Var x = g.Leaf(Tensor::Scalar(3.0));
  g.Backward(Square(x));
  EXPECT_DOUBLE_EQ(g.grad(x).item(), 6.0);
}

TEST(BackwardTest, SigmoidAtZero) {
  Graph g;
  Var x = g.Leaf(Tensor::Scalar(0.0));
  g.Backward(Sigmoid(x));
  EXPECT_DOUBLE_EQ(g.grad(x).item(), 0.25);
}

TEST(BackwardTest, NonScalarOutputIsContractError) {
  Graph g;
  Var x = g.Leaf(Tensor::Row({1, 2}));
  EXPECT_THROW(g.Backward(Square(x)), ContractError);
}

TEST(BackwardTest, UnusedLeafHasZeroGradient) {
  Graph g;
  Var x = g.Leaf(Tensor::Scalar(2.0));
  Var unused = g.Leaf(Tensor::Row({1, 2, 3}));
  g.Backward(Square(x));
  EXPECT_EQ(g.grad(unused), Tensor::Row({0, 0, 0}));
}

TEST(BackwardTest, NonFiniteResultIsNumericError) {
  Graph g;
  Var x = g.Leaf(Tensor::Scalar(-1.0));
  EXPECT_THROW(Log(x), NumericError);
}

// Checks one op-composite against central differences over its input.
void ExpectMatchesFiniteDifferences(
    const std::function<Var(Var)>& build, Tensor input, double tol = 1e-6) {
  Graph g;
  Var x = g.Leaf(input);
  g.Backward(build(x));
  const Tensor analytic = g.grad(x);
  const Shape shape = input.shape();
  auto f = [&](const std::vector<double>& flat) {
    Graph h;
    return build(h.Leaf(Tensor(shape, flat))).value().item();
  };
  const std::vector<double> numeric = CentralDifference(f, input.vector());
  EXPECT_LT(MaxRelativeError(analytic.vector(), numeric), tol);
}

TEST(OpGradientTest, ElementwiseAndReductions) {
  Rng rng(11);
  const Tensor weights = RandomTensor({3, 4}, rng);
  auto weighted_sum = [&](Var v) {
    Var w = v.graph()->Constant(weights);
    return Sum(Mul(v, w));
  };
  const Tensor x = RandomTensor({3, 4}, rng);
  ExpectMatchesFiniteDifferences([&](Var v) { return weighted_sum(Tanh(v)); },
                                 x);
  ExpectMatchesFiniteDifferences(
      [&](Var v) { return weighted_sum(Sigmoid(v)); }, x);
  ExpectMatchesFiniteDifferences([&](Var v) { return weighted_sum(Exp(v)); },
                                 x);
  ExpectMatchesFiniteDifferences(
      [&](Var v) { return weighted_sum(Softplus(v)); }, x);
  ExpectMatchesFiniteDifferences(
      [&](Var v) { return weighted_sum(SoftmaxRows(v)); }, x);
  ExpectMatchesFiniteDifferences([](Var v) { return LogMeanExp(v); }, x);
  ExpectMatchesFiniteDifferences(
      [](Var v) { return Sum(Square(ColSum(v))); }, x);
  ExpectMatchesFiniteDifferences(
      [](Var v) { return Sum(Square(RowSum(v))); }, x);
  ExpectMatchesFiniteDifferences(
      [&](Var v) { return weighted_sum(Transpose(Transpose(Square(v)))); }, x);
}

TEST(OpGradientTest, Restructuring) {
  Rng rng(12);
  const Tensor x = RandomTensor({2, 3}, rng);
  const Tensor w6 = RandomTensor({6, 3}, rng);
  const Tensor w12 = RandomTensor({2, 9}, rng);
  ExpectMatchesFiniteDifferences(
      [&](Var v) {
        return Sum(Mul(Square(RepeatRows(v, 3)), v.graph()->Constant(w6)));
      },
      x);
  ExpectMatchesFiniteDifferences(
      [&](Var v) {
        Var parts[] = {v, Square(v), Scale(v, -2.0)};
        return Sum(Mul(ConcatCols(parts), v.graph()->Constant(w12)));
      },
      x);
  const Tensor w62 = RandomTensor({6, 2}, rng);
  ExpectMatchesFiniteDifferences(
      [&](Var v) {
        Var parts[] = {Reshape(v, {3, 2}), Square(Reshape(v, {3, 2}))};
        return Sum(Mul(ConcatRows(parts), v.graph()->Constant(w62)));
      },
      x);
  const Tensor w13 = RandomTensor({1, 3}, rng);
  ExpectMatchesFiniteDifferences(
      [&](Var v) {
        return Sum(Mul(Square(SliceRows(v, 1, 1)), v.graph()->Constant(w13)));
      },
      x);
  Graph g;
  EXPECT_THROW(SliceRows(g.Constant(x), 1, 2), DimensionError);
}

TEST(OpGradientTest, BroadcastAddAndMatMul) {
  Rng rng(13);
  const Tensor a = RandomTensor({4, 3}, rng);
  const Tensor b = RandomTensor({3, 2}, rng);
  const Tensor bias = RandomTensor({1, 2}, rng);
  // Gradient with respect to the broadcast bias.
  ExpectMatchesFiniteDifferences(
      [&](Var v) {
        Graph& g = *v.graph();
        return Sum(Square(Add(MatMul(g.Constant(a), g.Constant(b)), v)));
      },
      bias);
  ExpectMatchesFiniteDifferences(
      [&](Var v) {
        Graph& g = *v.graph();
        return Sum(Square(Sub(MatMul(v, g.Constant(b)), g.Constant(bias))));
      },
      a);
  ExpectMatchesFiniteDifferences(
      [&](Var v) {
        Graph& g = *v.graph();
        return Sum(Square(Sub(MatMul(g.Constant(a), g.Constant(b)), v)));
      },
      bias);
}

// Loss used for MLP gradient checks: sum of outputs times fixed weights.
double MlpLoss(Mlp mlp, const std::vector<double>& flat, const Tensor& input,
               const Tensor& mix) {
  mlp.Unflatten(flat);
  const Tensor out = mlp.Forward(input);
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) total += out[i] * mix[i];
  return total;
}

std::vector<double> MlpAnalyticGrad(const Mlp& mlp, const Tensor& input,
                                    const Tensor& mix) {
  Graph g;
  std::vector<Var> bound = mlp.Bind(g);
  Var out = mlp.Forward(g.Constant(input), bound);
  g.Backward(Sum(Mul(out, g.Constant(mix))));
  std::vector<double> flat;
  for (Var p : bound) {
    const Tensor grad = g.grad(p);
    flat.insert(flat.end(), grad.values().begin(), grad.values().end());
  }
  return flat;
}

TEST(MlpGradientTest, FiveFourOneMatchesFiniteDifferences) {
  Rng rng(99);
  Mlp mlp = Mlp::Initialized({{5, 4, 1}, Activation::kRelu,
                              Activation::kIdentity},
                             rng);
  for (Tensor& b : {std::ref(mlp.bias(0)), std::ref(mlp.bias(1))}) {
    for (double& v : b.values()) v = 0.1 * rng.Normal();
  }
  const Tensor input = RandomTensor({6, 5}, rng);
  const Tensor mix = RandomTensor({6, 1}, rng);
  const std::vector<double> analytic = MlpAnalyticGrad(mlp, input, mix);
  const std::vector<double> numeric = CentralDifference(
      [&](const std::vector<double>& flat) {
        return MlpLoss(mlp, flat, input, mix);
      },
      mlp.Flatten());
  EXPECT_LT(MaxRelativeError(analytic, numeric), 1e-4);
}

TEST(MlpGradientTest, RandomNetworksAllActivations) {
  Rng rng(5150);
  const Activation kinds[] = {Activation::kIdentity, Activation::kRelu,
                              Activation::kSigmoid, Activation::kTanh};
  for (int trial = 0; trial < 100; ++trial) {
    MlpSpec spec;
    const std::size_t depth = 2 + rng.Index(3);
    for (std::size_t l = 0; l < depth; ++l) {
      spec.layer_dims.push_back(1 + rng.Index(10));
    }
    spec.hidden = kinds[rng.Index(4)];
    spec.output = kinds[rng.Index(4)];
    Mlp mlp = Mlp::Initialized(spec, rng);
    // Zero biases put relu units that see an all-zero row exactly on the kink.
    for (std::size_t l = 0; l < mlp.num_layers(); ++l) {
      for (double& v : mlp.bias(l).values()) v = 0.1 * rng.Normal();
    }
    const Tensor input = RandomTensor({1 + rng.Index(4), spec.layer_dims[0]},
                                      rng);
    const Tensor mix =
        RandomTensor({input.rows(), spec.layer_dims.back()}, rng);
    const std::vector<double> analytic = MlpAnalyticGrad(mlp, input, mix);
    const std::vector<double> numeric = CentralDifference(
        [&](const std::vector<double>& flat) {
          return MlpLoss(mlp, flat, input, mix);
        },
        mlp.Flatten());
    EXPECT_LT(MaxRelativeError(analytic, numeric), 1e-4)
        << "trial " << trial << " hidden=" << ActivationName(spec.hidden)
        << " output=" << ActivationName(spec.output);
  }
}

TEST(BackwardTest, LinearInCombinedOutputs) {
  Rng rng(21);
  const Tensor x0 = RandomTensor({3, 3}, rng);
  const double a = 1.7, b = -0.6;
  auto f = [](Var v) { return Sum(Tanh(MatMul(v, v))); };
  auto h = [](Var v) { return LogMeanExp(Square(v)); };

  Graph g1;
  Var x1 = g1.Leaf(x0);
  g1.Backward(f(x1));
  const Tensor df = g1.grad(x1);
  Graph g2;
  Var x2 = g2.Leaf(x0);
  g2.Backward(h(x2));
  const Tensor dh = g2.grad(x2);
  Graph g3;
  Var x3 = g3.Leaf(x0);
  g3.Backward(Add(Scale(f(x3), a), Scale(h(x3), b)));
  const Tensor combined = g3.grad(x3);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    EXPECT_NEAR(combined[i], a * df[i] + b * dh[i], 1e-12);
  }
}

TEST(AdamTest, ZeroGradientLeavesParamsAndMoments) {
  std::vector<Tensor> params = {Tensor::Row({1.0, -2.0})};
  AdamState adam({.learning_rate = 0.1}, params);
  const std::vector<Tensor> grads = {Tensor::Row({0.0, 0.0})};
  adam.Step(params, grads, Direction::kDescent);
  EXPECT_EQ(params[0], Tensor::Row({1.0, -2.0}));
  EXPECT_EQ(adam.first_moments()[0], Tensor::Row({0.0, 0.0}));
  EXPECT_EQ(adam.second_moments()[0], Tensor::Row({0.0, 0.0}));
  EXPECT_EQ(adam.step_count(), 1);
}

TEST(AdamTest, FirstStepHasMagnitudeLearningRate) {
  std::vector<Tensor> params = {Tensor::Scalar(0.0)};
  AdamState adam({.learning_rate = 0.1, .beta1 = 0.9, .beta2 = 0.999},
                 params);
  adam.Step(params, std::vector<Tensor>{Tensor::Scalar(1.0)},
            Direction::kDescent);
  // m_hat = v_hat = 1 at t = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(params[0].item(), -0.1 / (1.0 + 1e-8), 1e-15);

  std::vector<Tensor> ascent = {Tensor::Scalar(0.0)};
  AdamState up({.learning_rate = 0.1}, ascent);
  up.Step(ascent, std::vector<Tensor>{Tensor::Scalar(1.0)},
          Direction::kAscent);
  EXPECT_NEAR(ascent[0].item(), 0.1, 1e-6);
}

TEST(AdamTest, TwoStepsMatchScalarReference) {
  const double lr = 0.05, b1 = 0.8, b2 = 0.99, eps = 1e-8;
  const double g[2][3] = {{0.3, -1.2, 2.0}, {0.3, -1.2, 2.0}};
  std::vector<Tensor> params = {Tensor::Row({1.0, 0.5, -0.25})};
  AdamState adam({lr, b1, b2, eps}, params);
  for (const auto& step : g) {
    adam.Step(params,
              std::vector<Tensor>{Tensor::Row({step[0], step[1], step[2]})},
              Direction::kDescent);
  }
  const double init[3] = {1.0, 0.5, -0.25};
  for (int k = 0; k < 3; ++k) {
    double p = init[k], m = 0, v = 0;
    for (int t = 1; t <= 2; ++t) {
      m = b1 * m + (1 - b1) * g[t - 1][k];
      v = b2 * v + (1 - b2) * g[t - 1][k] * g[t - 1][k];
      const double mh = m / (1 - std::pow(b1, t));
      const double vh = v / (1 - std::pow(b2, t));
      p -= lr * mh / (std::sqrt(vh) + eps);
    }
    EXPECT_NEAR(params[0][k], p, 1e-12);
  }
  EXPECT_EQ(adam.step_count(), 2);
}

TEST(AdamTest, NanGradientAbortsUpdate) {
  std::vector<Tensor> params = {Tensor::Row({1.0, 2.0})};
  AdamState adam({.learning_rate = 0.1}, params);
  const std::vector<Tensor> grads = {
      Tensor::Row({1.0, std::numeric_limits<double>::quiet_NaN()})};
  EXPECT_THROW(adam.Step(params, grads, Direction::kDescent), NumericError);
  EXPECT_EQ(params[0], Tensor::Row({1.0, 2.0}));
  EXPECT_EQ(adam.step_count(), 0);
}

std::vector<double> TrainTrajectory(std::uint64_t seed) {
  Rng rng(seed);
  Mlp mlp = Mlp::Initialized({{4, 8, 1}, Activation::kTanh}, rng);
  AdamState adam({.learning_rate = 0.01}, mlp.parameters());
  const Tensor x = RandomTensor({16, 4}, rng);
  const Tensor y = RandomTensor({16, 1}, rng);
  for (int step = 0; step < 25; ++step) {
    Graph g;
    std::vector<Var> bound = mlp.Bind(g);
    Var loss = Mean(Square(Sub(mlp.Forward(g.Constant(x), bound),
                               g.Constant(y))));
    g.Backward(loss);
    std::vector<Tensor> grads;
    for (Var p : bound) grads.push_back(g.grad(p));
    adam.Step(mlp.parameters(), grads, Direction::kDescent);
  }
  return mlp.Flatten();
}

TEST(DeterminismTest, SameSeedGivesBitIdenticalTrajectory) {
  EXPECT_EQ(TrainTrajectory(42), TrainTrajectory(42));
  EXPECT_NE(TrainTrajectory(42), TrainTrajectory(43));
}

TEST(RngTest, SplitStreamsAreIndependentOfParentUse) {
  Rng a(10);
  Rng b(10);
  b.Normal();
  EXPECT_EQ(a.Split(3).Normal(), b.Split(3).Normal());
  EXPECT_NE(a.Split(3).Normal(), a.Split(4).Normal());
}

}  // namespace
}  // namespace gradleak::ndcore
