#include "hbf/encoding.hpp"
#include "hbf/network.hpp"

#include "test_support.hpp"

#include <cmath>

namespace hbf {
namespace {

Tensor3 random_tensor(InputShape shape, std::uint64_t seed) {
  Stream rng(seed);
  RVector d(shape.size());
  for (Eigen::Index k = 0; k < d.size(); ++k) d(k) = rng.normal();
  return Tensor3(shape, d);
}

// conv-pool-conv on 4x4, then dense with dropout and the regression output.
NetworkParams tiny_network(std::uint64_t seed, double dropout = 0.3) {
  const std::vector<LayerSpec> layers{
      {LayerKind::kConv, 3, false, 0.0},
      {LayerKind::kPool, 0, false, 0.0},
      {LayerKind::kConv, 2, false, 0.0},
      {LayerKind::kFullyConnected, 5, false, 0.0},
      {LayerKind::kDropout, 0, false, dropout},
      {LayerKind::kOutputRegression, 3, false, 0.0},
  };
  NetworkParams p = make_network(NetRole::kCustom, {4, 4, 3}, layers, seed);
  // Nonzero biases and standardization exercise every parameter path.
  Stream rng(derive_seed(seed, 7));
  for (Eigen::Index k = 0; k < p.params.size(); ++k) p.params(k) += 0.05 * rng.normal();
  p.input_mean = RVector::Constant(3, 0.1);
  p.input_std = RVector::Constant(3, 1.3);
  return p;
}

double half_sq_loss(const NetworkParams& p, const Tensor3& x, const RVector& t, const ForwardMode& mode) {
  return 0.5 * (forward(p, x, mode) - t).squaredNorm();
}

RVector finite_difference(NetworkParams p, const Tensor3& x, const RVector& t, const ForwardMode& mode) {
  RVector g(p.params.size());
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double keep = p.params(k);
    p.params(k) = keep + h;
    const double up = half_sq_loss(p, x, t, mode);
    p.params(k) = keep - h;
    const double down = half_sq_loss(p, x, t, mode);
    p.params(k) = keep;
    g(k) = (up - down) / (2 * h);
  }
  return g;
}

TEST(Network, ZeroParametersGiveZeroOutput) {
  NetworkParams p = tiny_network(1);
  p.params.setZero();
  EXPECT_EQ(forward(p, random_tensor(p.input, 2)).norm(), 0.0);
}

TEST(Network, InferenceIsDeterministic) {
  const NetworkParams p = tiny_network(1);
  const Tensor3 x = random_tensor(p.input, 3);
  EXPECT_TRUE(forward(p, x) == forward(p, x));
  const ForwardMode train{true, 9};
  EXPECT_TRUE(forward(p, x, train) == forward(p, x, train));
}

TEST(Network, RolePresetsMatchLabelSizes) {
  struct Case {
    NetRole role;
    InputShape in;
    int out;
  };
  for (const Case& c : {Case{NetRole::kCovNet, {16, 16, 3}, beamformer_label_size(16, 2, 2)},
                        Case{NetRole::kChannelNet, {4, 16, 3}, channel_label_size(4, 16)},
                        Case{NetRole::kBfNet, {4, 16, 3}, beamformer_label_size(4, 2, 2)}}) {
    const NetworkParams p = make_network(c.role, c.in, c.out, default_architecture(c.role, true), 1);
    EXPECT_EQ(p.output_size(), c.out);
    EXPECT_EQ(forward(p, random_tensor(c.in, 2)).size(), c.out);
  }
}

TEST(Network, PaperPresetsFollowTheRoleStructure) {
  const auto count = [](const std::vector<LayerSpec>& ls, LayerKind k) {
    return std::count_if(ls.begin(), ls.end(), [k](const LayerSpec& s) { return s.kind == k; });
  };
  const auto cov = role_layers(NetRole::kCovNet, 10, default_architecture(NetRole::kCovNet, false));
  EXPECT_EQ(count(cov, LayerKind::kConv), 3);
  EXPECT_EQ(count(cov, LayerKind::kPool), 2);
  EXPECT_EQ(count(cov, LayerKind::kFullyConnected), 2);
  EXPECT_EQ(cov.front().size, 256);
  const auto chan = role_layers(NetRole::kChannelNet, 10, default_architecture(NetRole::kChannelNet, false));
  EXPECT_EQ(count(chan, LayerKind::kPool), 0);
  EXPECT_EQ(count(chan, LayerKind::kFullyConnected), 3);
  EXPECT_EQ(chan.front().size, 128);
  const auto bf = role_layers(NetRole::kBfNet, 10, default_architecture(NetRole::kBfNet, false));
  EXPECT_EQ(count(bf, LayerKind::kPool), 2);
  EXPECT_EQ(count(bf, LayerKind::kDropout), 2);
  for (const LayerSpec& s : bf) {
    if (s.kind == LayerKind::kDropout) EXPECT_EQ(s.dropout_p, 0.5);
  }
}

TEST(Network, RejectsMismatchedInput) {
  const NetworkParams p = tiny_network(1);
  EXPECT_THROW(forward(p, random_tensor({4, 5, 3}, 1)), std::invalid_argument);
  EXPECT_THROW(backward(p, random_tensor(p.input, 1), RVector::Zero(2)), std::invalid_argument);
}

TEST(Backward, ZeroAtExactFit) {
  const NetworkParams p = tiny_network(2);
  const Tensor3 x = random_tensor(p.input, 3);
  const GradientSet g = backward(p, x, forward(p, x));
  EXPECT_EQ(g.loss, 0.0);
  EXPECT_EQ(g.grad.norm(), 0.0);
}

TEST(Backward, MatchesFiniteDifferencesInference) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const NetworkParams p = tiny_network(10 + s);
    const Tensor3 x = random_tensor(p.input, 20 + s);
    const RVector t = RVector::Constant(3, 0.7);
    const GradientSet g = backward(p, x, t);
    const RVector fd = finite_difference(p, x, t, {});
    EXPECT_LT((g.grad - fd).norm() / fd.norm(), 1e-4);
  }
}

TEST(Backward, MatchesFiniteDifferencesWithDropout) {
  const NetworkParams p = tiny_network(4, 0.5);
  const Tensor3 x = random_tensor(p.input, 5);
  const RVector t = RVector::Constant(3, -0.2);
  const ForwardMode mode{true, 77};
  const GradientSet g = backward(p, x, t, mode);
  const RVector fd = finite_difference(p, x, t, mode);
  EXPECT_LT((g.grad - fd).norm() / fd.norm(), 1e-4);
}

// Each layer kind alone in front of the regression output.
TEST(Backward, EveryLayerKindMatchesFiniteDifferences) {
  const std::vector<std::vector<LayerSpec>> stacks{
      {{LayerKind::kConv, 2, false, 0.0}, {LayerKind::kOutputRegression, 2, false, 0.0}},
      {{LayerKind::kPool, 0, false, 0.0}, {LayerKind::kOutputRegression, 2, false, 0.0}},
      {{LayerKind::kFullyConnected, 4, false, 0.0}, {LayerKind::kOutputRegression, 2, false, 0.0}},
      {{LayerKind::kDropout, 0, false, 0.2}, {LayerKind::kOutputRegression, 2, false, 0.0}},
      {{LayerKind::kOutputRegression, 2, false, 0.0}},
  };
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    NetworkParams p = make_network(NetRole::kCustom, {4, 4, 3}, stacks[i], 30 + i);
    Stream rng(40 + i);
    for (Eigen::Index k = 0; k < p.params.size(); ++k) p.params(k) += 0.05 * rng.normal();
    const Tensor3 x = random_tensor(p.input, 50 + i);
    const RVector t = RVector::Constant(2, 0.3);
    const ForwardMode mode{true, 5};
    const RVector fd = finite_difference(p, x, t, mode);
    EXPECT_LT((backward(p, x, t, mode).grad - fd).norm() / fd.norm(), 1e-4) << "stack " << i;
  }
}

TEST(Backward, FrozenBlocksAreExactlyZero) {
  NetworkParams p = tiny_network(6);
  freeze_conv_layers(p);
  const Network net(p);
  const GradientSet g = backward(p, random_tensor(p.input, 7), RVector::Constant(3, 1.0));
  for (const LayerPlan& lp : net.plan()) {
    if (lp.kind != LayerKind::kConv) continue;
    EXPECT_TRUE(lp.frozen);
    EXPECT_EQ(g.grad.segment(lp.weight_offset, lp.weight_count).norm(), 0.0);
    EXPECT_EQ(g.grad.segment(lp.bias_offset, lp.bias_count).norm(), 0.0);
  }
  EXPECT_GT(g.grad.norm(), 0.0);
}

TEST(Network, BatchedInferenceMatchesSingleSamples) {
  const NetworkParams p = tiny_network(8);
  const Network net(p);
  RMatrix raw(p.input.size(), 4);
  for (int c = 0; c < 4; ++c) raw.col(c) = random_tensor(p.input, 60 + c).data();
  const RMatrix batch = net.infer(net.prepare(raw));
  for (int c = 0; c < 4; ++c) {
    EXPECT_LT((batch.col(c) - forward(p, Tensor3(p.input, raw.col(c)))).norm(), 1e-12);
  }
}

TEST(Network, HeInitIsSeededAndBiasFree) {
  const auto layers = role_layers(NetRole::kBfNet, 8, default_architecture(NetRole::kBfNet, true));
  const NetworkParams a = make_network(NetRole::kBfNet, {4, 16, 3}, layers, 3);
  const NetworkParams b = make_network(NetRole::kBfNet, {4, 16, 3}, layers, 3);
  const NetworkParams c = make_network(NetRole::kBfNet, {4, 16, 3}, layers, 4);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_FALSE(a.params == c.params);
  for (const LayerPlan& lp : Network(a).plan()) {
    if (lp.bias_count > 0) EXPECT_EQ(a.params.segment(lp.bias_offset, lp.bias_count).norm(), 0.0);
    if (lp.weight_count > 0) {
      const double fan_in = static_cast<double>(lp.weight_count) / static_cast<double>(lp.bias_count);
      const double limit = std::sqrt(6.0 / fan_in);
      EXPECT_LE(a.params.segment(lp.weight_offset, lp.weight_count).cwiseAbs().maxCoeff(), limit);
    }
  }
}

TEST(Network, RoleNamesRoundTrip) {
  for (NetRole r : {NetRole::kCovNet, NetRole::kChannelNet, NetRole::kBfNet, NetRole::kCustom}) {
    EXPECT_EQ(net_role_from_string(to_string(r)), r);
  }
  EXPECT_THROW(net_role_from_string("resnet"), std::invalid_argument);
}

TEST(Network, RejectsMalformedStacks) {
  EXPECT_THROW(plan_layers({4, 4, 3}, {{LayerKind::kConv, 2, false, 0.0}}), std::invalid_argument);
  EXPECT_THROW(plan_layers({4, 4, 3}, {{LayerKind::kFullyConnected, 2, false, 0.0},
                                       {LayerKind::kConv, 2, false, 0.0},
                                       {LayerKind::kOutputRegression, 1, false, 0.0}}),
               std::invalid_argument);
  EXPECT_THROW(plan_layers({4, 4, 3}, {{LayerKind::kDropout, 0, false, 1.0},
                                       {LayerKind::kOutputRegression, 1, false, 0.0}}),
               std::invalid_argument);
}

}  // namespace
}  // namespace hbf
