#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "support.hpp"
#include "tangent_kit/net.hpp"

using namespace tangent_kit;
using tk_test::central1;
using tk_test::central2_rich;

namespace {

DerivativeMask all2() {
  return DerivativeMask::of({Component::value, Component::d0, Component::d1, Component::d00, Component::d01, Component::d11});
}

}  // namespace

TEST(Layout, ParameterCountAndOffsets) {
  MlpParams p = make_params({2, 5, 3, 1}, Scaling::ntk);
  EXPECT_EQ(p.size(), std::size_t(2 * 5 + 5 + 5 * 3 + 3 + 3 + 1));
  ASSERT_EQ(p.layout.size(), 3u);
  EXPECT_EQ(p.layout[0].offset, 0u);
  EXPECT_EQ(p.layout[1].offset, 15u);
  EXPECT_EQ(p.layout[2].offset, 33u);
  EXPECT_EQ(p.layout[2].bias_offset(), 36u);
}

TEST(Layout, RejectsBadWidths) {
  EXPECT_THROW(make_params({1}, Scaling::ntk), std::invalid_argument);
  EXPECT_THROW(make_params({3, 4, 1}, Scaling::ntk), std::invalid_argument);
  EXPECT_THROW(make_params({1, 4, 2}, Scaling::ntk), std::invalid_argument);
  EXPECT_THROW(make_params({1, 0, 1}, Scaling::ntk), std::invalid_argument);
  EXPECT_THROW(parse_scaling("lecun"), std::invalid_argument);
}

TEST(Init, GaussianIsStandardNormalAndSeeded) {
  MlpParams a = init_gaussian({1, 2000, 1}, 42);
  MlpParams b = init_gaussian({1, 2000, 1}, 42);
  MlpParams c = init_gaussian({1, 2000, 1}, 43);
  EXPECT_TRUE((a.theta.array() == b.theta.array()).all());
  EXPECT_FALSE((a.theta.array() == c.theta.array()).all());
  const double mean = a.theta.mean();
  const double var = (a.theta.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(var, 1.0, 0.05);
  EXPECT_EQ(a.scaling, Scaling::ntk);
}

TEST(Init, XavierZeroBiasesAndVariance) {
  MlpParams p = init_xavier({2, 400, 400, 1}, 7);
  for (std::size_t l = 0; l < p.layout.size(); ++l) EXPECT_TRUE(p.bias(l).isZero(0.0));
  const auto W = p.weight(1);
  const double var = W.array().square().mean();
  EXPECT_NEAR(var, 2.0 / 800.0, 0.1 * 2.0 / 800.0);
}

TEST(Evaluate, MatchesHandComputedOneNeuron) {
  MlpParams p = make_params({1, 1, 1}, Scaling::standard);
  p.theta << 2.0, 0.5, 3.0, -1.0;  // W0, b0, W1, b1
  EXPECT_DOUBLE_EQ(evaluate(p, {0.25}), 3.0 * std::tanh(2.0 * 0.25 + 0.5) - 1.0);
  MlpParams q = p;
  q.scaling = Scaling::ntk;  // fan_in 1 everywhere: identical
  EXPECT_EQ(evaluate(q, {0.25}), evaluate(p, {0.25}));
}

TEST(Evaluate, NtkScalingDividesBySqrtFanIn) {
  MlpParams p = make_params({1, 4, 1}, Scaling::ntk);
  p.theta.setConstant(1.0);
  const double h = std::tanh(0.3 + 1.0);
  EXPECT_NEAR(evaluate(p, {0.3}), 4.0 * h / 2.0 + 1.0, 1e-15);
}

TEST(ForwardJet, ValueBitIdenticalToEvaluate) {
  for (int s = 0; s < 10; ++s) {
    MlpParams p = init_gaussian({2, 17, 9, 1}, 50 + s);
    const std::vector<double> pt{0.1 * s - 0.4, 0.37};
    auto [jet, tape] = forward_jet(p, pt, all2());
    EXPECT_EQ(jet.value, evaluate(p, pt));
  }
}

TEST(ForwardJet, DerivativesMatchFiniteDifferences) {
  MlpParams p = tk_test::random_net({2, 12, 8, 1}, 19, 0.9, Scaling::ntk);
  const double x = 0.31, t = -0.55;
  auto [jet, tape] = forward_jet(p, {x, t}, all2());
  auto fx = [&](double h) { return evaluate(p, {x + h, t}); };
  auto ft = [&](double h) { return evaluate(p, {x, t + h}); };
  auto fxt = [&](double a, double b) { return evaluate(p, {a, b}); };
  EXPECT_NEAR(jet.grad[0], central1(fx, 0.0), 1e-8);
  EXPECT_NEAR(jet.grad[1], central1(ft, 0.0), 1e-8);
  EXPECT_NEAR(jet.hess[0], central2_rich(fx, 0.0), 1e-7);
  EXPECT_NEAR(jet.hess[2], central2_rich(ft, 0.0), 1e-7);
  EXPECT_NEAR(jet.hess[1], tk_test::central_mixed(fxt, x, t), 1e-6);
}

TEST(ForwardJet, MaskZeroesInactiveComponents) {
  MlpParams p = tk_test::random_net({2, 6, 1}, 1);
  auto [full, t1] = forward_jet(p, {0.2, 0.4}, all2());
  auto [part, t2] = forward_jet(p, {0.2, 0.4}, DerivativeMask::of({Component::d0}));
  EXPECT_EQ(part.value, 0.0);  // value is outside the mask too
  EXPECT_EQ(part.grad[0], full.grad[0]);
  EXPECT_EQ(part.grad[1], 0.0);
  EXPECT_EQ(part.hess[0], 0.0);
  EXPECT_EQ(part.hess[2], 0.0);
  EXPECT_THROW(forward_jet(p, {0.2}, DerivativeMask::value_only()), std::invalid_argument);
  MlpParams q = tk_test::random_net({1, 6, 1}, 1);
  EXPECT_THROW(forward_jet(q, {0.2}, DerivativeMask::of({Component::d1})), std::invalid_argument);
}

TEST(Fourier, EmbeddingShapesAndDerivatives) {
  const FourierEmbedding e = make_fourier_embedding(2, 5, 1.5, 9);
  EXPECT_EQ(e.out_width(), 10);
  const std::vector<double> pt{0.3, 0.7};
  const Eigen::VectorXd z = embed(e, pt);
  ASSERT_EQ(z.size(), 10);
  for (int r = 0; r < 5; ++r) {
    const double arg = 2.0 * std::numbers::pi * (e.B(r, 0) * pt[0] + e.B(r, 1) * pt[1]);
    EXPECT_NEAR(z[r], std::cos(arg), 1e-14);
    EXPECT_NEAR(z[5 + r], std::sin(arg), 1e-14);
  }
  EXPECT_THROW(make_fourier_embedding(3, 5, 1.0, 0), std::invalid_argument);
  EXPECT_THROW(make_fourier_embedding(1, 5, 0.0, 0), std::invalid_argument);

  MlpParams p = init_gaussian({2, 8, 1}, 3, e);
  EXPECT_EQ(p.layout[0].cols, 10);
  auto [jet, tape] = forward_jet(p, pt, all2());
  EXPECT_EQ(jet.value, evaluate(p, pt));
  auto fx = [&](double h) { return evaluate(p, {pt[0] + h, pt[1]}); };
  EXPECT_NEAR(jet.grad[0], central1(fx, 0.0), 1e-7 * std::max(1.0, std::abs(jet.grad[0])));
  EXPECT_NEAR(jet.hess[0], central2_rich(fx, 0.0), 1e-6 * std::max(1.0, std::abs(jet.hess[0])));
}

TEST(WithTheta, ReplacesParametersOnly) {
  MlpParams p = init_gaussian({1, 4, 1}, 3);
  Eigen::VectorXd th = Eigen::VectorXd::Zero(p.theta.size());
  MlpParams q = with_theta(p, th);
  EXPECT_EQ(evaluate(q, {0.5}), 0.0);
  EXPECT_EQ(q.layout.size(), p.layout.size());
  EXPECT_THROW(with_theta(p, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}
