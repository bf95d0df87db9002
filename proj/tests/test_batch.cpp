#include <gtest/gtest.h>

#include <vector>

#include "support.hpp"
#include "tangent_kit/batch.hpp"

using namespace tangent_kit;
using tk_test::rel_err;

namespace {

PointSet random_points(int n, int d, std::uint64_t seed) {
  const Eigen::VectorXd r = tk_test::random_vector(n * d, seed);
  PointSet X(n, d);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a) X(i, a) = 0.5 * r[i * d + a];
  return X;
}

DerivativeMask mask_for(int d) {
  return d == 1 ? DerivativeMask::of({Component::value, Component::d0, Component::d00})
                : DerivativeMask::of({Component::d0, Component::d1, Component::d00, Component::d01, Component::d11});
}

std::vector<double> row(const PointSet& X, int i) {
  std::vector<double> p(static_cast<std::size_t>(X.cols()));
  for (int a = 0; a < X.cols(); ++a) p[static_cast<std::size_t>(a)] = X(i, a);
  return p;
}

}  // namespace

class BatchVsTape : public ::testing::TestWithParam<int> {};

TEST_P(BatchVsTape, JetsMatchPerPointPath) {
  const int d = GetParam();
  MlpParams net = tk_test::random_net({d, 11, 7, 1}, 4 + d, 0.8, Scaling::ntk);
  const PointSet X = random_points(23, d, 9);
  const BatchNetwork b(net, X, mask_for(d));
  double worst = 0.0;
  for (int i = 0; i < X.rows(); ++i) {
    auto [jet, tape] = forward_jet(net, row(X, i), mask_for(d).closure());
    const SpatialJet<double> bj = b.jet(i);
    for (Component c : b.components()) worst = std::max(worst, std::abs(bj[c] - jet[c]) / std::max(1.0, std::abs(jet[c])));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST_P(BatchVsTape, JacobianMatchesReverseSweep) {
  const int d = GetParam();
  MlpParams net = tk_test::random_net({d, 9, 6, 1}, 14 + d, 0.8);
  const PointSet X = random_points(15, d, 3);
  const BatchNetwork b(net, X, mask_for(d));
  const Eigen::MatrixXd sel = Eigen::MatrixXd::Random(b.blocks(), b.points());
  const Eigen::MatrixXd J = b.jacobian(sel);
  Eigen::MatrixXd ref(X.rows(), static_cast<Eigen::Index>(net.size()));
  for (int i = 0; i < X.rows(); ++i) {
    auto [jet, tape] = forward_jet(net, row(X, i), mask_for(d).closure());
    ComponentSelector s{};
    for (Component c : b.components()) s[index_of(c)] = sel(b.slot(c), i);
    ref.row(i) = reverse_sweep(tape, s).transpose();
  }
  EXPECT_LE(rel_err(J, ref), 1e-12);
  const Eigen::VectorXd g = b.gradient(sel);
  EXPECT_LE(rel_err(g, Eigen::VectorXd(J.colwise().sum().transpose())), 1e-12);
}

TEST_P(BatchVsTape, DirectionalMatchesFiniteDifferences) {
  const int d = GetParam();
  MlpParams net = tk_test::random_net({d, 10, 10, 1}, 30 + d, 0.8);
  const PointSet X = random_points(12, d, 8);
  const BatchNetwork b(net, X, mask_for(d));
  const Eigen::VectorXd v = tk_test::random_vector(net.theta.size(), 2).normalized();
  const DirectionalJets dj = b.directional(v);
  auto outputs = [&](double h) {
    const MlpParams q = with_theta(net, net.theta + h * v);
    const BatchNetwork bq(q, X, mask_for(d));
    Eigen::MatrixXd out(b.blocks(), b.points());
    for (Component c : b.components()) out.row(b.slot(c)) = bq.output(c).transpose();
    return out;
  };
  const double h = 1e-3;
  const Eigen::MatrixXd f0 = outputs(0.0), fp = outputs(h), fm = outputs(-h), fp2 = outputs(2 * h), fm2 = outputs(-2 * h);
  const Eigen::MatrixXd d1 = (8.0 * (fp - fm) - (fp2 - fm2)) / (12.0 * h);
  const Eigen::MatrixXd d2 = (16.0 * (fp + fm) - (fp2 + fm2) - 30.0 * f0) / (12.0 * h * h);
  EXPECT_LE(rel_err(dj.first, d1), 1e-8);
  EXPECT_LE(rel_err(dj.second, d2), 1e-6);
  EXPECT_THROW(b.directional(Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

INSTANTIATE_TEST_SUITE_P(Dims, BatchVsTape, ::testing::Values(1, 2));

TEST(Batch, EvaluateBatchIsBitIdenticalToEvaluate) {
  MlpParams net = init_gaussian({2, 33, 1}, 5);
  const PointSet X = random_points(40, 2, 1);
  const Eigen::VectorXd u = evaluate_batch(net, X);
  for (int i = 0; i < X.rows(); ++i) EXPECT_DOUBLE_EQ(u[i], evaluate(net, row(X, i)));
}

TEST(Batch, RejectsMismatchedInput) {
  MlpParams net = init_gaussian({1, 3, 1}, 5);
  EXPECT_THROW(BatchNetwork(net, random_points(4, 2, 1), DerivativeMask::value_only()), std::invalid_argument);
  EXPECT_THROW(BatchNetwork(net, random_points(4, 1, 1), DerivativeMask::of({Component::d11})), std::invalid_argument);
}

TEST(Batch, InactiveOutputIsZero) {
  MlpParams net = init_gaussian({2, 3, 1}, 5);
  const BatchNetwork b(net, random_points(4, 2, 1), DerivativeMask::of({Component::d0}));
  EXPECT_FALSE(b.has(Component::d11));
  EXPECT_TRUE(b.output(Component::d11).isZero(0.0));
  EXPECT_TRUE(b.has(Component::value));
}
