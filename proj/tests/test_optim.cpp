#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support.hpp"
#include "tangent_kit/optim.hpp"
#include "tangent_kit/problem.hpp"

using namespace tangent_kit;
using tk_test::rel_err;

namespace {

Eigen::MatrixXd random_matrix(int r, int c, std::uint64_t seed) {
  return Eigen::Map<const Eigen::MatrixXd>(tk_test::random_vector(r * c, seed).data(), r, c);
}

// Smooth nonlinear least squares with known minimum: rho_i = exp(a_i . theta) - y_i.
class ExpFit {
 public:
  ExpFit(Eigen::MatrixXd A, Eigen::VectorXd y) : A_(std::move(A)), y_(std::move(y)) {}
  std::size_t size() const { return static_cast<std::size_t>(A_.cols()); }
  int rows() const { return static_cast<int>(A_.rows()); }
  Eigen::VectorXd residuals(const Eigen::VectorXd& th) const { return (A_ * th).array().exp().matrix() - y_; }
  Linearization linearize(const Eigen::VectorXd& th) const {
    const Eigen::VectorXd e = (A_ * th).array().exp();
    return {e - y_, e.asDiagonal() * A_};
  }
  std::pair<double, Eigen::VectorXd> loss_and_gradient(const Eigen::VectorXd& th) const {
    const Linearization l = linearize(th);
    return {0.5 * l.rho.squaredNorm(), l.J.transpose() * l.rho};
  }
  Eigen::VectorXd second_directional(const Eigen::VectorXd& th, const Eigen::VectorXd& v) const {
    const Eigen::VectorXd av = A_ * v;
    return ((A_ * th).array().exp() * av.array().square()).matrix();
  }
  LossTerms terms(const Eigen::VectorXd& rho) const {
    LossTerms t;
    t.residual = t.total = 0.5 * rho.squaredNorm();
    return t;
  }
  double relative_l2(const Eigen::VectorXd&) const { return kNaN; }

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd y_;
};

PinnProblem toy_problem(int width, std::uint64_t seed, const char* pde = "poisson_toy_linear", int nr = 24) {
  const ResidualSpec s = make_spec(pde);
  return PinnProblem(init_gaussian({s.d_in, width, 1}, seed), s, sample(s, nr, 2, Sampling::latin_hypercube, seed),
                     make_eval_grid(s));
}

}  // namespace

// ------------------------------------------------------------ problem

TEST(PinnProblem, MatchesPerPointPathAndFiniteDifferences) {
  for (const char* pde : {"burgers_toy_nonlinear", "convection", "wave", "burgers"}) {
    const ResidualSpec s = make_spec(pde);
    const CollocationSet d = sample(s, 16, 12, Sampling::uniform_grid, 4);
    const MlpParams net = tk_test::random_net({s.d_in, 9, 7, 1}, 2, 0.7);
    const PinnProblem prob(net, s, d);
    const Eigen::VectorXd rho = prob.residuals(net.theta);
    EXPECT_LE(rel_err(rho, residual_vector(net, s, d)), 1e-12) << pde;
    EXPECT_NEAR(prob.loss(net.theta), loss(net, s, d).total, 1e-12 * prob.loss(net.theta));

    const Linearization lin = prob.linearize(net.theta);
    const Eigen::MatrixXd ref = tk_test::fd_jacobian([&](const Eigen::VectorXd& th) { return prob.residuals(th); }, net.theta);
    EXPECT_LE(rel_err(lin.J, ref), 1e-6) << pde;
    const Eigen::VectorXd g = prob.gradient(net.theta);
    EXPECT_LE(rel_err(g, Eigen::VectorXd(lin.J.transpose() * lin.rho)), 1e-12) << pde;

    const Eigen::VectorXd v = tk_test::random_vector(net.theta.size(), 3).normalized();
    const double h = 1e-3;
    auto R = [&](double t) { return prob.residuals(net.theta + t * v); };
    const Eigen::VectorXd w_ref = (16.0 * (R(h) + R(-h)) - (R(2 * h) + R(-2 * h)) - 30.0 * R(0)) / (12.0 * h * h);
    EXPECT_LE(rel_err(prob.second_directional(net.theta, v), w_ref), 1e-6) << pde;
  }
}

// ------------------------------------------------------------ gradient descent

TEST(Gd, StationaryAndQuadratic) {
  const LinearLeastSquares quad(Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  EXPECT_TRUE(gd_step(quad, zero, 0.1).isZero(0.0));
  const Eigen::VectorXd th = tk_test::random_vector(4, 1);
  EXPECT_LE(rel_err(gd_step(quad, th, 0.1), Eigen::VectorXd(0.9 * th)), 1e-15);
  EXPECT_THROW(gd_step(quad, th, 0.0), std::invalid_argument);
}

TEST(Gd, WideNetLossIsMonotone) {
  const PinnProblem prob = toy_problem(512, 7);
  Eigen::VectorXd th = prob.net().theta;
  GdOptions opt;
  opt.eta = 1e-3;
  opt.iterations = 500;
  const TrainLog log = gd_train(prob, th, opt);
  ASSERT_EQ(log.records.size(), 500u);
  for (std::size_t k = 1; k < log.records.size(); ++k) {
    EXPECT_LE(log.records[k].loss, log.records[k - 1].loss);
    EXPECT_EQ(log.records[k].iter, log.records[k - 1].iter + 1);
  }
}

// ------------------------------------------------------------ Adam

TEST(Adam, ZeroGradientAndFirstStep) {
  AdamState s;
  const Eigen::VectorXd th = tk_test::random_vector(6, 2);
  EXPECT_TRUE((adam_step(s, th, Eigen::VectorXd::Zero(6)).array() == th.array()).all());
  AdamState s2;
  Eigen::VectorXd g(3);
  g << 5.0, -1e-3, 200.0;
  const Eigen::VectorXd next = adam_step(s2, Eigen::VectorXd::Zero(3), g, 1e-3);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(next[i]), 1e-3, 1e-7);
  Eigen::VectorXd bad = g;
  bad[0] = INFINITY;
  AdamState s3;
  EXPECT_THROW(adam_step(s3, Eigen::VectorXd::Zero(3), bad), std::runtime_error);
}

TEST(Adam, MatchesScalarOracle) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> N(0.0, 1.0);
  const int n = 5;
  Eigen::VectorXd th = tk_test::random_vector(n, 9);
  std::vector<double> x(th.data(), th.data() + n), m(n, 0.0), v(n, 0.0);
  AdamState s;
  const double lr = 3e-3, b1 = 0.85, b2 = 0.99, eps = 1e-7;
  for (int t = 1; t <= 100; ++t) {
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = N(rng);
    th = adam_step(s, th, g, lr, b1, b2, eps);
    for (int i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      x[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
  for (int i = 0; i < n; ++i) EXPECT_NEAR(th[i], x[i], 1e-12);
}

TEST(Adam, RespectsIterationCapAndTarget) {
  const PinnProblem prob = toy_problem(32, 3);
  Eigen::VectorXd th = prob.net().theta;
  AdamOptions opt;
  opt.iterations = 50;
  opt.eval_every = 10;
  const TrainLog log = adam_train(prob, th, opt);
  EXPECT_EQ(log.records.size(), 50u);
  EXPECT_TRUE(std::isfinite(log.records.back().rel_l2));
  EXPECT_TRUE(std::isnan(log.records[0].rel_l2));
  EXPECT_TRUE(std::isnan(log.records[0].lambda));
}

// ------------------------------------------------------------ L-BFGS

TEST(Lbfgs, EmptyHistoryStepsAlongNegativeGradient) {
  LbfgsHistory h;
  const Eigen::VectorXd g = tk_test::random_vector(7, 1);
  EXPECT_TRUE((lbfgs_apply(h, g).array() == g.array()).all());
}

TEST(Lbfgs, TwoLoopEqualsDenseBfgs) {
  const int n = 5;
  const Eigen::MatrixXd M = random_matrix(n, n, 3);
  const Eigen::MatrixXd A = M.transpose() * M + Eigen::MatrixXd::Identity(n, n);
  LbfgsHistory h;
  h.memory = 10;
  for (int k = 0; k < 4; ++k) {
    const Eigen::VectorXd s = tk_test::random_vector(n, 10 + k);
    h.push(s, A * s);
  }
  const double gamma = h.s.back().dot(h.y.back()) / h.y.back().squaredNorm();
  Eigen::MatrixXd H = gamma * Eigen::MatrixXd::Identity(n, n);
  for (std::size_t i = 0; i < h.s.size(); ++i) {
    const double r = 1.0 / h.y[i].dot(h.s[i]);
    const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n) - r * h.y[i] * h.s[i].transpose();
    H = V.transpose() * H * V + r * h.s[i] * h.s[i].transpose();
  }
  const Eigen::VectorXd g = tk_test::random_vector(n, 99);
  EXPECT_LE(rel_err(lbfgs_apply(h, g), Eigen::VectorXd(H * g)), 1e-10);
}

TEST(Lbfgs, QuadraticConvergesWithinDimensionPlusOne) {
  const int n = 8;
  const Eigen::MatrixXd A = random_matrix(12, n, 5);
  const LinearLeastSquares prob(A, tk_test::random_vector(12, 6));
  Eigen::VectorXd th = Eigen::VectorXd::Zero(n);
  LbfgsHistory hist;
  hist.memory = n;
  auto [L, g] = prob.loss_and_gradient(th);
  int it = 0;
  while (g.norm() > 1e-10 && it < n + 1) {
    LbfgsStep st = lbfgs_step(hist, prob, th, L, g);
    ASSERT_FALSE(st.failed);
    th = st.theta;
    L = st.loss;
    g = st.grad;
    ++it;
  }
  EXPECT_LE(g.norm(), 1e-10);
  EXPECT_LE(it, n + 1);
}

TEST(Lbfgs, DescentDirectionAndLog) {
  const PinnProblem prob = toy_problem(16, 4, "burgers_toy_nonlinear");
  Eigen::VectorXd th = prob.net().theta;
  LbfgsOptions opt;
  opt.iterations = 30;
  const double L0 = prob.loss(th);
  const TrainLog log = lbfgs_train(prob, th, opt);
  EXPECT_LT(log.records.back().loss, L0);
  for (std::size_t k = 1; k < log.records.size(); ++k) EXPECT_LE(log.records[k].loss, log.records[k - 1].loss);
}

// ------------------------------------------------------------ Levenberg-Marquardt

TEST(LmStep, ClosedForms) {
  const Eigen::VectorXd rho = tk_test::random_vector(4, 3);
  const LmSolve a = lm_step(Eigen::MatrixXd::Identity(4, 4), rho, 1e-300);
  EXPECT_LE(rel_err(a.x, Eigen::VectorXd(-rho)), 1e-14);
  // Orthonormal columns: J^T J = I.
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(9, 4, 1));
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(9, 4);
  const Eigen::VectorXd r9 = tk_test::random_vector(9, 2);
  const LmSolve b = lm_step(Q, r9, 1.0);
  EXPECT_LE(rel_err(b.x, Eigen::VectorXd(-0.5 * Q.transpose() * r9)), 1e-13);
}

TEST(LmStep, DenseInverseOracleBothRoutes) {
  for (auto [n, p] : {std::pair{30, 12}, std::pair{12, 30}}) {
    const Eigen::MatrixXd J = random_matrix(n, p, 7 + n);
    const Eigen::VectorXd rho = tk_test::random_vector(n, 8);
    const double lambda = 0.3;
    const Eigen::MatrixXd M = J.transpose() * J + lambda * Eigen::MatrixXd::Identity(p, p);
    const Eigen::VectorXd oracle = -M.inverse() * (J.transpose() * rho);
    const LmSolve s = lm_step(J, rho, lambda);
    EXPECT_LE((s.x - oracle).norm(), 1e-9 * oracle.norm()) << n << "x" << p;
    EXPECT_LE(s.residual, 1e-10);
    EXPECT_EQ(s.retries, 0);
  }
}

TEST(LmStep, FactorizationFailureRaisesDamping) {
  // Negative damping larger than the spectrum makes the first factorizations fail.
  const Eigen::MatrixXd J = Eigen::MatrixXd::Identity(3, 3);
  DampedSystem sys(J);
  const LmSolve s = sys.solve(-5.0, Eigen::VectorXd::Ones(3));
  EXPECT_FALSE(s.ok);
  EXPECT_EQ(s.retries, 5);
  const LmSolve t = sys.solve(-0.5, Eigen::VectorXd::Ones(3));
  EXPECT_TRUE(t.ok);
  EXPECT_EQ(t.retries, 0);
}

TEST(LmCriterion, ScalarOracleAndSigns) {
  // rho(theta) = 3 theta - 2 at theta = 1: rho = 1, J = 3, grad = 3.
  const double lambda = 0.5;
  Eigen::VectorXd v(1), g(1);
  g << 3.0;
  v << -3.0 / (9.0 + lambda);
  const double rho_new = 1.0 + 3.0 * v[0];
  const double num = 1.0 - rho_new * rho_new;
  const double den = v[0] * (lambda * v[0] - 3.0);
  EXPECT_NEAR(lm_criterion(1.0, rho_new * rho_new, v, lambda, g), num / den, 1e-12);
  // On a linear model the ratio of actual to predicted decrease is 1.
  EXPECT_NEAR(lm_criterion(1.0, rho_new * rho_new, v, lambda, g), 1.0, 1e-12);
  EXPECT_EQ(lm_criterion(2.0, 2.0, v, lambda, g), 0.0);
  EXPECT_EQ(lm_criterion(2.0, NAN, v, lambda, g), -INFINITY);
  EXPECT_EQ(lm_criterion(2.0, 1.0, Eigen::VectorXd::Zero(1), lambda, g), -INFINITY);
  // Exact Newton step with lambda = 0: positive.
  Eigen::VectorXd newton(1);
  newton << -1.0 / 3.0;
  EXPECT_GT(lm_criterion(1.0, 0.0, newton, 0.0, g), 0.0);
}

TEST(Geodesic, ZeroCurvatureAndScalarSquare) {
  const Eigen::MatrixXd J = random_matrix(6, 3, 2);
  DampedSystem sys(J);
  EXPECT_TRUE(geodesic_acceleration(sys, 0.1, Eigen::VectorXd::Zero(6)).x.isZero(0.0));
  // rho(theta) = theta^2: J = 2 theta, w = 2 v^2.
  const double theta = 0.7, v = -0.3, lambda = 0.2;
  Eigen::MatrixXd Js(1, 1);
  Js << 2.0 * theta;
  DampedSystem s1(Js);
  Eigen::VectorXd w(1);
  w << 2.0 * v * v;
  const double hand = -(1.0 / (4.0 * theta * theta + lambda)) * 2.0 * theta * 2.0 * v * v;
  EXPECT_NEAR(geodesic_acceleration(s1, lambda, w).x[0], hand, 1e-12);
}

TEST(LmTrain, LinearLeastSquaresConvergesFast) {
  const Eigen::MatrixXd A = random_matrix(20, 6, 11);
  const LinearLeastSquares prob(A, tk_test::random_vector(20, 12));
  Eigen::VectorXd th = tk_test::random_vector(6, 13);
  LMState st;
  LmOptions opt;
  opt.iterations = 20;
  opt.grad_tol = 1e-10;
  const TrainLog log = lm_train(prob, th, st, opt);
  EXPECT_EQ(log.status, "converged");
  EXPECT_LE(prob.loss_and_gradient(th).second.norm(), 1e-10);
  EXPECT_LE(log.records.size(), 20u);
  // Same fixed point as the Gauss-Newton solution.
  const Eigen::VectorXd gn = A.colPivHouseholderQr().solve(tk_test::random_vector(20, 12));
  EXPECT_LE((th - gn).norm(), 1e-6);
  for (const auto& r : log.records) EXPECT_FALSE(r.accel_applied);
}

TEST(LmTrain, LambdaTrajectoryAndMonotoneLoss) {
  const Eigen::MatrixXd A = 0.5 * random_matrix(15, 4, 21);
  Eigen::VectorXd truth(4);
  truth << 0.3, -0.2, 0.1, 0.4;
  const ExpFit prob(A, (A * truth).array().exp().matrix() + 0.01 * tk_test::random_vector(15, 5));
  Eigen::VectorXd th = Eigen::VectorXd::Zero(4);
  LMState st;
  st.lambda = 10.0;
  LmOptions opt;
  opt.iterations = 40;
  double prev = 0.5 * prob.residuals(th).squaredNorm();
  const TrainLog log = lm_train(prob, th, st, opt);
  ASSERT_FALSE(log.records.empty());
  for (std::size_t k = 0; k < log.records.size(); ++k) {
    const TrainRecord& r = log.records[k];
    EXPECT_LE(r.loss, prev);
    prev = r.loss;
    double lam = r.lambda_start;
    for (int d = 0; d < r.doublings; ++d) lam = std::min(2.0 * lam, st.Lambda_max);
    if (r.retries == 0) EXPECT_EQ(r.lambda, lam);
    EXPECT_EQ(r.lambda_next, std::max(r.lambda / 3.0, 1.0 / st.Lambda_max));
    if (k > 0) EXPECT_EQ(r.lambda_start, log.records[k - 1].lambda_next);
    EXPECT_GE(r.criterion, st.tol);
    EXPECT_LE(r.solve_residual, 1e-10);
    EXPECT_GE(r.lambda, 1.0 / st.Lambda_max);
    EXPECT_LE(r.lambda, st.Lambda_max);
  }
}

TEST(LmTrain, TolZeroAcceptsNonIncreasingSteps) {
  const PinnProblem prob = toy_problem(12, 2, "burgers_toy_nonlinear", 10);
  Eigen::VectorXd th = prob.net().theta;
  LMState st;
  st.tol = 0.0;
  LmOptions opt;
  opt.iterations = 15;
  double prev = prob.loss(th);
  const TrainLog log = lm_train(prob, th, st, opt);
  for (const auto& r : log.records) {
    EXPECT_GE(r.criterion, 0.0);
    EXPECT_LE(r.loss, prev);
    prev = r.loss;
  }
}

TEST(LmTrain, PinnToyReachesSmallError) {
  const PinnProblem prob = toy_problem(20, 5, "poisson_toy_linear", 30);
  Eigen::VectorXd th = prob.net().theta;
  LMState st;
  LmOptions opt;
  opt.iterations = 200;
  const TrainLog log = lm_train(prob, th, st, opt);
  EXPECT_LE(prob.relative_l2(th), 1e-3) << log.status;
}

TEST(LmState, Validation) {
  LMState s;
  s.tol = 0.25;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = LMState{};
  s.alpha = 1.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = LMState{};
  s.lambda = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_NO_THROW(LMState{}.validate());
}

// ------------------------------------------------------------ Gauss-Newton flow

TEST(GaussNewtonFlow, FullRankOutputsDecayGeometrically) {
  const PinnProblem prob = toy_problem(64, 9, "burgers_toy_nonlinear", 4);
  Eigen::VectorXd th = prob.net().theta;
  const double dt = 1e-3;
  const auto steps = gauss_newton_flow(prob, th, dt, 5);
  for (const auto& s : steps) {
    EXPECT_EQ(s.spectrum.rank, prob.rows());
    EXPECT_LE(rel_err(s.predicted, Eigen::VectorXd(-dt * s.outputs)), 1e-12);
    EXPECT_TRUE(((s.spectrum.values.array() == 0.0) || (s.spectrum.values.array() == 1.0)).all());
    EXPECT_LE((s.spectrum.realized.array() - s.spectrum.values.array()).abs().maxCoeff(), 1e-3);
  }
  // linearization defect is second order in the step
  auto defect = [&](double h) {
    Eigen::VectorXd t0 = prob.net().theta;
    const auto st = gauss_newton_flow(prob, t0, h, 1);
    return (st[0].actual - st[0].predicted).norm();
  };
  const double big = defect(1e-3), small = defect(1e-4);
  EXPECT_GT(big, 0.0);
  EXPECT_LE(small, 0.02 * big);
}

TEST(GaussNewtonFlow, UnitStepOnLinearModelIsLeastSquaresProjection) {
  const Eigen::MatrixXd A = random_matrix(10, 4, 3);
  const Eigen::VectorXd b = tk_test::random_vector(10, 4);
  const LinearLeastSquares prob(A, b);
  Eigen::VectorXd th = tk_test::random_vector(4, 5);
  gauss_newton_flow(prob, th, 1.0, 1);
  EXPECT_LE((th - A.colPivHouseholderQr().solve(b)).norm(), 1e-10);
  const LinearLeastSquares big(Eigen::MatrixXd::Zero(201, 2), Eigen::VectorXd::Zero(201));
  EXPECT_THROW(gauss_newton_flow(big, th, 1.0, 1), std::invalid_argument);
}

// ------------------------------------------------------------ curriculum

TEST(Curriculum, StagesWarmStartBitExactly) {
  std::vector<Eigen::VectorXd> entry, exit;
  Eigen::VectorXd th = init_xavier({2, 8, 1}, 3).theta;
  const Eigen::VectorXd start = th;
  auto make = [](double beta) {
    const ResidualSpec s = make_spec("convection", {{"beta", beta}});
    return PinnProblem(init_xavier({2, 8, 1}, 3), s, sample(s, 16, 8, Sampling::latin_hypercube, 1));
  };
  auto run = [&](const PinnProblem& p, Eigen::VectorXd& theta) {
    entry.push_back(theta);
    LMState st;
    LmOptions opt;
    opt.iterations = 3;
    TrainLog l = lm_train(p, theta, st, opt);
    exit.push_back(theta);
    return l;
  };
  const TrainLog log = curriculum({1.0, 2.0, 3.0}, th, make, run);
  ASSERT_EQ(entry.size(), 3u);
  EXPECT_TRUE((entry[0].array() == start.array()).all());
  for (int s = 1; s < 3; ++s) EXPECT_TRUE((entry[s].array() == exit[s - 1].array()).all());
  EXPECT_EQ(log.stage_starts.size(), 3u);
  EXPECT_EQ(log.stage_values[2], 3.0);
  for (std::size_t k = 1; k < log.records.size(); ++k) EXPECT_GT(log.records[k].iter, log.records[k - 1].iter);
  EXPECT_THROW(curriculum({2.0, 1.0}, th, make, run), std::invalid_argument);
}

TEST(Curriculum, SingleStageEqualsPlainRun) {
  const ResidualSpec s = make_spec("convection", {{"beta", 2.0}});
  const PinnProblem p(init_xavier({2, 8, 1}, 3), s, sample(s, 16, 8, Sampling::latin_hypercube, 1));
  Eigen::VectorXd a = p.net().theta, b = a;
  auto run = [](const PinnProblem& q, Eigen::VectorXd& theta) {
    LMState st;
    LmOptions opt;
    opt.iterations = 4;
    return lm_train(q, theta, st, opt);
  };
  const TrainLog plain = run(p, a);
  const TrainLog cur = curriculum({2.0}, b, [&](double) { return p; }, run);
  EXPECT_TRUE((a.array() == b.array()).all());
  ASSERT_EQ(plain.records.size(), cur.records.size());
  for (std::size_t k = 0; k < plain.records.size(); ++k) EXPECT_EQ(plain.records[k].loss, cur.records[k].loss);
}
