#pragma once

// Finite-difference oracles and random fixtures shared by the unit tests.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tangent_kit/net.hpp"

namespace tk_test {

using tangent_kit::MlpParams;

inline constexpr double kStep1 = 1e-5;  // first-order central differences
inline constexpr double kStep2 = 1e-4;  // second-order central differences

inline double central1(const std::function<double(double)>& f, double x, double h = kStep1) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double central2(const std::function<double(double)>& f, double x, double h = kStep2) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

/// Second difference with one Richardson step; accurate to ~1e-10 for O(1) data.
inline double central2_rich(const std::function<double(double)>& f, double x, double h = 1e-3) {
  return (4.0 * central2(f, x, h) - central2(f, x, 2.0 * h)) / 3.0;
}

/// d^2 f / dx dy at (x, y).
inline double central_mixed(const std::function<double(double, double)>& f, double x, double y, double h = kStep2) {
  return (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
}

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = kStep1) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = kStep1) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const Eigen::VectorXd fp = f(xp);
    xp[i] = x[i] - h;
    const Eigen::VectorXd fm = f(xp);
    xp[i] = x[i];
    J.col(i) = (fp - fm) / (2.0 * h);
  }
  return J;
}

/// Max-norm error relative to the max-norm of the reference.
inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& ref) {
  const double scale = ref.cwiseAbs().maxCoeff();
  const double err = (got - ref).cwiseAbs().maxCoeff();
  return scale > 0.0 ? err / scale : err;
}

inline double rel_err(double got, double ref) {
  const double scale = std::abs(ref);
  return scale > 0.0 ? std::abs(got - ref) / scale : std::abs(got - ref);
}

/// Net with i.i.d. N(0, sd^2) parameters (biases included) and the given scaling.
inline MlpParams random_net(const std::vector<int>& widths, std::uint64_t seed, double sd = 0.7,
                            tangent_kit::Scaling scaling = tangent_kit::Scaling::standard) {
  MlpParams p = tangent_kit::make_params(widths, scaling);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  for (Eigen::Index k = 0; k < p.theta.size(); ++k) p.theta[k] = n(rng);
  return p;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

}  // namespace tk_test
