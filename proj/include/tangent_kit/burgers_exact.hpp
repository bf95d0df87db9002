#pragma once

// Reference solution of u_t + u u_x = nu u_xx on [-1, 1] with u(x, 0) =
// -sin(pi x) and u(+-1, t) = 0, via the Cole-Hopf transform
//
//   u = -2 nu phi_x / phi,   phi(x, t) = int f(x - eta) G(eta, t) d eta,
//   f(y) = exp(-cos(pi y) / (2 pi nu)),  G = heat kernel.
//
// The integrals are evaluated by the trapezoid rule in eta = sqrt(4 nu t) z
// with log-sum-exp weights, since f spans e^(1/(pi nu)) in magnitude. All jet
// components follow from the first three moments of f^(k)/f under the same
// weights, using phi_t = nu phi_xx.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "tangent_kit/jets.hpp"

namespace tangent_kit {

class BurgersExact {
 public:
  explicit BurgersExact(double nu, double z_max = 15.0, int n_nodes = 3001) : nu_(nu), c_(1.0 / (2.0 * std::numbers::pi * nu)) {
    if (!(nu > 0.0)) throw std::invalid_argument("burgers: nu must be positive");
    z_.resize(static_cast<std::size_t>(n_nodes));
    logw_.resize(static_cast<std::size_t>(n_nodes));
    const double h = 2.0 * z_max / (n_nodes - 1);
    for (int j = 0; j < n_nodes; ++j) {
      const double z = -z_max + h * j;
      const double w = (j == 0 || j == n_nodes - 1) ? 0.5 * h : h;
      z_[static_cast<std::size_t>(j)] = z;
      logw_[static_cast<std::size_t>(j)] = std::log(w) - z * z;
    }
  }

  double nu() const { return nu_; }

  /// u, u_x, u_t, u_xx (u_xt and u_tt are left zero). Point is (x, t).
  SpatialJet<double> jet(std::span<const double> point) const {
    const double x = point[0];
    const double t = point[1];
    double r1 = 0.0, r2 = 0.0, r3 = 0.0;
    if (t <= 0.0) {
      moments_at(x, r1, r2, r3);
    } else {
      const double s = std::sqrt(4.0 * nu_ * t);
      const double pi = std::numbers::pi;
      double lmax = -std::numeric_limits<double>::infinity();
      std::vector<double> lw(z_.size());
      for (std::size_t j = 0; j < z_.size(); ++j) {
        lw[j] = logw_[j] - c_ * std::cos(pi * (x - s * z_[j]));
        lmax = std::max(lmax, lw[j]);
      }
      double m0 = 0.0, m1 = 0.0, m2 = 0.0, m3 = 0.0;
      for (std::size_t j = 0; j < z_.size(); ++j) {
        const double e = std::exp(lw[j] - lmax);
        if (e == 0.0) continue;
        double g1, g2, g3;
        ratios(x - s * z_[j], g1, g2, g3);
        m0 += e;
        m1 += e * g1;
        m2 += e * g2;
        m3 += e * g3;
      }
      r1 = m1 / m0;
      r2 = m2 / m0;
      r3 = m3 / m0;
    }
    SpatialJet<double> out;
    out.dim = 2;
    out.value = -2.0 * nu_ * r1;
    out.grad[0] = -2.0 * nu_ * (r2 - r1 * r1);
    out.grad[1] = -2.0 * nu_ * nu_ * (r3 - r1 * r2);
    out.hess[0] = -2.0 * nu_ * (r3 - 3.0 * r2 * r1 + 2.0 * r1 * r1 * r1);
    return out;
  }

  double value(std::span<const double> point) const { return jet(point).value; }

 private:
  // f'/f, f''/f, f'''/f at y.
  void ratios(double y, double& g1, double& g2, double& g3) const {
    const double pi = std::numbers::pi;
    const double sn = std::sin(pi * y);
    const double cs = std::cos(pi * y);
    const double a = c_ * pi * sn;
    const double b = c_ * pi * pi * cs;
    const double db = -c_ * pi * pi * pi * sn;
    g1 = a;
    g2 = a * a + b;
    g3 = a * a * a + 3.0 * a * b + db;
  }

  void moments_at(double x, double& r1, double& r2, double& r3) const { ratios(x, r1, r2, r3); }

  double nu_;
  double c_;
  std::vector<double> z_;
  std::vector<double> logw_;
};

}  // namespace tangent_kit
